#include <cmath>
#include <random>

#include "doctest.h"
#include "support/stl_oracle.hpp"
#include "towerfleet/stl/formula.hpp"
#include "towerfleet/stl/robustness.hpp"
#include "towerfleet/stl/text.hpp"

using namespace towerfleet::stl;
using towerfleet::testing::boolean_satisfaction;
using towerfleet::testing::brute_force_robustness;
using towerfleet::testing::random_instance;

namespace {

Trace scalar_trace(std::vector<double> xs) { return Trace(0.1, 1, std::move(xs)); }

double smoothing_bound(const Formula& f, double kappa) {
  return f.operator_depth() * std::log(static_cast<double>(f.max_operands())) / kappa;
}

bool is_min_type(Op op) { return op == Op::And || op == Op::Globally; }

/// True when every operator node is min-type, or every one is max-type.
bool homogeneous(const Formula& f) {
  int mins = 0, maxes = 0;
  auto walk = [&](auto&& self, const Formula& g) -> void {
    if (g.op() == Op::Predicate) return;
    (is_min_type(g.op()) ? mins : maxes)++;
    for (const auto& c : g.children()) self(self, c);
  };
  walk(walk, f);
  return mins == 0 || maxes == 0;
}

/// Randomly rescales a trace until no node ties exactly at zero at the root.
void avoid_zero_tie(towerfleet::testing::RandomInstance& inst, std::mt19937_64& rng) {
  std::normal_distribution<double> jitter(0.0, 1e-6);
  while (std::abs(brute_force_robustness(inst.formula, inst.trace, 0)) < 1e-12) {
    for (auto& v : inst.trace.data()) v += jitter(rng);
  }
}

}  // namespace

TEST_CASE("exact robustness on small traces") {
  const auto x_ge_2 = Formula::predicate(greater_equal(0, 2.0));
  CHECK(robustness(x_ge_2, scalar_trace({5.0}), 0) == 3.0);

  const auto g = Formula::always(0, 2, Formula::predicate(greater_equal(0, 0.0)));
  CHECK(robustness(g, scalar_trace({1.0, 2.0, -1.0}), 0) == -1.0);

  const auto fg = Formula::conjunction({Formula::eventually(0, 2, Formula::predicate(greater_equal(0, 0.0))),
                                        Formula::always(0, 2, Formula::predicate(less_equal(0, 3.0)))});
  const auto tr = scalar_trace({-1.0, 4.0, 2.0});
  CHECK(brute_force_robustness(fg, tr, 0) == -1.0);
  CHECK(robustness(fg, tr, 0) == -1.0);
}

TEST_CASE("window outside the trace names the node") {
  const auto g = Formula::always(0, 5, Formula::predicate(greater_equal(0, 0.0)), "hold");
  try {
    robustness(g, scalar_trace({1.0, 2.0}), 0);
    FAIL("expected EvaluationError");
  } catch (const EvaluationError& e) {
    CHECK(e.node() == "hold");
  }
  const auto p = Formula::predicate(greater_equal(3, 0.0));
  CHECK_THROWS_AS(robustness(p, scalar_trace({1.0}), 0), EvaluationError);
}

TEST_CASE("malformed formulas are rejected") {
  CHECK_THROWS_AS(Formula::conjunction({}), std::invalid_argument);
  CHECK_THROWS_AS(Formula::always(3, 1, Formula::predicate(greater_equal(0, 0.0))), std::invalid_argument);
  CHECK_THROWS_AS(Formula::predicate(LinearPredicate{}), std::invalid_argument);
}

TEST_CASE("structural metrics") {
  const auto f = Formula::conjunction({Formula::eventually(2, 6, Formula::predicate(greater_equal(0, 0.0))),
                                       Formula::predicate(greater_equal(1, 0.0)),
                                       Formula::predicate(greater_equal(2, 0.0))});
  CHECK(f.horizon() == 6);
  CHECK(f.operator_depth() == 2);
  CHECK(f.max_operands() == 5);
  CHECK(f.signal_dimension() == 3);
  CHECK(f.node_count() == 5);
}

TEST_CASE("robustness_signal matches pointwise evaluation") {
  std::mt19937_64 rng(7);
  for (int n = 0; n < 50; ++n) {
    auto inst = random_instance(rng, 3, 3);
    const std::size_t last = inst.trace.size() - 1 - static_cast<std::size_t>(inst.formula.horizon());
    const auto sig = robustness_signal(inst.formula, inst.trace, 0, last);
    for (std::size_t k = 0; k <= last; ++k) CHECK(sig[k] == brute_force_robustness(inst.formula, inst.trace, k));
  }
}

TEST_CASE("exact robustness agrees with the brute-force evaluator") {
  std::mt19937_64 rng(11);
  for (int n = 0; n < 500; ++n) {
    auto inst = random_instance(rng, 4, 3);
    CHECK(robustness(inst.formula, inst.trace, 0) == brute_force_robustness(inst.formula, inst.trace, 0));
  }
}

TEST_CASE("sign soundness against the Boolean evaluator") {
  std::mt19937_64 rng(2024);
  int disagreements = 0;
  for (int n = 0; n < 1000; ++n) {
    auto inst = random_instance(rng, 3, 3);
    avoid_zero_tie(inst, rng);
    const double rho = robustness(inst.formula, inst.trace, 0);
    if ((rho > 0.0) != boolean_satisfaction(inst.formula, inst.trace, 0)) ++disagreements;
  }
  CHECK(disagreements == 0);
}

TEST_CASE("smooth semantics") {
  SUBCASE("single predicate is exact") {
    const auto p = Formula::predicate(greater_equal(0, 2.0));
    CHECK(smooth_robustness(p, scalar_trace({5.0}), 0, 3.0) == 3.0);
  }
  SUBCASE("two-element soft max") {
    const std::vector<double> v{0.0, 1.0};
    CHECK(soft_max(v, 1.0) == doctest::Approx(std::log(1.0 + std::exp(1.0))).epsilon(1e-14));
    CHECK(soft_max(v, 1.0) == doctest::Approx(1.31326169).epsilon(1e-8));
    CHECK(soft_min(v, 1.0) == doctest::Approx(-std::log(1.0 + std::exp(-1.0))).epsilon(1e-14));
  }
  SUBCASE("non-positive kappa is a parameter error") {
    const auto p = Formula::predicate(greater_equal(0, 2.0));
    CHECK_THROWS_AS(smooth_robustness(p, scalar_trace({5.0}), 0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(smooth_robustness_gradient(p, scalar_trace({5.0}), 0, -1.0), std::invalid_argument);
  }
  SUBCASE("large magnitudes do not overflow") {
    const std::vector<double> v{1e6, -1e6, 3.0};
    CHECK(std::isfinite(soft_max(v, 1000.0)));
    CHECK(std::isfinite(soft_min(v, 1000.0)));
  }
}

TEST_CASE("smoothing error bound") {
  std::mt19937_64 rng(99);
  for (double kappa : {1.0, 10.0, 1000.0}) {
    for (int n = 0; n < 300; ++n) {
      auto inst = random_instance(rng, 3, 3);
      const double rho = robustness(inst.formula, inst.trace, 0);
      const double smooth = smooth_robustness(inst.formula, inst.trace, 0, kappa);
      CHECK(std::abs(smooth - rho) <= smoothing_bound(inst.formula, kappa) + 1e-12);
    }
  }
}

TEST_CASE("per-node smoothing error is one-sided") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> value(0.0, 2.0);
  for (int n = 0; n < 200; ++n) {
    std::vector<double> v(1 + n % 7);
    for (auto& x : v) x = value(rng);
    const double kappa = 0.5 + n % 20;
    const double mx = *std::max_element(v.begin(), v.end());
    const double mn = *std::min_element(v.begin(), v.end());
    const double bound = std::log(static_cast<double>(v.size())) / kappa + 1e-12;
    CHECK(soft_max(v, kappa) - mx >= -1e-12);
    CHECK(soft_max(v, kappa) - mx <= bound);
    CHECK(mn - soft_min(v, kappa) >= -1e-12);
    CHECK(mn - soft_min(v, kappa) <= bound);
  }
}

// Counterexamples exist when min-type and max-type nodes are mixed: their one-sided errors
// partially cancel at small kappa. For homogeneous formulas the smoothed value moves
// monotonically toward the exact one.
TEST_CASE("error shrinks as kappa doubles") {
  std::mt19937_64 rng(31);
  int checked = 0;
  while (checked < 200) {
    auto inst = random_instance(rng, 3, 3);
    if (!homogeneous(inst.formula)) continue;
    ++checked;
    const double rho = robustness(inst.formula, inst.trace, 0);
    for (double kappa = 1.0; kappa <= 256.0; kappa *= 2.0) {
      const double e1 = std::abs(smooth_robustness(inst.formula, inst.trace, 0, kappa) - rho);
      const double e2 = std::abs(smooth_robustness(inst.formula, inst.trace, 0, 2.0 * kappa) - rho);
      CHECK(e2 <= e1 + 1e-12);
    }
  }
}

TEST_CASE("gradient of affine and soft-max nodes") {
  const auto p = Formula::predicate(LinearPredicate{{{0, 2.5}}, 1.0});
  const auto g = smooth_robustness_gradient(p, scalar_trace({1.0, 3.0}), 1, 10.0);
  CHECK(g.gradient[0] == 0.0);
  CHECK(g.gradient[1] == 2.5);

  const auto f = Formula::eventually(0, 1, Formula::predicate(greater_equal(0, 0.0)));
  const auto tr = scalar_trace({0.0, 1.0});
  const auto gm = smooth_robustness_gradient(f, tr, 0, 1.0);
  const double w1 = std::exp(1.0) / (1.0 + std::exp(1.0));
  CHECK(gm.gradient[0] == doctest::Approx(1.0 - w1).epsilon(1e-14));
  CHECK(gm.gradient[1] == doctest::Approx(w1).epsilon(1e-14));
}

TEST_CASE("gradient matches central finite differences") {
  std::mt19937_64 rng(1234);
  const double h = 1e-5;
  const double kappa = 10.0;
  for (int n = 0; n < 150; ++n) {
    auto inst = random_instance(rng, 3, 3);
    const auto ad = smooth_robustness_gradient(inst.formula, inst.trace, 0, kappa);
    CHECK(ad.value == doctest::Approx(smooth_robustness(inst.formula, inst.trace, 0, kappa)).epsilon(1e-13));
    double diff2 = 0.0;
    double ref2 = 0.0;
    for (std::size_t i = 0; i < inst.trace.data().size(); ++i) {
      auto plus = inst.trace;
      auto minus = inst.trace;
      plus.data()[i] += h;
      minus.data()[i] -= h;
      const double fd = (smooth_robustness(inst.formula, plus, 0, kappa) -
                         smooth_robustness(inst.formula, minus, 0, kappa)) / (2.0 * h);
      diff2 += (fd - ad.gradient[i]) * (fd - ad.gradient[i]);
      ref2 += fd * fd;
    }
    CHECK(std::sqrt(diff2) <= 1e-4 * std::max(std::sqrt(ref2), 1e-8));
  }
}

TEST_CASE("shifting a predicate offset shifts its robustness") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> value(0.0, 1.0);
  for (int n = 0; n < 100; ++n) {
    LinearPredicate pred{{{0, value(rng)}, {1, 1.0}}, value(rng)};
    const Trace tr(0.1, 2, {value(rng), value(rng)});
    const double c = value(rng);
    LinearPredicate shifted = pred;
    shifted.offset += c;
    const double r0 = robustness(Formula::predicate(pred), tr, 0);
    const double r1 = robustness(Formula::predicate(shifted), tr, 0);
    CHECK(r1 == doctest::Approx(r0 - c).epsilon(1e-15));
  }
}

TEST_CASE("negation flips the sign of a predicate") {
  const auto p = greater_equal(0, 2.0);
  const Trace tr = scalar_trace({3.5});
  CHECK(robustness(Formula::predicate(p.negated()), tr) == -robustness(Formula::predicate(p), tr));
}

TEST_CASE("text form round-trips") {
  std::mt19937_64 rng(3);
  for (int n = 0; n < 200; ++n) {
    auto inst = random_instance(rng, 4, 4);
    if (n % 3 == 0) inst.formula.set_label("node \"" + std::to_string(n) + "\"");
    const auto text = to_text(inst.formula);
    CHECK(parse_formula(text) == inst.formula);
  }
  CHECK(to_text(Formula::always(1, 2, Formula::predicate(greater_equal(0, 2.0)), "hold")) ==
        "(G \"hold\" 1 2 (mu ((0 1)) 2))");
  CHECK_THROWS_AS(parse_formula("(G 1 2)"), FormulaSyntaxError);
  CHECK_THROWS_AS(parse_formula("(xor (mu ((0 1)) 0))"), FormulaSyntaxError);
  CHECK_THROWS_AS(parse_formula("(mu ((0 1)) 0) extra"), FormulaSyntaxError);
}
