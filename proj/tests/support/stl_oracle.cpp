#include "support/stl_oracle.hpp"

#include <algorithm>

namespace towerfleet::testing {

using stl::Formula;
using stl::Op;

double brute_force_robustness(const Formula& f, const stl::Trace& trace, std::size_t k) {
  switch (f.op()) {
    case Op::Predicate: {
      double acc = 0.0;
      for (const auto& t : f.pred().terms) acc += t.coeff * trace.at(k, t.index);
      return acc - f.pred().offset;
    }
    case Op::And: {
      double r = brute_force_robustness(f.children()[0], trace, k);
      for (std::size_t i = 1; i < f.children().size(); ++i) r = std::min(r, brute_force_robustness(f.children()[i], trace, k));
      return r;
    }
    case Op::Or: {
      double r = brute_force_robustness(f.children()[0], trace, k);
      for (std::size_t i = 1; i < f.children().size(); ++i) r = std::max(r, brute_force_robustness(f.children()[i], trace, k));
      return r;
    }
    case Op::Globally: {
      double r = brute_force_robustness(f.children()[0], trace, k + f.lo());
      for (int j = f.lo() + 1; j <= f.hi(); ++j) r = std::min(r, brute_force_robustness(f.children()[0], trace, k + j));
      return r;
    }
    case Op::Eventually: {
      double r = brute_force_robustness(f.children()[0], trace, k + f.lo());
      for (int j = f.lo() + 1; j <= f.hi(); ++j) r = std::max(r, brute_force_robustness(f.children()[0], trace, k + j));
      return r;
    }
  }
  return 0.0;
}

bool boolean_satisfaction(const Formula& f, const stl::Trace& trace, std::size_t k) {
  switch (f.op()) {
    case Op::Predicate: {
      double lhs = 0.0;
      for (const auto& t : f.pred().terms) lhs += t.coeff * trace.at(k, t.index);
      return lhs > f.pred().offset;
    }
    case Op::And:
      for (const auto& c : f.children()) {
        if (!boolean_satisfaction(c, trace, k)) return false;
      }
      return true;
    case Op::Or:
      for (const auto& c : f.children()) {
        if (boolean_satisfaction(c, trace, k)) return true;
      }
      return false;
    case Op::Globally:
      for (int j = f.lo(); j <= f.hi(); ++j) {
        if (!boolean_satisfaction(f.children()[0], trace, k + j)) return false;
      }
      return true;
    case Op::Eventually:
      for (int j = f.lo(); j <= f.hi(); ++j) {
        if (boolean_satisfaction(f.children()[0], trace, k + j)) return true;
      }
      return false;
  }
  return false;
}

namespace {

Formula random_formula(std::mt19937_64& rng, int depth, std::size_t dimension) {
  std::uniform_real_distribution<double> coeff(-2.0, 2.0);
  std::uniform_int_distribution<int> pick(0, 4);
  const int choice = depth <= 0 ? 0 : pick(rng);
  if (choice == 0) {
    stl::LinearPredicate p;
    std::uniform_int_distribution<std::size_t> idx(0, dimension - 1);
    std::uniform_int_distribution<int> nterms(1, 2);
    const int n = nterms(rng);
    for (int i = 0; i < n; ++i) {
      double c = coeff(rng);
      if (std::abs(c) < 0.1) c = 1.0;
      p.terms.push_back(stl::Term{idx(rng), c});
    }
    p.offset = coeff(rng);
    return Formula::predicate(std::move(p));
  }
  if (choice == 1 || choice == 2) {
    std::uniform_int_distribution<int> arity(1, 4);
    std::vector<Formula> kids;
    const int n = arity(rng);
    for (int i = 0; i < n; ++i) kids.push_back(random_formula(rng, depth - 1, dimension));
    return choice == 1 ? Formula::conjunction(std::move(kids)) : Formula::disjunction(std::move(kids));
  }
  std::uniform_int_distribution<int> lo_d(0, 3);
  std::uniform_int_distribution<int> width(0, 5);
  const int lo = lo_d(rng);
  const int hi = lo + width(rng);
  Formula child = random_formula(rng, depth - 1, dimension);
  return choice == 3 ? Formula::always(lo, hi, std::move(child)) : Formula::eventually(lo, hi, std::move(child));
}

}  // namespace

RandomInstance random_instance(std::mt19937_64& rng, int max_depth, std::size_t dimension) {
  std::uniform_int_distribution<int> depth_d(1, max_depth);
  Formula f = random_formula(rng, depth_d(rng), dimension);
  std::uniform_int_distribution<int> extra(0, 3);
  const std::size_t samples = static_cast<std::size_t>(f.horizon() + 1 + extra(rng));
  std::normal_distribution<double> value(0.0, 1.5);
  std::vector<double> data(samples * dimension);
  for (auto& v : data) v = value(rng);
  return RandomInstance{std::move(f), stl::Trace(0.1, dimension, std::move(data))};
}

}  // namespace towerfleet::testing
