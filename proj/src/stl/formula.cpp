#include "towerfleet/stl/formula.hpp"

#include <algorithm>

namespace towerfleet::stl {

double LinearPredicate::evaluate(std::span<const double> sample) const {
  double acc = 0.0;
  for (const auto& t : terms) acc += t.coeff * sample[t.index];
  return acc - offset;
}

LinearPredicate LinearPredicate::negated() const {
  LinearPredicate out = *this;
  for (auto& t : out.terms) t.coeff = -t.coeff;
  out.offset = -offset;
  return out;
}

std::size_t LinearPredicate::max_index() const {
  std::size_t m = 0;
  for (const auto& t : terms) m = std::max(m, t.index);
  return m;
}

LinearPredicate greater_equal(std::size_t index, double bound) { return LinearPredicate{{Term{index, 1.0}}, bound}; }

LinearPredicate less_equal(std::size_t index, double bound) { return LinearPredicate{{Term{index, -1.0}}, -bound}; }

Formula Formula::predicate(LinearPredicate p, std::string label) {
  const bool nonzero = std::any_of(p.terms.begin(), p.terms.end(), [](const Term& t) { return t.coeff != 0.0; });
  if (!nonzero) throw std::invalid_argument("linear predicate needs a non-zero coefficient");
  Formula f;
  f.op_ = Op::Predicate;
  f.pred_ = std::move(p);
  f.label_ = std::move(label);
  return f;
}

Formula Formula::conjunction(std::vector<Formula> children, std::string label) {
  if (children.empty()) throw std::invalid_argument("conjunction needs at least one operand");
  Formula f;
  f.op_ = Op::And;
  f.children_ = std::move(children);
  f.label_ = std::move(label);
  return f;
}

Formula Formula::disjunction(std::vector<Formula> children, std::string label) {
  if (children.empty()) throw std::invalid_argument("disjunction needs at least one operand");
  Formula f;
  f.op_ = Op::Or;
  f.children_ = std::move(children);
  f.label_ = std::move(label);
  return f;
}

Formula Formula::always(int lo, int hi, Formula child, std::string label) {
  if (lo < 0 || lo > hi) throw std::invalid_argument("temporal window needs 0 <= lo <= hi");
  Formula f;
  f.op_ = Op::Globally;
  f.lo_ = lo;
  f.hi_ = hi;
  f.children_.push_back(std::move(child));
  f.label_ = std::move(label);
  return f;
}

Formula Formula::eventually(int lo, int hi, Formula child, std::string label) {
  if (lo < 0 || lo > hi) throw std::invalid_argument("temporal window needs 0 <= lo <= hi");
  Formula f;
  f.op_ = Op::Eventually;
  f.lo_ = lo;
  f.hi_ = hi;
  f.children_.push_back(std::move(child));
  f.label_ = std::move(label);
  return f;
}

int Formula::horizon() const {
  int h = 0;
  for (const auto& c : children_) h = std::max(h, c.horizon());
  if (op_ == Op::Globally || op_ == Op::Eventually) h += hi_;
  return h;
}

int Formula::operator_depth() const {
  if (op_ == Op::Predicate) return 0;
  int d = 0;
  for (const auto& c : children_) d = std::max(d, c.operator_depth());
  return d + 1;
}

std::size_t Formula::max_operands() const {
  std::size_t m = 1;
  switch (op_) {
    case Op::Predicate: break;
    case Op::And:
    case Op::Or: m = children_.size(); break;
    case Op::Globally:
    case Op::Eventually: m = static_cast<std::size_t>(hi_ - lo_ + 1); break;
  }
  for (const auto& c : children_) m = std::max(m, c.max_operands());
  return m;
}

std::size_t Formula::node_count() const {
  std::size_t n = 1;
  for (const auto& c : children_) n += c.node_count();
  return n;
}

std::size_t Formula::signal_dimension() const {
  std::size_t d = op_ == Op::Predicate ? pred_.max_index() + 1 : 0;
  for (const auto& c : children_) d = std::max(d, c.signal_dimension());
  return d;
}

Trace::Trace(double ts, std::size_t dimension) : ts_(ts), dimension_(dimension) {
  if (!(ts > 0.0)) throw std::invalid_argument("trace sampling period must be positive");
  if (dimension == 0) throw std::invalid_argument("trace dimension must be positive");
}

Trace::Trace(double ts, std::size_t dimension, std::vector<double> data) : Trace(ts, dimension) {
  if (data.size() % dimension != 0) throw std::invalid_argument("trace data is not a whole number of samples");
  data_ = std::move(data);
}

void Trace::push_back(std::span<const double> sample) {
  if (sample.size() != dimension_) throw std::invalid_argument("sample dimension mismatch");
  data_.insert(data_.end(), sample.begin(), sample.end());
}

std::string describe(const Formula& f) {
  if (!f.label().empty()) return f.label();
  switch (f.op()) {
    case Op::Predicate: return "predicate";
    case Op::And: return "and";
    case Op::Or: return "or";
    case Op::Globally: return "G[" + std::to_string(f.lo()) + "," + std::to_string(f.hi()) + "]";
    case Op::Eventually: return "F[" + std::to_string(f.lo()) + "," + std::to_string(f.hi()) + "]";
  }
  return "node";
}

}  // namespace towerfleet::stl
