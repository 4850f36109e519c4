#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace towerfleet::stl {

/// One non-zero coefficient of a linear predicate.
struct Term {
  std::size_t index = 0;  // signal dimension
  double coeff = 0.0;

  bool operator==(const Term&) const = default;
};

/**
 * @brief Affine atom mu(s) = sum(coeff * s[index]) - offset, satisfied when mu(s) > 0.
 *
 * Coefficients are stored sparsely; the dense vector they stand for must be non-zero.
 */
struct LinearPredicate {
  std::vector<Term> terms;
  double offset = 0.0;

  double evaluate(std::span<const double> sample) const;
  /// Sign flip; the only form of negation in the fragment.
  LinearPredicate negated() const;
  std::size_t max_index() const;

  bool operator==(const LinearPredicate&) const = default;
};

/// s[index] >= bound
LinearPredicate greater_equal(std::size_t index, double bound);
/// s[index] <= bound
LinearPredicate less_equal(std::size_t index, double bound);

enum class Op : std::uint8_t { Predicate, And, Or, Globally, Eventually };

/**
 * @brief STL formula in negation normal form over linear predicates.
 *
 * Temporal windows are inclusive step offsets [lo, hi] on the sampling grid.
 * `label` is free text used to name nodes in diagnostics.
 */
class Formula {
 public:
  static Formula predicate(LinearPredicate p, std::string label = {});
  static Formula conjunction(std::vector<Formula> children, std::string label = {});
  static Formula disjunction(std::vector<Formula> children, std::string label = {});
  static Formula always(int lo, int hi, Formula child, std::string label = {});
  static Formula eventually(int lo, int hi, Formula child, std::string label = {});

  Op op() const { return op_; }
  const LinearPredicate& pred() const { return pred_; }
  const std::vector<Formula>& children() const { return children_; }
  int lo() const { return lo_; }
  int hi() const { return hi_; }
  const std::string& label() const { return label_; }
  void set_label(std::string label) { label_ = std::move(label); }

  /// Number of samples after step k that evaluation at k touches.
  int horizon() const;
  /// Operator nodes on the deepest root-to-leaf path (predicates count zero).
  int operator_depth() const;
  /// Largest operand count of any operator node (children for And/Or, window width for G/F).
  std::size_t max_operands() const;
  std::size_t node_count() const;
  /// Highest signal index referenced, plus one.
  std::size_t signal_dimension() const;

  bool operator==(const Formula&) const = default;

 private:
  Op op_ = Op::Predicate;
  LinearPredicate pred_;
  std::vector<Formula> children_;
  int lo_ = 0;
  int hi_ = 0;
  std::string label_;
};

/// Sampled signal on the grid t = (0, Ts, ..., (n-1) Ts), one stacked vector per sample.
class Trace {
 public:
  Trace(double ts, std::size_t dimension);
  Trace(double ts, std::size_t dimension, std::vector<double> data);

  double ts() const { return ts_; }
  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return dimension_ == 0 ? 0 : data_.size() / dimension_; }
  std::span<const double> sample(std::size_t k) const { return {data_.data() + k * dimension_, dimension_}; }
  std::span<double> sample(std::size_t k) { return {data_.data() + k * dimension_, dimension_}; }
  double& at(std::size_t k, std::size_t i) { return data_[k * dimension_ + i]; }
  double at(std::size_t k, std::size_t i) const { return data_[k * dimension_ + i]; }
  void push_back(std::span<const double> sample);
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

 private:
  double ts_;
  std::size_t dimension_;
  std::vector<double> data_;
};

/// Temporal window or signal index outside the trace; names the offending node.
class EvaluationError : public std::out_of_range {
 public:
  EvaluationError(const std::string& what, std::string node) : std::out_of_range(what), node_(std::move(node)) {}
  const std::string& node() const { return node_; }

 private:
  std::string node_;
};

/// Human-readable node description: the label when present, else the operator name.
std::string describe(const Formula& f);

}  // namespace towerfleet::stl
