#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace jumpstop {

/// Function family used to estimate conditional expectations given X_k.
struct RegressionBasis {
  enum class Kind { global_polynomial, piecewise_linear };

  Kind kind = Kind::piecewise_linear;
  /// Polynomial degree, or number of bins for the piecewise-linear family.
  int size = 20;

  static RegressionBasis polynomial(int degree) {
    return {Kind::global_polynomial, degree};
  }
  static RegressionBasis piecewise_linear(int n_bins) {
    return {Kind::piecewise_linear, n_bins};
  }
};

/// Least-squares projection onto a basis of functions of the state.
///
/// The piecewise-linear family uses hat functions on equal bins spanning the
/// empirical 1st-99th percentile range; states outside it are handled by
/// extending the end segments linearly. Hat functions without any data
/// support are dropped. A degenerate state sample (all states equal) falls
/// back to the constant basis, i.e. the sample mean.
class ConditionalExpectation {
 public:
  /// `step` only labels a RankDeficiencyError.
  ConditionalExpectation(const RegressionBasis& basis, std::span<const double> states,
                         std::size_t step);

  /// Fitted values of the projection of `response`, one per state.
  std::vector<double> project(std::span<const double> response) const;

  std::size_t n_functions() const noexcept {
    return static_cast<std::size_t>(n_active_);
  }
  bool is_constant() const noexcept { return layout_ == Layout::constant; }

 private:
  enum class Layout { constant, hat, dense };

  Layout layout_ = Layout::constant;
  std::size_t n_rows_ = 0;
  std::size_t n_full_ = 1;
  // hat layout: row p touches columns seg_[p] and seg_[p]+1 with weights
  // (1 - w_[p], w_[p]).
  std::vector<int> seg_;
  std::vector<double> w_;
  // dense layout: row-major n_rows x n_full design matrix.
  std::vector<double> design_;
  std::vector<int> column_of_;  // full index -> reduced column, or -1
  Eigen::Index n_active_ = 0;
  Eigen::LDLT<Eigen::MatrixXd> gram_;
};

}  // namespace jumpstop
