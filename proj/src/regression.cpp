#include "jumpstop/regression.hpp"

#include <algorithm>
#include <cmath>

#include "jumpstop/error.hpp"

namespace jumpstop {

namespace {

double quantile(std::vector<double>& scratch, double q) {
  const auto idx = static_cast<std::size_t>(q * static_cast<double>(scratch.size() - 1));
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(idx),
                   scratch.end());
  return scratch[idx];
}

// Legendre polynomials P_0..P_d at u.
void legendre(double u, int degree, double* out) {
  out[0] = 1.0;
  if (degree >= 1) out[1] = u;
  for (int n = 1; n < degree; ++n) {
    out[n + 1] = ((2 * n + 1) * u * out[n] - n * out[n - 1]) / (n + 1);
  }
}

}  // namespace

ConditionalExpectation::ConditionalExpectation(const RegressionBasis& basis,
                                               std::span<const double> states,
                                               std::size_t step)
    : n_rows_(states.size()) {
  if (states.empty()) throw RankDeficiencyError(step);
  if (basis.size < 1) throw ConfigError("regression basis size must be >= 1");

  double lo, hi;
  {
    std::vector<double> scratch(states.begin(), states.end());
    if (basis.kind == RegressionBasis::Kind::piecewise_linear) {
      lo = quantile(scratch, 0.01);
      hi = quantile(scratch, 0.99);
    } else {
      const auto [mn, mx] = std::minmax_element(scratch.begin(), scratch.end());
      lo = *mn;
      hi = *mx;
    }
  }
  const double scale = 1.0 + std::abs(lo) + std::abs(hi);
  if (!(hi - lo > 1e-12 * scale)) {
    layout_ = Layout::constant;
    n_full_ = 1;
  } else if (basis.kind == RegressionBasis::Kind::piecewise_linear) {
    layout_ = Layout::hat;
    n_full_ = static_cast<std::size_t>(basis.size) + 1;
  } else {
    layout_ = Layout::dense;
    n_full_ = static_cast<std::size_t>(basis.size) + 1;
  }

  const auto nf = static_cast<Eigen::Index>(n_full_);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(nf, nf);
  switch (layout_) {
    case Layout::constant:
      gram(0, 0) = static_cast<double>(n_rows_);
      break;
    case Layout::hat: {
      const int n_bins = basis.size;
      const double width = (hi - lo) / n_bins;
      seg_.resize(n_rows_);
      w_.resize(n_rows_);
      for (std::size_t p = 0; p < n_rows_; ++p) {
        const double pos = (states[p] - lo) / width;
        const int s = std::clamp(static_cast<int>(std::floor(pos)), 0, n_bins - 1);
        const double w = pos - s;
        seg_[p] = s;
        w_[p] = w;
        gram(s, s) += (1.0 - w) * (1.0 - w);
        gram(s, s + 1) += (1.0 - w) * w;
        gram(s + 1, s + 1) += w * w;
      }
      for (Eigen::Index j = 0; j + 1 < nf; ++j) gram(j + 1, j) = gram(j, j + 1);
      break;
    }
    case Layout::dense: {
      const double mid = 0.5 * (lo + hi);
      const double half = 0.5 * (hi - lo);
      design_.resize(n_rows_ * n_full_);
      for (std::size_t p = 0; p < n_rows_; ++p) {
        double* row = design_.data() + p * n_full_;
        legendre((states[p] - mid) / half, basis.size, row);
        for (Eigen::Index a = 0; a < nf; ++a)
          for (Eigen::Index b = 0; b <= a; ++b) gram(a, b) += row[a] * row[b];
      }
      for (Eigen::Index a = 0; a < nf; ++a)
        for (Eigen::Index b = a + 1; b < nf; ++b) gram(a, b) = gram(b, a);
      break;
    }
  }

  // Hat functions that no data point touches carry no information.
  const double max_diag = gram.diagonal().maxCoeff();
  column_of_.assign(n_full_, -1);
  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < nf; ++j) {
    if (layout_ != Layout::hat || gram(j, j) > 1e-14 * max_diag) {
      column_of_[static_cast<std::size_t>(j)] = static_cast<int>(active.size());
      active.push_back(j);
    }
  }
  n_active_ = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd reduced(n_active_, n_active_);
  for (Eigen::Index a = 0; a < n_active_; ++a)
    for (Eigen::Index b = 0; b < n_active_; ++b)
      reduced(a, b) = gram(active[static_cast<std::size_t>(a)],
                           active[static_cast<std::size_t>(b)]);

  gram_.compute(reduced);
  const auto d = gram_.vectorD();
  const double d_max = d.cwiseAbs().maxCoeff();
  if (gram_.info() != Eigen::Success || !(d_max > 0.0) ||
      d.minCoeff() <= 1e-12 * d_max) {
    throw RankDeficiencyError(step);
  }
}

std::vector<double> ConditionalExpectation::project(std::span<const double> response) const {
  std::vector<double> fitted(n_rows_);
  Eigen::VectorXd full_rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_full_));

  switch (layout_) {
    case Layout::constant:
      for (std::size_t p = 0; p < n_rows_; ++p) full_rhs[0] += response[p];
      break;
    case Layout::hat:
      for (std::size_t p = 0; p < n_rows_; ++p) {
        full_rhs[seg_[p]] += (1.0 - w_[p]) * response[p];
        full_rhs[seg_[p] + 1] += w_[p] * response[p];
      }
      break;
    case Layout::dense:
      for (std::size_t p = 0; p < n_rows_; ++p) {
        const double* row = design_.data() + p * n_full_;
        for (std::size_t a = 0; a < n_full_; ++a)
          full_rhs[static_cast<Eigen::Index>(a)] += row[a] * response[p];
      }
      break;
  }

  Eigen::VectorXd rhs(n_active_);
  for (std::size_t j = 0; j < n_full_; ++j)
    if (column_of_[j] >= 0) rhs[column_of_[j]] = full_rhs[static_cast<Eigen::Index>(j)];
  const Eigen::VectorXd reduced = gram_.solve(rhs);
  std::vector<double> coef(n_full_, 0.0);
  for (std::size_t j = 0; j < n_full_; ++j)
    if (column_of_[j] >= 0) coef[j] = reduced[column_of_[j]];

  switch (layout_) {
    case Layout::constant:
      std::fill(fitted.begin(), fitted.end(), coef[0]);
      break;
    case Layout::hat:
      for (std::size_t p = 0; p < n_rows_; ++p) {
        const auto s = static_cast<std::size_t>(seg_[p]);
        fitted[p] = (1.0 - w_[p]) * coef[s] + w_[p] * coef[s + 1];
      }
      break;
    case Layout::dense:
      for (std::size_t p = 0; p < n_rows_; ++p) {
        const double* row = design_.data() + p * n_full_;
        double v = 0.0;
        for (std::size_t a = 0; a < n_full_; ++a) v += coef[a] * row[a];
        fitted[p] = v;
      }
      break;
  }
  return fitted;
}

}  // namespace jumpstop
