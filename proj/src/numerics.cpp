#include "rudi/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rudi {

namespace {
constexpr double kRidge = 1e-8;
}

double pearson_corr(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size())
    throw std::invalid_argument("pearson_corr: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("pearson_corr: need >= 2");
  const Eigen::VectorXd xc = x.array() - x.mean();
  const Eigen::VectorXd yc = y.array() - y.mean();
  const double sxx = xc.squaredNorm();
  const double syy = yc.squaredNorm();
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  const double r = xc.dot(yc) / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

RegressionFit ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size())
    throw std::invalid_argument("ols_fit: row count mismatch");
  if (y.size() < 2) throw std::invalid_argument("ols_fit: need >= 2 rows");
  const Eigen::RowVectorXd col_means = X.colwise().mean();
  const Eigen::MatrixXd Xc = X.rowwise() - col_means;
  const double y_mean = y.mean();
  const Eigen::VectorXd yc = y.array() - y_mean;

  Eigen::MatrixXd gram = Xc.transpose() * Xc;
  gram.diagonal().array() += kRidge;

  RegressionFit fit;
  fit.beta = gram.ldlt().solve(Xc.transpose() * yc);
  fit.intercept = y_mean - col_means.dot(fit.beta);
  fit.fitted = X * fit.beta;
  fit.fitted.array() += fit.intercept;
  return fit;
}

double multiple_corr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const RegressionFit fit = ols_fit(X, y);
  const Eigen::VectorXd fc = fit.fitted.array() - fit.fitted.mean();
  const Eigen::VectorXd yc = y.array() - y.mean();
  const double sff = fc.squaredNorm();
  const double syy = yc.squaredNorm();
  if (sff == 0.0 || syy == 0.0) return 0.0;
  const double r = std::abs(fc.dot(yc)) / std::sqrt(sff * syy);
  return std::min(r, 1.0);
}

Eigen::VectorXd residualize(const Eigen::VectorXd& y,
                            const std::vector<Eigen::MatrixXd>& stats) {
  if (stats.empty()) return y;
  Eigen::Index total_cols = 0;
  for (const auto& m : stats) {
    if (m.rows() != y.size())
      throw std::invalid_argument("residualize: row count mismatch");
    total_cols += m.cols();
  }
  Eigen::MatrixXd X(y.size(), total_cols);
  Eigen::Index offset = 0;
  for (const auto& m : stats) {
    X.middleCols(offset, m.cols()) = m;
    offset += m.cols();
  }
  const RegressionFit fit = ols_fit(X, y);
  return y - fit.fitted;
}

double percentile(std::vector<double> values, double k) {
  if (values.empty()) throw std::invalid_argument("percentile: empty input");
  if (k < 0.0 || k > 100.0)
    throw std::invalid_argument("percentile: k out of [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = k / 100.0 * double(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
  if (lo == hi) return values[lo];
  const double frac = pos - double(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace rudi
