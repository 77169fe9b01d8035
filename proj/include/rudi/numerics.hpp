#pragma once

#include <vector>

#include <Eigen/Dense>

namespace rudi {

struct RegressionFit {
  Eigen::VectorXd beta;
  double intercept = 0.0;
  Eigen::VectorXd fitted;
};

// Pearson correlation; 0 when either vector has zero variance. Throws
// std::invalid_argument on length mismatch or length < 2.
double pearson_corr(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Least squares of y ~ X*beta + intercept on the centered system, with ridge
// damping 1e-8 on the Gram matrix so rank-deficient designs stay solvable.
RegressionFit ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

// |corr(fitted, y)|, the coefficient of multiple correlation.
double multiple_corr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

// y minus the joint least-squares fit on the horizontal concatenation of the
// given statistic value matrices. Empty list returns y unchanged.
Eigen::VectorXd residualize(const Eigen::VectorXd& y,
                            const std::vector<Eigen::MatrixXd>& stats);

// k-th percentile (k in [0,100]) with linear interpolation between closest
// ranks; k=0 gives the min, k=100 the max. Throws on empty input.
double percentile(std::vector<double> values, double k);

}  // namespace rudi
