#pragma once

// Square-root unscented Kalman filter (scaled unscented transform, additive
// noise). The covariance is carried as a lower-triangular factor S with
// P = S S^T, propagated by QR of the weighted sigma-point deviations and
// rank-one Cholesky updates/downdates.

#include <functional>

#include <Eigen/Dense>

namespace opp {

struct UnscentedParams {
  double alpha = 1e-3;
  double beta = 2.0;
  double kappa = 0.0;
};

/// In-place rank-one modification of a lower Cholesky factor:
/// L L^T + sigma v v^T. Returns false when a downdate would lose positive
/// definiteness; L is then unspecified.
bool cholesky_update(Eigen::MatrixXd& L, Eigen::VectorXd v, double sigma);

/// Lower factor S with S S^T = A^T A for a wide compound matrix given as its
/// transpose (rows = contributions). Diagonal made non-negative.
Eigen::MatrixXd qr_factor(const Eigen::MatrixXd& compound_transposed);

class SquareRootUkf {
 public:
  using Transition = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

  SquareRootUkf(Eigen::VectorXd mean, Eigen::MatrixXd sqrt_cov, UnscentedParams params = {});

  Eigen::Index dim() const { return mean_.size(); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& sqrt_cov() const { return S_; }
  Eigen::MatrixXd covariance() const { return S_ * S_.transpose(); }

  /// Propagates sigma points through f; sqrt_process is a square root of Q.
  void predict(const Transition& f, const Eigen::MatrixXd& sqrt_process);

  /// Measurement update with observation y = h(x) + v, v ~ N(0, R),
  /// sqrt_meas a square root of R. Returns the innovation y - y_hat.
  Eigen::VectorXd update(const Transition& h, const Eigen::VectorXd& y, const Eigen::MatrixXd& sqrt_meas);

 private:
  std::vector<Eigen::VectorXd> sigma_points() const;

  Eigen::VectorXd mean_;
  Eigen::MatrixXd S_;
  UnscentedParams params_;
  double gamma_ = 0.0;
  double w0_mean_ = 0.0, w0_cov_ = 0.0, w_rest_ = 0.0;
};

}  // namespace opp
