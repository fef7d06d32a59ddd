#include "opp/srukf.hpp"

#include <cmath>

#include "opp/error.hpp"

namespace opp {

bool cholesky_update(Eigen::MatrixXd& L, Eigen::VectorXd v, double sigma) {
  const Eigen::Index n = L.rows();
  if (sigma == 0.0) return true;
  v *= std::sqrt(std::abs(sigma));
  if (sigma > 0.0) {
    // Givens rotations; tolerates zero pivots
    for (Eigen::Index k = 0; k < n; ++k) {
      const double r = std::hypot(L(k, k), v[k]);
      if (r == 0.0) continue;
      const double c = L(k, k) / r, s = v[k] / r;
      L(k, k) = r;
      for (Eigen::Index i = k + 1; i < n; ++i) {
        const double lik = L(i, k);
        L(i, k) = c * lik + s * v[i];
        v[i] = -s * lik + c * v[i];
      }
    }
    return true;
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    if (v[k] == 0.0) continue;
    const double r2 = L(k, k) * L(k, k) - v[k] * v[k];
    if (!(r2 > 0.0)) return false;
    const double r = std::sqrt(r2);
    const double c = r / L(k, k), s = v[k] / L(k, k);
    L(k, k) = r;
    for (Eigen::Index i = k + 1; i < n; ++i) {
      L(i, k) = (L(i, k) - s * v[i]) / c;
      v[i] = c * v[i] - s * L(i, k);
    }
  }
  return true;
}

Eigen::MatrixXd qr_factor(const Eigen::MatrixXd& compound_transposed) {
  const Eigen::Index n = compound_transposed.cols();
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
  if (compound_transposed.rows() > 0) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(compound_transposed);
    const Eigen::Index k = std::min(n, compound_transposed.rows());
    R.topRows(k) = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  }
  Eigen::MatrixXd S = R.transpose();
  for (Eigen::Index j = 0; j < n; ++j)
    if (S(j, j) < 0.0) S.col(j) = -S.col(j);
  return S;
}

SquareRootUkf::SquareRootUkf(Eigen::VectorXd mean, Eigen::MatrixXd sqrt_cov, UnscentedParams params)
    : mean_(std::move(mean)), S_(std::move(sqrt_cov)), params_(params) {
  const double n = static_cast<double>(mean_.size());
  if (S_.rows() != mean_.size() || S_.cols() != mean_.size())
    throw Error(ErrorKind::DimensionMismatch, "covariance factor does not match state");
  const double a2 = params_.alpha * params_.alpha;
  const double lambda = a2 * (n + params_.kappa) - n;
  if (!(n + lambda > 0.0)) throw Error(ErrorKind::InvalidArgument, "unscented scaling gives n + lambda <= 0");
  gamma_ = std::sqrt(n + lambda);
  w0_mean_ = lambda / (n + lambda);
  w0_cov_ = w0_mean_ + (1.0 - a2 + params_.beta);
  w_rest_ = 0.5 / (n + lambda);
}

std::vector<Eigen::VectorXd> SquareRootUkf::sigma_points() const {
  const Eigen::Index n = dim();
  std::vector<Eigen::VectorXd> pts;
  pts.reserve(static_cast<std::size_t>(2 * n + 1));
  pts.push_back(mean_);
  for (Eigen::Index j = 0; j < n; ++j) pts.push_back(mean_ + gamma_ * S_.col(j));
  for (Eigen::Index j = 0; j < n; ++j) pts.push_back(mean_ - gamma_ * S_.col(j));
  return pts;
}

namespace {

// Weighted mean written relative to the central point, so that the large
// negative central weight of small-alpha transforms causes no cancellation.
Eigen::VectorXd weighted_mean(const std::vector<Eigen::VectorXd>& pts, double w_rest) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(pts.front().size());
  for (std::size_t i = 1; i < pts.size(); ++i) acc += pts[i] - pts.front();
  return pts.front() + w_rest * acc;
}

}  // namespace

void SquareRootUkf::predict(const Transition& f, const Eigen::MatrixXd& sqrt_process) {
  const Eigen::Index n = dim();
  std::vector<Eigen::VectorXd> pts = sigma_points();
  for (auto& p : pts) p = f(p);
  for (const auto& p : pts)
    if (p.size() != n || !p.allFinite())
      throw Error(ErrorKind::FilterDiverged, "sigma point propagation produced a non-finite state");
  const Eigen::VectorXd m = weighted_mean(pts, w_rest_);

  Eigen::MatrixXd compound(2 * n + sqrt_process.cols(), n);
  const double sw = std::sqrt(w_rest_);
  for (Eigen::Index i = 0; i < 2 * n; ++i)
    compound.row(i) = sw * (pts[static_cast<std::size_t>(i + 1)] - m).transpose();
  compound.bottomRows(sqrt_process.cols()) = sqrt_process.transpose();
  Eigen::MatrixXd S = qr_factor(compound);
  if (!cholesky_update(S, pts.front() - m, w0_cov_))
    throw Error(ErrorKind::FilterDiverged, "covariance downdate failed in prediction");
  mean_ = m;
  S_ = std::move(S);
}

Eigen::VectorXd SquareRootUkf::update(const Transition& h, const Eigen::VectorXd& y,
                                      const Eigen::MatrixXd& sqrt_meas) {
  const Eigen::Index n = dim();
  const Eigen::Index p = y.size();
  if (p == 0) return Eigen::VectorXd(0);
  if (sqrt_meas.rows() != p) throw Error(ErrorKind::DimensionMismatch, "measurement noise factor size");

  const std::vector<Eigen::VectorXd> pts = sigma_points();
  std::vector<Eigen::VectorXd> obs;
  obs.reserve(pts.size());
  for (const auto& pt : pts) {
    obs.push_back(h(pt));
    if (obs.back().size() != p) throw Error(ErrorKind::DimensionMismatch, "measurement size");
  }
  const Eigen::VectorXd y_hat = weighted_mean(obs, w_rest_);

  const double sw = std::sqrt(w_rest_);
  Eigen::MatrixXd compound(2 * n + sqrt_meas.cols(), p);
  for (Eigen::Index i = 0; i < 2 * n; ++i)
    compound.row(i) = sw * (obs[static_cast<std::size_t>(i + 1)] - y_hat).transpose();
  compound.bottomRows(sqrt_meas.cols()) = sqrt_meas.transpose();
  Eigen::MatrixXd Sy = qr_factor(compound);
  if (!cholesky_update(Sy, obs.front() - y_hat, w0_cov_))
    throw Error(ErrorKind::FilterDiverged, "innovation covariance downdate failed");

  // the central sigma point equals the mean, so its cross term vanishes
  Eigen::MatrixXd Pxy = Eigen::MatrixXd::Zero(n, p);
  for (std::size_t i = 1; i < pts.size(); ++i)
    Pxy.noalias() += w_rest_ * (pts[i] - mean_) * (obs[i] - y_hat).transpose();

  const Eigen::MatrixXd tmp = Sy.triangularView<Eigen::Lower>().solve(Pxy.transpose());
  const Eigen::MatrixXd gain = Sy.transpose().triangularView<Eigen::Upper>().solve(tmp).transpose();
  if (!gain.allFinite()) throw Error(ErrorKind::FilterDiverged, "singular innovation covariance");

  const Eigen::VectorXd innovation = y - y_hat;
  mean_ += gain * innovation;
  const Eigen::MatrixXd U = gain * Sy;
  for (Eigen::Index j = 0; j < p; ++j)
    if (!cholesky_update(S_, U.col(j), -1.0))
      throw Error(ErrorKind::FilterDiverged, "covariance downdate failed in measurement update");
  if (!mean_.allFinite()) throw Error(ErrorKind::FilterDiverged, "state estimate became non-finite");
  return innovation;
}

}  // namespace opp
