#include "opp/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "opp/error.hpp"

namespace opp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPsdTol = 1e-10;

Eigen::VectorXd spectrum(const Eigen::MatrixXd& W) {
  require_symmetric(W);
  if (W.size() == 0) return Eigen::VectorXd(0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W, Eigen::EigenvaluesOnly);
  return es.eigenvalues();  // ascending
}

MeasureValue log_det_from(const Eigen::VectorXd& lambda) {
  MeasureValue v{MeasureKind::LogDet};
  if (lambda.size() == 0) {
    v.value = 0.0;
    v.raw_det = 1.0;
    return v;
  }
  const double floor = eigen_floor(lambda.maxCoeff());
  if (lambda.minCoeff() <= floor) {
    v.singular = true;
    v.value = -kInf;
    return v;
  }
  v.value = lambda.array().log().sum();
  v.raw_det = std::exp(v.value);
  return v;
}

MeasureValue min_eig_from(const Eigen::VectorXd& lambda) {
  MeasureValue v{MeasureKind::MinEig};
  if (lambda.size() == 0) return v;
  const double lo = lambda.minCoeff();
  const double tol = kPsdTol * std::max(1.0, lambda.maxCoeff());
  v.value = (lo < 0.0 && lo >= -tol) ? 0.0 : lo;
  return v;
}

MeasureValue recip_from(const Eigen::VectorXd& lambda) {
  MeasureValue v{MeasureKind::NegCond};
  if (lambda.size() == 0) return v;
  const double hi = lambda.maxCoeff(), lo = lambda.minCoeff();
  if (hi <= 0.0 || lo <= eigen_floor(hi)) return v;
  v.value = lo / hi;
  return v;
}

}  // namespace

std::string_view to_string(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::LogDet: return "logdet";
    case MeasureKind::Trace: return "trace";
    case MeasureKind::MinEig: return "mineig";
    case MeasureKind::NegCond: return "negcond";
  }
  return "?";
}

MeasureKind parse_measure(std::string_view name) {
  if (name == "logdet" || name == "det") return MeasureKind::LogDet;
  if (name == "trace" || name == "tr") return MeasureKind::Trace;
  if (name == "mineig" || name == "sigma_min") return MeasureKind::MinEig;
  if (name == "negcond" || name == "-kappa" || name == "cond") return MeasureKind::NegCond;
  throw Error(ErrorKind::InvalidArgument, "unknown measure '" + std::string(name) + "'");
}

double eigen_floor(double lambda_max) { return 1e-14 * std::max(1.0, lambda_max); }

void require_symmetric(const Eigen::MatrixXd& W) {
  if (W.rows() != W.cols()) throw Error(ErrorKind::NotSymmetric, "matrix is not square");
  if (W.size() == 0) return;
  const double scale = std::max(1.0, W.cwiseAbs().maxCoeff());
  if ((W - W.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw Error(ErrorKind::NotSymmetric, "matrix is not symmetric");
}

MeasureValue log_det(const Eigen::MatrixXd& W) { return log_det_from(spectrum(W)); }

MeasureValue trace(const Eigen::MatrixXd& W) {
  if (W.rows() != W.cols()) throw Error(ErrorKind::NotSymmetric, "matrix is not square");
  return MeasureValue{MeasureKind::Trace, W.trace()};
}

MeasureValue min_eigenvalue(const Eigen::MatrixXd& W) { return min_eig_from(spectrum(W)); }

MeasureValue recip_condition(const Eigen::MatrixXd& W) { return recip_from(spectrum(W)); }

MeasureValue evaluate(MeasureKind kind, const Eigen::MatrixXd& W) {
  switch (kind) {
    case MeasureKind::LogDet: return log_det(W);
    case MeasureKind::Trace: return trace(W);
    case MeasureKind::MinEig: return min_eigenvalue(W);
    case MeasureKind::NegCond: return recip_condition(W);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown measure kind");
}

std::array<MeasureValue, 4> evaluate_all(const Eigen::MatrixXd& W) {
  const Eigen::VectorXd lambda = spectrum(W);
  return {log_det_from(lambda), MeasureValue{MeasureKind::Trace, W.trace()}, min_eig_from(lambda),
          recip_from(lambda)};
}

double condition_number(const MeasureValue& recip) {
  return recip.value > 0.0 ? 1.0 / recip.value : kInf;
}

}  // namespace opp
