#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "opp/gramian.hpp"

namespace opp {

/// Scalar observability measures; larger is better for all four.
/// NegCond is carried as the reciprocal condition number lambda_min/lambda_max,
/// a monotone transform of -kappa.
enum class MeasureKind { LogDet, Trace, MinEig, NegCond };

inline constexpr std::array<MeasureKind, 4> kAllMeasures = {MeasureKind::LogDet, MeasureKind::Trace,
                                                            MeasureKind::MinEig, MeasureKind::NegCond};

std::string_view to_string(MeasureKind kind);
MeasureKind parse_measure(std::string_view name);

struct MeasureValue {
  MeasureKind kind = MeasureKind::Trace;
  double value = 0.0;
  /// LogDet only: some eigenvalue sits at or below the relative floor;
  /// value is -infinity.
  bool singular = false;
  /// LogDet only: exp(log det) when finite. May underflow to 0.
  std::optional<double> raw_det;

  /// Comparable score: value, with -infinity for a singular log-det.
  double score() const { return value; }
};

/// Relative eigenvalue floor: 1e-14 * max(1, lambda_max).
double eigen_floor(double lambda_max);

/// Throws NotSymmetric unless |W - W^T| <= 1e-10 * max(1, |W|).
void require_symmetric(const Eigen::MatrixXd& W);

MeasureValue log_det(const Eigen::MatrixXd& W);
MeasureValue trace(const Eigen::MatrixXd& W);
MeasureValue min_eigenvalue(const Eigen::MatrixXd& W);
MeasureValue recip_condition(const Eigen::MatrixXd& W);

MeasureValue evaluate(MeasureKind kind, const Eigen::MatrixXd& W);
inline MeasureValue evaluate(MeasureKind kind, const Gramian& W) { return evaluate(kind, W.matrix); }

/// All four measures from one eigendecomposition, in kAllMeasures order.
std::array<MeasureValue, 4> evaluate_all(const Eigen::MatrixXd& W);

/// Condition number lambda_max/lambda_min reconstructed from a NegCond value
/// (infinity when the reciprocal is 0).
double condition_number(const MeasureValue& recip);

}  // namespace opp
