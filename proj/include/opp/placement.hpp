#pragma once

// Cardinality-constrained PMU placement: maximize F(sum_i z_i W_i) subject to
// sum_i z_i = gbar, with exhaustive, greedy and 1-swap local search, plus the
// adaptive choice among log-det, reciprocal condition and min-eigenvalue
// objectives.
//
// Ties are resolved toward the lexicographically smallest sorted index list
// (equivalently, the lowest index first).

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

#include "opp/gramian.hpp"
#include "opp/measures.hpp"

namespace opp {

enum class Solver { Auto, Exhaustive, Greedy, LocalSwap };

std::string_view to_string(Solver s);
Solver parse_solver(std::string_view name);

struct SearchOptions {
  std::uint64_t exhaustive_cap = 2'000'000;
  int max_swap_rounds = 1000;
  /// Extra seeded random starts for the LocalSwap solver.
  int random_restarts = 0;
};

struct PlacementResult {
  PlacementMask z;
  MeasureKind measure_used = MeasureKind::LogDet;
  MeasureValue objective;
  std::array<MeasureValue, 4> all_measures;  // kAllMeasures order
  Solver solver = Solver::Exhaustive;
  std::uint64_t evaluations = 0;
};

/// C(g, k), saturating at UINT64_MAX.
std::uint64_t binomial(std::int64_t g, std::int64_t k);

PlacementResult exhaustive_search(std::span<const Gramian> parts, MeasureKind kind, Index gbar,
                                  std::uint64_t cap = 2'000'000);

PlacementResult greedy_search(std::span<const Gramian> parts, MeasureKind kind, Index gbar);

PlacementResult local_swap_search(std::span<const Gramian> parts, MeasureKind kind, Index gbar,
                                  const PlacementMask& start, int max_rounds = 1000);

/// Auto: exhaustive when C(g, gbar) <= cap, otherwise greedy polished by
/// local swaps. LocalSwap: greedy start plus options.random_restarts seeded
/// random starts, best result kept.
PlacementResult optimize(std::span<const Gramian> parts, MeasureKind kind, Index gbar,
                         Solver solver = Solver::Auto, std::uint64_t seed = 0,
                         const SearchOptions& options = {});

enum class AdaptiveBranch { Det, Cond, MinEig };

std::string_view to_string(AdaptiveBranch b);

struct AdaptiveDecision {
  AdaptiveBranch branch = AdaptiveBranch::Det;
  double log_det_at_det_opt = 0.0;  // -inf when singular
  double R_neg_kappa = 0.0;         // may be +inf
  double R_sigma_min = 0.0;         // may be +inf
  double epsilon = 1.0;
};

struct AdaptiveResult {
  PlacementResult chosen;
  AdaptiveDecision decision;
  PlacementResult det_opt, cond_opt, min_eig_opt;
};

/// Condition-number improvement kappa(z_det)/kappa(z_cond), computed as
/// recip(z_cond)/recip(z_det): +inf when only z_det is singular, 1 when both are.
double kappa_ratio(const MeasureValue& recip_at_det, const MeasureValue& recip_at_cond);

/// sigma_min(z_sig)/sigma_min(z_det): +inf when only z_det has sigma_min = 0,
/// 1 when both do.
double sigma_ratio(const MeasureValue& min_at_det, const MeasureValue& min_at_sig);

/// Branch rule on precomputed optima; exposed so fixtures can drive it directly.
AdaptiveDecision decide_branch(const PlacementResult& det_opt, const PlacementResult& cond_opt,
                               const PlacementResult& min_eig_opt, double epsilon);

AdaptiveResult adaptive_placement(std::span<const Gramian> parts, Index gbar, double epsilon = 1.0,
                                  Solver solver = Solver::Auto, std::uint64_t seed = 0,
                                  const SearchOptions& options = {});

/// Uniform over the C(g, gbar) masks; reproducible for a given seed.
PlacementMask random_placement(Index g, Index gbar, std::uint64_t seed);

}  // namespace opp
