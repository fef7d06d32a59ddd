#include "opp/placement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "opp/error.hpp"

namespace opp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_inputs(std::span<const Gramian> parts, Index gbar) {
  if (parts.empty()) throw Error(ErrorKind::LengthMismatch, "no per-generator gramians given");
  const Index g = static_cast<Index>(parts.size());
  if (gbar < 0 || gbar > g)
    throw Error(ErrorKind::InvalidArgument,
                "gbar = " + std::to_string(gbar) + " outside [0, " + std::to_string(g) + "]");
}

/// Objective at a mask; counts evaluations.
class Scorer {
 public:
  Scorer(std::span<const Gramian> parts, MeasureKind kind) : parts_(parts), kind_(kind) {}

  double operator()(const PlacementMask& z) {
    ++evaluations_;
    return evaluate(kind_, assemble_gramian(z, parts_).matrix).score();
  }

  std::uint64_t evaluations() const { return evaluations_; }

 private:
  std::span<const Gramian> parts_;
  MeasureKind kind_;
  std::uint64_t evaluations_ = 0;
};

/// True when candidate (score a, mask za) should replace incumbent (b, zb).
bool better(double a, const PlacementMask& za, double b, const PlacementMask& zb) {
  if (a > b) return true;
  if (a < b || std::isnan(a)) return false;
  return za.indices() < zb.indices();
}

PlacementResult finish(std::span<const Gramian> parts, MeasureKind kind, PlacementMask z, Solver solver,
                       std::uint64_t evaluations) {
  PlacementResult res;
  const Gramian W = assemble_gramian(z, parts);
  res.z = std::move(z);
  res.measure_used = kind;
  res.all_measures = evaluate_all(W.matrix);
  res.objective = res.all_measures[static_cast<std::size_t>(kind)];
  res.solver = solver;
  res.evaluations = evaluations;
  return res;
}

}  // namespace

std::string_view to_string(Solver s) {
  switch (s) {
    case Solver::Auto: return "auto";
    case Solver::Exhaustive: return "exhaustive";
    case Solver::Greedy: return "greedy";
    case Solver::LocalSwap: return "local_swap";
  }
  return "?";
}

Solver parse_solver(std::string_view name) {
  if (name == "auto") return Solver::Auto;
  if (name == "exhaustive") return Solver::Exhaustive;
  if (name == "greedy") return Solver::Greedy;
  if (name == "local_swap" || name == "localswap") return Solver::LocalSwap;
  throw Error(ErrorKind::InvalidArgument, "unknown solver '" + std::string(name) + "'");
}

std::string_view to_string(AdaptiveBranch b) {
  switch (b) {
    case AdaptiveBranch::Det: return "det";
    case AdaptiveBranch::Cond: return "cond";
    case AdaptiveBranch::MinEig: return "mineig";
  }
  return "?";
}

std::uint64_t binomial(std::int64_t g, std::int64_t k) {
  if (k < 0 || k > g) return 0;
  k = std::min(k, g - k);
  unsigned __int128 c = 1;
  for (std::int64_t i = 1; i <= k; ++i) {
    c = c * static_cast<unsigned __int128>(g - k + i) / static_cast<unsigned __int128>(i);
    if (c > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(c);
}

PlacementResult exhaustive_search(std::span<const Gramian> parts, MeasureKind kind, Index gbar,
                                  std::uint64_t cap) {
  check_inputs(parts, gbar);
  const Index g = static_cast<Index>(parts.size());
  const std::uint64_t total = binomial(g, gbar);
  if (total > cap)
    throw Error(ErrorKind::CombinatoricsTooLarge,
                "C(" + std::to_string(g) + ", " + std::to_string(gbar) + ") = " + std::to_string(total) +
                    " exceeds cap " + std::to_string(cap));

  Scorer score(parts, kind);
  // index combinations in lexicographic order; the first best is kept
  std::vector<Index> combo(static_cast<std::size_t>(gbar));
  std::iota(combo.begin(), combo.end(), Index{0});
  PlacementMask best = PlacementMask::from_indices(g, combo);
  double best_score = score(best);
  while (true) {
    Index pos = gbar - 1;
    while (pos >= 0 && combo[pos] == g - gbar + pos) --pos;
    if (pos < 0) break;
    ++combo[pos];
    for (Index j = pos + 1; j < gbar; ++j) combo[j] = combo[j - 1] + 1;
    PlacementMask z = PlacementMask::from_indices(g, combo);
    const double s = score(z);
    if (s > best_score) {
      best_score = s;
      best = std::move(z);
    }
  }
  return finish(parts, kind, std::move(best), Solver::Exhaustive, score.evaluations());
}

PlacementResult greedy_search(std::span<const Gramian> parts, MeasureKind kind, Index gbar) {
  check_inputs(parts, gbar);
  const Index g = static_cast<Index>(parts.size());
  Scorer score(parts, kind);
  PlacementMask z = PlacementMask::none(g);
  for (Index round = 0; round < gbar; ++round) {
    Index pick = -1;
    double pick_score = -kInf;
    for (Index i = 0; i < g; ++i) {
      if (z[i]) continue;
      z.set(i, true);
      const double s = score(z);
      z.set(i, false);
      if (pick < 0 || s > pick_score) {
        pick = i;
        pick_score = s;
      }
    }
    z.set(pick, true);
  }
  return finish(parts, kind, std::move(z), Solver::Greedy, score.evaluations());
}

PlacementResult local_swap_search(std::span<const Gramian> parts, MeasureKind kind, Index gbar,
                                  const PlacementMask& start, int max_rounds) {
  check_inputs(parts, gbar);
  const Index g = static_cast<Index>(parts.size());
  if (start.size() != g || start.count() != gbar)
    throw Error(ErrorKind::InvalidArgument, "local swap start is not a feasible placement");
  Scorer score(parts, kind);
  PlacementMask z = start;
  double current = score(z);
  for (int round = 0; round < max_rounds; ++round) {
    PlacementMask best_z;
    double best = current;
    bool improved = false;
    for (Index drop = 0; drop < g; ++drop) {
      if (!z[drop]) continue;
      for (Index add = 0; add < g; ++add) {
        if (z[add]) continue;
        PlacementMask cand = z;
        cand.set(drop, false);
        cand.set(add, true);
        const double s = score(cand);
        if (s > current && (!improved || better(s, cand, best, best_z))) {
          best = s;
          best_z = std::move(cand);
          improved = true;
        }
      }
    }
    if (!improved) break;
    z = std::move(best_z);
    current = best;
  }
  return finish(parts, kind, std::move(z), Solver::LocalSwap, score.evaluations());
}

PlacementResult optimize(std::span<const Gramian> parts, MeasureKind kind, Index gbar, Solver solver,
                         std::uint64_t seed, const SearchOptions& options) {
  check_inputs(parts, gbar);
  const Index g = static_cast<Index>(parts.size());
  switch (solver) {
    case Solver::Exhaustive:
      return exhaustive_search(parts, kind, gbar, options.exhaustive_cap);
    case Solver::Greedy:
      return greedy_search(parts, kind, gbar);
    case Solver::Auto:
      if (binomial(g, gbar) <= options.exhaustive_cap)
        return exhaustive_search(parts, kind, gbar, options.exhaustive_cap);
      [[fallthrough]];
    case Solver::LocalSwap: {
      const PlacementResult greedy = greedy_search(parts, kind, gbar);
      PlacementResult best = local_swap_search(parts, kind, gbar, greedy.z, options.max_swap_rounds);
      std::uint64_t evals = greedy.evaluations + best.evaluations;
      const int restarts = solver == Solver::LocalSwap ? options.random_restarts : 0;
      for (int r = 0; r < restarts; ++r) {
        std::seed_seq seq{seed, static_cast<std::uint64_t>(r)};
        std::uint32_t word;
        seq.generate(&word, &word + 1);
        const PlacementMask start = random_placement(g, gbar, word);
        PlacementResult cand = local_swap_search(parts, kind, gbar, start, options.max_swap_rounds);
        evals += cand.evaluations;
        if (better(cand.objective.score(), cand.z, best.objective.score(), best.z)) best = std::move(cand);
      }
      best.evaluations = evals;
      return best;
    }
  }
  throw Error(ErrorKind::InvalidArgument, "unknown solver");
}

double kappa_ratio(const MeasureValue& recip_at_det, const MeasureValue& recip_at_cond) {
  const double rd = recip_at_det.value, rc = recip_at_cond.value;
  if (rd > 0.0) return rc / rd;
  return rc > 0.0 ? kInf : 1.0;
}

double sigma_ratio(const MeasureValue& min_at_det, const MeasureValue& min_at_sig) {
  const double md = min_at_det.value, ms = min_at_sig.value;
  if (md > 0.0) return ms / md;
  return ms > 0.0 ? kInf : 1.0;
}

AdaptiveDecision decide_branch(const PlacementResult& det_opt, const PlacementResult& cond_opt,
                               const PlacementResult& min_eig_opt, double epsilon) {
  if (!(epsilon > 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be positive");
  constexpr auto kLogDet = static_cast<std::size_t>(MeasureKind::LogDet);
  constexpr auto kMinEig = static_cast<std::size_t>(MeasureKind::MinEig);
  constexpr auto kNegCond = static_cast<std::size_t>(MeasureKind::NegCond);

  AdaptiveDecision d;
  d.epsilon = epsilon;
  d.log_det_at_det_opt = det_opt.all_measures[kLogDet].value;
  d.R_neg_kappa = kappa_ratio(det_opt.all_measures[kNegCond], cond_opt.all_measures[kNegCond]);
  d.R_sigma_min = sigma_ratio(det_opt.all_measures[kMinEig], min_eig_opt.all_measures[kMinEig]);
  // the determinant test runs in log space: det >= eps  <=>  log det >= log eps
  if (d.log_det_at_det_opt >= std::log(epsilon))
    d.branch = AdaptiveBranch::Det;
  else if (d.R_neg_kappa >= d.R_sigma_min)
    d.branch = AdaptiveBranch::Cond;
  else
    d.branch = AdaptiveBranch::MinEig;
  return d;
}

AdaptiveResult adaptive_placement(std::span<const Gramian> parts, Index gbar, double epsilon, Solver solver,
                                  std::uint64_t seed, const SearchOptions& options) {
  if (!(epsilon > 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be positive");
  AdaptiveResult res;
  res.det_opt = optimize(parts, MeasureKind::LogDet, gbar, solver, seed, options);
  res.cond_opt = optimize(parts, MeasureKind::NegCond, gbar, solver, seed, options);
  res.min_eig_opt = optimize(parts, MeasureKind::MinEig, gbar, solver, seed, options);
  res.decision = decide_branch(res.det_opt, res.cond_opt, res.min_eig_opt, epsilon);
  switch (res.decision.branch) {
    case AdaptiveBranch::Det: res.chosen = res.det_opt; break;
    case AdaptiveBranch::Cond: res.chosen = res.cond_opt; break;
    case AdaptiveBranch::MinEig: res.chosen = res.min_eig_opt; break;
  }
  return res;
}

PlacementMask random_placement(Index g, Index gbar, std::uint64_t seed) {
  if (g < 0 || gbar < 0 || gbar > g)
    throw Error(ErrorKind::InvalidArgument, "random placement needs 0 <= gbar <= g");
  std::mt19937_64 rng(seed);
  std::vector<Index> idx(static_cast<std::size_t>(g));
  std::iota(idx.begin(), idx.end(), Index{0});
  // partial Fisher-Yates: the first gbar entries are a uniform gbar-subset
  for (Index i = 0; i < gbar; ++i) {
    std::uniform_int_distribution<Index> pick(i, g - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(static_cast<std::size_t>(gbar));
  return PlacementMask::from_indices(g, idx);
}

}  // namespace opp
