#pragma once

// Ordered-equilibrium machinery: extremal bracket processes, the best-reply
// map (optimal trajectories against a frozen flow), monotone best-reply
// iteration toward the minimal or maximal equilibrium, the averaged learning
// scheme, the dominance comparison harness, and fixed-point residuals.

#include <cstdint>
#include <string>
#include <vector>

#include "submfg/meanfield.hpp"
#include "submfg/picard.hpp"

namespace submfg {

enum class Direction { Minimal, Maximal };
enum class BracketMode { ExtremalDrift, UserBracket };
enum class StopReason { TolReached, MaxIters, Divergence };

/// Simulates the bracket SDE: drift = drift_free at the extremal summary
/// plus the coordinatewise extremum of b2(t) a over the control box, with the
/// model's noise.  Requires a compact control box and finite declared
/// summary ranges.  The result bounds every best-reply trajectory from the
/// corresponding side.
PathBundle lower_bound_process(const ModelSpec& model, const NoisePlan& plan,
                               int threads = 1);
PathBundle upper_bound_process(const ModelSpec& model, const NoisePlan& plan,
                               int threads = 1);

/// Optimal trajectory ensemble against a frozen flow: the forward-backward
/// fixed point under that flow.  Divergence propagates as ConvergenceError.
PicardResult best_reply(const ModelSpec& model, const NoisePlan& plan,
                        const ConditionalLawFlow& flow, const PicardSettings& settings,
                        const BsdeSolution* warm_start = nullptr);
PicardResult best_reply_table(const ModelSpec& model, const NoisePlan& plan,
                              const SummaryTable& table, const PicardSettings& settings,
                              const BsdeSolution* warm_start = nullptr);

struct IterationStats {
  int iter = 0;
  double distance = 0.0;   // path-space distance to the previous iterate
  double violation = 0.0;  // monotonicity violation V for this step
  double w2_start = 0.0, w2_mid = 0.0, w2_end = 0.0;
  int picard_iters = 0;
  double picard_change = 0.0;
  double summary_min_increment = 0.0;  // averaged scheme only
  double wall_ms = 0.0;
};

struct EquilibriumSettings {
  PicardSettings picard{};
  int max_outer_iters = 40;
  double tol_scale = 1e-4;        // Cauchy stop: tol_scale * state scale
  double mono_tol_scale = 1e-3;   // dominance tolerance scale
  double hard_flag_scale = 5e-2;  // violations above this scale flag the run
  BracketMode bracket = BracketMode::ExtremalDrift;
  const PathBundle* user_lower = nullptr;
  const PathBundle* user_upper = nullptr;
};

struct EquilibriumRun {
  Direction direction = Direction::Minimal;
  PathBundle x;
  BsdeSolution adjoint;
  std::vector<IterationStats> history;
  StopReason stop = StopReason::MaxIters;
  bool flagged = false;
  std::vector<std::string> warnings;
  double final_scale = 1.0;
  double tol_used = 0.0;
  std::uint64_t plan_fingerprint = 0;
};

/// Iterates the best-reply map from the chosen bracket on shared noise;
/// records per-step distances, monotonicity violations (minimal direction:
/// each iterate must dominate its predecessor) and transport gaps.  On
/// solver divergence the partial history is returned with the run flagged.
EquilibriumRun iterate_best_reply(const ModelSpec& model, const NoisePlan& plan,
                                  Direction direction,
                                  const EquilibriumSettings& settings = {});

struct FictitiousPlaySettings {
  PicardSettings picard{};
  int max_rounds = 256;
  double tol_scale = 2e-3;  // halving-window Cauchy tolerance * state scale
  double mono_tol = 1e-3;   // summary monotonicity slack
  BracketMode bracket = BracketMode::ExtremalDrift;
  const PathBundle* user_start = nullptr;
};

/// Averaged learning scheme: each round best-replies to the running average
/// of all previous rounds' conditional laws.  Scalar-type summaries update
/// incrementally and exactly (the summary of a uniform mixture is the
/// average of the summaries); order-1 kernels are not supported here.
/// Convergence is declared through a doubling-window Cauchy test (round n
/// versus round n/2).  Minimal direction starts from the lower bracket and
/// checks summaries nondecreasing; maximal is mirrored.
EquilibriumRun fictitious_play(const ModelSpec& model, const NoisePlan& plan,
                               Direction direction = Direction::Minimal,
                               const FictitiousPlaySettings& settings = {});

/// Clouds of `flow` translated by delta (componentwise); a constructive
/// dominating flow for comparison runs.
ConditionalLawFlow shift_flow(const ConditionalLawFlow& flow,
                              const Eigen::VectorXd& delta);

struct ComparisonReport {
  double v_state = 0.0;  // violation of X_low <= X_high
  double max_state = 0.0;
  double v_adjoint = 0.0;  // violation of Y_high <= Y_low (when checked)
  double max_adjoint = 0.0;
  bool adjoint_checked = false;
  double tolerance = 0.0;
  bool pass = true;
  int picard_iters_low = 0, picard_iters_high = 0;
};

/// Solves the frozen-flow problem under both flows on shared noise and
/// measures the pathwise dominance of the optimal trajectories (and, in the
/// nonseparable regime, the reversed dominance of the adjoints).
ComparisonReport comparison_harness(const ModelSpec& model, const NoisePlan& plan,
                                    const ConditionalLawFlow& flow_low,
                                    const ConditionalLawFlow& flow_high,
                                    const PicardSettings& settings,
                                    double tol_scale = 1e-3);

/// One extra best-reply application to a finished bundle; the fixed-point
/// residual distance is the headline accuracy number of a run.
double equilibrium_residual(const ModelSpec& model, const NoisePlan& plan,
                            const PathBundle& x_final, const PicardSettings& settings);

}  // namespace submfg
