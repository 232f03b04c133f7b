#pragma once

// Euler forward simulation of the controlled state ensemble, either against
// a frozen summary flow or self-consistently (each scenario's summary is
// recomputed from its own particles every step).

#include <Eigen/Dense>
#include <functional>
#include <optional>

#include "submfg/meanfield.hpp"
#include "submfg/model.hpp"
#include "submfg/noise.hpp"
#include "submfg/path_bundle.hpp"

namespace submfg {

/// Control rule at (step, t, state, summary); the simulator clamps the result
/// to the control box.
using FeedbackControl = std::function<Eigen::VectorXd(
    int step, double t, const Eigen::VectorXd& x, const Eigen::VectorXd& m)>;

FeedbackControl constant_control(Eigen::VectorXd a);

struct SimulateOptions {
  int threads = 1;
  double blowup_limit = 1e12;  // any exceeding component aborts the run
  bool record_controls = false;
};

struct SimulationResult {
  PathBundle states;
  /// Applied controls at steps 0..N-1 (dim = control dimension), recorded on
  /// request; the terminal row stays zero.
  std::optional<PathBundle> controls;
};

/// Summaries taken from the given table.
SimulationResult simulate_forward(const ModelSpec& model, const NoisePlan& plan,
                                  const SummaryTable& frozen,
                                  const FeedbackControl& control,
                                  const SimulateOptions& opts = {});

/// Interacting-particle mode: scenario summaries recomputed from the live
/// ensemble at every step.
SimulationResult simulate_self_consistent(const ModelSpec& model,
                                          const NoisePlan& plan,
                                          const FeedbackControl& control,
                                          const SimulateOptions& opts = {});

/// Open-loop replay: the control applied to path (outer, inner) at step k is
/// controls.state(outer, inner, k), projected onto the box.
SimulationResult simulate_with_control_paths(const ModelSpec& model,
                                             const NoisePlan& plan,
                                             const SummaryTable& frozen,
                                             const PathBundle& controls,
                                             const SimulateOptions& opts = {});

}  // namespace submfg
