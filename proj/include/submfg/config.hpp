#pragma once

// JSON run configuration: one file describes the model, the discretization,
// the ensemble, the solver dials, and the outputs.  Validation is strict:
// unknown keys, missing required keys, and shape mismatches are rejected
// with the full field path before any compute starts.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "submfg/equilibrium.hpp"
#include "submfg/model.hpp"

namespace submfg {

struct ConfigError : std::runtime_error {
  std::string path;  // dotted field path of the offending key
  ConfigError(std::string path_, const std::string& msg);
};

struct GridConfig {
  double horizon = 1.0;
  int n_steps = 50;
};

struct EnsembleConfig {
  int n_outer = 16;
  int n_inner = 256;
  std::uint64_t seed = 1;
};

struct SolverConfig {
  int basis_degree = 2;
  double ridge = 1e-10;
  int picard_max_iters = 50;
  double picard_tol = 1e-6;
  double damping = 1.0;
  bool estimate_z = false;
};

struct EquilibriumConfig {
  Direction direction = Direction::Minimal;
  double tol_scale = 1e-4;
  double mono_tol_scale = 1e-3;
  double hard_flag_scale = 5e-2;
  int max_outer_iters = 40;
  BracketMode bracket = BracketMode::ExtremalDrift;
  int fp_max_rounds = 256;
  double fp_tol_scale = 2e-3;
  double fp_mono_tol = 1e-3;
};

struct FlowConfig {
  enum class Kind { Constant, LowerBracket, UpperBracket } kind = Kind::Constant;
  Eigen::VectorXd values;  // Constant: one entry per summary
};

struct CompareConfig {
  FlowConfig base{};              // defaults to the lower-bracket law
  Eigen::VectorXd shift;          // added to the base flow's particles
  double tol_scale = 1e-3;
};

struct BenchConfig {
  std::vector<std::pair<int, int>> refinements;  // (n_steps, n_inner)
  double max_rel_error = 0.02;
  bool require_improvement = true;
};

struct OutputConfig {
  std::string directory = "out";
  enum class Bundles { None, Csv, Binary } bundles = Bundles::None;
  bool write_adjoint = false;
};

struct RunConfig {
  ModelSpec model;
  LQModelParams lq;       // populated for the built-in quadratic families
  bool lq_family = false; // true when `lq` is meaningful
  GridConfig grid;
  EnsembleConfig ensemble;
  SolverConfig solver;
  EquilibriumConfig equilibrium;
  FlowConfig flow;        // `solve` subcommand
  CompareConfig compare;
  BenchConfig bench;
  OutputConfig outputs;
  int threads = 1;
  nlohmann::ordered_json snapshot;  // the validated document, for re-emission
};

/// Parses and validates the whole document; throws ConfigError with a field
/// path on any problem (unknown key, wrong type, bad shape, bad expression).
RunConfig load_config(const std::string& json_text);
RunConfig load_config_file(const std::string& path);

/// Plan and settings assembled from the validated config.
NoisePlan make_plan(const RunConfig& cfg);
PicardSettings picard_settings(const RunConfig& cfg);
EquilibriumSettings equilibrium_settings(const RunConfig& cfg);
FictitiousPlaySettings fictitious_play_settings(const RunConfig& cfg);

}  // namespace submfg
