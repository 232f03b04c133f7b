#pragma once

// Deterministic noise plan for conditional Monte Carlo.  Scenarios are indexed
// by an outer label (one common-noise path each) and an inner label (the
// idiosyncratic copies within a scenario).  Every draw is produced by a
// stateless counter hash of (seed, stream, outer, inner, step, component), so
//  - the same plan always yields bit-identical draws in any evaluation order,
//  - all inner particles of an outer scenario share that scenario's common
//    increments by construction,
//  - nothing is stored; increments are recomputed on demand.

#include <Eigen/Dense>
#include <cstdint>

#include "submfg/grid.hpp"

namespace submfg {

/// splitmix64 finalizer; the avalanche stage used by the counter hash.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_chain(std::uint64_t h, std::uint64_t v) {
  return mix64(h + 0x9e3779b97f4a7c15ULL + v);
}

/// Uniform draw in (0, 1) from a single 64-bit key.
inline double key_uniform(std::uint64_t key) {
  return (static_cast<double>(mix64(key) >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal from two keys (Box-Muller, cosine branch).
double key_normal(std::uint64_t key1, std::uint64_t key2);

/// Initial condition sampler description; kept declarative so draws are part
/// of the deterministic plan.
struct InitialLaw {
  enum class Kind { Dirac, Gaussian, Uniform } kind = Kind::Dirac;
  Eigen::VectorXd param_a;  // Dirac point / mean / lower bound
  Eigen::VectorXd param_b;  // unused / componentwise stddev / upper bound

  static InitialLaw dirac(Eigen::VectorXd point);
  static InitialLaw gaussian(Eigen::VectorXd mean, Eigen::VectorXd stddev);
  static InitialLaw uniform(Eigen::VectorXd lo, Eigen::VectorXd hi);

  int dim() const { return static_cast<int>(param_a.size()); }
};

class NoisePlan {
 public:
  NoisePlan(std::uint64_t seed, TimeGrid grid, int n_outer, int n_inner,
            int dim_w, int dim_b, InitialLaw initial);

  const TimeGrid& grid() const { return grid_; }
  int n_outer() const { return n_outer_; }
  int n_inner() const { return n_inner_; }
  int n_paths() const { return n_outer_ * n_inner_; }
  int dim_w() const { return dim_w_; }
  int dim_b() const { return dim_b_; }
  int dim_x() const { return initial_.dim(); }
  std::uint64_t seed() const { return seed_; }
  const InitialLaw& initial_law() const { return initial_; }

  /// 64-bit digest of everything that determines the draws.
  std::uint64_t fingerprint() const { return fingerprint_; }

  /// Idiosyncratic increment over [t_k, t_{k+1}], scaled by sqrt(dt).
  Eigen::VectorXd dW(int outer, int inner, int step) const;

  /// Common increment over [t_k, t_{k+1}]; identical for all inner labels.
  Eigen::VectorXd dB(int outer, int step) const;

  /// Initial state of path (outer, inner).
  Eigen::VectorXd xi(int outer, int inner) const;

 private:
  std::uint64_t seed_;
  TimeGrid grid_;
  int n_outer_, n_inner_, dim_w_, dim_b_;
  InitialLaw initial_;
  std::uint64_t fingerprint_;
  std::uint64_t base_w_, base_b_, base_xi_;
};

}  // namespace submfg
