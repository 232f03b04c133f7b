#pragma once

// Ensemble of discretized state paths, indexed by (outer scenario, inner
// particle, grid point, component).  Also used for adjoint-variable paths.
// Bundles carry the fingerprint of the noise plan they were simulated under;
// lattice operations and distances insist that fingerprints match, since
// pathwise comparisons only mean anything on shared noise.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "submfg/grid.hpp"

namespace submfg {

class PathBundle {
 public:
  PathBundle() = default;
  PathBundle(TimeGrid grid, int n_outer, int n_inner, int dim,
             std::uint64_t plan_fingerprint);

  const TimeGrid& grid() const { return grid_; }
  int n_outer() const { return n_outer_; }
  int n_inner() const { return n_inner_; }
  int n_paths() const { return n_outer_ * n_inner_; }
  int dim() const { return dim_; }
  std::uint64_t plan_fingerprint() const { return fingerprint_; }

  double& at(int outer, int inner, int step, int comp) {
    return data_[index(outer, inner, step, comp)];
  }
  double at(int outer, int inner, int step, int comp) const {
    return data_[index(outer, inner, step, comp)];
  }

  Eigen::Map<Eigen::VectorXd> state(int outer, int inner, int step) {
    return Eigen::Map<Eigen::VectorXd>(&data_[index(outer, inner, step, 0)], dim_);
  }
  Eigen::Map<const Eigen::VectorXd> state(int outer, int inner, int step) const {
    return Eigen::Map<const Eigen::VectorXd>(&data_[index(outer, inner, step, 0)], dim_);
  }

  const std::vector<double>& raw() const { return data_; }
  std::vector<double>& raw() { return data_; }

  bool same_shape(const PathBundle& o) const;

  /// Mean over paths of the quadrature integral of |X_t|^2 (endpoint masses
  /// plus Lebesgue in between).
  double pi_norm_sq_mean() const;

  /// max(1, root-mean-square level of the bundle under the path quadrature);
  /// the reference magnitude used to scale relative tolerances.
  double state_scale() const;

  bool all_finite() const;

 private:
  std::size_t index(int outer, int inner, int step, int comp) const {
    return ((static_cast<std::size_t>(outer) * n_inner_ + inner) * (grid_.n_steps + 1) +
            step) * dim_ + comp;
  }

  TimeGrid grid_;
  int n_outer_ = 0, n_inner_ = 0, dim_ = 0;
  std::uint64_t fingerprint_ = 0;
  std::vector<double> data_;
};

/// Componentwise pathwise minimum; requires identical shapes and fingerprints.
PathBundle path_meet(const PathBundle& a, const PathBundle& b);

/// Componentwise pathwise maximum.
PathBundle path_join(const PathBundle& a, const PathBundle& b);

/// sqrt(mean over paths of sup_k |Xa_k - Xb_k|^2), Euclidean in the state.
double pathspace_distance(const PathBundle& a, const PathBundle& b);

/// Writes "scenario,particle,step,x1,...,xd" rows; column prefix lets adjoint
/// bundles use y1..yd.  Deterministic formatting.
void write_bundle_csv(const PathBundle& b, const std::string& path,
                      const std::string& comp_prefix = "x");

/// Columnar little-endian binary: 24-byte header (magic "SMFGBND1", then
/// int32 n_outer, n_inner, n_points, dim), followed by float64 values in
/// (outer, inner, step, component) order.
void write_bundle_bin(const PathBundle& b, const std::string& path);

}  // namespace submfg
