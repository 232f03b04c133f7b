#pragma once

// Conditional-law machinery.  A flow holds, for every (outer scenario, grid
// point), a weighted particle cloud representing the state law conditional on
// that scenario's common-noise path.  Summaries reduce clouds to the vector m
// the coefficient evaluators consume; dominance checks and transport
// distances compare clouds and bundles in the orders the theory uses.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "submfg/model.hpp"
#include "submfg/path_bundle.hpp"

namespace submfg {

struct Cloud {
  Eigen::MatrixXd points;   // n x d
  Eigen::VectorXd weights;  // length n, nonnegative, sums to 1

  int size() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
};

class ConditionalLawFlow {
 public:
  ConditionalLawFlow() = default;
  ConditionalLawFlow(TimeGrid grid, int n_outer, int dim, std::uint64_t fingerprint,
                     std::string provenance);

  const TimeGrid& grid() const { return grid_; }
  int n_outer() const { return n_outer_; }
  int dim() const { return dim_; }
  std::uint64_t plan_fingerprint() const { return fingerprint_; }
  const std::string& provenance() const { return provenance_; }

  Cloud& cloud(int outer, int step) { return clouds_[outer * grid_.n_points() + step]; }
  const Cloud& cloud(int outer, int step) const {
    return clouds_[outer * grid_.n_points() + step];
  }

 private:
  TimeGrid grid_;
  int n_outer_ = 0, dim_ = 0;
  std::uint64_t fingerprint_ = 0;
  std::string provenance_;
  std::vector<Cloud> clouds_;
};

/// Disintegrates a bundle scenario by scenario: cloud(outer, k) holds that
/// scenario's inner particles at grid point k, uniformly weighted.
ConditionalLawFlow conditional_empirical_law(const PathBundle& b);

/// Scalar reductions of one cloud.
struct MeasureSummary {
  Eigen::VectorXd m;       // interaction summary vector
  Eigen::VectorXd mean;    // componentwise mean
  Eigen::VectorXd second;  // componentwise second moment
  double norm1 = 0.0;      // mean of |x|_1, the growth-bound proxy
};

/// at_x is only consulted for order-1 kernels, where the summary is the
/// kernel average seen from state at_x.
MeasureSummary summaries(const Cloud& c, const InteractionSpec& spec,
                         const Eigen::VectorXd* at_x = nullptr);

/// Convex combination of flows as measures: pooled clouds with scaled
/// weights.  Exact; no resampling.
ConditionalLawFlow mix_flows(const std::vector<const ConditionalLawFlow*>& flows,
                             const Eigen::VectorXd& weights);

/// Precomputed summary lookup for a (flow, interaction) pair.  Scalar-type
/// summaries are cached per (outer, step); order-1 kernels are averaged on
/// demand against the flow's clouds.
class SummaryTable {
 public:
  SummaryTable() = default;
  SummaryTable(const ConditionalLawFlow& flow, const InteractionSpec& spec);

  /// Direct construction from precomputed values (scalar-type only),
  /// values[outer * n_points + step] each of length J.
  SummaryTable(TimeGrid grid, int n_outer, std::vector<Eigen::VectorXd> values);

  int n_summaries() const { return n_summaries_; }

  /// Summary vector seen by a particle at state x in (outer, step).
  Eigen::VectorXd eval(int outer, int step, const Eigen::VectorXd& x) const;

  /// Scalar-type fast path; throws for order-1 kernels.
  const Eigen::VectorXd& cached(int outer, int step) const;

  bool order1() const { return order1_; }

 private:
  TimeGrid grid_;
  int n_outer_ = 0, n_summaries_ = 0;
  bool order1_ = false;
  std::vector<Eigen::VectorXd> values_;       // scalar-type cache
  const ConditionalLawFlow* flow_ = nullptr;  // order-1 backing
  const InteractionSpec* spec_ = nullptr;
};

/// Quadrature-mean of the componentwise positive part of (a - b): zero iff
/// a <= b pathwise up to tolerance.
struct DominanceReport {
  double violation = 0.0;      // quadrature-mean of mean_i (a_i - b_i)^+
  double max_pointwise = 0.0;  // largest single-entry violation
  int outer = -1, inner = -1, step = -1, comp = -1;
  double tolerance = 0.0;
  bool pass = true;
};

DominanceReport check_dominance_pathwise(const PathBundle& a, const PathBundle& b,
                                         double tolerance);

/// First-order stochastic comparison of two clouds, coordinate by coordinate,
/// via empirical distribution functions on the merged support.
enum class StochOrder { Equal, FirstBelow, SecondBelow, Incomparable };

struct CdfOrderReport {
  StochOrder overall = StochOrder::Equal;
  std::vector<StochOrder> per_coordinate;
  double max_cdf_gap = 0.0;  // sup norm of F_a - F_b over coordinates
};

CdfOrderReport check_dominance_1d_cdf(const Cloud& a, const Cloud& b,
                                      double tol = 1e-12);

/// Quadratic Wasserstein distance between two weighted one-dimensional
/// samples, by quantile coupling; exact for discrete measures.
double wasserstein2_empirical_1d(const Eigen::VectorXd& values_a,
                                 const Eigen::VectorXd& weights_a,
                                 const Eigen::VectorXd& values_b,
                                 const Eigen::VectorXd& weights_b);

/// Coordinate-averaged W2 between the clouds of two flows at one grid point,
/// averaged over outer scenarios.
double flow_w2_at_step(const ConditionalLawFlow& a, const ConditionalLawFlow& b,
                       int step);

/// Same, comparing the empirical scenario clouds of two bundles directly.
double bundle_w2_at_step(const PathBundle& a, const PathBundle& b, int step);

}  // namespace submfg
