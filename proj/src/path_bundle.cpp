#include "submfg/path_bundle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace submfg {

PathBundle::PathBundle(TimeGrid grid, int n_outer, int n_inner, int dim,
                       std::uint64_t plan_fingerprint)
    : grid_(grid), n_outer_(n_outer), n_inner_(n_inner), dim_(dim),
      fingerprint_(plan_fingerprint) {
  if (n_outer < 1 || n_inner < 1 || dim < 1)
    throw std::invalid_argument("PathBundle: shape entries must be positive");
  data_.assign(static_cast<std::size_t>(n_outer) * n_inner * (grid.n_steps + 1) * dim, 0.0);
}

bool PathBundle::same_shape(const PathBundle& o) const {
  return grid_ == o.grid_ && n_outer_ == o.n_outer_ && n_inner_ == o.n_inner_ &&
         dim_ == o.dim_;
}

double PathBundle::pi_norm_sq_mean() const {
  int np = grid_.n_points();
  double acc = 0.0;
  for (int o = 0; o < n_outer_; ++o)
    for (int i = 0; i < n_inner_; ++i)
      for (int k = 0; k < np; ++k)
        acc += grid_.quad_weight(k) * state(o, i, k).squaredNorm();
  return acc / n_paths();
}

double PathBundle::state_scale() const {
  double rms = std::sqrt(pi_norm_sq_mean() / grid_.total_mass());
  return std::max(1.0, rms);
}

bool PathBundle::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

namespace {

void check_compatible(const PathBundle& a, const PathBundle& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": bundle shapes differ");
  if (a.plan_fingerprint() != b.plan_fingerprint())
    throw std::invalid_argument(std::string(op) +
                                ": bundles come from different noise plans");
}

}  // namespace

PathBundle path_meet(const PathBundle& a, const PathBundle& b) {
  check_compatible(a, b, "path_meet");
  PathBundle out = a;
  auto& v = out.raw();
  const auto& w = b.raw();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::min(v[i], w[i]);
  return out;
}

PathBundle path_join(const PathBundle& a, const PathBundle& b) {
  check_compatible(a, b, "path_join");
  PathBundle out = a;
  auto& v = out.raw();
  const auto& w = b.raw();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(v[i], w[i]);
  return out;
}

double pathspace_distance(const PathBundle& a, const PathBundle& b) {
  check_compatible(a, b, "pathspace_distance");
  int np = a.grid().n_points();
  double acc = 0.0;
  for (int o = 0; o < a.n_outer(); ++o)
    for (int i = 0; i < a.n_inner(); ++i) {
      double sup = 0.0;
      for (int k = 0; k < np; ++k) {
        double d2 = (a.state(o, i, k) - b.state(o, i, k)).squaredNorm();
        sup = std::max(sup, d2);
      }
      acc += sup;
    }
  return std::sqrt(acc / a.n_paths());
}

void write_bundle_csv(const PathBundle& b, const std::string& path,
                      const std::string& comp_prefix) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_bundle_csv: cannot open " + path);
  os << "scenario,particle,step";
  for (int c = 0; c < b.dim(); ++c) os << ',' << comp_prefix << (c + 1);
  os << '\n';
  char buf[40];
  int np = b.grid().n_points();
  for (int o = 0; o < b.n_outer(); ++o)
    for (int i = 0; i < b.n_inner(); ++i)
      for (int k = 0; k < np; ++k) {
        os << o << ',' << i << ',' << k;
        for (int c = 0; c < b.dim(); ++c) {
          std::snprintf(buf, sizeof(buf), "%.12g", b.at(o, i, k, c));
          os << ',' << buf;
        }
        os << '\n';
      }
}

void write_bundle_bin(const PathBundle& b, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_bundle_bin: cannot open " + path);
  const char magic[8] = {'S', 'M', 'F', 'G', 'B', 'N', 'D', '1'};
  os.write(magic, 8);
  std::int32_t hdr[4] = {b.n_outer(), b.n_inner(), b.grid().n_points(), b.dim()};
  os.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
  static_assert(sizeof(double) == 8);
  os.write(reinterpret_cast<const char*>(b.raw().data()),
           static_cast<std::streamsize>(b.raw().size() * sizeof(double)));
}

}  // namespace submfg
