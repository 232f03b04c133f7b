#include "submfg/noise.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>

namespace submfg {

namespace {

constexpr std::uint64_t kStreamW = 0x57u;
constexpr std::uint64_t kStreamB = 0x42u;
constexpr std::uint64_t kStreamXi = 0x58u;

std::uint64_t double_bits(double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, sizeof(u));
  return u;
}

}  // namespace

double key_normal(std::uint64_t key1, std::uint64_t key2) {
  double u1 = key_uniform(key1);
  double u2 = key_uniform(key2);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

InitialLaw InitialLaw::dirac(Eigen::VectorXd point) {
  InitialLaw law;
  law.kind = Kind::Dirac;
  law.param_a = std::move(point);
  law.param_b = Eigen::VectorXd::Zero(law.param_a.size());
  return law;
}

InitialLaw InitialLaw::gaussian(Eigen::VectorXd mean, Eigen::VectorXd stddev) {
  if (mean.size() != stddev.size())
    throw std::invalid_argument("InitialLaw::gaussian: mean/stddev size mismatch");
  if ((stddev.array() < 0).any())
    throw std::invalid_argument("InitialLaw::gaussian: stddev must be nonnegative");
  InitialLaw law;
  law.kind = Kind::Gaussian;
  law.param_a = std::move(mean);
  law.param_b = std::move(stddev);
  return law;
}

InitialLaw InitialLaw::uniform(Eigen::VectorXd lo, Eigen::VectorXd hi) {
  if (lo.size() != hi.size())
    throw std::invalid_argument("InitialLaw::uniform: bound size mismatch");
  if ((hi.array() < lo.array()).any())
    throw std::invalid_argument("InitialLaw::uniform: upper bound below lower");
  InitialLaw law;
  law.kind = Kind::Uniform;
  law.param_a = std::move(lo);
  law.param_b = std::move(hi);
  return law;
}

NoisePlan::NoisePlan(std::uint64_t seed, TimeGrid grid, int n_outer, int n_inner,
                     int dim_w, int dim_b, InitialLaw initial)
    : seed_(seed), grid_(grid), n_outer_(n_outer), n_inner_(n_inner),
      dim_w_(dim_w), dim_b_(dim_b), initial_(std::move(initial)) {
  if (n_outer < 1 || n_inner < 1)
    throw std::invalid_argument("NoisePlan: scenario counts must be positive");
  if (dim_w < 0 || dim_b < 0)
    throw std::invalid_argument("NoisePlan: noise dimensions must be nonnegative");
  if (initial_.dim() < 1)
    throw std::invalid_argument("NoisePlan: initial law must have positive dimension");

  std::uint64_t h = mix64(seed ^ 0x6d66676e6f697365ULL);
  h = hash_chain(h, static_cast<std::uint64_t>(n_outer));
  h = hash_chain(h, static_cast<std::uint64_t>(n_inner));
  h = hash_chain(h, static_cast<std::uint64_t>(grid_.n_steps));
  h = hash_chain(h, double_bits(grid_.horizon));
  h = hash_chain(h, static_cast<std::uint64_t>(dim_w));
  h = hash_chain(h, static_cast<std::uint64_t>(dim_b));
  h = hash_chain(h, static_cast<std::uint64_t>(initial_.kind));
  for (int i = 0; i < initial_.dim(); ++i) {
    h = hash_chain(h, double_bits(initial_.param_a[i]));
    h = hash_chain(h, double_bits(initial_.param_b[i]));
  }
  fingerprint_ = h;

  base_w_ = hash_chain(mix64(seed), kStreamW);
  base_b_ = hash_chain(mix64(seed), kStreamB);
  base_xi_ = hash_chain(mix64(seed), kStreamXi);
}

Eigen::VectorXd NoisePlan::dW(int outer, int inner, int step) const {
  double scale = std::sqrt(grid_.dt());
  std::uint64_t h = hash_chain(base_w_, static_cast<std::uint64_t>(outer));
  h = hash_chain(h, static_cast<std::uint64_t>(inner));
  h = hash_chain(h, static_cast<std::uint64_t>(step));
  Eigen::VectorXd out(dim_w_);
  for (int j = 0; j < dim_w_; ++j) {
    std::uint64_t k1 = hash_chain(h, static_cast<std::uint64_t>(2 * j));
    std::uint64_t k2 = hash_chain(h, static_cast<std::uint64_t>(2 * j + 1));
    out[j] = scale * key_normal(k1, k2);
  }
  return out;
}

Eigen::VectorXd NoisePlan::dB(int outer, int step) const {
  double scale = std::sqrt(grid_.dt());
  std::uint64_t h = hash_chain(base_b_, static_cast<std::uint64_t>(outer));
  h = hash_chain(h, static_cast<std::uint64_t>(step));
  Eigen::VectorXd out(dim_b_);
  for (int j = 0; j < dim_b_; ++j) {
    std::uint64_t k1 = hash_chain(h, static_cast<std::uint64_t>(2 * j));
    std::uint64_t k2 = hash_chain(h, static_cast<std::uint64_t>(2 * j + 1));
    out[j] = scale * key_normal(k1, k2);
  }
  return out;
}

Eigen::VectorXd NoisePlan::xi(int outer, int inner) const {
  int d = initial_.dim();
  if (initial_.kind == InitialLaw::Kind::Dirac) return initial_.param_a;
  std::uint64_t h = hash_chain(base_xi_, static_cast<std::uint64_t>(outer));
  h = hash_chain(h, static_cast<std::uint64_t>(inner));
  Eigen::VectorXd out(d);
  for (int c = 0; c < d; ++c) {
    std::uint64_t k1 = hash_chain(h, static_cast<std::uint64_t>(2 * c));
    std::uint64_t k2 = hash_chain(h, static_cast<std::uint64_t>(2 * c + 1));
    if (initial_.kind == InitialLaw::Kind::Gaussian) {
      out[c] = initial_.param_a[c] + initial_.param_b[c] * key_normal(k1, k2);
    } else {
      out[c] = initial_.param_a[c] +
               (initial_.param_b[c] - initial_.param_a[c]) * key_uniform(k1);
    }
  }
  return out;
}

}  // namespace submfg
