#pragma once

// Central-finite-difference gradient checker. Runs the given scalar
// function in 64-bit precision and compares autodiff gradients against
// (f(p+eps) - f(p-eps)) / (2 eps) on sampled coordinates.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "lmpn/tensor.hpp"

namespace lmpn {

// fn must be a deterministic pure function of the parameter values; it is
// re-evaluated many times with perturbed entries.
inline double finite_diff_check(
    const std::function<Tensor<double>(Tape<double>&)>& fn,
    const std::vector<Tensor<double>>& params, double eps = 1e-4,
    int max_coords_per_param = 0, std::uint64_t seed = 0) {
  for (const auto& p : params) zero_grad(p);
  Tape<double> tape;
  Tensor<double> loss = fn(tape);
  tape.backward(loss);
  std::vector<std::vector<double>> autodiff;
  autodiff.reserve(params.size());
  for (const auto& p : params) autodiff.push_back(p->grad);

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  double max_rel = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = *params[pi];
    const int n = static_cast<int>(p.data.size());
    std::vector<int> coords;
    if (max_coords_per_param <= 0 || n <= max_coords_per_param) {
      coords.resize(n);
      for (int i = 0; i < n; ++i) coords[i] = i;
    } else {
      std::uniform_int_distribution<int> pick(0, n - 1);
      for (int i = 0; i < max_coords_per_param; ++i) coords.push_back(pick(rng));
    }
    for (int ci : coords) {
      const double orig = p.data[ci];
      p.data[ci] = orig + eps;
      Tape<double> t_plus;
      const double f_plus = fn(t_plus)->data[0];
      p.data[ci] = orig - eps;
      Tape<double> t_minus;
      const double f_minus = fn(t_minus)->data[0];
      p.data[ci] = orig;
      const double fd = (f_plus - f_minus) / (2.0 * eps);
      const double rel = std::fabs(autodiff[pi][static_cast<std::size_t>(ci)] - fd) /
                         std::max(1e-8, std::fabs(fd));
      if (rel > max_rel) max_rel = rel;
    }
  }
  return max_rel;
}

}  // namespace lmpn
