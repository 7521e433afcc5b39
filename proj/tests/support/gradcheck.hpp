#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hoic/tensor.hpp"

namespace hoic::testing {

struct GradCheckResult {
  double max_rel_error = 0;
  std::size_t worst_index = 0;
  double analytic = 0, numeric = 0;
  bool ok(double tol = 1e-4) const { return max_rel_error <= tol; }
};

// Central differences on selected entries of `param`, compared against the
// autodiff gradient of loss(). Relative error uses max(|a|, |n|, floor) as
// denominator so entries with vanishing gradients are compared absolutely.
inline GradCheckResult grad_check(const std::function<Tensor()>& loss, Tensor param, const std::vector<std::size_t>& idx,
                                  double eps = 1e-6, double floor = 1e-6) {
  param.zero_grad();
  Tensor l = loss();
  l.backward();
  std::vector<double> analytic(param.size(), 0.0);
  if (param.has_grad()) std::copy(param.grad().begin(), param.grad().end(), analytic.begin());
  GradCheckResult r;
  auto data = param.mutable_data();
  for (std::size_t i : idx) {
    const double orig = data[i];
    data[i] = orig + eps;
    const double up = loss().item();
    data[i] = orig - eps;
    const double down = loss().item();
    data[i] = orig;
    const double numeric = (up - down) / (2 * eps);
    const double rel = std::abs(analytic[i] - numeric) / std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    if (rel > r.max_rel_error) {
      r.max_rel_error = rel;
      r.worst_index = i;
      r.analytic = analytic[i];
      r.numeric = numeric;
    }
  }
  return r;
}

inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min(n, k));
  return all;
}

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1, double hi = 1, bool grad = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(numel(shape)));
  for (auto& x : v) x = u(rng);
  return Tensor::from(std::move(shape), std::move(v), grad);
}

}  // namespace hoic::testing
