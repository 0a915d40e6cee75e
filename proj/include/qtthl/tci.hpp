#pragma once

#include <cstdint>
#include <functional>

#include "qtthl/layout.hpp"

namespace qtthl {

template <Scalar T>
using SiteFunction = std::function<T(std::span<const int>)>;

struct TciOptions {
  double tol = 1e-10;  // relative to the largest sampled |f|
  Index max_rank = 200;
  int max_sweeps = 30;
  int random_pivots = 64;
  int check_samples = 256;  // random probes per sweep used to propose global pivots
  std::uint64_t seed = 1;
};

struct TciReport {
  double error_estimate = 0.0;  // largest relative pivot residual of the last sweep
  double fmax = 0.0;
  Index max_rank = 0;
  int sweeps = 0;
  bool converged = false;
  bool rank_limited = false;
  long long evaluations = 0;
};

// Two-site cross interpolation with full-pivot rank-revealing LU on every bond.
template <Scalar T>
TensorTrain<T> build_from_function(const SiteFunction<T>& f, std::span<const Index> site_dims, const TciOptions& opt,
                                   TciReport* report = nullptr);

template <Scalar T>
TensorTrain<T> build_from_function(const SiteFunction<T>& f, const QttLayout& lay, const TciOptions& opt,
                                   TciReport* report = nullptr) {
  const auto dims = lay.site_dims();
  return build_from_function(f, std::span<const Index>(dims), opt, report);
}

// sqrt(sum |tt(s) - f(s)|^2 / sum |f(s)|^2) over random bitstrings; exhaustive when n_samples covers the grid.
template <Scalar T>
double monte_carlo_error(const TensorTrain<T>& tt, const SiteFunction<T>& f, int n_samples, std::uint64_t seed);

}  // namespace qtthl
