#pragma once

#include <cstdint>
#include <vector>

#include "qtthl/mpo.hpp"

namespace qtthl {

// One summand coeff * op * x of a fitted linear combination (op == nullptr: identity).
template <Scalar T>
struct FitTerm {
  const Mpo<T>* op = nullptr;
  const TensorTrain<T>* x = nullptr;
  T coeff = T(1);
};

struct FitOptions {
  double tol = 1e-12;
  Index max_rank = kUnboundedRank;
  int min_sweeps = 2;
  int max_sweeps = 8;
  Index initial_rank = 0;  // 0: derived from the inputs
  std::uint64_t seed = 7;
};

struct FitInfo {
  int sweeps = 0;
  double last_change = 0.0;
  double discarded = 0.0;  // largest per-bond discarded weight of the final sweep (relative)
};

// Two-site variational approximation of sum_j coeff_j op_j x_j, truncated at tol.
template <Scalar T>
TensorTrain<T> fit_sum(const std::vector<FitTerm<T>>& terms, const FitOptions& opt, FitInfo* info = nullptr);

// Rounded operator application; uses the exact product when it is small.
template <Scalar T>
TensorTrain<T> apply_round(const Mpo<T>& op, const TensorTrain<T>& x, double tol, Index max_rank = kUnboundedRank);

// Rounded linear combination alpha*a + beta*b.
template <Scalar T>
TensorTrain<T> axpby_round(T alpha, const TensorTrain<T>& a, T beta, const TensorTrain<T>& b, double tol,
                           Index max_rank = kUnboundedRank);

// Rounded entrywise product.
template <Scalar T>
TensorTrain<T> hadamard_round(const TensorTrain<T>& a, const TensorTrain<T>& b, double tol,
                              Index max_rank = kUnboundedRank);

}  // namespace qtthl
