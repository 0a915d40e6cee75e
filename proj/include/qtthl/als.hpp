#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "qtthl/mpo.hpp"

namespace qtthl {

// One summand coeff * op of an operator kept as a sum of MPOs.
template <Scalar T>
struct OperatorTerm {
  T coeff = T(1);
  const Mpo<T>* op = nullptr;
};

enum class LocalSolver { Auto, Direct, ConjugateGradient };
enum class CondMethod { Auto, Dense, Lanczos };

struct SolveConfig {
  double tol = 1e-6;  // relative change between sweeps
  int max_sweeps = 30;
  Index max_rank = 20;  // ranks of the random initial guess, kept fixed
  std::uint64_t seed = 1;
  LocalSolver local = LocalSolver::Auto;
  double local_tol = 1e-12;  // PCG relative residual
  Index direct_limit = 4096;  // Auto: direct factorization up to this local dimension
  bool measure_condition = true;
  Index cond_dense_limit = 1024;  // Auto: dense eigenvalues up to this local dimension, Lanczos above
  int lanczos_steps = 80;
  int max_cg_iterations = 5000;
  double max_seconds = 0.0;  // wall-clock budget checked after every local update, 0 for none

  void validate() const;
};

struct SweepRecord {
  int sweep = 0;
  double delta_u = 0.0;
  double max_cond = 0.0;     // largest local condition number so far
  double max_rel_err = 0.0;  // largest local ||Bc - r|| / ||r|| so far
  Index max_rank = 0;
  double energy = 0.0;  // 1/2 <x, A x> - Re <x, b> after the sweep
};

struct SolveReport {
  std::vector<double> delta_u;
  std::vector<SweepRecord> records;
  int sweeps = 0;
  bool converged = false;
  double max_cond = 0.0;
  std::string cond_method;  // "dense", "lanczos", "dense+lanczos" or "none"
  double max_local_residual = 0.0;
  int energy_violations = 0;  // local updates that raised the energy by more than 1e-10 relative
  bool time_limited = false;  // stopped by max_seconds, possibly within a sweep
  std::vector<Index> ranks;
  double wall_seconds = 0.0;

  void write_csv(std::ostream& os) const;
};

// Extreme-eigenvalue ratio of a Hermitian positive definite matrix.
template <Scalar T>
double measure_local_condition(const RMat<T>& B, CondMethod method = CondMethod::Dense, int lanczos_steps = 80,
                               std::string* used = nullptr);

// 1-site ALS for sum_t coeff_t op_t x = b with A Hermitian positive definite. Throws SolverError when a
// local system is numerically not positive definite (lambda_min < -1e-8 lambda_max).
template <Scalar T>
TensorTrain<T> solve(const std::vector<OperatorTerm<T>>& A, const TensorTrain<T>& b, const SolveConfig& cfg,
                     SolveReport* report = nullptr, const TensorTrain<T>* initial = nullptr);

template <Scalar T>
TensorTrain<T> solve(const Mpo<T>& A, const TensorTrain<T>& b, const SolveConfig& cfg, SolveReport* report = nullptr,
                     const TensorTrain<T>* initial = nullptr) {
  return solve(std::vector<OperatorTerm<T>>{{T(1), &A}}, b, cfg, report, initial);
}

}  // namespace qtthl
