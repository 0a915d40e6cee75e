#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>

#include "qtthl/als.hpp"
#include "qtthl/cache.hpp"
#include "qtthl/estimators.hpp"

namespace qtthl {

// Heterogeneous d = 2 test case with known solution:
//   a = (1 + nu sin 4 pi x)(1 + nu sin 8 pi y),  u = sin^2(6 pi x) sin^2(12 pi y) / (6 pi sqrt 5),
//   g = -a grad u - gt with divergence-free gt = (1 + sin 2 pi y, 2 + sin 4 pi x),  f = gamma u.
struct ManufacturedCase {
  static constexpr double nu = 3.0 / 7.0;
  QttLayout layout;  // physical scalar, d = 2
  double gamma = 0.0;
  TensorTrain<double> a, g, f, u, grad_u;  // g and grad_u on the vector layout
  TensorTrain<double> g_staggered;         // g_i sampled at x + h e_i / 2, where D_i is centered
  CoefficientBounds bounds;                 // lambda = (1 - nu)^-2, Lambda = (1 + nu)^2

  static double a_at(double x, double y);
  static double u_at(double x, double y);
  static std::array<double, 2> grad_u_at(double x, double y);
  static std::array<double, 2> g_at(double x, double y);
};

ManufacturedCase manufactured(int L, Format format, double gamma, double tol = 1e-14);

// Coefficient 1 + amp * sum of `terms` random products cos(2 pi k1 x + p1) cos(2 pi k2 y + p2), |k| <= kmax,
// scaled so that a >= 1 - amp.
TensorTrain<double> random_trig_coefficient(const QttLayout& lay, int terms, int kmax, double amp, std::uint64_t seed);

struct HlConfig {
  double mu = 1e4;
  double tol = 1e-12;  // assembly and post-processing rounding
  SolveConfig als;
  SymbolOptions symbols;
  const OperatorCache* cache = nullptr;  // read-only use
  bool estimate = true;
};

struct HlResult {
  PenalizedSystem system;
  TensorTrain<cplx> psi_hat;
  TensorTrain<double> psi;  // physical vector field
  RecoveredU u;
  SolveReport solve;
  std::optional<ErrorReport> errors;
  Index projector_rank = 0;
  double projector_mc_error = 0.0;
};

// Assemble, solve, recover u and run the estimators for -div(a grad u) = div g.
HlResult run_hl(const TensorTrain<double>& a, const QttLayout& a_layout, const TensorTrain<double>& g,
                const HlConfig& cfg, std::optional<CoefficientBounds> bounds = std::nullopt,
                const ProjectorSymbol* p = nullptr, const GreenSymbol* q = nullptr);

struct FdResult {
  Mpo<double> op;
  TensorTrain<double> rhs;
  TensorTrain<double> u;
  SolveReport solve;
  double cond_bound = 0.0;
};

FdResult run_fd(const TensorTrain<double>& a, const QttLayout& lay, const TensorTrain<double>& g,
                const TensorTrain<double>& f, double gamma, double Lambda, const SolveConfig& als, double tol = 1e-12);

// Table row of a manufactured run.
struct ManufacturedRow {
  int L = 0;
  Format format = Format::X1Y1;
  std::string method;  // "HL" or "FD"
  double mu = 0.0;
  double gamma = 0.0;
  double err_u = 0.0;
  double err_grad_u = 0.0;
  int sweeps = 0;
  double max_cond = 0.0;
  std::optional<ErrorReport> errors;
  double cond_bound = 0.0;
  double seconds = 0.0;
  Index solution_rank = 0;
};

// Err_u compares zero-mean representatives; Err_grad_u uses the spectral iterate for HL and forward
// differences for FD.
ManufacturedRow solve_manufactured_hl(int L, Format format, const HlConfig& cfg, HlResult* full = nullptr,
                                      const ProjectorSymbol* p = nullptr, const GreenSymbol* q = nullptr);
ManufacturedRow solve_manufactured_fd(int L, Format format, double gamma, const SolveConfig& als, double tol = 1e-12,
                                      FdResult* full = nullptr);

// Sequential placement of N centers in [0,1)^d with pairwise periodic distance >= 4r.
std::vector<std::vector<double>> rsa_pack(int N, double r, int d, std::uint64_t seed, long long max_attempts = 1000000);

struct MultiscaleParams {
  int d = 2;
  int N = 10;
  double r = 0.05;
  double nu = 5.0;
  int L0 = 8;
  int Le = 2;
  std::uint64_t seed = 1;
  Format format = Format::X1Y1;
  double tci_tol = 1e-10;
  Index tci_max_rank = 200;
  double tol = 1e-10;  // rounding of assembled fields
};

struct MultiscaleCase {
  MultiscaleParams params;
  std::vector<std::vector<double>> centers;
  QttLayout cell_layout;    // physical scalar, level L0
  QttLayout layout;         // physical scalar, level L0 + Le
  TensorTrain<double> c;    // cell field
  TensorTrain<double> b;    // macroscopic modulation on the global grid
  TensorTrain<double> a;    // b(x) c(x / eps)
  TensorTrain<double> g;    // vector source on the global grid
  CoefficientBounds bounds;
  TciReport c_tci;
  double image_truncation = 0.0;  // bound on the dropped periodic images relative to nu

  double c_at(std::span<const double> y) const;  // cell coordinates in [0,1)^d
  double b_at(std::span<const double> x) const;
};

MultiscaleCase multiscale(const MultiscaleParams& p);

struct Homogenized {
  QttLayout cell_layout;
  std::vector<TensorTrain<double>> corrector_grads;  // physical vector fields on the cell grid
  std::vector<TensorTrain<double>> correctors;       // zero-mean physical scalars
  Eigen::MatrixXd cell_tensor;                       // (int c (e_j + grad phi_j))_i in column j
  std::vector<SolveReport> solves;
  bool converged = true;
};

// Corrector problems -div(c (e_i + grad phi_i)) = 0 solved with the penalized Fourier solver.
Homogenized homogenize(const TensorTrain<double>& c, const QttLayout& cell_layout, const HlConfig& cfg);

// Matrix field b(x) * cell_tensor on the layout.
TensorTrain<double> homogenized_coefficient(const TensorTrain<double>& b, const QttLayout& lay,
                                            const Eigen::MatrixXd& cell_tensor, double tol);

struct MultiscaleRow {
  double eps = 0.0;
  int L0 = 0, Le = 0;
  double E_hom_grad = 0.0;
  double E_hom_u = 0.0;
  ErrorReport errors;
  int sweeps = 0;
  double max_cond = 0.0;
  std::vector<Index> psi_ranks, u_ranks;
  double seconds = 0.0;
};

MultiscaleRow run_multiscale(const MultiscaleCase& mc, const Homogenized& hom, const HlConfig& cfg);

// Dense references for small grids (total unknowns at most 2^16).
namespace dense {

// Grid values of a physical field, row-major over (j_1, ..., j_d) and components first for valued fields.
Eigen::VectorXd grid_values(const TensorTrain<double>& field, const QttLayout& lay);
Eigen::VectorXcd grid_values(const TensorTrain<cplx>& field, const QttLayout& lay);

struct PenalizedSolution {
  Eigen::VectorXcd psi_hat;   // component-major blocks, frequency m mod N per axis, row-major
  Eigen::VectorXcd grad_hat;  // exact discrete gradient solution (mu -> infinity)
  double cond = 0.0;          // exact condition number of the penalized matrix (direct path, on request)
  bool direct = true;
};

// a: scalar grid values (row-major), g: d component blocks of grid values. Direct Hermitian solve up to 4096
// unknowns, FFT-based conjugate gradients above.
PenalizedSolution penalized_solve(const Eigen::VectorXd& a, const Eigen::VectorXd& g, int d, int L, double mu,
                                  bool condition = false);

// Reorders a Fourier QTT field into the dense ordering above.
Eigen::VectorXcd fourier_values(const TensorTrain<cplx>& field, const QttLayout& lay);

// Dense forward-difference solve of sum_i D_i^T a D_i u + gamma u = f - sum_i D_i^T g_i.
Eigen::VectorXd fd_solve(const Eigen::VectorXd& a, const Eigen::VectorXd& g, const Eigen::VectorXd& f, int d, int L,
                         double gamma, double* cond = nullptr);

}  // namespace dense

}  // namespace qtthl
