#pragma once

#include <optional>

#include "qtthl/qft.hpp"
#include "qtthl/tci.hpp"

namespace qtthl {

// Integer frequencies m (k = 2 pi m) of the Fourier grid.
double projector_value(std::span<const Index> m, int i, int j);  // delta_ij - k_i k_j / |k|^2, identity at 0
double green_value(std::span<const Index> m, int i);             // Im q_i = k_i / |k|^2, zero at 0

// Symbol variant: spectral wave numbers, or those of the periodic forward difference.
enum class SymbolKind { Spectral, FiniteDifference };

struct SymbolOptions {
  double tol = 1e-12;
  Index max_rank = 400;
  int mc_samples = 4096;
  std::uint64_t seed = 1;
  SymbolKind kind = SymbolKind::Spectral;
};

struct ProjectorSymbol {
  QttLayout layout;  // Fourier, matrix arity
  TensorTrain<cplx> p;
  double tol = 0.0;
  Index rank = 0;
  double mc_error = 0.0;
  bool degraded = false;  // cross interpolation stopped before reaching tol
  TciReport tci;
};

struct GreenSymbol {
  QttLayout layout;  // Fourier, vector arity
  TensorTrain<cplx> q;
  double tol = 0.0;
  Index rank = 0;
  double mc_error = 0.0;
  bool degraded = false;
  TciReport tci;
};

ProjectorSymbol build_projector(const QttLayout& lay, const SymbolOptions& opt);
ProjectorSymbol build_projector(const QttLayout& lay, double tol, Index max_rank);
GreenSymbol build_green(const QttLayout& lay, const SymbolOptions& opt);

// Pointwise multiplication by a field: scalar fields act entrywise on scalar fields; matrix fields act
// blockwise on vector fields through their value site.
Mpo<cplx> diag_mpo(const TensorTrain<cplx>& field, const QttLayout& field_layout);

// Periodic convolution (a * psi)(m) = sum_m' a(m - m') psi(m') on Fourier vector fields. `a_layout` is
// Fourier with scalar (acts as a * I) or matrix arity.
Mpo<cplx> convolution_mpo(const TensorTrain<cplx>& a_hat, const QttLayout& a_layout);

// Fourier coefficients scaled for convolution: 2^(-Ld/2) QFT(a).
TensorTrain<cplx> convolution_coefficients(const TensorTrain<double>& a_phys, const QttLayout& a_layout, double tol);

// a >= 1/lambda and a <= Lambda (eigenvalues for matrix coefficients).
struct CoefficientBounds {
  double lambda = 1.0;
  double Lambda = 1.0;
  bool estimated = false;
};

// Samples a at quasi-random grid points; throws std::domain_error if a sample is not positive (definite).
CoefficientBounds estimate_bounds(const TensorTrain<double>& a_phys, const QttLayout& a_layout, int samples = 10000);

struct PenalizedSystem {
  QttLayout layout;  // Fourier, vector arity
  Mpo<cplx> conv;    // a_hat *
  Mpo<cplx> proj;    // diag(p_hat), unscaled
  double mu = 0.0;
  TensorTrain<cplx> rhs;  // -g_hat with g_hat(0) = 0
  CoefficientBounds bounds;

  Mpo<cplx> op() const;  // conv + mu proj, unrounded
  Index rank() const;
  double cond_bound() const { return bounds.lambda * (mu + bounds.Lambda); }
};

struct SystemOptions {
  double mu = 1e4;
  double tol = 1e-12;
  std::optional<CoefficientBounds> bounds;
  int bound_samples = 10000;
};

// a_phys scalar or matrix, g_phys vector; both physical with the same d, L, format.
PenalizedSystem assemble_system(const TensorTrain<double>& a_phys, const QttLayout& a_layout,
                                const TensorTrain<double>& g_phys, const QttLayout& g_layout,
                                const ProjectorSymbol& p, const SystemOptions& opt);
// Same with a_hat (convolution-scaled) and g_hat already in Fourier space.
PenalizedSystem assemble_system_hat(const TensorTrain<cplx>& a_hat, const QttLayout& a_layout,
                                    const TensorTrain<cplx>& g_hat, const ProjectorSymbol& p,
                                    const CoefficientBounds& bounds, const SystemOptions& opt);

// Sets the k = 0 coefficient of a Fourier field to zero.
TensorTrain<cplx> remove_mean(const TensorTrain<cplx>& hat, const QttLayout& lay, double tol);

// Gamma_hat g = (p_hat - I) g on Fourier vector fields.
TensorTrain<cplx> apply_gamma(const ProjectorSymbol& p, const TensorTrain<cplx>& g_hat, double tol);

// g_hat = -q_hat f_hat for a zero-mean scalar source f; throws std::domain_error if |mean f| > mean_tol rms f.
TensorTrain<cplx> source_from_f(const TensorTrain<double>& f_phys, const QttLayout& f_layout, const GreenSymbol& q,
                                double tol, double mean_tol = 1e-8);

struct RecoveredU {
  TensorTrain<cplx> u_hat;       // Fourier scalar, u_hat(0) = 0
  TensorTrain<double> u_phys;    // physical scalar
  double imag_rel = 0.0;         // ||Im u|| / ||u|| before the imaginary part is dropped
};

// u_hat = -q_hat . psi_hat.
RecoveredU recover_u(const TensorTrain<cplx>& psi_hat, const QttLayout& psi_layout, const GreenSymbol& q, double tol);

// Periodic forward difference along coordinate i on a physical scalar layout: (u(x + h e_i) - u(x)) / h. Rank 2.
Mpo<double> difference_mpo(const QttLayout& lay, int i);

// sum_i D_i^T diag(a) D_i + gamma I on a physical scalar layout; throws SolverError for gamma <= 0.
Mpo<double> fd_operator(const TensorTrain<double>& a_phys, const QttLayout& lay, double gamma, double tol);

// f - sum_i D_i^T g_i, the discrete right-hand side of the finite-difference problem.
TensorTrain<double> fd_rhs(const TensorTrain<double>& g_phys, const TensorTrain<double>& f_phys, const QttLayout& lay,
                           double tol);

// Vector field (D_1 u, ..., D_d u).
TensorTrain<double> fd_gradient(const TensorTrain<double>& u, const QttLayout& lay, double tol);

}  // namespace qtthl
