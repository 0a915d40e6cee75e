#pragma once

#include <optional>
#include <string>

#include "qtthl/helmholtz.hpp"

namespace qtthl {

struct ErrorReport {
  double E_P = 0.0;
  double E_Gamma = 0.0;
  double E_max = 0.0;
  double E_min = 0.0;
  double E_apriori = 0.0;
  double cond_bound = 0.0;
  double fd_cond_bound = 0.0;  // zero unless set by the caller
  double normalization = 0.0;
  std::string normalization_kind;  // "potential_part" (||(I - P) psi||) or "exact"
};

// (lambda + Lambda)(1 + lambda Lambda) / (mu + 1/lambda) * norm_g / norm_grad_u.
double a_priori_mu(double lambda, double Lambda, double mu, double norm_g, double norm_grad_u);
// lambda (mu + Lambda).
double cond_bound(double lambda, double Lambda, double mu);
// (8 Lambda h^-2 + gamma) / gamma with h = 2^-L; throws std::invalid_argument for gamma <= 0.
double fd_cond_bound(double Lambda, double gamma, int L);

// Builds E_max = (1 + lambda Lambda) E_P + lambda E_Gamma and E_min = max(E_P, E_Gamma / (Lambda sqrt 2)).
void combine_estimates(ErrorReport& r, double lambda, double Lambda);

// Estimators for a Fourier iterate psi_hat of `sys`: E_P = ||p psi|| / N and
// E_Gamma = ||(p - I)(a * psi + g)|| / N, with g_hat = -sys.rhs. N is ||(I - p) psi|| unless an exact
// ||grad u|| is supplied. All norms are taken in Fourier space. Throws EstimatorError when N = 0.
ErrorReport a_posteriori(const TensorTrain<cplx>& psi_hat, const PenalizedSystem& sys, double tol,
                         std::optional<double> norm_grad_u = std::nullopt);

// Gradient of the two-scale expansion, sum_i d_i ubar (e_i + grad phi_i(x / eps)), on the global grid.
// `grad_ubar` is a physical vector field at level L0 + Le; `corrector_grads[i]` are physical vector fields
// on `cell_layout` (level L0).
TensorTrain<double> two_scale_gradient(const TensorTrain<double>& grad_ubar,
                                       const std::vector<TensorTrain<double>>& corrector_grads,
                                       const QttLayout& cell_layout, int Le, double tol);

struct HomogenizationErrors {
  double grad = 0.0;  // ||psi_eps - grad u^{eps,1}|| / ||psi_eps||
  double u = 0.0;     // ||u_eps - ubar|| / ||u_eps||
};

HomogenizationErrors homogenization_errors(const TensorTrain<double>& psi_eps, const TensorTrain<double>& u_eps,
                                           const TensorTrain<double>& ubar, const TensorTrain<double>& grad_ubar,
                                           const std::vector<TensorTrain<double>>& corrector_grads,
                                           const QttLayout& cell_layout, int Le, double tol);

}  // namespace qtthl
