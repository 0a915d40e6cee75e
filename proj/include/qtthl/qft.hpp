#pragma once

#include "qtthl/layout.hpp"
#include "qtthl/mpo.hpp"

namespace qtthl {

enum class QftMethod { Auto, Circuit, Dense };

// Unitary 1-D DFT on L bit sites: input site l carries physical bit x_l (weight 2^(L-l)), output site l
// carries frequency bit of weight 2^(l-1). Kernel exp(-2 pi i m j / 2^L) / 2^(L/2).
Mpo<cplx> build_qft_1d(int L, double tol, QftMethod method = QftMethod::Auto);

// d-dimensional transform for a layout, stored as factors applied in order with rounding in between.
struct QftOperator {
  QttLayout layout;  // physical-space layout of the input
  bool inverse = false;
  double tol = 1e-12;
  std::vector<Mpo<cplx>> factors;

  Index max_rank() const;
};

QftOperator assemble_qft(const QttLayout& physical, double tol, bool inverse = false,
                         QftMethod method = QftMethod::Auto);

// Applies the operator; `lay` must be the operator's input layout (physical for forward, Fourier for inverse).
TensorTrain<cplx> apply_qft(const QftOperator& op, const TensorTrain<cplx>& x, double tol);

TensorTrain<cplx> forward(const TensorTrain<cplx>& x, const QttLayout& lay, const QftOperator& op);
TensorTrain<cplx> inverse(const TensorTrain<cplx>& x, const QttLayout& lay, const QftOperator& op);

// Lifts a 1-D operator on the L sites of coordinate i to the full layout (identity elsewhere).
template <Scalar T>
Mpo<T> embed_coordinate_op(const Mpo<T>& op1d, const QttLayout& lay, int i);

}  // namespace qtthl
