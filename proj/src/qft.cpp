#include "qtthl/qft.hpp"

#include <cmath>
#include <numbers>

#include "qtthl/fit.hpp"

namespace qtthl {

namespace {

cplx phase(double turns) { return std::polar(1.0, -2.0 * std::numbers::pi * turns); }

Mpo<cplx> qft_dense(int L, double tol) {
  const Index N = Index(1) << L;
  RMat<cplx> m(N, N);
  const double s = std::ldexp(1.0, -L);
  const double nrm = 1.0 / std::sqrt(static_cast<double>(N));
  for (Index row = 0; row < N; ++row) {
    Index k = 0;
    for (int b = 0; b < L; ++b) k |= ((row >> b) & 1) << (L - 1 - b);
    for (Index j = 0; j < N; ++j) m(row, j) = nrm * phase(s * static_cast<double>((k * j) % N));
  }
  std::vector<Index> dims(static_cast<size_t>(L), 2);
  return from_dense(m, std::span<const Index>(dims), std::span<const Index>(dims), tol);
}

// Hadamard on site l followed by the phases controlled by the new output bit b_l:
// exp(-2 pi i b_l x_l' / 2^(l'-l+1)) for l' > l.
Mpo<cplx> qft_layer(int L, int l) {
  std::vector<OpCore<cplx>> cores;
  const double h = 1.0 / std::sqrt(2.0);
  for (int s = 1; s <= L; ++s) {
    if (s < l) {
      OpCore<cplx> c(1, 2, 2, 1);
      c(0, 0, 0, 0) = c(0, 1, 1, 0) = 1.0;
      cores.push_back(std::move(c));
    } else if (s == l) {
      const Index right = l == L ? 1 : 2;
      OpCore<cplx> c(1, 2, 2, right);
      for (int b = 0; b < 2; ++b)
        for (int x = 0; x < 2; ++x) c(0, b, x, right == 1 ? 0 : b) = (b & x) ? -h : h;
      cores.push_back(std::move(c));
    } else {
      const Index right = s == L ? 1 : 2;
      OpCore<cplx> c(2, 2, 2, right);
      for (int ctl = 0; ctl < 2; ++ctl)
        for (int x = 0; x < 2; ++x)
          c(ctl, x, x, right == 1 ? 0 : ctl) = (ctl && x) ? phase(std::ldexp(1.0, -(s - l + 1))) : cplx(1.0);
      cores.push_back(std::move(c));
    }
  }
  return Mpo<cplx>(std::move(cores));
}

Mpo<cplx> qft_circuit(int L, double tol) {
  std::vector<Index> dims(static_cast<size_t>(L), 2);
  Mpo<cplx> m = Mpo<cplx>::identity(std::span<const Index>(dims));
  for (int l = 1; l <= L; ++l) m = round(compose(qft_layer(L, l), m), tol);
  return m;
}

template <Scalar T>
OpCore<T> pass_through(Index bond, Index n) {
  OpCore<T> c(bond, n, n, bond);
  for (Index a = 0; a < bond; ++a)
    for (Index s = 0; s < n; ++s) c(a, s, s, a) = 1.0;
  return c;
}

bool increasing(const QttLayout& lay, int i) { return lay.L == 1 || lay.site_of(i, 1) < lay.site_of(i, 2); }

}  // namespace

Mpo<cplx> build_qft_1d(int L, double tol, QftMethod method) {
  if (L < 1) throw ShapeError("build_qft_1d: L must be positive");
  if (method == QftMethod::Auto) method = L <= 10 ? QftMethod::Dense : QftMethod::Circuit;
  if (method == QftMethod::Dense) {
    if (L > 12) throw ShapeError("build_qft_1d: dense route limited to L <= 12");
    return qft_dense(L, tol);
  }
  return qft_circuit(L, tol);
}

Index QftOperator::max_rank() const {
  Index r = 1;
  for (const auto& f : factors) r = std::max(r, f.max_rank());
  return r;
}

template <Scalar T>
Mpo<T> embed_coordinate_op(const Mpo<T>& op1d, const QttLayout& lay, int i) {
  if (static_cast<int>(op1d.size()) != lay.L) throw ShapeError("embed_coordinate_op: level mismatch");
  const Mpo<T> src = increasing(lay, i) ? op1d : reversed(op1d);
  std::vector<int> owned(lay.num_sites(), 0);
  for (int l = 1; l <= lay.L; ++l) owned[lay.site_of(i, l)] = 1;
  const auto dims = lay.site_dims();
  std::vector<OpCore<T>> cores;
  size_t next = 0;
  Index bond = 1;
  for (size_t s = 0; s < owned.size(); ++s) {
    if (owned[s]) {
      cores.push_back(src.core(next++));
      bond = cores.back().right;
    } else {
      cores.push_back(pass_through<T>(bond, dims[s]));
    }
  }
  return Mpo<T>(std::move(cores));
}

template Mpo<double> embed_coordinate_op(const Mpo<double>&, const QttLayout&, int);
template Mpo<cplx> embed_coordinate_op(const Mpo<cplx>&, const QttLayout&, int);

QftOperator assemble_qft(const QttLayout& physical, double tol, bool inverse, QftMethod method) {
  if (physical.space != Space::Physical) throw ShapeError("assemble_qft: physical layout expected");
  physical.validate();
  QftOperator q;
  q.layout = physical;
  q.inverse = inverse;
  q.tol = tol;
  Mpo<cplx> one = build_qft_1d(physical.L, tol, method);
  if (inverse) one = adjoint(one);
  if (physical.format == Format::X1Y1) {
    for (int i = 0; i < physical.d; ++i) q.factors.push_back(embed_coordinate_op(one, physical, i));
    return q;
  }
  // Coordinates occupy contiguous blocks, so the per-coordinate transforms concatenate at rank 1.
  const Mpo<cplx> rev = reversed(one);
  std::vector<OpCore<cplx>> cores;
  if (physical.value_offset()) cores.push_back(pass_through<cplx>(1, physical.value_dim()));
  std::vector<std::pair<int, int>> owner(physical.num_sites(), {-1, 0});
  for (int i = 0; i < physical.d; ++i)
    for (int l = 1; l <= physical.L; ++l) owner[physical.site_of(i, l)] = {i, l};
  for (size_t s = physical.value_offset(); s < owner.size(); ++s) {
    const auto [i, l] = owner[s];
    cores.push_back(increasing(physical, i) ? one.core(static_cast<size_t>(l - 1))
                                            : rev.core(static_cast<size_t>(physical.L - l)));
  }
  q.factors.push_back(Mpo<cplx>(std::move(cores)));
  return q;
}

TensorTrain<cplx> apply_qft(const QftOperator& op, const TensorTrain<cplx>& x, double tol) {
  TensorTrain<cplx> y = x;
  for (const auto& f : op.factors) y = apply_round(f, y, tol);
  return y;
}

TensorTrain<cplx> forward(const TensorTrain<cplx>& x, const QttLayout& lay, const QftOperator& op) {
  if (op.inverse || lay.space != Space::Physical || lay != op.layout)
    throw ShapeError("forward: layout does not match the transform");
  return apply_qft(op, x, op.tol);
}

TensorTrain<cplx> inverse(const TensorTrain<cplx>& x, const QttLayout& lay, const QftOperator& op) {
  if (!op.inverse || lay.space != Space::Fourier || lay.with_space(Space::Physical) != op.layout)
    throw ShapeError("inverse: layout does not match the transform");
  return apply_qft(op, x, op.tol);
}

}  // namespace qtthl
