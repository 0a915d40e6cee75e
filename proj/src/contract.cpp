#include <algorithm>

#include "qtthl/contract.hpp"

namespace qtthl {

template <Scalar T>
Env<T> half_left(const Env<T>& L, const OpCore<T>* W, const Core<T>& X) {
  const Index A1 = L.bra, Wl = L.op, A = L.ket;
  if (A != X.left) throw ShapeError("half_left: ket rank mismatch");
  const Index m = X.dim, B = X.right;
  CMapRMat<T> lm(L.data.data(), A1 * Wl, A);
  RMat<T> t1 = lm * X.right_unfolding();  // (a',w) x (t,b)
  if (W == nullptr) {
    if (Wl != 1) throw ShapeError("half_left: identity op needs unit op rank");
    Env<T> h(A1 * m, 1, B);
    std::copy(t1.data(), t1.data() + t1.size(), h.data.begin());
    return h;
  }
  if (W->left != Wl || W->cols != m) throw ShapeError("half_left: operator core mismatch");
  const Index n = W->rows, Wr = W->right;
  RMat<T> p(A1 * B, Wl * m);
  for (Index a = 0; a < A1; ++a)
    for (Index w = 0; w < Wl; ++w)
      for (Index t = 0; t < m; ++t) {
        const T* src = t1.data() + ((a * Wl + w) * m + t) * B;
        for (Index b = 0; b < B; ++b) p(a * B + b, w * m + t) = src[b];
      }
  RMat<T> wp(Wl * m, n * Wr);
  for (Index w = 0; w < Wl; ++w)
    for (Index s = 0; s < n; ++s)
      for (Index t = 0; t < m; ++t)
        for (Index q = 0; q < Wr; ++q) wp(w * m + t, s * Wr + q) = (*W)(w, s, t, q);
  RMat<T> t2 = p * wp;  // (a',b) x (s,w')
  Env<T> h(A1 * n, Wr, B);
  for (Index a = 0; a < A1; ++a)
    for (Index b = 0; b < B; ++b) {
      const T* src = t2.data() + (a * B + b) * n * Wr;
      for (Index s = 0; s < n; ++s)
        for (Index q = 0; q < Wr; ++q) h.data[static_cast<size_t>(((a * n + s) * Wr + q) * B + b)] = src[s * Wr + q];
    }
  return h;
}

template <Scalar T>
Env<T> close_left(const Env<T>& H, const Core<T>& Y) {
  if (H.bra != Y.left * Y.dim) throw ShapeError("close_left: bra mismatch");
  CMapRMat<T> hm(H.data.data(), H.bra, H.op * H.ket);
  Env<T> out(Y.right, H.op, H.ket);
  MapRMat<T> om(out.data.data(), Y.right, H.op * H.ket);
  om.noalias() = Y.left_unfolding().adjoint() * hm;
  return out;
}

template <Scalar T>
Core<T> close_right(const Env<T>& H, const Env<T>& R, Index dim) {
  if (H.op != R.op || H.ket != R.ket) throw ShapeError("close_right: environment mismatch");
  if (H.bra % dim != 0) throw ShapeError("close_right: site dimension mismatch");
  CMapRMat<T> hm(H.data.data(), H.bra, H.op * H.ket);
  CMapRMat<T> rm(R.data.data(), R.bra, R.op * R.ket);
  Core<T> y(H.bra / dim, dim, R.bra);
  y.left_unfolding().noalias() = hm * rm.transpose();
  return y;
}

template <Scalar T>
Env<T> env_left(const Env<T>& L, const Core<T>& bra, const OpCore<T>* W, const Core<T>& ket) {
  return close_left(half_left(L, W, ket), bra);
}

template <Scalar T>
Env<T> env_right(const Env<T>& R, const Core<T>& bra, const OpCore<T>* W, const Core<T>& ket) {
  const Index B1 = R.bra, Wr = R.op, B = R.ket;
  if (ket.right != B || bra.right != B1) throw ShapeError("env_right: rank mismatch");
  const Index A = ket.left, m = ket.dim, A1 = bra.left, n = bra.dim;
  CMapRMat<T> rm(R.data.data(), B1 * Wr, B);
  RMat<T> t1 = ket.left_unfolding() * rm.transpose();  // (a,t) x (b',w')
  if (W == nullptr) {
    if (Wr != 1 || n != m) throw ShapeError("env_right: identity op mismatch");
    // out[a', a] = sum_{s,b'} conj(Y[a',s,b']) t1[(a,s), b']
    RMat<T> t1p(n * B1, A);
    for (Index a = 0; a < A; ++a)
      for (Index s = 0; s < m; ++s)
        for (Index b = 0; b < B1; ++b) t1p(s * B1 + b, a) = t1(a * m + s, b);
    Env<T> out(A1, 1, A);
    MapRMat<T> om(out.data.data(), A1, A);
    om.noalias() = bra.right_unfolding().conjugate() * t1p;
    return out;
  }
  if (W->right != Wr || W->cols != m || W->rows != n) throw ShapeError("env_right: operator core mismatch");
  const Index Wl = W->left;
  RMat<T> p(A * B1, m * Wr);
  for (Index a = 0; a < A; ++a)
    for (Index t = 0; t < m; ++t)
      for (Index b = 0; b < B1; ++b)
        for (Index q = 0; q < Wr; ++q) p(a * B1 + b, t * Wr + q) = t1(a * m + t, b * Wr + q);
  RMat<T> wp(m * Wr, Wl * n);
  for (Index w = 0; w < Wl; ++w)
    for (Index s = 0; s < n; ++s)
      for (Index t = 0; t < m; ++t)
        for (Index q = 0; q < Wr; ++q) wp(t * Wr + q, w * n + s) = (*W)(w, s, t, q);
  RMat<T> t2 = p * wp;  // (a,b') x (w,s)
  RMat<T> t2p(n * B1, Wl * A);
  for (Index a = 0; a < A; ++a)
    for (Index b = 0; b < B1; ++b)
      for (Index w = 0; w < Wl; ++w)
        for (Index s = 0; s < n; ++s) t2p(s * B1 + b, w * A + a) = t2(a * B1 + b, w * n + s);
  Env<T> out(A1, Wl, A);
  MapRMat<T> om(out.data.data(), A1, Wl * A);
  om.noalias() = bra.right_unfolding().conjugate() * t2p;
  return out;
}

template <Scalar T>
Core<T> local_apply(const Env<T>& L, const OpCore<T>* W, const Env<T>& R, const Core<T>& x, Index out_dim) {
  return close_right(half_left(L, W, x), R, out_dim);
}

template <Scalar T>
RMat<T> local_dense(const Env<T>& L, const OpCore<T>& W, const Env<T>& R) {
  const Index A1 = L.bra, Wl = L.op, A = L.ket;
  const Index B1 = R.bra, Wr = R.op, B = R.ket;
  const Index n = W.rows, m = W.cols;
  // One (s,t) block at a time keeps the temporaries at R^4 entries.
  RMat<T> lp(A1 * A, Wl);
  for (Index a1 = 0; a1 < A1; ++a1)
    for (Index w = 0; w < Wl; ++w)
      for (Index a = 0; a < A; ++a) lp(a1 * A + a, w) = L(a1, w, a);
  RMat<T> rp(Wr, B1 * B);
  for (Index b1 = 0; b1 < B1; ++b1)
    for (Index w = 0; w < Wr; ++w)
      for (Index b = 0; b < B; ++b) rp(w, b1 * B + b) = R(b1, w, b);
  RMat<T> out(A1 * n * B1, A * m * B);
  RMat<T> wst(Wl, Wr), m2;
  for (Index s = 0; s < n; ++s)
    for (Index t = 0; t < m; ++t) {
      for (Index w = 0; w < Wl; ++w)
        for (Index w2 = 0; w2 < Wr; ++w2) wst(w, w2) = W(w, s, t, w2);
      if (wst.isZero(0.0)) {
        for (Index a1 = 0; a1 < A1; ++a1)
          for (Index b1 = 0; b1 < B1; ++b1)
            for (Index a = 0; a < A; ++a)
              std::fill_n(&out((a1 * n + s) * B1 + b1, (a * m + t) * B), B, T(0));
        continue;
      }
      m2.noalias() = (lp * wst) * rp;  // (a',a) x (b',b)
      for (Index a1 = 0; a1 < A1; ++a1)
        for (Index a = 0; a < A; ++a) {
          const T* src = m2.data() + (a1 * A + a) * B1 * B;
          for (Index b1 = 0; b1 < B1; ++b1) std::copy_n(src + b1 * B, B, &out((a1 * n + s) * B1 + b1, (a * m + t) * B));
        }
    }
  return out;
}

template <Scalar T>
Vec<T> local_diagonal(const Env<T>& L, const OpCore<T>& W, const Env<T>& R) {
  const Index A = L.bra, Wl = L.op;
  const Index B = R.bra, Wr = R.op;
  const Index n = W.rows;
  RMat<T> ld(A, Wl), rd(B, Wr);
  for (Index a = 0; a < A; ++a)
    for (Index w = 0; w < Wl; ++w) ld(a, w) = L(a, w, a);
  for (Index b = 0; b < B; ++b)
    for (Index w = 0; w < Wr; ++w) rd(b, w) = R(b, w, b);
  Vec<T> out(A * n * B);
  for (Index s = 0; s < n; ++s) {
    RMat<T> ws(Wl, Wr);
    for (Index w = 0; w < Wl; ++w)
      for (Index q = 0; q < Wr; ++q) ws(w, q) = W(w, s, s, q);
    RMat<T> blk = ld * ws * rd.transpose();  // A x B
    for (Index a = 0; a < A; ++a)
      for (Index b = 0; b < B; ++b) out((a * n + s) * B + b) = blk(a, b);
  }
  return out;
}

#define QTTHL_INSTANTIATE_CONTRACT(T)                                                              \
  template Env<T> half_left(const Env<T>&, const OpCore<T>*, const Core<T>&);                      \
  template Env<T> close_left(const Env<T>&, const Core<T>&);                                       \
  template Core<T> close_right(const Env<T>&, const Env<T>&, Index);                               \
  template Env<T> env_left(const Env<T>&, const Core<T>&, const OpCore<T>*, const Core<T>&);       \
  template Env<T> env_right(const Env<T>&, const Core<T>&, const OpCore<T>*, const Core<T>&);      \
  template Core<T> local_apply(const Env<T>&, const OpCore<T>*, const Env<T>&, const Core<T>&, Index); \
  template RMat<T> local_dense(const Env<T>&, const OpCore<T>&, const Env<T>&);                    \
  template Vec<T> local_diagonal(const Env<T>&, const OpCore<T>&, const Env<T>&);

QTTHL_INSTANTIATE_CONTRACT(double)
QTTHL_INSTANTIATE_CONTRACT(cplx)

}  // namespace qtthl
