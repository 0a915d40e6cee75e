#pragma once

#include "qtthl/mpo.hpp"

namespace qtthl {

// Environment tensor with index order (bra, op, ket).
template <Scalar T>
struct Env {
  Index bra = 1;
  Index op = 1;
  Index ket = 1;
  std::vector<T> data;

  Env() : data(1, T(1)) {}
  Env(Index b, Index w, Index k) : bra(b), op(w), ket(k), data(static_cast<size_t>(b * w * k), T(0)) {}
  T& operator()(Index b, Index w, Index k) { return data[static_cast<size_t>((b * op + w) * ket + k)]; }
  const T& operator()(Index b, Index w, Index k) const { return data[static_cast<size_t>((b * op + w) * ket + k)]; }
};

// H[(a',s), w', b] = sum L[a',w,a] W[w,s,t,w'] X[a,t,b]; W == nullptr means identity.
template <Scalar T>
Env<T> half_left(const Env<T>& L, const OpCore<T>* W, const Core<T>& X);
// Next left environment: sum conj(Y[(a',s),b']) H[(a',s),w',b].
template <Scalar T>
Env<T> close_left(const Env<T>& H, const Core<T>& Y);
// Output core y[(a',s), b'] = sum H[(a',s),w',b] R[b',w',b], with `dim` = site dimension of y.
template <Scalar T>
Core<T> close_right(const Env<T>& H, const Env<T>& R, Index dim);

template <Scalar T>
Env<T> env_left(const Env<T>& L, const Core<T>& bra, const OpCore<T>* W, const Core<T>& ket);
template <Scalar T>
Env<T> env_right(const Env<T>& R, const Core<T>& bra, const OpCore<T>* W, const Core<T>& ket);

// Local operator application y = B x for the frame encoded in (L, R).
template <Scalar T>
Core<T> local_apply(const Env<T>& L, const OpCore<T>* W, const Env<T>& R, const Core<T>& x, Index out_dim);
// Dense local matrix, row index (a',s,b'), column index (a,t,b).
template <Scalar T>
RMat<T> local_dense(const Env<T>& L, const OpCore<T>& W, const Env<T>& R);
template <Scalar T>
Vec<T> local_diagonal(const Env<T>& L, const OpCore<T>& W, const Env<T>& R);

}  // namespace qtthl
