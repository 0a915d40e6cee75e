#include "qtthl/mpo.hpp"

#include <algorithm>

namespace qtthl {

template <Scalar T>
Mpo<T>::Mpo(std::vector<OpCore<T>> cores) : cores_(std::move(cores)) {
  validate();
}

template <Scalar T>
Mpo<T> Mpo<T>::identity(std::span<const Index> dims) {
  std::vector<OpCore<T>> cores;
  for (Index n : dims) {
    OpCore<T> c(1, n, n, 1);
    for (Index s = 0; s < n; ++s) c(0, s, s, 0) = T(1);
    cores.push_back(std::move(c));
  }
  return Mpo(std::move(cores));
}

template <Scalar T>
Mpo<T> Mpo<T>::product(const std::vector<RMat<T>>& factors) {
  std::vector<OpCore<T>> cores;
  for (const auto& f : factors) {
    OpCore<T> c(1, f.rows(), f.cols(), 1);
    for (Index s = 0; s < f.rows(); ++s)
      for (Index t = 0; t < f.cols(); ++t) c(0, s, t, 0) = f(s, t);
    cores.push_back(std::move(c));
  }
  return Mpo(std::move(cores));
}

template <Scalar T>
std::vector<Index> Mpo<T>::row_dims() const {
  std::vector<Index> d;
  for (const auto& c : cores_) d.push_back(c.rows);
  return d;
}

template <Scalar T>
std::vector<Index> Mpo<T>::col_dims() const {
  std::vector<Index> d;
  for (const auto& c : cores_) d.push_back(c.cols);
  return d;
}

template <Scalar T>
std::vector<Index> Mpo<T>::ranks() const {
  std::vector<Index> r;
  if (cores_.empty()) return r;
  r.push_back(cores_.front().left);
  for (const auto& c : cores_) r.push_back(c.right);
  return r;
}

template <Scalar T>
Index Mpo<T>::max_rank() const {
  Index m = 1;
  for (const auto& c : cores_) m = std::max(m, c.right);
  return m;
}

template <Scalar T>
void Mpo<T>::validate() const {
  if (cores_.empty()) return;
  if (cores_.front().left != 1 || cores_.back().right != 1) throw ShapeError("mpo: boundary ranks must be 1");
  for (size_t i = 0; i < cores_.size(); ++i) {
    const auto& c = cores_[i];
    if (static_cast<Index>(c.data.size()) != c.size()) throw ShapeError("mpo: core storage mismatch");
    if (i + 1 < cores_.size() && c.right != cores_[i + 1].left) throw ShapeError("mpo: rank chain mismatch");
  }
}

template <Scalar T>
Mpo<T>& Mpo<T>::operator*=(T alpha) {
  if (!cores_.empty())
    for (auto& v : cores_[0].data) v *= alpha;
  return *this;
}

template <Scalar T>
TensorTrain<T> apply(const Mpo<T>& op, const TensorTrain<T>& x) {
  if (op.col_dims() != x.site_dims()) throw ShapeError("apply: dimension mismatch");
  std::vector<Core<T>> cores;
  for (size_t i = 0; i < x.size(); ++i) {
    const auto& w = op.core(i);
    const auto& c = x.core(i);
    // Wm[(wl, s, wr), t], Xm[t, (a, b)]
    RMat<T> wm(w.left * w.rows * w.right, w.cols);
    for (Index a = 0; a < w.left; ++a)
      for (Index s = 0; s < w.rows; ++s)
        for (Index t = 0; t < w.cols; ++t)
          for (Index b = 0; b < w.right; ++b) wm((a * w.rows + s) * w.right + b, t) = w(a, s, t, b);
    RMat<T> xm(c.dim, c.left * c.right);
    for (Index a = 0; a < c.left; ++a)
      for (Index t = 0; t < c.dim; ++t)
        for (Index b = 0; b < c.right; ++b) xm(t, a * c.right + b) = c(a, t, b);
    RMat<T> prod = wm * xm;
    Core<T> o(w.left * c.left, w.rows, w.right * c.right);
    for (Index wa = 0; wa < w.left; ++wa)
      for (Index s = 0; s < w.rows; ++s)
        for (Index wb = 0; wb < w.right; ++wb)
          for (Index a = 0; a < c.left; ++a)
            for (Index b = 0; b < c.right; ++b)
              o(wa * c.left + a, s, wb * c.right + b) = prod((wa * w.rows + s) * w.right + wb, a * c.right + b);
    cores.push_back(std::move(o));
  }
  return TensorTrain<T>(std::move(cores));
}

template <Scalar T>
Mpo<T> compose(const Mpo<T>& a, const Mpo<T>& b) {
  if (a.col_dims() != b.row_dims()) throw ShapeError("compose: dimension mismatch");
  std::vector<OpCore<T>> cores;
  for (size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.core(i);
    const auto& y = b.core(i);
    OpCore<T> o(x.left * y.left, x.rows, y.cols, x.right * y.right);
    for (Index xa = 0; xa < x.left; ++xa)
      for (Index s = 0; s < x.rows; ++s)
        for (Index t = 0; t < x.cols; ++t)
          for (Index xb = 0; xb < x.right; ++xb) {
            const T vx = x(xa, s, t, xb);
            if (vx == T(0)) continue;
            for (Index ya = 0; ya < y.left; ++ya)
              for (Index u = 0; u < y.cols; ++u)
                for (Index yb = 0; yb < y.right; ++yb) {
                  const T vy = y(ya, t, u, yb);
                  if (vy == T(0)) continue;
                  o(xa * y.left + ya, s, u, xb * y.right + yb) += vx * vy;
                }
          }
    cores.push_back(std::move(o));
  }
  return Mpo<T>(std::move(cores));
}

template <Scalar T>
Mpo<T> axpby(T alpha, const Mpo<T>& a, T beta, const Mpo<T>& b) {
  if (a.row_dims() != b.row_dims() || a.col_dims() != b.col_dims()) throw ShapeError("mpo add: dimension mismatch");
  const size_t K = a.size();
  std::vector<OpCore<T>> cores;
  for (size_t i = 0; i < K; ++i) {
    const auto& x = a.core(i);
    const auto& y = b.core(i);
    const bool first = i == 0;
    const bool last = i + 1 == K;
    if (K == 1) {
      OpCore<T> o(1, x.rows, x.cols, 1);
      for (size_t j = 0; j < o.data.size(); ++j) o.data[j] = alpha * x.data[j] + beta * y.data[j];
      cores.push_back(std::move(o));
      continue;
    }
    const Index l = first ? 1 : x.left + y.left;
    const Index r = last ? 1 : x.right + y.right;
    OpCore<T> o(l, x.rows, x.cols, r);
    const T fa = first ? alpha : T(1);
    const T fb = first ? beta : T(1);
    for (Index p = 0; p < x.left; ++p)
      for (Index s = 0; s < x.rows; ++s)
        for (Index t = 0; t < x.cols; ++t)
          for (Index q = 0; q < x.right; ++q) o(p, s, t, q) = fa * x(p, s, t, q);
    const Index lo = first ? 0 : x.left;
    const Index ro = last ? 0 : x.right;
    for (Index p = 0; p < y.left; ++p)
      for (Index s = 0; s < y.rows; ++s)
        for (Index t = 0; t < y.cols; ++t)
          for (Index q = 0; q < y.right; ++q) o(lo + p, s, t, ro + q) += fb * y(p, s, t, q);
    cores.push_back(std::move(o));
  }
  return Mpo<T>(std::move(cores));
}

template <Scalar T>
Mpo<T> add(const Mpo<T>& a, const Mpo<T>& b) {
  return axpby(T(1), a, T(1), b);
}

template <Scalar T>
Mpo<T> adjoint(const Mpo<T>& a) {
  std::vector<OpCore<T>> cores;
  for (const auto& c : a.cores()) {
    OpCore<T> o(c.left, c.cols, c.rows, c.right);
    for (Index p = 0; p < c.left; ++p)
      for (Index s = 0; s < c.rows; ++s)
        for (Index t = 0; t < c.cols; ++t)
          for (Index q = 0; q < c.right; ++q) o(p, t, s, q) = conj(c(p, s, t, q));
    cores.push_back(std::move(o));
  }
  return Mpo<T>(std::move(cores));
}

template <Scalar T>
Mpo<T> reversed(const Mpo<T>& a) {
  std::vector<OpCore<T>> cores;
  for (size_t i = a.size(); i > 0; --i) {
    const auto& c = a.core(i - 1);
    OpCore<T> o(c.right, c.rows, c.cols, c.left);
    for (Index p = 0; p < c.left; ++p)
      for (Index s = 0; s < c.rows; ++s)
        for (Index t = 0; t < c.cols; ++t)
          for (Index q = 0; q < c.right; ++q) o(q, s, t, p) = c(p, s, t, q);
    cores.push_back(std::move(o));
  }
  return Mpo<T>(std::move(cores));
}

template <Scalar T>
Mpo<T> concatenate(const Mpo<T>& a, const Mpo<T>& b) {
  std::vector<OpCore<T>> cores = a.cores();
  for (const auto& c : b.cores()) cores.push_back(c);
  return Mpo<T>(std::move(cores));
}

template <Scalar T>
TensorTrain<T> as_train(const Mpo<T>& a) {
  std::vector<Core<T>> cores;
  for (const auto& c : a.cores()) {
    Core<T> t(c.left, c.rows * c.cols, c.right);
    t.data = c.data;
    cores.push_back(std::move(t));
  }
  return TensorTrain<T>(std::move(cores));
}

template <Scalar T>
Mpo<T> from_train(const TensorTrain<T>& t, std::span<const Index> rows, std::span<const Index> cols) {
  if (rows.size() != t.size() || cols.size() != t.size()) throw ShapeError("from_train: dims length mismatch");
  std::vector<OpCore<T>> cores;
  for (size_t i = 0; i < t.size(); ++i) {
    const auto& c = t.core(i);
    if (c.dim != rows[i] * cols[i]) throw ShapeError("from_train: site dimension mismatch");
    OpCore<T> o(c.left, rows[i], cols[i], c.right);
    o.data = c.data;
    cores.push_back(std::move(o));
  }
  return Mpo<T>(std::move(cores));
}

template <Scalar T>
Mpo<T> round(const Mpo<T>& a, double tol, Index max_rank, TruncationInfo* info) {
  const auto rows = a.row_dims();
  const auto cols = a.col_dims();
  return from_train(round(as_train(a), tol, max_rank, info), rows, cols);
}

template <Scalar T>
Mpo<T> diag_of(const TensorTrain<T>& field) {
  std::vector<OpCore<T>> cores;
  for (const auto& c : field.cores()) {
    OpCore<T> o(c.left, c.dim, c.dim, c.right);
    for (Index p = 0; p < c.left; ++p)
      for (Index s = 0; s < c.dim; ++s)
        for (Index q = 0; q < c.right; ++q) o(p, s, s, q) = c(p, s, q);
    cores.push_back(std::move(o));
  }
  return Mpo<T>(std::move(cores));
}

template <Scalar T>
RMat<T> to_dense(const Mpo<T>& a) {
  Index nr = 1, nc = 1;
  for (const auto& c : a.cores()) {
    nr *= c.rows;
    nc *= c.cols;
  }
  if (static_cast<double>(nr) * static_cast<double>(nc) > static_cast<double>(1u << 26))
    throw ShapeError("to_dense(mpo): operator too large");
  // acc[(row, col), bond]
  RMat<T> acc = RMat<T>::Ones(1, 1);
  Index rsz = 1, csz = 1;
  for (const auto& c : a.cores()) {
    RMat<T> next = RMat<T>::Zero(rsz * c.rows * csz * c.cols, c.right);
    for (Index r0 = 0; r0 < rsz; ++r0)
      for (Index c0 = 0; c0 < csz; ++c0)
        for (Index p = 0; p < c.left; ++p) {
          const T v = acc(r0 * csz + c0, p);
          if (v == T(0)) continue;
          for (Index s = 0; s < c.rows; ++s)
            for (Index t = 0; t < c.cols; ++t)
              for (Index q = 0; q < c.right; ++q)
                next(((r0 * c.rows + s) * csz + c0) * c.cols + t, q) += v * c(p, s, t, q);
        }
    rsz *= c.rows;
    csz *= c.cols;
    acc = std::move(next);
  }
  RMat<T> out(rsz, csz);
  for (Index r = 0; r < rsz; ++r)
    for (Index c = 0; c < csz; ++c) out(r, c) = acc(r * csz + c, 0);
  return out;
}

template <Scalar T>
Mpo<T> from_dense(const RMat<T>& m, std::span<const Index> rows, std::span<const Index> cols, double tol) {
  const size_t K = rows.size();
  std::vector<Index> merged(K);
  Index total = 1;
  for (size_t i = 0; i < K; ++i) {
    merged[i] = rows[i] * cols[i];
    total *= merged[i];
  }
  if (m.size() != total) throw ShapeError("from_dense(mpo): size mismatch");
  std::vector<T> v(static_cast<size_t>(total));
  // interleave (s1..sK) x (t1..tK) into (s1 t1)(s2 t2)...
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) {
      Index rr = r, cc = c, idx = 0, mult = 1;
      for (size_t i = K; i > 0; --i) {
        const Index s = rr % rows[i - 1];
        const Index t = cc % cols[i - 1];
        rr /= rows[i - 1];
        cc /= cols[i - 1];
        idx += (s * cols[i - 1] + t) * mult;
        mult *= merged[i - 1];
      }
      v[static_cast<size_t>(idx)] = m(r, c);
    }
  auto t = from_dense<T>(std::span<const T>(v), std::span<const Index>(merged), tol);
  return from_train(t, rows, cols);
}

Mpo<cplx> to_complex(const Mpo<double>& a) {
  std::vector<OpCore<cplx>> cores;
  for (const auto& c : a.cores()) {
    OpCore<cplx> o(c.left, c.rows, c.cols, c.right);
    for (size_t i = 0; i < c.data.size(); ++i) o.data[i] = c.data[i];
    cores.push_back(std::move(o));
  }
  return Mpo<cplx>(std::move(cores));
}

#define QTTHL_INSTANTIATE_MPO(T)                                                                   \
  template class Mpo<T>;                                                                           \
  template TensorTrain<T> apply(const Mpo<T>&, const TensorTrain<T>&);                             \
  template Mpo<T> compose(const Mpo<T>&, const Mpo<T>&);                                           \
  template Mpo<T> add(const Mpo<T>&, const Mpo<T>&);                                               \
  template Mpo<T> axpby(T, const Mpo<T>&, T, const Mpo<T>&);                                       \
  template Mpo<T> adjoint(const Mpo<T>&);                                                          \
  template Mpo<T> reversed(const Mpo<T>&);                                                         \
  template Mpo<T> concatenate(const Mpo<T>&, const Mpo<T>&);                                       \
  template TensorTrain<T> as_train(const Mpo<T>&);                                                 \
  template Mpo<T> from_train(const TensorTrain<T>&, std::span<const Index>, std::span<const Index>); \
  template Mpo<T> round(const Mpo<T>&, double, Index, TruncationInfo*);                            \
  template Mpo<T> diag_of(const TensorTrain<T>&);                                                  \
  template RMat<T> to_dense(const Mpo<T>&);                                                        \
  template Mpo<T> from_dense(const RMat<T>&, std::span<const Index>, std::span<const Index>, double);

QTTHL_INSTANTIATE_MPO(double)
QTTHL_INSTANTIATE_MPO(cplx)

}  // namespace qtthl
