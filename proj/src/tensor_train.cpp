#include "qtthl/tensor_train.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "qtthl/svd.hpp"

namespace qtthl {

namespace {

template <Scalar T>
T random_entry(std::mt19937_64& rng, std::normal_distribution<double>& nd) {
  if constexpr (is_complex_v<T>) {
    double re = nd(rng);
    double im = nd(rng);
    return T(re, im);
  } else {
    return nd(rng);
  }
}

void require_same_dims(const std::vector<Index>& a, const std::vector<Index>& b, const char* what) {
  if (a != b) throw ShapeError(std::string(what) + ": site dimension mismatch");
}

// Thin QR of a (m x n) row-major matrix: returns Q (m x k), R (k x n), k = min(m, n).
template <Scalar T>
void thin_qr(const RMat<T>& a, RMat<T>& q, RMat<T>& r) {
  const Index m = a.rows();
  const Index n = a.cols();
  const Index k = std::min(m, n);
  Eigen::HouseholderQR<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>> qr(a);
  q = qr.householderQ() * Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>::Identity(m, k);
  r = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
}

// Smallest rank whose tail singular weight is <= delta, capped.
Index truncation_rank(const Eigen::VectorXd& s, double delta, Index max_rank, double* discarded) {
  const Index n = s.size();
  Index r = n;
  double tail = 0.0;
  while (r > 1) {
    double next = tail + s(r - 1) * s(r - 1);
    if (std::sqrt(next) > delta) break;
    tail = next;
    --r;
  }
  while (r > max_rank) {
    tail += s(r - 1) * s(r - 1);
    --r;
  }
  if (discarded) *discarded = std::sqrt(tail);
  return std::max<Index>(r, 1);
}

}  // namespace

template <Scalar T>
TensorTrain<T>::TensorTrain(std::vector<Core<T>> cores) : cores_(std::move(cores)) {
  validate();
}

template <Scalar T>
TensorTrain<T> TensorTrain<T>::zeros(std::span<const Index> site_dims) {
  std::vector<Core<T>> cores;
  for (Index n : site_dims) cores.emplace_back(1, n, 1);
  return TensorTrain(std::move(cores));
}

template <Scalar T>
TensorTrain<T> TensorTrain<T>::constant(std::span<const Index> site_dims, T value) {
  std::vector<Core<T>> cores;
  for (Index n : site_dims) {
    Core<T> c(1, n, 1);
    std::fill(c.data.begin(), c.data.end(), T(1));
    cores.push_back(std::move(c));
  }
  if (!cores.empty()) {
    for (auto& v : cores[0].data) v *= value;
  }
  return TensorTrain(std::move(cores));
}

template <Scalar T>
TensorTrain<T> TensorTrain<T>::product(const std::vector<std::vector<T>>& factors) {
  std::vector<Core<T>> cores;
  for (const auto& f : factors) {
    Core<T> c(1, static_cast<Index>(f.size()), 1);
    std::copy(f.begin(), f.end(), c.data.begin());
    cores.push_back(std::move(c));
  }
  return TensorTrain(std::move(cores));
}

template <Scalar T>
std::vector<Index> TensorTrain<T>::site_dims() const {
  std::vector<Index> d;
  d.reserve(cores_.size());
  for (const auto& c : cores_) d.push_back(c.dim);
  return d;
}

template <Scalar T>
std::vector<Index> TensorTrain<T>::ranks() const {
  std::vector<Index> r;
  if (cores_.empty()) return r;
  r.push_back(cores_.front().left);
  for (const auto& c : cores_) r.push_back(c.right);
  return r;
}

template <Scalar T>
Index TensorTrain<T>::max_rank() const {
  Index m = 1;
  for (const auto& c : cores_) m = std::max(m, c.right);
  return m;
}

template <Scalar T>
double TensorTrain<T>::dense_size() const {
  double s = 1.0;
  for (const auto& c : cores_) s *= static_cast<double>(c.dim);
  return s;
}

template <Scalar T>
void TensorTrain<T>::validate() const {
  if (cores_.empty()) return;
  if (cores_.front().left != 1 || cores_.back().right != 1) throw ShapeError("boundary ranks must be 1");
  for (size_t i = 0; i < cores_.size(); ++i) {
    const auto& c = cores_[i];
    if (c.left < 1 || c.dim < 1 || c.right < 1) throw ShapeError("non-positive core extent");
    if (static_cast<Index>(c.data.size()) != c.size()) throw ShapeError("core storage size mismatch");
    if (i + 1 < cores_.size() && c.right != cores_[i + 1].left) throw ShapeError("rank chain mismatch");
  }
}

template <Scalar T>
T TensorTrain<T>::evaluate(std::span<const int> idx) const {
  if (idx.size() != cores_.size()) throw ShapeError("evaluate: index length mismatch");
  std::vector<T> v(1, T(1));
  std::vector<T> w;
  for (size_t i = 0; i < cores_.size(); ++i) {
    const auto& c = cores_[i];
    const int s = idx[i];
    if (s < 0 || s >= c.dim) throw ShapeError("evaluate: index out of range");
    w.assign(static_cast<size_t>(c.right), T(0));
    for (Index a = 0; a < c.left; ++a) {
      const T va = v[static_cast<size_t>(a)];
      if (va == T(0)) continue;
      const T* row = &c.data[static_cast<size_t>((a * c.dim + s) * c.right)];
      for (Index b = 0; b < c.right; ++b) w[static_cast<size_t>(b)] += va * row[b];
    }
    v.swap(w);
  }
  return v[0];
}

template <Scalar T>
TensorTrain<T>& TensorTrain<T>::operator*=(T alpha) {
  if (cores_.empty()) return *this;
  size_t k = center_.value_or(0);
  for (auto& v : cores_[k].data) v *= alpha;
  return *this;
}

template <Scalar T>
TensorTrain<T> scale(const TensorTrain<T>& a, T alpha) {
  TensorTrain<T> out = a;
  out *= alpha;
  return out;
}

template <Scalar T>
TensorTrain<T> axpby(T alpha, const TensorTrain<T>& a, T beta, const TensorTrain<T>& b) {
  require_same_dims(a.site_dims(), b.site_dims(), "add");
  const size_t K = a.size();
  std::vector<Core<T>> cores;
  cores.reserve(K);
  for (size_t i = 0; i < K; ++i) {
    const auto& ca = a.core(i);
    const auto& cb = b.core(i);
    const Index n = ca.dim;
    if (K == 1) {
      Core<T> c(1, n, 1);
      for (Index s = 0; s < n; ++s) c(0, s, 0) = alpha * ca(0, s, 0) + beta * cb(0, s, 0);
      cores.push_back(std::move(c));
      continue;
    }
    const bool first = i == 0;
    const bool last = i + 1 == K;
    const Index l = first ? 1 : ca.left + cb.left;
    const Index r = last ? 1 : ca.right + cb.right;
    Core<T> c(l, n, r);
    const T fa = first ? alpha : T(1);
    const T fb = first ? beta : T(1);
    for (Index x = 0; x < ca.left; ++x)
      for (Index s = 0; s < n; ++s)
        for (Index y = 0; y < ca.right; ++y) c(x, s, y) = fa * ca(x, s, y);
    const Index lo = first ? 0 : ca.left;
    const Index ro = last ? 0 : ca.right;
    for (Index x = 0; x < cb.left; ++x)
      for (Index s = 0; s < n; ++s)
        for (Index y = 0; y < cb.right; ++y) c(lo + x, s, ro + y) += fb * cb(x, s, y);
    cores.push_back(std::move(c));
  }
  return TensorTrain<T>(std::move(cores));
}

template <Scalar T>
TensorTrain<T> add(const TensorTrain<T>& a, const TensorTrain<T>& b) {
  return axpby(T(1), a, T(1), b);
}

template <Scalar T>
T inner(const TensorTrain<T>& a, const TensorTrain<T>& b) {
  require_same_dims(a.site_dims(), b.site_dims(), "inner");
  RMat<T> e = RMat<T>::Ones(1, 1);
  for (size_t i = 0; i < a.size(); ++i) {
    const auto& ca = a.core(i);
    const auto& cb = b.core(i);
    // t = e * B (ra x n*rb) viewed as (ra*n) x rb
    RMat<T> t = e * cb.right_unfolding();
    Eigen::Map<RMat<T>> tv(t.data(), ca.left * ca.dim, cb.right);
    e = ca.left_unfolding().adjoint() * tv;
  }
  return e(0, 0);
}

template <Scalar T>
void left_orthogonalize(TensorTrain<T>& tt, size_t upto) {
  for (size_t i = 0; i < upto && i + 1 < tt.size(); ++i) {
    auto& c = tt.core(i);
    RMat<T> a = c.left_unfolding();
    RMat<T> q, r;
    thin_qr(a, q, r);
    const Index k = q.cols();
    Core<T> nc(c.left, c.dim, k);
    nc.left_unfolding() = q;
    auto& next = tt.core(i + 1);
    Core<T> nn(k, next.dim, next.right);
    nn.right_unfolding() = r * next.right_unfolding();
    c = std::move(nc);
    next = std::move(nn);
  }
  tt.set_ortho_center(std::min(upto, tt.size() - 1));
}

template <Scalar T>
void right_orthogonalize(TensorTrain<T>& tt, size_t downto) {
  if (tt.empty()) return;
  for (size_t i = tt.size() - 1; i > downto; --i) {
    auto& c = tt.core(i);
    RMat<T> a = c.right_unfolding().adjoint();  // (n*r) x l
    RMat<T> q, r;
    thin_qr(a, q, r);
    const Index k = q.cols();
    Core<T> nc(k, c.dim, c.right);
    nc.right_unfolding() = q.adjoint();
    auto& prev = tt.core(i - 1);
    Core<T> np(prev.left, prev.dim, k);
    np.left_unfolding() = prev.left_unfolding() * r.adjoint();
    c = std::move(nc);
    prev = std::move(np);
  }
  tt.set_ortho_center(downto);
}

template <Scalar T>
void canonicalize(TensorTrain<T>& tt, size_t center) {
  left_orthogonalize(tt, center);
  right_orthogonalize(tt, center);
  tt.set_ortho_center(center);
}

template <Scalar T>
double orthogonality_defect(const TensorTrain<T>& tt, size_t center) {
  double worst = 0.0;
  for (size_t i = 0; i < tt.size(); ++i) {
    if (i == center) continue;
    const auto& c = tt.core(i);
    RMat<T> g;
    if (i < center) {
      g = c.left_unfolding().adjoint() * c.left_unfolding();
    } else {
      g = c.right_unfolding() * c.right_unfolding().adjoint();
    }
    g -= RMat<T>::Identity(g.rows(), g.cols());
    worst = std::max(worst, g.cwiseAbs().maxCoeff());
  }
  return worst;
}

template <Scalar T>
double norm(const TensorTrain<T>& a) {
  if (a.empty()) return 0.0;
  TensorTrain<T> t = a;
  left_orthogonalize(t, t.size() - 1);
  const auto& c = t.core(t.size() - 1);
  double s = 0.0;
  for (const auto& v : c.data) s += std::norm(v);
  return std::sqrt(s);
}

template <Scalar T>
double distance(const TensorTrain<T>& a, const TensorTrain<T>& b) {
  return norm(axpby(T(1), a, T(-1), b));
}

template <Scalar T>
TensorTrain<T> hadamard(const TensorTrain<T>& a, const TensorTrain<T>& b) {
  require_same_dims(a.site_dims(), b.site_dims(), "hadamard");
  std::vector<Core<T>> cores;
  for (size_t i = 0; i < a.size(); ++i) {
    const auto& ca = a.core(i);
    const auto& cb = b.core(i);
    Core<T> c(ca.left * cb.left, ca.dim, ca.right * cb.right);
    for (Index x = 0; x < ca.left; ++x)
      for (Index u = 0; u < cb.left; ++u)
        for (Index s = 0; s < ca.dim; ++s)
          for (Index y = 0; y < ca.right; ++y) {
            const T va = ca(x, s, y);
            if (va == T(0)) continue;
            for (Index v = 0; v < cb.right; ++v) c(x * cb.left + u, s, y * cb.right + v) = va * cb(u, s, v);
          }
    cores.push_back(std::move(c));
  }
  return TensorTrain<T>(std::move(cores));
}

template <Scalar T>
TensorTrain<T> round(const TensorTrain<T>& tt, double tol, Index max_rank, TruncationInfo* info) {
  TensorTrain<T> t = tt;
  const size_t K = t.size();
  if (K == 0) return t;
  left_orthogonalize(t, K - 1);
  double nrm = 0.0;
  for (const auto& v : t.core(K - 1).data) nrm += std::norm(v);
  nrm = std::sqrt(nrm);
  const double delta = K > 1 ? tol * nrm / std::sqrt(static_cast<double>(K - 1)) : 0.0;
  double discarded2 = 0.0;
  for (size_t i = K - 1; i > 0; --i) {
    auto& c = t.core(i);
    RMat<T> m = c.right_unfolding();
    const ThinSvd<T> svd = thin_svd<T>(m);
    const Eigen::VectorXd s = svd.s;
    double disc = 0.0;
    const Index r = truncation_rank(s, delta, max_rank, &disc);
    discarded2 += disc * disc;
    Core<T> nc(r, c.dim, c.right);
    nc.right_unfolding() = svd.V.leftCols(r).adjoint();
    RMat<T> us = svd.U.leftCols(r) * s.head(r).asDiagonal();
    auto& prev = t.core(i - 1);
    Core<T> np(prev.left, prev.dim, r);
    np.left_unfolding() = prev.left_unfolding() * us;
    c = std::move(nc);
    prev = std::move(np);
  }
  t.set_ortho_center(0);
  if (info) {
    info->discarded = std::sqrt(discarded2);
    info->norm = nrm;
  }
  return t;
}

std::vector<Index> rank_caps(std::span<const Index> site_dims) {
  const size_t K = site_dims.size();
  std::vector<Index> caps(K + 1, 1);
  const double big = static_cast<double>(kUnboundedRank);
  std::vector<double> left(K + 1, 1.0), right(K + 1, 1.0);
  for (size_t i = 0; i < K; ++i) left[i + 1] = std::min(big, left[i] * static_cast<double>(site_dims[i]));
  for (size_t i = K; i > 0; --i) right[i - 1] = std::min(big, right[i] * static_cast<double>(site_dims[i - 1]));
  for (size_t i = 0; i <= K; ++i) caps[i] = static_cast<Index>(std::min(left[i], right[i]));
  caps[0] = 1;
  caps[K] = 1;
  return caps;
}

template <Scalar T>
TensorTrain<T> random_train(std::span<const Index> site_dims, std::span<const Index> ranks, std::uint64_t seed) {
  const size_t K = site_dims.size();
  if (ranks.size() != K + 1 || ranks.front() != 1 || ranks.back() != 1) throw ShapeError("random_train: invalid rank chain");
  for (Index r : ranks)
    if (r < 1) throw ShapeError("random_train: invalid rank chain");
  const auto caps = rank_caps(site_dims);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<Core<T>> cores;
  for (size_t i = 0; i < K; ++i) {
    const Index l = std::min(ranks[i], caps[i]);
    const Index r = std::min(ranks[i + 1], caps[i + 1]);
    Core<T> c(l, site_dims[i], r);
    for (auto& v : c.data) v = random_entry<T>(rng, nd);
    cores.push_back(std::move(c));
  }
  TensorTrain<T> t(std::move(cores));
  const double n = norm(t);
  if (n > 0) t *= T(1.0 / n);
  return t;
}

template <Scalar T>
TensorTrain<T> random_train(std::span<const Index> site_dims, Index rank, std::uint64_t seed) {
  std::vector<Index> r(site_dims.size() + 1, rank);
  r.front() = 1;
  r.back() = 1;
  return random_train<T>(site_dims, std::span<const Index>(r), seed);
}

template <Scalar T>
std::vector<T> to_dense(const TensorTrain<T>& tt) {
  if (tt.dense_size() > static_cast<double>(1u << 26)) throw ShapeError("to_dense: train too large");
  RMat<T> acc = RMat<T>::Ones(1, 1);  // rows: multi-index so far, cols: bond
  for (size_t i = 0; i < tt.size(); ++i) {
    const auto& c = tt.core(i);
    RMat<T> next = acc * c.right_unfolding();  // rows x (n*r)
    acc = Eigen::Map<RMat<T>>(next.data(), next.rows() * c.dim, c.right);
  }
  return std::vector<T>(acc.data(), acc.data() + acc.size());
}

template <Scalar T>
TensorTrain<T> from_dense(std::span<const T> values, std::span<const Index> site_dims, double tol, Index max_rank) {
  const size_t K = site_dims.size();
  double total = 1;
  for (Index n : site_dims) total *= static_cast<double>(n);
  if (static_cast<double>(values.size()) != total) throw ShapeError("from_dense: size mismatch");
  const double nrm = Eigen::Map<const Vec<T>>(values.data(), static_cast<Index>(values.size())).norm();
  const double delta = K > 1 ? tol * nrm / std::sqrt(static_cast<double>(K - 1)) : 0.0;
  std::vector<Core<T>> cores;
  RMat<T> rest = Eigen::Map<const RMat<T>>(values.data(), 1, static_cast<Index>(values.size()));
  Index rl = 1;
  for (size_t i = 0; i + 1 < K; ++i) {
    const Index n = site_dims[i];
    const Index cols = rest.size() / (rl * n);
    RMat<T> m = Eigen::Map<RMat<T>>(rest.data(), rl * n, cols);
    const ThinSvd<T> svd = thin_svd<T>(m);
    const Index r = truncation_rank(svd.s, delta, max_rank, nullptr);
    Core<T> c(rl, n, r);
    c.left_unfolding() = svd.U.leftCols(r);
    cores.push_back(std::move(c));
    rest = svd.s.head(r).asDiagonal() * svd.V.leftCols(r).adjoint();
    rl = r;
  }
  Core<T> last(rl, site_dims[K - 1], 1);
  std::copy(rest.data(), rest.data() + rest.size(), last.data.begin());
  cores.push_back(std::move(last));
  TensorTrain<T> t(std::move(cores));
  t.set_ortho_center(K - 1);
  return t;
}

template <Scalar T>
TensorTrain<T> prepend_unit_site(const TensorTrain<T>& tt) {
  std::vector<Core<T>> cores;
  Core<T> u(1, 1, 1);
  u(0, 0, 0) = T(1);
  cores.push_back(std::move(u));
  for (const auto& c : tt.cores()) cores.push_back(c);
  return TensorTrain<T>(std::move(cores));
}

template <Scalar T>
TensorTrain<T> drop_unit_site(const TensorTrain<T>& tt) {
  if (tt.size() < 2 || tt.core(0).dim != 1) throw ShapeError("drop_unit_site: leading site is not of dimension 1");
  const auto& c0 = tt.core(0);
  const auto& c1 = tt.core(1);
  Core<T> merged(1, c1.dim, c1.right);
  merged.right_unfolding() = c0.left_unfolding() * c1.right_unfolding();
  std::vector<Core<T>> cores;
  cores.push_back(std::move(merged));
  for (size_t i = 2; i < tt.size(); ++i) cores.push_back(tt.core(i));
  return TensorTrain<T>(std::move(cores));
}

template <Scalar T>
TensorTrain<T> insert_constant_sites(const TensorTrain<T>& tt, size_t pos, Index count, Index dim) {
  if (pos > tt.size()) throw ShapeError("insert_constant_sites: position out of range");
  const Index r = pos == 0 ? 1 : tt.core(pos - 1).right;
  std::vector<Core<T>> cores;
  for (size_t i = 0; i < pos; ++i) cores.push_back(tt.core(i));
  for (Index k = 0; k < count; ++k) {
    Core<T> c(r, dim, r);
    for (Index a = 0; a < r; ++a)
      for (Index s = 0; s < dim; ++s) c(a, s, a) = T(1);
    cores.push_back(std::move(c));
  }
  for (size_t i = pos; i < tt.size(); ++i) cores.push_back(tt.core(i));
  return TensorTrain<T>(std::move(cores));
}

TensorTrain<cplx> to_complex(const TensorTrain<double>& tt) {
  std::vector<Core<cplx>> cores;
  for (const auto& c : tt.cores()) {
    Core<cplx> z(c.left, c.dim, c.right);
    for (size_t i = 0; i < c.data.size(); ++i) z.data[i] = c.data[i];
    cores.push_back(std::move(z));
  }
  return TensorTrain<cplx>(std::move(cores));
}

namespace {
// Real 2x2-block embedding of complex cores; `take_imag` selects Im instead of Re at the output.
TensorTrain<double> realify(const TensorTrain<cplx>& tt, bool take_imag) {
  const size_t K = tt.size();
  std::vector<Core<double>> cores;
  for (size_t i = 0; i < K; ++i) {
    const auto& c = tt.core(i);
    const bool first = i == 0;
    const bool last = i + 1 == K;
    const Index l = first ? 1 : 2 * c.left;
    const Index r = last ? 1 : 2 * c.right;
    Core<double> o(l, c.dim, r);
    // Block form of z acting as row vector [Re, Im] -> [Re, Im]: [[re, im], [-im, re]].
    for (Index a = 0; a < c.left; ++a)
      for (Index s = 0; s < c.dim; ++s)
        for (Index b = 0; b < c.right; ++b) {
          const double re = c(a, s, b).real();
          const double im = c(a, s, b).imag();
          for (int p = 0; p < 2; ++p) {
            if (first && p == 1) continue;
            for (int q = 0; q < 2; ++q) {
              if (last && q != (take_imag ? 1 : 0)) continue;
              double v = (p == q) ? re : (p == 0 ? im : -im);
              const Index row = first ? 0 : 2 * a + p;
              const Index col = last ? 0 : 2 * b + q;
              o(row, s, col) += v;
            }
          }
        }
    cores.push_back(std::move(o));
  }
  if (K == 1) {
    const auto& c = tt.core(0);
    Core<double> o(1, c.dim, 1);
    for (Index s = 0; s < c.dim; ++s) o(0, s, 0) = take_imag ? c(0, s, 0).imag() : c(0, s, 0).real();
    cores.clear();
    cores.push_back(std::move(o));
  }
  return TensorTrain<double>(std::move(cores));
}
}  // namespace

TensorTrain<double> real_part(const TensorTrain<cplx>& tt) { return realify(tt, false); }
TensorTrain<double> imag_part(const TensorTrain<cplx>& tt) { return realify(tt, true); }

#define QTTHL_INSTANTIATE(T)                                                                                  \
  template class TensorTrain<T>;                                                                              \
  template TensorTrain<T> add(const TensorTrain<T>&, const TensorTrain<T>&);                                  \
  template TensorTrain<T> scale(const TensorTrain<T>&, T);                                                    \
  template TensorTrain<T> axpby(T, const TensorTrain<T>&, T, const TensorTrain<T>&);                          \
  template T inner(const TensorTrain<T>&, const TensorTrain<T>&);                                             \
  template double norm(const TensorTrain<T>&);                                                                \
  template double distance(const TensorTrain<T>&, const TensorTrain<T>&);                                     \
  template TensorTrain<T> hadamard(const TensorTrain<T>&, const TensorTrain<T>&);                             \
  template void left_orthogonalize(TensorTrain<T>&, size_t);                                                  \
  template void right_orthogonalize(TensorTrain<T>&, size_t);                                                 \
  template void canonicalize(TensorTrain<T>&, size_t);                                                        \
  template double orthogonality_defect(const TensorTrain<T>&, size_t);                                        \
  template TensorTrain<T> round(const TensorTrain<T>&, double, Index, TruncationInfo*);                       \
  template TensorTrain<T> random_train(std::span<const Index>, std::span<const Index>, std::uint64_t);        \
  template TensorTrain<T> random_train(std::span<const Index>, Index, std::uint64_t);                         \
  template std::vector<T> to_dense(const TensorTrain<T>&);                                                    \
  template TensorTrain<T> from_dense(std::span<const T>, std::span<const Index>, double, Index);              \
  template TensorTrain<T> prepend_unit_site(const TensorTrain<T>&);                                           \
  template TensorTrain<T> drop_unit_site(const TensorTrain<T>&);                                              \
  template TensorTrain<T> insert_constant_sites(const TensorTrain<T>&, size_t, Index, Index);

QTTHL_INSTANTIATE(double)
QTTHL_INSTANTIATE(cplx)

}  // namespace qtthl
