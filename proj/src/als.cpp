#include "qtthl/als.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <random>

#include "qtthl/contract.hpp"

namespace qtthl {

namespace {

constexpr double kNonPdRatio = 1e-8;
constexpr double kEnergySlack = 1e-10;

template <Scalar T>
void thin_qr_step(const RMat<T>& a, RMat<T>& q, RMat<T>& r) {
  Eigen::HouseholderQR<RMat<T>> qr(a);
  const Index k = std::min(a.rows(), a.cols());
  q = qr.householderQ() * RMat<T>::Identity(a.rows(), k);
  r = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
}

// Moves the orthogonality center from site k to k + 1.
template <Scalar T>
void shift_right(TensorTrain<T>& x, size_t k) {
  auto& c = x.core(k);
  RMat<T> q, r;
  thin_qr_step<T>(RMat<T>(c.left_unfolding()), q, r);
  if (q.cols() != c.right) throw ShapeError("als: rank exceeds the representable bound");
  c.left_unfolding() = q;
  auto& n = x.core(k + 1);
  RMat<T> next = r * n.right_unfolding();
  n.right_unfolding() = next;
  x.set_ortho_center(k + 1);
}

// Moves the orthogonality center from site k to k - 1.
template <Scalar T>
void shift_left(TensorTrain<T>& x, size_t k) {
  auto& c = x.core(k);
  RMat<T> q, r;
  thin_qr_step<T>(RMat<T>(c.right_unfolding().adjoint()), q, r);
  if (q.cols() != c.left) throw ShapeError("als: rank exceeds the representable bound");
  c.right_unfolding() = q.adjoint();
  auto& p = x.core(k - 1);
  RMat<T> prev = p.left_unfolding() * r.adjoint();
  p.left_unfolding() = prev;
  x.set_ortho_center(k - 1);
}

// Extreme Ritz values of a Hermitian operator, full reorthogonalization.
template <Scalar T, class MatVec>
std::pair<double, double> lanczos_extremes(const MatVec& mv, Index n, int steps, std::uint64_t seed) {
  const int m = static_cast<int>(std::min<Index>(n, steps));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Vec<T> v(n);
  for (Index i = 0; i < n; ++i) v[i] = T(nd(rng));
  v /= v.norm();
  std::vector<Vec<T>> basis;
  std::vector<double> alpha, beta;
  for (int j = 0; j < m; ++j) {
    basis.push_back(v);
    Vec<T> w = mv(v);
    const double a = real_part(v.dot(w));
    alpha.push_back(a);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& u : basis) w -= u * u.dot(w);
    const double b = w.norm();
    if (j + 1 == m || b <= 1e-14 * std::abs(a)) break;
    beta.push_back(b);
    v = w / b;
  }
  const int k = static_cast<int>(alpha.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    t(i, i) = alpha[static_cast<size_t>(i)];
    if (i + 1 < k) t(i, i + 1) = t(i + 1, i) = beta[static_cast<size_t>(i)];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t, Eigen::EigenvaluesOnly);
  return {es.eigenvalues()[0], es.eigenvalues()[k - 1]};
}

template <Scalar T>
[[noreturn]] void throw_non_pd(size_t site, double lmin, double lmax) {
  throw SolverError("als: local system at site " + std::to_string(site) +
                    " is not positive definite (lambda_min=" + std::to_string(lmin) +
                    ", lambda_max=" + std::to_string(lmax) + ")");
}

template <Scalar T>
struct Frame {
  const std::vector<OperatorTerm<T>>& terms;
  std::vector<const Env<T>*> L, R;
  size_t site;

  Core<T> apply(const Core<T>& x) const {
    Core<T> y(x.left, x.dim, x.right);
    for (size_t t = 0; t < terms.size(); ++t) {
      const Core<T> yt = local_apply(*L[t], &terms[t].op->core(site), *R[t], x, x.dim);
      for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += terms[t].coeff * yt.data[i];
    }
    return y;
  }
  RMat<T> dense() const {
    RMat<T> B;
    for (size_t t = 0; t < terms.size(); ++t) {
      RMat<T> bt = local_dense(*L[t], terms[t].op->core(site), *R[t]);
      if (t == 0)
        B = terms[t].coeff * bt;
      else
        B += terms[t].coeff * bt;
    }
    return B;
  }
  Vec<T> diagonal() const {
    Vec<T> d;
    for (size_t t = 0; t < terms.size(); ++t) {
      Vec<T> dt = local_diagonal(*L[t], terms[t].op->core(site), *R[t]);
      if (t == 0)
        d = terms[t].coeff * dt;
      else
        d += terms[t].coeff * dt;
    }
    return d;
  }
};

template <Scalar T>
Vec<T> as_vec(const Core<T>& c) {
  return Eigen::Map<const Vec<T>>(c.data.data(), c.size());
}

template <Scalar T>
Core<T> as_core(const Vec<T>& v, const Core<T>& shape) {
  Core<T> c(shape.left, shape.dim, shape.right);
  std::copy(v.data(), v.data() + v.size(), c.data.begin());
  return c;
}

struct LocalStats {
  double cond = 0.0;
  double rel_err = 0.0;
  std::string cond_method;
};

template <Scalar T>
Vec<T> solve_direct(const RMat<T>& B, const Vec<T>& r, size_t site, const SolveConfig& cfg, LocalStats& st) {
  const Index n = B.rows();
  Eigen::LLT<RMat<T>> llt(B);
  Vec<T> c;
  if (llt.info() == Eigen::Success) {
    c = llt.solve(r);
    if (cfg.measure_condition) {
      if (n <= cfg.cond_dense_limit) {
        Eigen::SelfAdjointEigenSolver<RMat<T>> es(B, Eigen::EigenvaluesOnly);
        const double lmin = es.eigenvalues()[0], lmax = es.eigenvalues()[n - 1];
        if (lmin < -kNonPdRatio * lmax) throw_non_pd<T>(site, lmin, lmax);
        st.cond = lmax / std::max(lmin, std::numeric_limits<double>::min());
        st.cond_method = "dense";
      } else {
        const auto mv = [&](const Vec<T>& v) -> Vec<T> { return B * v; };
        const auto inv = [&](const Vec<T>& v) -> Vec<T> { return llt.solve(v); };
        const double lmax = lanczos_extremes<T>(mv, n, cfg.lanczos_steps, cfg.seed + site).second;
        const double imax = lanczos_extremes<T>(inv, n, cfg.lanczos_steps, cfg.seed + site + 7).second;
        st.cond = lmax * imax;
        st.cond_method = "lanczos";
      }
    }
  } else {
    Eigen::SelfAdjointEigenSolver<RMat<T>> es(B);
    const auto& ev = es.eigenvalues();
    const double lmin = ev[0], lmax = ev[n - 1];
    if (lmin < -kNonPdRatio * lmax || lmax <= 0) throw_non_pd<T>(site, lmin, lmax);
    // Semidefinite to roundoff: pseudo-inverse on the numerically positive part.
    Vec<T> proj = es.eigenvectors().adjoint() * r;
    for (Index i = 0; i < n; ++i) proj[i] = ev[i] > kNonPdRatio * lmax ? proj[i] / ev[i] : T(0);
    c = es.eigenvectors() * proj;
    st.cond = lmax / std::max(lmin, std::numeric_limits<double>::min());
    st.cond_method = "dense";
  }
  const double rn = r.norm();
  st.rel_err = rn > 0 ? (B * c - r).norm() / rn : 0.0;
  return c;
}

template <Scalar T>
Vec<T> solve_cg(const Frame<T>& F, const Core<T>& shape, const Vec<T>& r, const Vec<T>& x0, const SolveConfig& cfg,
                LocalStats& st) {
  const auto mv = [&](const Vec<T>& v) -> Vec<T> { return as_vec(F.apply(as_core(v, shape))); };
  const Vec<T> diag = F.diagonal();
  Vec<T> dinv(diag.size());
  for (Index i = 0; i < diag.size(); ++i) {
    const double di = real_part(diag[i]);
    dinv[i] = di > 0 ? T(1.0 / di) : T(1);
  }
  const double rn = r.norm();
  Vec<T> x = x0;
  if (rn == 0) {
    st.rel_err = 0;
    return Vec<T>::Zero(r.size());
  }
  Vec<T> res = r - mv(x);
  Vec<T> z = dinv.cwiseProduct(res);
  Vec<T> p = z;
  T rz = res.dot(z);
  for (int it = 0; it < cfg.max_cg_iterations && res.norm() > cfg.local_tol * rn; ++it) {
    const Vec<T> q = mv(p);
    const double pq = real_part(p.dot(q));
    if (pq <= 0) throw_non_pd<T>(F.site, pq, p.squaredNorm());
    const T alpha = rz / T(pq);
    x += alpha * p;
    res -= alpha * q;
    z = dinv.cwiseProduct(res);
    const T rz_new = res.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  st.rel_err = (r - mv(x)).norm() / rn;
  if (cfg.measure_condition) {
    const auto ext = lanczos_extremes<T>(mv, r.size(), cfg.lanczos_steps, cfg.seed + F.site);
    if (ext.first < -kNonPdRatio * ext.second) throw_non_pd<T>(F.site, ext.first, ext.second);
    st.cond = ext.second / std::max(ext.first, std::numeric_limits<double>::min());
    st.cond_method = "lanczos";
  }
  return x;
}

// Local energy 1/2 c^H B c - Re c^H r.
template <Scalar T>
double local_energy(const Vec<T>& Bc, const Vec<T>& c, const Vec<T>& r) {
  return 0.5 * real_part(c.dot(Bc)) - real_part(c.dot(r));
}

}  // namespace

void SolveConfig::validate() const {
  if (!(tol > 0)) throw std::invalid_argument("solve: tol must be positive");
  if (max_sweeps < 1) throw std::invalid_argument("solve: max_sweeps must be at least 1");
  if (max_rank < 1) throw std::invalid_argument("solve: max_rank must be at least 1");
  if (!(local_tol > 0)) throw std::invalid_argument("solve: local_tol must be positive");
  if (lanczos_steps < 2) throw std::invalid_argument("solve: lanczos_steps must be at least 2");
  if (!(max_seconds >= 0)) throw std::invalid_argument("solve: max_seconds must be non-negative");
}

void SolveReport::write_csv(std::ostream& os) const {
  os << "sweep,delta_u,max_cond,max_rel_err,max_rank,energy\n";
  os.precision(10);
  for (const auto& r : records)
    os << r.sweep << ',' << r.delta_u << ',' << r.max_cond << ',' << r.max_rel_err << ',' << r.max_rank << ','
       << r.energy << '\n';
}

template <Scalar T>
double measure_local_condition(const RMat<T>& B, CondMethod method, int lanczos_steps, std::string* used) {
  const Index n = B.rows();
  if (n == 0 || B.cols() != n) throw ShapeError("measure_local_condition: square matrix required");
  if (method == CondMethod::Auto) method = n <= 1024 ? CondMethod::Dense : CondMethod::Lanczos;
  if (method == CondMethod::Dense) {
    Eigen::SelfAdjointEigenSolver<RMat<T>> es(B, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues()[0], lmax = es.eigenvalues()[n - 1];
    if (lmin < -kNonPdRatio * lmax) throw_non_pd<T>(0, lmin, lmax);
    if (used) *used = "dense";
    return lmax / std::max(lmin, std::numeric_limits<double>::min());
  }
  Eigen::LLT<RMat<T>> llt(B);
  if (llt.info() != Eigen::Success) throw SolverError("measure_local_condition: matrix is not positive definite");
  const auto mv = [&](const Vec<T>& v) -> Vec<T> { return B * v; };
  const auto inv = [&](const Vec<T>& v) -> Vec<T> { return llt.solve(v); };
  const double lmax = lanczos_extremes<T>(mv, n, lanczos_steps, 11).second;
  const double imax = lanczos_extremes<T>(inv, n, lanczos_steps, 13).second;
  if (used) *used = "lanczos";
  return lmax * imax;
}

template <Scalar T>
TensorTrain<T> solve(const std::vector<OperatorTerm<T>>& A, const TensorTrain<T>& b, const SolveConfig& cfg,
                     SolveReport* report, const TensorTrain<T>* initial) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  if (A.empty()) throw ShapeError("solve: empty operator");
  b.validate();
  const size_t K = b.size();
  const auto dims = b.site_dims();
  for (const auto& t : A) {
    if (!t.op || t.op->size() != K) throw ShapeError("solve: operator and right-hand side differ in length");
    if (t.op->row_dims() != dims || t.op->col_dims() != dims) throw ShapeError("solve: operator dims mismatch");
  }
  SolveReport rep;
  TensorTrain<T> x;
  if (initial) {
    if (initial->site_dims() != dims) throw ShapeError("solve: initial guess dims mismatch");
    x = *initial;
  } else {
    x = random_train<T>(dims, cfg.max_rank, cfg.seed);
  }
  right_orthogonalize(x, 0);
  const size_t nt = A.size();

  // Environments: La[t][k] closes sites < k, Ra[t][k] closes sites >= k.
  std::vector<std::vector<Env<T>>> La(nt, std::vector<Env<T>>(K + 1)), Ra(nt, std::vector<Env<T>>(K + 1));
  std::vector<Env<T>> Lb(K + 1), Rb(K + 1);
  for (size_t k = K; k-- > 1;) {
    for (size_t t = 0; t < nt; ++t)
      Ra[t][k] = env_right(Ra[t][k + 1], x.core(k), &A[t].op->core(k), x.core(k));
    Rb[k] = env_right(Rb[k + 1], x.core(k), static_cast<const OpCore<T>*>(nullptr), b.core(k));
  }

  bool used_dense = false, used_lanczos = false;
  double energy = 0.0;
  const auto update = [&](size_t k) {
    Frame<T> F{A, {}, {}, k};
    for (size_t t = 0; t < nt; ++t) {
      F.L.push_back(&La[t][k]);
      F.R.push_back(&Ra[t][k + 1]);
    }
    const Core<T>& shape = x.core(k);
    const Vec<T> r = as_vec(local_apply(Lb[k], static_cast<const OpCore<T>*>(nullptr), Rb[k + 1], b.core(k), shape.dim));
    const Vec<T> c_old = as_vec(shape);
    const Index n = shape.size();
    const bool direct = cfg.local == LocalSolver::Direct || (cfg.local == LocalSolver::Auto && n <= cfg.direct_limit);
    LocalStats st;
    Vec<T> c;
    double e_old, e_new;
    if (direct) {
      RMat<T> B = F.dense();
      B = (0.5 * (B + RMat<T>(B.adjoint()))).eval();
      e_old = local_energy<T>(B * c_old, c_old, r);
      c = solve_direct<T>(B, r, k, cfg, st);
      e_new = local_energy<T>(B * c, c, r);
    } else {
      e_old = local_energy<T>(as_vec(F.apply(shape)), c_old, r);
      c = solve_cg<T>(F, shape, r, c_old, cfg, st);
      e_new = local_energy<T>(as_vec(F.apply(as_core(c, shape))), c, r);
    }
    if (e_new > e_old + kEnergySlack * std::max({std::abs(e_old), std::abs(e_new), 1e-300})) ++rep.energy_violations;
    energy = e_new;
    x.core(k) = as_core(c, shape);
    rep.max_cond = std::max(rep.max_cond, st.cond);
    rep.max_local_residual = std::max(rep.max_local_residual, st.rel_err);
    used_dense |= st.cond_method == "dense";
    used_lanczos |= st.cond_method == "lanczos";
  };

  const auto out_of_time = [&] {
    if (cfg.max_seconds <= 0) return false;
    rep.time_limited = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() > cfg.max_seconds;
    return rep.time_limited;
  };

  TensorTrain<T> prev = x;
  for (int s = 1; s <= cfg.max_sweeps && !rep.time_limited; ++s) {
    for (size_t k = 0; k + 1 < K && !out_of_time(); ++k) {
      update(k);
      shift_right(x, k);
      for (size_t t = 0; t < nt; ++t) La[t][k + 1] = env_left(La[t][k], x.core(k), &A[t].op->core(k), x.core(k));
      Lb[k + 1] = env_left(Lb[k], x.core(k), static_cast<const OpCore<T>*>(nullptr), b.core(k));
    }
    for (size_t k = K - 1; k >= 1 && !out_of_time(); --k) {
      update(k);
      shift_left(x, k);
      for (size_t t = 0; t < nt; ++t) Ra[t][k] = env_right(Ra[t][k + 1], x.core(k), &A[t].op->core(k), x.core(k));
      Rb[k] = env_right(Rb[k + 1], x.core(k), static_cast<const OpCore<T>*>(nullptr), b.core(k));
    }
    if (K == 1) update(0);
    const double nx = norm(x);
    const double du = nx > 0 ? distance(x, prev) / nx : 0.0;
    rep.delta_u.push_back(du);
    rep.sweeps = s;
    rep.records.push_back({s, du, rep.max_cond, rep.max_local_residual, x.max_rank(), energy});
    prev = x;
    if (du < cfg.tol && !rep.time_limited) {
      rep.converged = true;
      break;
    }
  }
  rep.cond_method = used_dense && used_lanczos ? "dense+lanczos"
                    : used_dense               ? "dense"
                    : used_lanczos             ? "lanczos"
                                               : "none";
  rep.ranks = x.ranks();
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (report) *report = std::move(rep);
  return x;
}

#define QTTHL_INSTANTIATE(T)                                                                                   \
  template double measure_local_condition(const RMat<T>&, CondMethod, int, std::string*);                      \
  template TensorTrain<T> solve(const std::vector<OperatorTerm<T>>&, const TensorTrain<T>&, const SolveConfig&, \
                                SolveReport*, const TensorTrain<T>*);

QTTHL_INSTANTIATE(double)
QTTHL_INSTANTIATE(cplx)

}  // namespace qtthl
