#include "qtthl/fit.hpp"

#include <algorithm>
#include <cmath>

#include "qtthl/contract.hpp"
#include "qtthl/svd.hpp"

namespace qtthl {

namespace {

template <Scalar T>
const OpCore<T>* op_core(const FitTerm<T>& t, size_t i) {
  return t.op ? &t.op->core(i) : nullptr;
}

template <Scalar T>
Core<T> theta(const Env<T>& L, const Env<T>& R, const FitTerm<T>& term, size_t i, Index n1, Index n2) {
  Env<T> h1 = half_left(L, op_core(term, i), term.x->core(i));
  Env<T> h2 = half_left(h1, op_core(term, i + 1), term.x->core(i + 1));
  return close_right(h2, R, n1 * n2);
}

}  // namespace

template <Scalar T>
TensorTrain<T> fit_sum(const std::vector<FitTerm<T>>& terms, const FitOptions& opt, FitInfo* info) {
  if (terms.empty()) throw ShapeError("fit_sum: no terms");
  const size_t K = terms[0].x->size();
  std::vector<Index> dims = terms[0].op ? terms[0].op->row_dims() : terms[0].x->site_dims();
  Index rmax_in = 1;
  for (const auto& t : terms) {
    if (t.x->size() != K) throw ShapeError("fit_sum: site count mismatch");
    if (t.op) {
      if (t.op->col_dims() != t.x->site_dims()) throw ShapeError("fit_sum: operator/train mismatch");
      if (t.op->row_dims() != dims) throw ShapeError("fit_sum: output dims mismatch");
    } else if (t.x->site_dims() != dims) {
      throw ShapeError("fit_sum: output dims mismatch");
    }
    rmax_in = std::max(rmax_in, t.x->max_rank());
  }
  if (K == 1) {
    Core<T> acc(1, dims[0], 1);
    Env<T> b;
    for (const auto& t : terms) {
      Core<T> c = local_apply(b, op_core(t, 0), b, t.x->core(0), dims[0]);
      for (size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += t.coeff * c.data[i];
    }
    return TensorTrain<T>(std::vector<Core<T>>{acc});
  }

  Index r0 = opt.initial_rank > 0 ? opt.initial_rank : std::max<Index>(4, rmax_in);
  r0 = std::min(r0, opt.max_rank);
  TensorTrain<T> y = random_train<T>(std::span<const Index>(dims), r0, opt.seed);
  right_orthogonalize(y, 0);

  const size_t J = terms.size();
  std::vector<std::vector<Env<T>>> Ls(J, std::vector<Env<T>>(K)), Rs(J, std::vector<Env<T>>(K));
  for (size_t j = 0; j < J; ++j)
    for (size_t i = K - 1; i > 0; --i)
      Rs[j][i - 1] = env_right(Rs[j][i], y.core(i), op_core(terms[j], i), terms[j].x->core(i));

  const double bond_scale = 1.0 / std::sqrt(static_cast<double>(K - 1));
  TensorTrain<T> prev;
  double change = 1.0;
  double worst_disc = 0.0;
  int sweep = 0;

  auto local_target = [&](size_t i) {
    const Index n1 = dims[i], n2 = dims[i + 1];
    Core<T> th;
    bool init = false;
    for (size_t j = 0; j < J; ++j) {
      Core<T> c = theta(Ls[j][i], Rs[j][i + 1], terms[j], i, n1, n2);
      if (!init) {
        th = Core<T>(c.left, c.dim, c.right);
        init = true;
      }
      for (size_t k = 0; k < th.data.size(); ++k) th.data[k] += terms[j].coeff * c.data[k];
    }
    return th;
  };

  auto split = [&](const Core<T>& th, size_t i, bool left_orth) {
    const Index n1 = dims[i], n2 = dims[i + 1];
    const Index rl = th.left, rr = th.right;
    CMapRMat<T> m(th.data.data(), rl * n1, n2 * rr);
    const ThinSvd<T> svd = thin_svd<T>(m);
    const Eigen::VectorXd s = svd.s;
    const double nrm = s.norm();
    const double delta = opt.tol * nrm * bond_scale;
    Index r = s.size();
    double tail = 0.0;
    while (r > 1 && std::sqrt(tail + s(r - 1) * s(r - 1)) <= delta) {
      tail += s(r - 1) * s(r - 1);
      --r;
    }
    while (r > opt.max_rank) {
      tail += s(r - 1) * s(r - 1);
      --r;
    }
    if (nrm > 0) worst_disc = std::max(worst_disc, std::sqrt(tail) / nrm);
    Core<T> a(rl, n1, r), b(r, n2, rr);
    if (left_orth) {
      a.left_unfolding() = svd.U.leftCols(r);
      b.right_unfolding() = s.head(r).asDiagonal() * svd.V.leftCols(r).adjoint();
    } else {
      a.left_unfolding() = svd.U.leftCols(r) * s.head(r).asDiagonal();
      b.right_unfolding() = svd.V.leftCols(r).adjoint();
    }
    y.core(i) = std::move(a);
    y.core(i + 1) = std::move(b);
  };

  for (sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    worst_disc = 0.0;
    for (size_t i = 0; i + 1 < K; ++i) {
      split(local_target(i), i, true);
      for (size_t j = 0; j < J; ++j)
        Ls[j][i + 1] = env_left(Ls[j][i], y.core(i), op_core(terms[j], i), terms[j].x->core(i));
    }
    for (size_t i = K - 1; i-- > 0;) {
      split(local_target(i), i, false);
      for (size_t j = 0; j < J; ++j)
        Rs[j][i] = env_right(Rs[j][i + 1], y.core(i + 1), op_core(terms[j], i + 1), terms[j].x->core(i + 1));
    }
    y.set_ortho_center(0);
    if (sweep > 1) {
      const double a = real_part(inner(y, y));
      const double b = real_part(inner(prev, prev));
      const double c = real_part(inner(prev, y));
      change = a > 0 ? std::sqrt(std::abs(a + b - 2 * c) / a) : 0.0;
      if (sweep >= opt.min_sweeps && change <= std::max(10 * opt.tol, 1e-7)) break;
    }
    prev = y;
  }
  if (info) {
    info->sweeps = std::min(sweep, opt.max_sweeps);
    info->last_change = change;
    info->discarded = worst_disc;
  }
  return y;
}

template <Scalar T>
TensorTrain<T> apply_round(const Mpo<T>& op, const TensorTrain<T>& x, double tol, Index max_rank) {
  if (op.max_rank() * x.max_rank() <= 48) return round(apply(op, x), tol, max_rank);
  FitOptions o;
  o.tol = tol;
  o.max_rank = max_rank;
  std::vector<FitTerm<T>> terms{{&op, &x, T(1)}};
  return fit_sum(terms, o);
}

template <Scalar T>
TensorTrain<T> axpby_round(T alpha, const TensorTrain<T>& a, T beta, const TensorTrain<T>& b, double tol,
                           Index max_rank) {
  return round(axpby(alpha, a, beta, b), tol, max_rank);
}

template <Scalar T>
TensorTrain<T> hadamard_round(const TensorTrain<T>& a, const TensorTrain<T>& b, double tol, Index max_rank) {
  if (a.max_rank() * b.max_rank() <= 64) return round(hadamard(a, b), tol, max_rank);
  const TensorTrain<T>& small = a.max_rank() <= b.max_rank() ? a : b;
  const TensorTrain<T>& big = a.max_rank() <= b.max_rank() ? b : a;
  Mpo<T> d = diag_of(small);
  FitOptions o;
  o.tol = tol;
  o.max_rank = max_rank;
  std::vector<FitTerm<T>> terms{{&d, &big, T(1)}};
  return fit_sum(terms, o);
}

#define QTTHL_INSTANTIATE_FIT(T)                                                                            \
  template TensorTrain<T> fit_sum(const std::vector<FitTerm<T>>&, const FitOptions&, FitInfo*);             \
  template TensorTrain<T> apply_round(const Mpo<T>&, const TensorTrain<T>&, double, Index);                 \
  template TensorTrain<T> axpby_round(T, const TensorTrain<T>&, T, const TensorTrain<T>&, double, Index);   \
  template TensorTrain<T> hadamard_round(const TensorTrain<T>&, const TensorTrain<T>&, double, Index);

QTTHL_INSTANTIATE_FIT(double)
QTTHL_INSTANTIATE_FIT(cplx)

}  // namespace qtthl
