#include "qtthl/tci.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

namespace qtthl {

namespace {

using MultiIndex = std::vector<int>;

struct LuPivots {
  std::vector<Index> rows;
  std::vector<Index> cols;
  double residual = 0.0;
  bool rank_limited = false;
};

// Full-pivot rank-revealing LU: stops when the largest remaining entry is <= abs_tol.
template <Scalar T>
LuPivots prrlu(RMat<T> a, double abs_tol, Index max_rank) {
  LuPivots p;
  const Index kmax = std::min({a.rows(), a.cols(), max_rank});
  for (;;) {
    Index r = 0, c = 0;
    const double m = a.cwiseAbs().maxCoeff(&r, &c);
    if (m <= abs_tol || m == 0.0) {
      p.residual = m;
      break;
    }
    if (static_cast<Index>(p.rows.size()) == kmax) {
      p.residual = m;
      p.rank_limited = kmax == max_rank;
      break;
    }
    p.rows.push_back(r);
    p.cols.push_back(c);
    const T piv = a(r, c);
    Vec<T> col = a.col(c);
    Eigen::Matrix<T, 1, Eigen::Dynamic> row = a.row(r) / piv;
    a.noalias() -= col * row;
  }
  return p;
}

template <Scalar T>
struct Cross {
  Cross(const SiteFunction<T>& f, std::span<const Index> dims, const TciOptions& opt)
      : f_(f), dims_(dims.begin(), dims.end()), opt_(opt), K_(dims.size()), left_(K_ + 1), right_(K_ + 1) {}

  T eval(const MultiIndex& s) {
    const T v = f_(s);
    ++evaluations_;
    if (!std::isfinite(std::abs(v))) throw std::domain_error("build_from_function: non-finite sample");
    return v;
  }

  MultiIndex random_string(std::mt19937_64& g) const {
    MultiIndex s(K_);
    for (size_t k = 0; k < K_; ++k) s[k] = static_cast<int>(g() % static_cast<std::uint64_t>(dims_[k]));
    return s;
  }

  // Returns false if f vanished on every candidate.
  bool init(std::mt19937_64& g) {
    std::vector<MultiIndex> cands;
    for (int i = 0; i < opt_.random_pivots; ++i) cands.push_back(random_string(g));
    cands.emplace_back(K_, 0);
    MultiIndex ones(K_);
    for (size_t k = 0; k < K_; ++k) ones[k] = static_cast<int>(std::min<Index>(1, dims_[k] - 1));
    cands.push_back(ones);
    double best = -1;
    MultiIndex p0;
    for (const auto& c : cands) {
      const double v = std::abs(eval(c));
      if (v > best) {
        best = v;
        p0 = c;
      }
    }
    fmax_ = best;
    globals_ = cands;
    if (best == 0.0) return false;
    for (size_t k = 0; k <= K_; ++k) {
      left_[k] = {MultiIndex(p0.begin(), p0.begin() + static_cast<std::ptrdiff_t>(k))};
      right_[k] = {MultiIndex(p0.begin() + static_cast<std::ptrdiff_t>(k), p0.end())};
    }
    return true;
  }

  // Two-site update of bond b (between sites b-1 and b), 1 <= b < K.
  void update(size_t b) {
    std::vector<MultiIndex> rows, cols;
    std::map<MultiIndex, int> seen_r, seen_c;
    auto add_row = [&](MultiIndex m) {
      if (seen_r.emplace(m, 0).second) rows.push_back(std::move(m));
    };
    auto add_col = [&](MultiIndex m) {
      if (seen_c.emplace(m, 0).second) cols.push_back(std::move(m));
    };
    for (const auto& i : left_[b - 1])
      for (int s = 0; s < dims_[b - 1]; ++s) {
        MultiIndex m = i;
        m.push_back(s);
        add_row(std::move(m));
      }
    for (int s = 0; s < dims_[b]; ++s)
      for (const auto& j : right_[b + 1]) {
        MultiIndex m{s};
        m.insert(m.end(), j.begin(), j.end());
        add_col(std::move(m));
      }
    for (const auto& g : globals_) {
      add_row(MultiIndex(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(b)));
      add_col(MultiIndex(g.begin() + static_cast<std::ptrdiff_t>(b), g.end()));
    }
    RMat<T> pi(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
    MultiIndex full(K_);
    for (size_t r = 0; r < rows.size(); ++r)
      for (size_t c = 0; c < cols.size(); ++c) {
        std::copy(rows[r].begin(), rows[r].end(), full.begin());
        std::copy(cols[c].begin(), cols[c].end(), full.begin() + static_cast<std::ptrdiff_t>(b));
        pi(static_cast<Index>(r), static_cast<Index>(c)) = eval(full);
      }
    fmax_ = std::max(fmax_, pi.cwiseAbs().maxCoeff());
    LuPivots p = prrlu<T>(pi, opt_.tol * fmax_, opt_.max_rank);
    if (p.rows.empty()) return;
    left_[b].clear();
    right_[b].clear();
    for (auto r : p.rows) left_[b].push_back(rows[static_cast<size_t>(r)]);
    for (auto c : p.cols) right_[b].push_back(cols[static_cast<size_t>(c)]);
    sweep_error_ = std::max(sweep_error_, p.residual / fmax_);
    rank_limited_ = rank_limited_ || p.rank_limited;
  }

  TensorTrain<T> assemble() {
    std::vector<Core<T>> cores;
    MultiIndex full(K_);
    for (size_t k = 0; k < K_; ++k) {
      const auto& L = left_[k];
      const auto& R = right_[k + 1];
      const Index rl = static_cast<Index>(L.size()), rr = static_cast<Index>(R.size()), n = dims_[k];
      Core<T> c(rl, n, rr);
      for (Index a = 0; a < rl; ++a)
        for (Index s = 0; s < n; ++s)
          for (Index bb = 0; bb < rr; ++bb) {
            std::copy(L[a].begin(), L[a].end(), full.begin());
            full[k] = static_cast<int>(s);
            std::copy(R[bb].begin(), R[bb].end(), full.begin() + static_cast<std::ptrdiff_t>(k + 1));
            c(a, s, bb) = eval(full);
          }
      if (k + 1 < K_) {
        const auto& Lp = left_[k + 1];
        RMat<T> piv(rr, rr);
        for (Index a = 0; a < rr; ++a)
          for (Index bb = 0; bb < rr; ++bb) {
            std::copy(Lp[a].begin(), Lp[a].end(), full.begin());
            std::copy(R[bb].begin(), R[bb].end(), full.begin() + static_cast<std::ptrdiff_t>(k + 1));
            piv(a, bb) = eval(full);
          }
        using DMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
        DMat t = c.left_unfolding();
        DMat x = DMat(piv.transpose()).fullPivLu().solve(DMat(t.transpose()));
        c.left_unfolding() = x.transpose();
      }
      cores.push_back(std::move(c));
    }
    return TensorTrain<T>(std::move(cores));
  }

  // Adds probes where the current train misses f by more than the tolerance; returns how many.
  int add_global_pivots(const TensorTrain<T>& tt, std::mt19937_64& g) {
    std::vector<std::pair<double, MultiIndex>> bad;
    for (int i = 0; i < opt_.check_samples; ++i) {
      MultiIndex s = random_string(g);
      const T fv = eval(s);
      fmax_ = std::max(fmax_, std::abs(fv));
      const double e = std::abs(tt.evaluate(s) - fv);
      if (e > opt_.tol * fmax_) bad.emplace_back(e, std::move(s));
    }
    std::sort(bad.begin(), bad.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
    const size_t keep = std::min<size_t>(bad.size(), 8);
    for (size_t i = 0; i < keep; ++i) globals_.push_back(bad[i].second);
    return static_cast<int>(keep);
  }

  const SiteFunction<T>& f_;
  std::vector<Index> dims_;
  TciOptions opt_;
  size_t K_;
  std::vector<std::vector<MultiIndex>> left_, right_;
  std::vector<MultiIndex> globals_;
  double sweep_error_ = 0.0;
  bool rank_limited_ = false;
  double fmax_ = 0.0;
  long long evaluations_ = 0;
};

}  // namespace

template <Scalar T>
TensorTrain<T> build_from_function(const SiteFunction<T>& f, std::span<const Index> site_dims, const TciOptions& opt,
                                   TciReport* report) {
  if (site_dims.empty()) throw ShapeError("build_from_function: no sites");
  if (opt.tol < 0 || opt.max_rank < 1) throw ShapeError("build_from_function: invalid options");
  Cross<T> x(f, site_dims, opt);
  TciReport rep;
  std::mt19937_64 g(opt.seed);
  const size_t K = site_dims.size();
  if (K == 1) {
    Core<T> c(1, site_dims[0], 1);
    for (int s = 0; s < site_dims[0]; ++s) c(0, s, 0) = x.eval(MultiIndex{s});
    rep.converged = true;
    rep.max_rank = 1;
    rep.evaluations = x.evaluations_;
    if (report) *report = rep;
    return TensorTrain<T>(std::vector<Core<T>>{c});
  }
  if (!x.init(g)) {
    rep.converged = true;
    rep.evaluations = x.evaluations_;
    if (report) *report = rep;
    return TensorTrain<T>::zeros(site_dims);
  }
  TensorTrain<T> tt;
  for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    x.sweep_error_ = 0.0;
    x.rank_limited_ = false;
    for (size_t b = 1; b < K; ++b) x.update(b);
    for (size_t b = K - 1; b >= 1; --b) x.update(b);
    tt = x.assemble();
    rep.sweeps = sweep;
    const int added = x.add_global_pivots(tt, g);
    if (x.sweep_error_ <= opt.tol && added == 0) {
      rep.converged = true;
      break;
    }
    if (x.rank_limited_ && added == 0) break;
  }
  rep.error_estimate = x.sweep_error_;
  rep.fmax = x.fmax_;
  rep.max_rank = tt.max_rank();
  rep.rank_limited = x.rank_limited_;
  rep.evaluations = x.evaluations_;
  if (report) *report = rep;
  return tt;
}

template <Scalar T>
double monte_carlo_error(const TensorTrain<T>& tt, const SiteFunction<T>& f, int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("monte_carlo_error: n_samples must be positive");
  const auto dims = tt.site_dims();
  double total = 1.0;
  for (auto n : dims) total *= static_cast<double>(n);
  double num = 0.0, den = 0.0;
  std::vector<int> s(dims.size(), 0);
  auto accumulate = [&]() {
    const T fv = f(s);
    num += std::norm(tt.evaluate(s) - fv);
    den += std::norm(fv);
  };
  if (static_cast<double>(n_samples) >= total) {
    bool more = true;
    while (more) {
      accumulate();
      more = false;
      for (size_t k = dims.size(); k-- > 0;) {
        if (++s[k] < dims[k]) {
          more = true;
          break;
        }
        s[k] = 0;
      }
    }
  } else {
    std::mt19937_64 g(seed);
    for (int i = 0; i < n_samples; ++i) {
      for (size_t k = 0; k < dims.size(); ++k) s[k] = static_cast<int>(g() % static_cast<std::uint64_t>(dims[k]));
      accumulate();
    }
  }
  if (den == 0.0) throw std::domain_error("monte_carlo_error: reference samples are all zero");
  return std::sqrt(num / den);
}

#define QTTHL_INSTANTIATE_TCI(T)                                                                               \
  template TensorTrain<T> build_from_function(const SiteFunction<T>&, std::span<const Index>, const TciOptions&, \
                                              TciReport*);                                                     \
  template double monte_carlo_error(const TensorTrain<T>&, const SiteFunction<T>&, int, std::uint64_t);

QTTHL_INSTANTIATE_TCI(double)
QTTHL_INSTANTIATE_TCI(cplx)

}  // namespace qtthl
