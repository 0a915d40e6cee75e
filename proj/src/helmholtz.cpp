#include "qtthl/helmholtz.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "qtthl/analytic.hpp"
#include "qtthl/fit.hpp"

namespace qtthl {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wave_norm_sq(std::span<const Index> m) {
  double n = 0;
  for (auto v : m) n += static_cast<double>(v) * static_cast<double>(v);
  return n;
}

// Wave vector of the periodic forward difference: N (exp(2 pi i m / N) - 1).
std::vector<cplx> fd_wave(std::span<const Index> m, int L) {
  const double N = std::ldexp(1.0, L);
  std::vector<cplx> k;
  for (auto v : m) k.push_back(N * (std::polar(1.0, kTwoPi * static_cast<double>(v) / N) - 1.0));
  return k;
}

cplx fd_projector_value(std::span<const Index> m, int L, int i, int j) {
  const auto k = fd_wave(m, L);
  double n = 0;
  for (auto v : k) n += std::norm(v);
  const cplx delta = i == j ? 1.0 : 0.0;
  if (n == 0) return delta;
  return delta - k[static_cast<size_t>(i)] * std::conj(k[static_cast<size_t>(j)]) / n;
}

void check_fourier(const QttLayout& lay, Arity arity, const char* what) {
  lay.validate();
  if (lay.space != Space::Fourier || lay.arity != arity)
    throw ShapeError(std::string(what) + ": expected a Fourier " + to_string(arity) + " layout");
}

bool same_grid(const QttLayout& a, const QttLayout& b) { return a.d == b.d && a.L == b.L && a.format == b.format; }

// Cross interpolation over a leading component site followed by the bit sites of `scalar`.
template <Scalar T>
TensorTrain<T> cross_components(const QttLayout& scalar, Index ncomp,
                                const std::function<T(Index, std::span<const Index>)>& value,
                                const SymbolOptions& opt, TciReport* rep) {
  std::vector<Index> dims{ncomp};
  for (auto n : scalar.site_dims()) dims.push_back(n);
  SiteFunction<T> f = [&](std::span<const int> b) {
    const auto m = decode(scalar, b.subspan(1));
    return value(b[0], m);
  };
  TciOptions to;
  to.tol = opt.tol;
  to.max_rank = opt.max_rank;
  to.seed = opt.seed;
  return build_from_function(f, std::span<const Index>(dims), to, rep);
}

// Replaces the leading component core by a map onto the full value site.
template <Scalar T>
TensorTrain<cplx> expand_value_site(const TensorTrain<T>& tt, Index full, const std::vector<Index>& source) {
  TensorTrain<cplx> out = [&] {
    if constexpr (std::is_same_v<T, cplx>) return tt;
    else return to_complex(tt);
  }();
  const Core<cplx> c = out.core(0);
  Core<cplx> e(1, full, c.right);
  for (Index v = 0; v < full; ++v)
    for (Index q = 0; q < c.right; ++q) e(0, v, q) = c(0, source[static_cast<size_t>(v)], q);
  out.core(0) = std::move(e);
  return out;
}

}  // namespace

double projector_value(std::span<const Index> m, int i, int j) {
  const double n = wave_norm_sq(m);
  const double delta = i == j ? 1.0 : 0.0;
  if (n == 0) return delta;
  return delta - static_cast<double>(m[static_cast<size_t>(i)]) * static_cast<double>(m[static_cast<size_t>(j)]) / n;
}

double green_value(std::span<const Index> m, int i) {
  const double n = wave_norm_sq(m);
  if (n == 0) return 0.0;
  return static_cast<double>(m[static_cast<size_t>(i)]) / (kTwoPi * n);
}

ProjectorSymbol build_projector(const QttLayout& lay, const SymbolOptions& opt) {
  check_fourier(lay, Arity::Matrix, "build_projector");
  const int d = lay.d;
  const QttLayout scalar = lay.with_arity(Arity::Scalar);
  ProjectorSymbol s;
  s.layout = lay;
  s.tol = opt.tol;
  std::vector<Index> source(static_cast<size_t>(d * d));
  if (opt.kind == SymbolKind::Spectral) {
    // Symmetric: interpolate the d(d+1)/2 upper entries only.
    std::vector<std::pair<int, int>> comps;
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) {
        source[static_cast<size_t>(i * d + j)] = source[static_cast<size_t>(j * d + i)] =
            static_cast<Index>(comps.size());
        comps.emplace_back(i, j);
      }
    std::function<double(Index, std::span<const Index>)> v = [&](Index c, std::span<const Index> m) {
      return projector_value(m, comps[static_cast<size_t>(c)].first, comps[static_cast<size_t>(c)].second);
    };
    s.p = expand_value_site(cross_components<double>(scalar, static_cast<Index>(comps.size()), v, opt, &s.tci),
                            d * d, source);
  } else {
    for (Index c = 0; c < d * d; ++c) source[static_cast<size_t>(c)] = c;
    std::function<cplx(Index, std::span<const Index>)> v = [&](Index c, std::span<const Index> m) {
      return fd_projector_value(m, lay.L, static_cast<int>(c / d), static_cast<int>(c % d));
    };
    s.p = expand_value_site(cross_components<cplx>(scalar, d * d, v, opt, &s.tci), d * d, source);
  }
  s.rank = s.p.max_rank();
  s.degraded = !s.tci.converged;
  SiteFunction<cplx> exact = [&](std::span<const int> b) -> cplx {
    Index c = 0;
    const auto m = decode(lay, b, &c);
    if (opt.kind == SymbolKind::Spectral) return projector_value(m, static_cast<int>(c / d), static_cast<int>(c % d));
    return fd_projector_value(m, lay.L, static_cast<int>(c / d), static_cast<int>(c % d));
  };
  s.mc_error = monte_carlo_error(s.p, exact, opt.mc_samples, opt.seed + 101);
  return s;
}

ProjectorSymbol build_projector(const QttLayout& lay, double tol, Index max_rank) {
  SymbolOptions o;
  o.tol = tol;
  o.max_rank = max_rank;
  return build_projector(lay, o);
}

GreenSymbol build_green(const QttLayout& lay, const SymbolOptions& opt) {
  check_fourier(lay, Arity::Vector, "build_green");
  if (opt.kind != SymbolKind::Spectral) throw std::invalid_argument("build_green: only the spectral symbol is provided");
  const int d = lay.d;
  GreenSymbol g;
  g.layout = lay;
  g.tol = opt.tol;
  std::function<double(Index, std::span<const Index>)> v = [&](Index c, std::span<const Index> m) {
    return green_value(m, static_cast<int>(c));
  };
  TensorTrain<double> im = cross_components<double>(lay.with_arity(Arity::Scalar), d, v, opt, &g.tci);
  g.q = scale(to_complex(im), cplx(0.0, 1.0));
  g.rank = g.q.max_rank();
  g.degraded = !g.tci.converged;
  SiteFunction<cplx> exact = [&](std::span<const int> b) {
    Index c = 0;
    const auto m = decode(lay, b, &c);
    return cplx(0.0, green_value(m, static_cast<int>(c)));
  };
  g.mc_error = monte_carlo_error(g.q, exact, opt.mc_samples, opt.seed + 202);
  return g;
}

Mpo<cplx> diag_mpo(const TensorTrain<cplx>& field, const QttLayout& lay) {
  lay.validate();
  if (field.site_dims() != lay.site_dims()) throw ShapeError("diag_mpo: field does not match its layout");
  if (lay.arity == Arity::Scalar) return diag_of(field);
  if (lay.arity != Arity::Matrix) throw ShapeError("diag_mpo: vector fields have no diagonal action");
  const Index d = lay.d;
  std::vector<OpCore<cplx>> cores;
  const auto& v = field.core(0);
  OpCore<cplx> w(1, d, d, v.right);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      for (Index q = 0; q < v.right; ++q) w(0, i, j, q) = v(0, i * d + j, q);
  cores.push_back(std::move(w));
  for (size_t k = 1; k < field.size(); ++k) {
    const auto& c = field.core(k);
    OpCore<cplx> o(c.left, c.dim, c.dim, c.right);
    for (Index p = 0; p < c.left; ++p)
      for (Index s = 0; s < c.dim; ++s)
        for (Index q = 0; q < c.right; ++q) o(p, s, s, q) = c(p, s, q);
    cores.push_back(std::move(o));
  }
  return Mpo<cplx>(std::move(cores));
}

// Binary addition m = t + m' (mod 2^L per coordinate) runs as a carry automaton along the chain. The bond
// between two bit sites carries one carry bit for every coordinate with sites on both sides of it; each
// coordinate's carry moves from its level-l site (weight 2^(l-1)) towards its level-(l+1) site.
Mpo<cplx> convolution_mpo(const TensorTrain<cplx>& a_hat, const QttLayout& al) {
  al.validate();
  if (al.space != Space::Fourier || al.arity == Arity::Vector)
    throw ShapeError("convolution_mpo: expected a Fourier scalar or matrix layout");
  if (a_hat.site_dims() != al.site_dims()) throw ShapeError("convolution_mpo: field does not match its layout");
  const int d = al.d, L = al.L;
  const size_t off = al.value_offset();
  const size_t nb = static_cast<size_t>(d * L);
  std::vector<int> coord(nb), level(nb);
  std::vector<size_t> lo(static_cast<size_t>(d), nb), hi(static_cast<size_t>(d), 0);
  for (int i = 0; i < d; ++i)
    for (int l = 1; l <= L; ++l) {
      const size_t s = al.site_of(i, l) - off;
      coord[s] = i;
      level[s] = l;
      lo[static_cast<size_t>(i)] = std::min(lo[static_cast<size_t>(i)], s);
      hi[static_cast<size_t>(i)] = std::max(hi[static_cast<size_t>(i)], s);
    }
  // Position of each coordinate's carry bit on bond b (between bit sites b-1 and b), -1 if absent.
  auto positions = [&](size_t b) {
    std::vector<int> pos(static_cast<size_t>(d), -1);
    int n = 0;
    for (size_t i = 0; i < static_cast<size_t>(d); ++i)
      if (lo[i] < b && b <= hi[i]) pos[i] = n++;
    return std::pair(pos, n);
  };
  auto bit = [](Index state, int p) { return static_cast<int>((state >> p) & 1); };

  std::vector<OpCore<cplx>> cores;
  if (off) {
    const auto& v = a_hat.core(0);
    OpCore<cplx> w(1, d, d, v.right);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j)
        for (Index q = 0; q < v.right; ++q) w(0, i, j, q) = v(0, i * d + j, q);
    cores.push_back(std::move(w));
  } else {
    OpCore<cplx> w(1, d, d, 1);
    for (Index i = 0; i < d; ++i) w(0, i, i, 0) = 1.0;
    cores.push_back(std::move(w));
  }
  for (size_t s = 0; s < nb; ++s) {
    const auto& a = a_hat.core(off + s);
    const auto [posL, nL] = positions(s);
    const auto [posR, nR] = positions(s + 1);
    const int i = coord[s], l = level[s];
    const size_t here = al.site_of(i, l);
    // -1: left bond, +1: right bond, 0: none.
    const int prev = l > 1 ? (al.site_of(i, l - 1) < here ? -1 : 1) : 0;
    const int next = l < L ? (al.site_of(i, l + 1) < here ? -1 : 1) : 0;
    if (prev != 0 && prev == next) throw ShapeError("convolution_mpo: non-monotone coordinate order");
    const Index sl_n = Index(1) << nL, sr_n = Index(1) << nR;
    OpCore<cplx> w(sl_n * a.left, 2, 2, sr_n * a.right);
    const size_t ii = static_cast<size_t>(i);
    for (Index sl = 0; sl < sl_n; ++sl)
      for (Index sr = 0; sr < sr_n; ++sr) {
        bool ok = true;
        for (size_t j = 0; j < static_cast<size_t>(d) && ok; ++j) {
          if (j == ii || posL[j] < 0) continue;
          ok = bit(sl, posL[j]) == bit(sr, posR[j]);
        }
        if (!ok) continue;
        const int cin = prev < 0 ? bit(sl, posL[ii]) : prev > 0 ? bit(sr, posR[ii]) : 0;
        for (int t = 0; t < 2; ++t)
          for (int mp = 0; mp < 2; ++mp) {
            const int sum = t + mp + cin;
            const int cout = sum >> 1;
            if (next < 0 && bit(sl, posL[ii]) != cout) continue;
            if (next > 0 && bit(sr, posR[ii]) != cout) continue;
            for (Index p = 0; p < a.left; ++p)
              for (Index q = 0; q < a.right; ++q) w(sl * a.left + p, sum & 1, mp, sr * a.right + q) += a(p, t, q);
          }
      }
    cores.push_back(std::move(w));
  }
  return Mpo<cplx>(std::move(cores));
}

TensorTrain<cplx> convolution_coefficients(const TensorTrain<double>& a_phys, const QttLayout& al, double tol) {
  if (al.space != Space::Physical || al.arity == Arity::Vector)
    throw ShapeError("convolution_coefficients: expected a physical scalar or matrix layout");
  const QftOperator q = assemble_qft(al, tol);
  TensorTrain<cplx> hat = forward(to_complex(a_phys), al, q);
  hat *= cplx(std::pow(2.0, -0.5 * al.L * al.d));
  return round(hat, tol);
}

CoefficientBounds estimate_bounds(const TensorTrain<double>& a_phys, const QttLayout& al, int samples) {
  if (al.arity == Arity::Vector) throw ShapeError("estimate_bounds: scalar or matrix coefficient expected");
  static constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13};
  if (al.d > 6) throw ShapeError("estimate_bounds: dimension too large");
  auto halton = [](Index n, int base) {
    double f = 1.0, r = 0.0;
    while (n > 0) {
      f /= base;
      r += f * static_cast<double>(n % base);
      n /= base;
    }
    return r;
  };
  double lo = 1e300, hi = -1e300;
  std::vector<Index> x(static_cast<size_t>(al.d));
  for (int n = 1; n <= samples; ++n) {
    for (int i = 0; i < al.d; ++i)
      x[static_cast<size_t>(i)] =
          static_cast<Index>(std::floor(halton(n, kPrimes[i]) * static_cast<double>(al.grid_size())));
    const auto v = evaluate(a_phys, al, x);
    if (al.arity == Arity::Scalar) {
      lo = std::min(lo, v[0]);
      hi = std::max(hi, v[0]);
    } else {
      Eigen::MatrixXd m(al.d, al.d);
      for (int i = 0; i < al.d; ++i)
        for (int j = 0; j < al.d; ++j) m(i, j) = v[static_cast<size_t>(i * al.d + j)];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
      lo = std::min(lo, es.eigenvalues().minCoeff());
      hi = std::max(hi, es.eigenvalues().maxCoeff());
    }
  }
  if (!(lo > 0)) throw std::domain_error("estimate_bounds: coefficient is not positive at a sample");
  return CoefficientBounds{1.0 / lo, hi, true};
}

Mpo<cplx> PenalizedSystem::op() const { return axpby(cplx(1.0), conv, cplx(mu), proj); }

Index PenalizedSystem::rank() const { return op().max_rank(); }

TensorTrain<cplx> remove_mean(const TensorTrain<cplx>& hat, const QttLayout& lay, double tol) {
  if (lay.space != Space::Fourier) throw ShapeError("remove_mean: Fourier layout expected");
  const std::vector<Index> zero(static_cast<size_t>(lay.d), 0);
  const auto v0 = evaluate(hat, lay, zero);
  bool any = false;
  for (auto v : v0) any = any || v != cplx(0.0);
  if (!any) return hat;
  std::vector<std::vector<cplx>> f;
  if (lay.value_offset()) f.push_back(v0);
  for (size_t s = lay.value_offset(); s < lay.num_sites(); ++s) f.push_back({1.0, 0.0});
  if (!lay.value_offset()) f[0][0] = v0[0];
  return round(axpby(cplx(1.0), hat, cplx(-1.0), TensorTrain<cplx>::product(f)), tol);
}

PenalizedSystem assemble_system_hat(const TensorTrain<cplx>& a_hat, const QttLayout& a_layout,
                                    const TensorTrain<cplx>& g_hat, const ProjectorSymbol& p,
                                    const CoefficientBounds& bounds, const SystemOptions& opt) {
  check_fourier(p.layout, Arity::Matrix, "assemble_system");
  if (a_layout.space != Space::Fourier || !same_grid(a_layout, p.layout))
    throw ShapeError("assemble_system: coefficient layout does not match the projector");
  const QttLayout vl = p.layout.with_arity(Arity::Vector);
  if (g_hat.site_dims() != vl.site_dims()) throw ShapeError("assemble_system: g must be a vector field");
  if (opt.mu < 0) throw std::invalid_argument("assemble_system: mu must be non-negative");
  if (!(bounds.lambda > 0 && bounds.Lambda > 0)) throw std::domain_error("assemble_system: invalid coefficient bounds");
  PenalizedSystem s;
  s.layout = vl;
  s.mu = opt.mu;
  s.bounds = bounds;
  s.conv = round(convolution_mpo(a_hat, a_layout), opt.tol);
  s.proj = diag_mpo(p.p, p.layout);
  s.rhs = scale(remove_mean(g_hat, vl, opt.tol), cplx(-1.0));
  if (s.rank() > s.conv.max_rank() + s.proj.max_rank()) throw std::logic_error("assemble_system: rank not additive");
  return s;
}

PenalizedSystem assemble_system(const TensorTrain<double>& a_phys, const QttLayout& a_layout,
                                const TensorTrain<double>& g_phys, const QttLayout& g_layout,
                                const ProjectorSymbol& p, const SystemOptions& opt) {
  if (a_layout.space != Space::Physical || g_layout.space != Space::Physical || g_layout.arity != Arity::Vector)
    throw ShapeError("assemble_system: physical coefficient and vector source expected");
  if (!same_grid(a_layout, g_layout)) throw ShapeError("assemble_system: layouts differ");
  const CoefficientBounds b = opt.bounds ? *opt.bounds : estimate_bounds(a_phys, a_layout, opt.bound_samples);
  const TensorTrain<cplx> a_hat = convolution_coefficients(a_phys, a_layout, opt.tol);
  const TensorTrain<cplx> g_hat = forward(to_complex(g_phys), g_layout, assemble_qft(g_layout, opt.tol));
  return assemble_system_hat(a_hat, a_layout.with_space(Space::Fourier), g_hat, p, b, opt);
}

TensorTrain<cplx> apply_gamma(const ProjectorSymbol& p, const TensorTrain<cplx>& g_hat, double tol) {
  const TensorTrain<cplx> pg = apply_round(diag_mpo(p.p, p.layout), g_hat, tol);
  return axpby_round(cplx(1.0), pg, cplx(-1.0), g_hat, tol);
}

TensorTrain<cplx> source_from_f(const TensorTrain<double>& f_phys, const QttLayout& fl, const GreenSymbol& q,
                                double tol, double mean_tol) {
  check_fourier(q.layout, Arity::Vector, "source_from_f");
  if (fl.space != Space::Physical || fl.arity != Arity::Scalar || !same_grid(fl, q.layout))
    throw ShapeError("source_from_f: physical scalar source on the symbol's grid expected");
  const double points = std::pow(static_cast<double>(fl.grid_size()), fl.d);
  const double mean = inner(f_phys, constant_field(fl, 1.0)) / points;
  const double rms = norm(f_phys) / std::sqrt(points);
  if (std::abs(mean) > mean_tol * rms) throw std::domain_error("source_from_f: source does not have zero mean");
  const TensorTrain<cplx> f_hat = forward(to_complex(f_phys), fl, assemble_qft(fl, tol));
  std::vector<TensorTrain<cplx>> parts;
  for (int i = 0; i < fl.d; ++i) parts.push_back(scale(hadamard_round(component(q.q, q.layout, i), f_hat, tol), cplx(-1.0)));
  return remove_mean(stack_components(parts, tol), q.layout, tol);
}

RecoveredU recover_u(const TensorTrain<cplx>& psi_hat, const QttLayout& pl, const GreenSymbol& q, double tol) {
  check_fourier(pl, Arity::Vector, "recover_u");
  if (pl != q.layout) throw ShapeError("recover_u: layout does not match the Green symbol");
  const QttLayout sl = pl.with_arity(Arity::Scalar);
  TensorTrain<cplx> u;
  for (int i = 0; i < pl.d; ++i) {
    auto t = hadamard_round(component(q.q, q.layout, i), component(psi_hat, pl, i), tol);
    u = i == 0 ? t : axpby_round(cplx(1.0), u, cplx(1.0), t, tol);
  }
  RecoveredU r;
  r.u_hat = remove_mean(scale(u, cplx(-1.0)), sl, tol);
  const QttLayout phys = sl.with_space(Space::Physical);
  const auto full = inverse(r.u_hat, sl, assemble_qft(phys, tol, true));
  r.u_phys = real_part(full);
  const double n = norm(full);
  r.imag_rel = n > 0 ? norm(imag_part(full)) / n : 0.0;
  return r;
}

Mpo<double> difference_mpo(const QttLayout& lay, int i) {
  lay.validate();
  if (lay.space != Space::Physical || lay.arity != Arity::Scalar)
    throw ShapeError("difference_mpo: physical scalar layout expected");
  const int L = lay.L;
  const double N = std::ldexp(1.0, L);
  // Site l holds the bit of weight 2^(L-l); the increment's carry enters at l = L. The boundary carry
  // is 1 for the shift and 0 for the identity, weighted N and -N.
  std::vector<OpCore<double>> cores;
  for (int l = 1; l <= L; ++l) {
    OpCore<double> c(l == 1 ? 1 : 2, 2, 2, l == L ? 1 : 2);
    for (int cin = 0; cin < 2; ++cin) {
      const double w = l == L ? (cin ? N : -N) : 1.0;
      const Index right = l == L ? 0 : cin;
      for (int j = 0; j < 2; ++j) {
        const int sum = j + cin;
        c(l == 1 ? 0 : sum >> 1, j, sum & 1, right) += w;
      }
    }
    cores.push_back(std::move(c));
  }
  return embed_coordinate_op(Mpo<double>(std::move(cores)), lay, i);
}

Mpo<double> fd_operator(const TensorTrain<double>& a_phys, const QttLayout& lay, double gamma, double tol) {
  if (!(gamma > 0)) throw SolverError("fd_operator: gamma must be positive, the operator is singular otherwise");
  if (a_phys.site_dims() != lay.site_dims()) throw ShapeError("fd_operator: coefficient does not match the layout");
  const auto dims = lay.site_dims();
  Mpo<double> a = Mpo<double>::identity(std::span<const Index>(dims));
  a *= gamma;
  const Mpo<double> da = diag_of(a_phys);
  for (int i = 0; i < lay.d; ++i) {
    const Mpo<double> di = difference_mpo(lay, i);
    a = round(add(a, compose(adjoint(di), compose(da, di))), tol);
  }
  return a;
}

TensorTrain<double> fd_rhs(const TensorTrain<double>& g_phys, const TensorTrain<double>& f_phys, const QttLayout& lay,
                           double tol) {
  const QttLayout vl = lay.with_arity(Arity::Vector);
  if (g_phys.site_dims() != vl.site_dims() || f_phys.site_dims() != lay.site_dims())
    throw ShapeError("fd_rhs: field shapes do not match the layout");
  TensorTrain<double> r = f_phys;
  for (int i = 0; i < lay.d; ++i) {
    const auto t = apply_round(adjoint(difference_mpo(lay, i)), component(g_phys, vl, i), tol);
    r = axpby_round(1.0, r, -1.0, t, tol);
  }
  return r;
}

TensorTrain<double> fd_gradient(const TensorTrain<double>& u, const QttLayout& lay, double tol) {
  std::vector<TensorTrain<double>> parts;
  for (int i = 0; i < lay.d; ++i) parts.push_back(apply_round(difference_mpo(lay, i), u, tol));
  return stack_components(parts, tol);
}

}  // namespace qtthl
