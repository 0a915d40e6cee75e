#include "qtthl/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include <unsupported/Eigen/FFT>

#include "qtthl/analytic.hpp"
#include "qtthl/fit.hpp"
#include "qtthl/tci.hpp"

namespace qtthl {

namespace {

constexpr double kPi = std::numbers::pi;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

TensorTrain<double> ones(const QttLayout& lay) { return constant_field(lay, 1.0); }

// 1 + c * f
TensorTrain<double> one_plus(const QttLayout& lay, const TensorTrain<double>& f, double c) {
  return add(ones(lay), scale(f, c));
}

double grid_mean(const TensorTrain<double>& f, const QttLayout& lay) {
  return inner(f, ones(lay)) / std::pow(static_cast<double>(lay.grid_size()), lay.d);
}

// Exact extremes over the grid for scalar fields small enough to expand, sampled otherwise.
CoefficientBounds scalar_grid_bounds(const TensorTrain<double>& a, const QttLayout& lay) {
  if (a.dense_size() > static_cast<double>(1 << 22)) return estimate_bounds(a, lay);
  const auto v = to_dense(a);
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (!(*lo > 0)) throw std::domain_error("coefficient is not positive on the grid");
  return {1.0 / *lo, *hi, false};
}

}  // namespace

double ManufacturedCase::a_at(double x, double y) {
  return (1 + nu * std::sin(4 * kPi * x)) * (1 + nu * std::sin(8 * kPi * y));
}

double ManufacturedCase::u_at(double x, double y) {
  const double sx = std::sin(6 * kPi * x), sy = std::sin(12 * kPi * y);
  return sx * sx * sy * sy / (6 * kPi * std::sqrt(5.0));
}

std::array<double, 2> ManufacturedCase::grad_u_at(double x, double y) {
  const double sx = std::sin(6 * kPi * x), sy = std::sin(12 * kPi * y);
  return {std::sin(12 * kPi * x) * sy * sy / std::sqrt(5.0), 2 * sx * sx * std::sin(24 * kPi * y) / std::sqrt(5.0)};
}

std::array<double, 2> ManufacturedCase::g_at(double x, double y) {
  const double a = a_at(x, y);
  const auto gu = grad_u_at(x, y);
  return {-a * gu[0] - (1 + std::sin(2 * kPi * y)), -a * gu[1] - (2 + std::sin(4 * kPi * x))};
}

ManufacturedCase manufactured(int L, Format format, double gamma, double tol) {
  if (L < 4) throw std::invalid_argument("manufactured: L >= 4 required");
  if (gamma < 0) throw std::invalid_argument("manufactured: gamma must be non-negative");
  const double nu = ManufacturedCase::nu;
  ManufacturedCase m;
  m.layout = QttLayout{2, L, format, Space::Physical, Arity::Scalar};
  m.gamma = gamma;
  const QttLayout& s = m.layout;
  m.a = round(hadamard(one_plus(s, sin_field(s, 0, 4 * kPi), nu), one_plus(s, sin_field(s, 1, 8 * kPi), nu)), tol);
  // sin^2 t = (1 - cos 2t) / 2
  const auto sx2 = scale(one_plus(s, cos_field(s, 0, 12 * kPi), -1.0), 0.5);
  const auto sy2 = scale(one_plus(s, cos_field(s, 1, 24 * kPi), -1.0), 0.5);
  m.u = round(scale(hadamard(sx2, sy2), 1.0 / (6 * kPi * std::sqrt(5.0))), tol);
  const auto ux = round(scale(hadamard(sin_field(s, 0, 12 * kPi), sy2), 1.0 / std::sqrt(5.0)), tol);
  const auto uy = round(scale(hadamard(sx2, sin_field(s, 1, 24 * kPi)), 2.0 / std::sqrt(5.0)), tol);
  m.grad_u = stack_components<double>({ux, uy}, tol);
  const auto gt0 = one_plus(s, sin_field(s, 1, 2 * kPi), 1.0);
  const auto gt1 = add(constant_field(s, 2.0), sin_field(s, 0, 4 * kPi));
  const auto g0 = round(add(scale(hadamard(m.a, ux), -1.0), scale(gt0, -1.0)), tol);
  const auto g1 = round(add(scale(hadamard(m.a, uy), -1.0), scale(gt1, -1.0)), tol);
  m.g = stack_components<double>({g0, g1}, tol);
  m.f = scale(m.u, gamma);
  const double h = std::ldexp(1.0, -L);
  std::vector<TensorTrain<double>> gs;
  for (int i = 0; i < 2; ++i) {
    SiteFunction<double> fi = [&](std::span<const int> bits) {
      const auto j = decode(s, bits);
      const double x = static_cast<double>(j[0]) * h + (i == 0 ? h / 2 : 0.0);
      const double y = static_cast<double>(j[1]) * h + (i == 1 ? h / 2 : 0.0);
      return ManufacturedCase::g_at(x, y)[static_cast<size_t>(i)];
    };
    TciOptions o;
    o.tol = 1e-13;
    TciReport rep;
    gs.push_back(build_from_function(fi, s, o, &rep));
    if (!rep.converged) throw SolverError("manufactured: cross interpolation of the staggered source did not converge");
  }
  m.g_staggered = stack_components(gs, tol);
  m.bounds = {1.0 / ((1 - nu) * (1 - nu)), (1 + nu) * (1 + nu), false};
  return m;
}

TensorTrain<double> random_trig_coefficient(const QttLayout& lay, int terms, int kmax, double amp,
                                            std::uint64_t seed) {
  if (lay.space != Space::Physical || lay.arity != Arity::Scalar || lay.d != 2)
    throw ShapeError("random_trig_coefficient: d = 2 physical scalar layout expected");
  if (terms < 1 || kmax < 0 || !(amp >= 0 && amp < 1)) throw std::invalid_argument("random_trig_coefficient: bad input");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> kd(0, kmax);
  std::uniform_real_distribution<double> ph(0.0, 2 * kPi);
  TensorTrain<double> acc = ones(lay);
  for (int t = 0; t < terms; ++t) {
    const int k1 = kd(rng), k2 = kd(rng);
    const double p1 = ph(rng), p2 = ph(rng);
    const auto term = hadamard(cos_field(lay, 0, 2 * kPi * k1, p1), cos_field(lay, 1, 2 * kPi * k2, p2));
    acc = round(add(acc, scale(term, amp / terms)), 1e-14);
  }
  return acc;
}

HlResult run_hl(const TensorTrain<double>& a, const QttLayout& a_layout, const TensorTrain<double>& g,
                const HlConfig& cfg, std::optional<CoefficientBounds> bounds, const ProjectorSymbol* p,
                const GreenSymbol* q) {
  const QttLayout gl = a_layout.with_arity(Arity::Vector);
  const QttLayout fv = gl.with_space(Space::Fourier);
  const QttLayout fm = fv.with_arity(Arity::Matrix);
  HlResult r;
  ProjectorSymbol own_p;
  if (!p) {
    own_p = cached_projector(fm, cfg.symbols, cfg.cache, false);
    p = &own_p;
  }
  r.projector_rank = p->rank;
  r.projector_mc_error = p->mc_error;
  SystemOptions so;
  so.mu = cfg.mu;
  so.tol = cfg.tol;
  so.bounds = bounds;
  r.system = assemble_system(a, a_layout, g, gl, *p, so);
  const std::vector<OperatorTerm<cplx>> terms{{cplx(1.0), &r.system.conv}, {cplx(cfg.mu), &r.system.proj}};
  r.psi_hat = solve(terms, r.system.rhs, cfg.als, &r.solve);
  GreenSymbol own_q;
  if (!q) {
    own_q = cached_green(fv, cfg.symbols, cfg.cache, false);
    q = &own_q;
  }
  r.u = recover_u(r.psi_hat, r.system.layout, *q, cfg.tol);
  r.psi = real_part(inverse(r.psi_hat, r.system.layout, assemble_qft(gl, cfg.tol, true)));
  if (cfg.estimate) r.errors = a_posteriori(r.psi_hat, r.system, cfg.tol);
  return r;
}

FdResult run_fd(const TensorTrain<double>& a, const QttLayout& lay, const TensorTrain<double>& g,
                const TensorTrain<double>& f, double gamma, double Lambda, const SolveConfig& als, double tol) {
  FdResult r;
  r.op = fd_operator(a, lay, gamma, tol);
  r.rhs = fd_rhs(g, f, lay, tol);
  r.u = solve(r.op, r.rhs, als, &r.solve);
  r.cond_bound = fd_cond_bound(Lambda, gamma, lay.L);
  return r;
}

ManufacturedRow solve_manufactured_hl(int L, Format format, const HlConfig& cfg, HlResult* full,
                                      const ProjectorSymbol* p, const GreenSymbol* q) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto mc = manufactured(L, format, 0.0);
  HlResult r = run_hl(mc.a, mc.layout, mc.g, cfg, mc.bounds, p, q);
  ManufacturedRow row;
  row.L = L;
  row.format = format;
  row.method = "HL";
  row.mu = cfg.mu;
  row.err_grad_u = distance(r.psi, mc.grad_u) / norm(mc.grad_u);
  const auto u0 = add(mc.u, constant_field(mc.layout, -grid_mean(mc.u, mc.layout)));
  row.err_u = distance(r.u.u_phys, u0) / norm(u0);
  row.sweeps = r.solve.sweeps;
  row.max_cond = r.solve.max_cond;
  row.errors = r.errors;
  row.cond_bound = r.system.cond_bound();
  row.solution_rank = r.psi_hat.max_rank();
  row.seconds = seconds_since(t0);
  if (full) *full = std::move(r);
  return row;
}

ManufacturedRow solve_manufactured_fd(int L, Format format, double gamma, const SolveConfig& als, double tol,
                                      FdResult* full) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto mc = manufactured(L, format, gamma);
  FdResult r = run_fd(mc.a, mc.layout, mc.g_staggered, mc.f, gamma, mc.bounds.Lambda, als, tol);
  ManufacturedRow row;
  row.L = L;
  row.format = format;
  row.method = "FD";
  row.gamma = gamma;
  row.err_u = distance(r.u, mc.u) / norm(mc.u);
  row.err_grad_u = distance(fd_gradient(r.u, mc.layout, tol), mc.grad_u) / norm(mc.grad_u);
  row.sweeps = r.solve.sweeps;
  row.max_cond = r.solve.max_cond;
  row.cond_bound = r.cond_bound;
  row.solution_rank = r.u.max_rank();
  row.seconds = seconds_since(t0);
  if (full) *full = std::move(r);
  return row;
}

std::vector<std::vector<double>> rsa_pack(int N, double r, int d, std::uint64_t seed, long long max_attempts) {
  if (N < 1 || d < 1 || !(r > 0)) throw std::invalid_argument("rsa_pack: N, d and r must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> centers;
  const double min_dist = 4 * r;
  long long attempts = 0;
  while (static_cast<int>(centers.size()) < N) {
    if (++attempts > max_attempts)
      throw SolverError("rsa_pack: placed " + std::to_string(centers.size()) + " of " + std::to_string(N) +
                        " centers before the attempt budget ran out");
    std::vector<double> x(static_cast<size_t>(d));
    for (auto& v : x) v = u(rng);
    bool ok = true;
    for (const auto& c : centers) {
      double s = 0;
      for (int i = 0; i < d; ++i) {
        double t = std::abs(x[static_cast<size_t>(i)] - c[static_cast<size_t>(i)]);
        t = std::min(t, 1 - t);
        s += t * t;
      }
      if (std::sqrt(s) < min_dist) {
        ok = false;
        break;
      }
    }
    if (ok) centers.push_back(std::move(x));
  }
  return centers;
}

namespace {

// Image range R with exp(-R^2 / 2r^2) below 1e-16: images beyond |l|_inf = R are at distance >= R.
int image_range(double r) { return std::max(1, static_cast<int>(std::ceil(r * std::sqrt(2 * 37.0)))); }

}  // namespace

double MultiscaleCase::c_at(std::span<const double> y) const {
  const int d = params.d;
  const double r = params.r;
  const int R = image_range(r);
  const int span = 2 * R + 1;
  Index combos = 1;
  for (int i = 0; i < d; ++i) combos *= span;
  double s = 0;
  for (const auto& X : centers)
    for (Index t = 0; t < combos; ++t) {
      Index rem = t;
      double q = 0;
      for (int i = 0; i < d; ++i) {
        const int l = static_cast<int>(rem % span) - R;
        rem /= span;
        const double z = y[static_cast<size_t>(i)] - X[static_cast<size_t>(i)] - l;
        q += z * z;
      }
      s += std::exp(-q / (2 * r * r));
    }
  return 1 + params.nu * s;
}

double MultiscaleCase::b_at(std::span<const double> x) const {
  if (params.d == 2) return 1 + 0.5 * std::cos(2 * kPi * x[0]) * std::cos(2 * kPi * x[1]);
  return 1 + 0.5 * std::cos(2 * kPi * x[0]);
}

MultiscaleCase multiscale(const MultiscaleParams& p) {
  if (p.d != 2 && p.d != 3) throw std::invalid_argument("multiscale: d must be 2 or 3");
  if (p.L0 < 2 || p.Le < 0) throw std::invalid_argument("multiscale: L0 >= 2 and Le >= 0 required");
  if (!(p.nu >= 0) || !(p.r > 0)) throw std::invalid_argument("multiscale: nu >= 0 and r > 0 required");
  MultiscaleCase m;
  m.params = p;
  m.centers = rsa_pack(p.N, p.r, p.d, p.seed);
  m.cell_layout = QttLayout{p.d, p.L0, p.format, Space::Physical, Arity::Scalar};
  m.layout = m.cell_layout.with_level(p.L0 + p.Le);
  const int R = image_range(p.r);
  m.image_truncation = static_cast<double>(p.N) * std::pow(2 * R + 3.0, p.d) * std::exp(-R * R / (2 * p.r * p.r));
  if (p.nu == 0) {
    m.c = ones(m.cell_layout);
  } else {
    const QttLayout& cl = m.cell_layout;
    const double h = std::ldexp(1.0, -p.L0);
    SiteFunction<double> f = [&](std::span<const int> bits) {
      const auto j = decode(cl, bits);
      std::vector<double> y(static_cast<size_t>(p.d));
      for (int i = 0; i < p.d; ++i) y[static_cast<size_t>(i)] = static_cast<double>(j[static_cast<size_t>(i)]) * h;
      return m.c_at(y);
    };
    TciOptions o;
    o.tol = p.tci_tol;
    o.max_rank = p.tci_max_rank;
    o.seed = p.seed;
    m.c = build_from_function(f, cl, o, &m.c_tci);
    if (!m.c_tci.converged) throw SolverError("multiscale: cross interpolation of the cell field did not converge");
  }
  const QttLayout& gl = m.layout;
  if (p.d == 2)
    m.b = one_plus(gl, hadamard(cos_field(gl, 0, 2 * kPi), cos_field(gl, 1, 2 * kPi)), 0.5);
  else
    m.b = one_plus(gl, cos_field(gl, 0, 2 * kPi), 0.5);
  m.a = round(hadamard(m.b, periodize(m.c, m.cell_layout, p.Le)), p.tol);
  std::vector<TensorTrain<double>> parts;
  for (int i = 0; i < p.d; ++i) parts.push_back(cos_field(gl, i, (6.0 + 2.0 * i) * kPi));
  m.g = stack_components(parts, p.tol);
  // a = b c with b in [1/2, 3/2] on the grid (b hits its extremes at grid points) and c from the cell grid.
  const CoefficientBounds cb = scalar_grid_bounds(m.c, m.cell_layout);
  m.bounds = {2.0 * cb.lambda, 1.5 * cb.Lambda, cb.estimated};
  return m;
}

Homogenized homogenize(const TensorTrain<double>& c, const QttLayout& cell_layout, const HlConfig& cfg) {
  if (cell_layout.space != Space::Physical || cell_layout.arity != Arity::Scalar)
    throw ShapeError("homogenize: physical scalar cell layout expected");
  const int d = cell_layout.d;
  Homogenized h;
  h.cell_layout = cell_layout;
  h.cell_tensor = Eigen::MatrixXd::Zero(d, d);
  const CoefficientBounds cb = scalar_grid_bounds(c, cell_layout);
  const QttLayout fv = cell_layout.with_arity(Arity::Vector).with_space(Space::Fourier);
  const ProjectorSymbol p = cached_projector(fv.with_arity(Arity::Matrix), cfg.symbols, cfg.cache, false);
  const GreenSymbol q = cached_green(fv, cfg.symbols, cfg.cache, false);
  HlConfig hc = cfg;
  hc.estimate = false;
  const auto zero = constant_field(cell_layout, 0.0);
  for (int i = 0; i < d; ++i) {
    std::vector<TensorTrain<double>> parts(static_cast<size_t>(d), zero);
    parts[static_cast<size_t>(i)] = c;
    const auto g = stack_components(parts, cfg.tol);
    HlResult r = run_hl(c, cell_layout, g, hc, cb, &p, &q);
    h.converged = h.converged && r.solve.converged;
    const QttLayout vl = cell_layout.with_arity(Arity::Vector);
    for (int j = 0; j < d; ++j) {
      // mean(c psi_j) as an inner product; the Hadamard train would carry rank(c) * rank(psi_j).
      double v = inner(c, component(r.psi, vl, j)) / std::pow(static_cast<double>(cell_layout.grid_size()), d);
      if (i == j) v += grid_mean(c, cell_layout);
      h.cell_tensor(j, i) = v;
    }
    h.corrector_grads.push_back(std::move(r.psi));
    h.correctors.push_back(std::move(r.u.u_phys));
    h.solves.push_back(std::move(r.solve));
  }
  h.cell_tensor = (0.5 * (h.cell_tensor + h.cell_tensor.transpose())).eval();
  return h;
}

TensorTrain<double> homogenized_coefficient(const TensorTrain<double>& b, const QttLayout& lay,
                                            const Eigen::MatrixXd& A, double tol) {
  if (A.rows() != lay.d || A.cols() != lay.d) throw ShapeError("homogenized_coefficient: tensor size mismatch");
  std::vector<TensorTrain<double>> parts;
  for (int i = 0; i < lay.d; ++i)
    for (int j = 0; j < lay.d; ++j) parts.push_back(scale(b, A(i, j)));
  return stack_components(parts, tol);
}

MultiscaleRow run_multiscale(const MultiscaleCase& mc, const Homogenized& hom, const HlConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const QttLayout& gl = mc.layout;
  const QttLayout fv = gl.with_arity(Arity::Vector).with_space(Space::Fourier);
  const ProjectorSymbol p = cached_projector(fv.with_arity(Arity::Matrix), cfg.symbols, cfg.cache, false);
  const GreenSymbol q = cached_green(fv, cfg.symbols, cfg.cache, false);
  MultiscaleRow row;
  row.L0 = mc.params.L0;
  row.Le = mc.params.Le;
  row.eps = std::ldexp(1.0, -mc.params.Le);
  HlResult fine = run_hl(mc.a, gl, mc.g, cfg, mc.bounds, &p, &q);
  row.errors = *fine.errors;
  row.sweeps = fine.solve.sweeps;
  row.max_cond = fine.solve.max_cond;
  row.psi_ranks = fine.psi_hat.ranks();
  row.u_ranks = round(fine.u.u_phys, cfg.tol).ranks();

  const QttLayout ml = gl.with_arity(Arity::Matrix);
  const auto abar = homogenized_coefficient(mc.b, gl, hom.cell_tensor, cfg.tol);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hom.cell_tensor, Eigen::EigenvaluesOnly);
  const CoefficientBounds bb{1.0 / (0.5 * es.eigenvalues().minCoeff()), 1.5 * es.eigenvalues().maxCoeff(), false};
  HlConfig hc = cfg;
  hc.estimate = false;
  HlResult bar = run_hl(abar, ml, mc.g, hc, bb, &p, &q);
  const auto e = homogenization_errors(fine.psi, fine.u.u_phys, bar.u.u_phys, bar.psi, hom.corrector_grads,
                                       hom.cell_layout.with_arity(Arity::Vector), mc.params.Le, cfg.tol);
  row.E_hom_grad = e.grad;
  row.E_hom_u = e.u;
  row.seconds = seconds_since(t0);
  return row;
}

namespace dense {

namespace {

Index pow_int(Index b, int e) {
  Index r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

template <class T>
Eigen::Matrix<T, -1, 1> reorder(const TensorTrain<T>& field, const QttLayout& lay) {
  if (field.site_dims() != lay.site_dims()) throw ShapeError("dense: field does not match layout");
  const auto dims = lay.site_dims();
  const auto vals = to_dense(field);
  const Index N = lay.grid_size();
  const Index n = pow_int(N, lay.d);
  Eigen::Matrix<T, -1, 1> out(static_cast<Index>(vals.size()));
  std::vector<int> bits(dims.size());
  for (Index f = 0; f < static_cast<Index>(vals.size()); ++f) {
    Index rem = f;
    for (size_t s = dims.size(); s-- > 0;) {
      bits[s] = static_cast<int>(rem % dims[s]);
      rem /= dims[s];
    }
    Index comp = 0;
    const auto c = decode(lay, bits, &comp);
    Index pos = 0;
    for (int i = 0; i < lay.d; ++i) pos = pos * N + ((c[static_cast<size_t>(i)] % N) + N) % N;
    out[comp * n + pos] = vals[static_cast<size_t>(f)];
  }
  return out;
}

// Unitary d-dimensional DFT of a row-major block, kernel exp(-2 pi i m j / N) / sqrt(N) per axis.
void fftn(Eigen::VectorXcd& x, int d, Index N, bool inverse) {
  Eigen::FFT<double> fft;
  std::vector<cplx> line(static_cast<size_t>(N)), out(static_cast<size_t>(N));
  const Index n = x.size();
  const double s = 1.0 / std::sqrt(static_cast<double>(N));
  for (int axis = 0; axis < d; ++axis) {
    const Index stride = pow_int(N, d - 1 - axis);
    for (Index base = 0; base < n; ++base) {
      if ((base / stride) % N != 0) continue;
      for (Index t = 0; t < N; ++t) line[static_cast<size_t>(t)] = x[base + t * stride];
      if (inverse) {
        fft.inv(out, line);
        for (Index t = 0; t < N; ++t) x[base + t * stride] = out[static_cast<size_t>(t)] * (static_cast<double>(N) * s);
      } else {
        fft.fwd(out, line);
        for (Index t = 0; t < N; ++t) x[base + t * stride] = out[static_cast<size_t>(t)] * s;
      }
    }
  }
}

std::vector<Index> signed_freq(Index pos, int d, Index N) {
  std::vector<Index> m(static_cast<size_t>(d));
  for (int i = d; i-- > 0;) {
    Index v = pos % N;
    pos /= N;
    m[static_cast<size_t>(i)] = v >= N / 2 ? v - N : v;
  }
  return m;
}

template <class MatVec>
Eigen::VectorXcd conjugate_gradient(const MatVec& A, const Eigen::VectorXcd& b, double tol, int max_it) {
  Eigen::VectorXcd x = Eigen::VectorXcd::Zero(b.size()), r = b, p = b;
  double rr = r.squaredNorm();
  const double bn = b.norm();
  for (int it = 0; it < max_it && std::sqrt(rr) > tol * bn; ++it) {
    const Eigen::VectorXcd q = A(p);
    const cplx alpha = rr / p.dot(q);
    x += alpha * p;
    r -= alpha * q;
    const double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  if (std::sqrt(rr) > tol * bn) throw SolverError("dense oracle: conjugate gradients did not converge");
  return x;
}

}  // namespace

Eigen::VectorXd grid_values(const TensorTrain<double>& field, const QttLayout& lay) { return reorder(field, lay); }
Eigen::VectorXcd grid_values(const TensorTrain<cplx>& field, const QttLayout& lay) { return reorder(field, lay); }
Eigen::VectorXcd fourier_values(const TensorTrain<cplx>& field, const QttLayout& lay) { return reorder(field, lay); }

PenalizedSolution penalized_solve(const Eigen::VectorXd& a, const Eigen::VectorXd& g, int d, int L, double mu,
                                  bool condition) {
  const Index N = Index(1) << L;
  const Index n = pow_int(N, d);
  const Index total = d * n;
  if (total > (Index(1) << 16)) throw ShapeError("dense oracle: more than 2^16 unknowns");
  if (a.size() != n || g.size() != total) throw ShapeError("dense oracle: field sizes do not match the grid");
  // g_hat with zero mean, rhs = -g_hat.
  Eigen::VectorXcd rhs(total);
  for (int c = 0; c < d; ++c) {
    Eigen::VectorXcd blk = g.segment(c * n, n).cast<cplx>();
    fftn(blk, d, N, false);
    blk[0] = 0;
    rhs.segment(c * n, n) = -blk;
  }
  // Per-frequency projector and unit wave vector.
  std::vector<Eigen::MatrixXd> P(static_cast<size_t>(n));
  Eigen::MatrixXd khat = Eigen::MatrixXd::Zero(d, n);
  for (Index m = 0; m < n; ++m) {
    const auto ms = signed_freq(m, d, N);
    Eigen::VectorXd k(d);
    for (int i = 0; i < d; ++i) k[i] = 2 * kPi * static_cast<double>(ms[static_cast<size_t>(i)]);
    if (m == 0) {
      P[0] = Eigen::MatrixXd::Identity(d, d);
    } else {
      P[static_cast<size_t>(m)] = Eigen::MatrixXd::Identity(d, d) - k * k.transpose() / k.squaredNorm();
      khat.col(m) = k / k.norm();
    }
  }
  const auto conv = [&](const Eigen::VectorXcd& x) {
    Eigen::VectorXcd y(x.size());
    for (int c = 0; c < d; ++c) {
      Eigen::VectorXcd blk = x.segment(c * n, n);
      fftn(blk, d, N, true);
      blk = blk.cwiseProduct(a.cast<cplx>());
      fftn(blk, d, N, false);
      y.segment(c * n, n) = blk;
    }
    return y;
  };
  const auto proj = [&](const Eigen::VectorXcd& x) {
    Eigen::VectorXcd y(x.size());
    for (Index m = 0; m < n; ++m)
      for (int i = 0; i < d; ++i) {
        cplx s = 0;
        for (int j = 0; j < d; ++j) s += P[static_cast<size_t>(m)](i, j) * x[j * n + m];
        y[i * n + m] = s;
      }
    return y;
  };
  // Potential fields psi(m) = khat(m) w(m), m != 0.
  const auto G = [&](const Eigen::VectorXcd& w) {
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(total);
    for (Index m = 1; m < n; ++m)
      for (int i = 0; i < d; ++i) y[i * n + m] = khat(i, m) * w[m - 1];
    return y;
  };
  const auto Gh = [&](const Eigen::VectorXcd& y) {
    Eigen::VectorXcd w(n - 1);
    for (Index m = 1; m < n; ++m) {
      cplx s = 0;
      for (int i = 0; i < d; ++i) s += khat(i, m) * y[i * n + m];
      w[m - 1] = s;
    }
    return w;
  };
  PenalizedSolution out;
  out.direct = total <= 4096;
  if (out.direct) {
    // Explicit convolution matrix from the DFT of a.
    Eigen::VectorXcd ahat = a.cast<cplx>();
    fftn(ahat, d, N, false);
    ahat /= std::sqrt(static_cast<double>(n));
    Eigen::MatrixXcd C(n, n);
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(total, total);
    for (Index m = 0; m < n; ++m) {
      const auto ms = signed_freq(m, d, N);
      for (Index mp = 0; mp < n; ++mp) {
        const auto mps = signed_freq(mp, d, N);
        Index diff = 0;
        for (int i = 0; i < d; ++i)
          diff = diff * N + (((ms[static_cast<size_t>(i)] - mps[static_cast<size_t>(i)]) % N) + N) % N;
        C(m, mp) = ahat[diff];
        for (int c = 0; c < d; ++c) A(c * n + m, c * n + mp) = ahat[diff];
      }
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) A(i * n + m, j * n + m) += mu * P[static_cast<size_t>(m)](i, j);
    }
    A = (0.5 * (A + A.adjoint())).eval();
    Eigen::LLT<Eigen::MatrixXcd> llt(A);
    if (llt.info() != Eigen::Success) throw SolverError("dense oracle: penalized matrix is not positive definite");
    out.psi_hat = llt.solve(rhs);
    if (condition) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(A, Eigen::EigenvaluesOnly);
      out.cond = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
    }
    // Reduced system on potential fields; the penalty vanishes there.
    Eigen::MatrixXcd R(n - 1, n - 1);
    for (Index m = 1; m < n; ++m)
      for (Index mp = 1; mp < n; ++mp) {
        double kk = 0;
        for (int i = 0; i < d; ++i) kk += khat(i, m) * khat(i, mp);
        R(m - 1, mp - 1) = kk * C(m, mp);
      }
    R = (0.5 * (R + R.adjoint())).eval();
    out.grad_hat = G(Eigen::LLT<Eigen::MatrixXcd>(R).solve(Gh(rhs)));
  } else {
    const auto op = [&](const Eigen::VectorXcd& x) { Eigen::VectorXcd y = conv(x) + mu * proj(x); return y; };
    out.psi_hat = conjugate_gradient(op, rhs, 1e-13, 200000);
    const auto red = [&](const Eigen::VectorXcd& w) { return Gh(conv(G(w))); };
    out.grad_hat = G(conjugate_gradient(red, Gh(rhs), 1e-13, 200000));
  }
  return out;
}

Eigen::VectorXd fd_solve(const Eigen::VectorXd& a, const Eigen::VectorXd& g, const Eigen::VectorXd& f, int d, int L,
                         double gamma, double* cond) {
  const Index N = Index(1) << L;
  const Index n = pow_int(N, d);
  if (n > 4096) throw ShapeError("dense fd oracle: more than 4096 unknowns");
  if (a.size() != n || f.size() != n || g.size() != d * n) throw ShapeError("dense fd oracle: size mismatch");
  Eigen::MatrixXd A = gamma * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd rhs = f;
  const double h_inv = static_cast<double>(N);
  for (int i = 0; i < d; ++i) {
    const Index stride = pow_int(N, d - 1 - i);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
    for (Index p = 0; p < n; ++p) {
      const Index ji = (p / stride) % N;
      const Index q = p + (((ji + 1) % N) - ji) * stride;
      D(p, q) += h_inv;
      D(p, p) -= h_inv;
    }
    A += D.transpose() * a.asDiagonal() * D;
    rhs -= D.transpose() * g.segment(i * n, n);
  }
  if (cond) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
    *cond = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
  }
  return A.llt().solve(rhs);
}

}  // namespace dense

}  // namespace qtthl
