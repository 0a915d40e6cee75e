// qtthl: build symbol caches, run the manufactured and multiscale benchmarks, sweep parameters, merge reports.
//
// Exit codes: 0 success, 2 configuration or input error, 3 solver failure, 4 oracle/estimator failure,
// 1 anything else (I/O).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "qtthl/bench.hpp"
#include "qtthl/cache.hpp"
#include "qtthl/io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace qtthl;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitEstimator = 4;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::vector<std::string> kSolveHeader{"method",   "L",          "format",   "mu",      "gamma",
                                            "Err_u",    "Err_∇u",     "Sweeps",   "Meas. Max. Cond.",
                                            "E_P",      "E_Gamma",    "E_max",    "E_min",   "E_apriori",
                                            "cond_bound"};
const std::vector<std::string> kMultiscaleHeader{"eps",   "L0",    "Le",        "E_hom_grad", "E_hom_u",
                                                 "E_P",   "E_Gamma", "E_max",   "E_min",      "E_apriori",
                                                 "Sweeps", "Meas. Max. Cond.", "cond_bound"};
const std::vector<std::string> kProjectorHeader{"d", "L", "format", "tol", "max_rank", "rank", "mc_error", "degraded"};

using Row = std::vector<std::string>;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

std::string tag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string timestamp() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string join(const std::vector<std::string>& v, char sep = ',') {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + v[i];
  return s;
}

std::vector<std::string> split(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

void write_table(const fs::path& path, const std::vector<std::string>& header, const std::vector<Row>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << join(header) << '\n';
  for (const auto& r : rows) os << join(r) << '\n';
}

template <class T>
std::string ranks_string(const std::vector<T>& r) {
  std::vector<std::string> s;
  for (auto v : r) s.push_back(std::to_string(v));
  return join(s, ' ');
}

// Run directory: created fresh, holds the merged config, the tables and the manifest.
struct RunDir {
  fs::path dir;
  json manifest;

  RunDir(const std::string& out, const std::string& command, const CLI::App& app) : dir(out) {
    if (out.empty()) throw ConfigError("--out is required");
    fs::create_directories(dir);
    std::ofstream(dir / "config.toml") << "[" << app.get_name() << "]\n" << app.config_to_str(true, false);
    manifest["command"] = command;
    manifest["started"] = timestamp();
    manifest["config"] = "config.toml";
    manifest["tables"] = json::array();
    manifest["files"] = json::array();
    manifest["seconds"] = json::object();
  }
  void table(const std::string& name) { manifest["tables"].push_back(name); }
  void file(const std::string& name) { manifest["files"].push_back(name); }
  void save() {
    manifest["finished"] = timestamp();
    std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
  }
};

struct SolverArgs {
  double tol = 1e-6;
  int sweeps = 30;
  Index rank = 16;
  std::uint64_t seed = 1;
  std::string local = "auto";
  bool no_cond = false;
  double max_seconds = 0.0;
  double op_tol = 1e-12;
  double sym_tol = 1e-12;
  Index sym_rank = 400;
  int mc_samples = 4096;
};

void add_solver_options(CLI::App* c, SolverArgs& a) {
  c->add_option("--tol", a.tol, "ALS stopping threshold on the relative iterate change")->capture_default_str();
  c->add_option("--sweeps", a.sweeps, "Maximal number of ALS sweeps")->capture_default_str();
  c->add_option("--rank", a.rank, "Ranks of the ALS iterate")->capture_default_str();
  c->add_option("--seed", a.seed, "Seed of the random initial guess")->capture_default_str();
  c->add_option("--local", a.local, "Local solver: auto, direct or cg")->capture_default_str();
  c->add_flag("--no-cond", a.no_cond, "Skip local condition number measurement");
  c->add_option("--max-seconds", a.max_seconds, "Wall-clock budget of each ALS solve, 0 for none")->capture_default_str();
  c->add_option("--op-tol", a.op_tol, "Rounding tolerance of assembled operators and fields")->capture_default_str();
  c->add_option("--symbol-tol", a.sym_tol, "Cross interpolation tolerance of the symbols")->capture_default_str();
  c->add_option("--symbol-rank", a.sym_rank, "Rank cap of the symbols")->capture_default_str();
  c->add_option("--mc-samples", a.mc_samples, "Monte-Carlo samples for symbol errors")->capture_default_str();
}

SolveConfig als_config(const SolverArgs& a) {
  SolveConfig c;
  c.tol = a.tol;
  c.max_sweeps = a.sweeps;
  c.max_rank = a.rank;
  c.seed = a.seed;
  if (a.local == "auto") c.local = LocalSolver::Auto;
  else if (a.local == "direct") c.local = LocalSolver::Direct;
  else if (a.local == "cg") c.local = LocalSolver::ConjugateGradient;
  else throw ConfigError("--local must be auto, direct or cg");
  c.measure_condition = !a.no_cond;
  c.max_seconds = a.max_seconds;
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(a.op_tol > 0) || !(a.sym_tol > 0) || a.sym_rank < 1 || a.mc_samples < 1)
    throw ConfigError("operator and symbol tolerances, ranks and sample counts must be positive");
  return c;
}

SymbolOptions symbol_options(const SolverArgs& a) {
  SymbolOptions s;
  s.tol = a.sym_tol;
  s.max_rank = a.sym_rank;
  s.mc_samples = a.mc_samples;
  return s;
}

HlConfig hl_config(const SolverArgs& a, double mu, const OperatorCache* cache) {
  if (!(mu >= 0)) throw ConfigError("mu must be non-negative");
  HlConfig c;
  c.mu = mu;
  c.tol = a.op_tol;
  c.als = als_config(a);
  c.symbols = symbol_options(a);
  c.cache = cache;
  return c;
}

Format format_arg(const std::string& s) {
  try {
    return parse_format(s);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void write_sweeps(const fs::path& path, const SolveReport& r) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  r.write_csv(os);
}

Row hl_row(const ManufacturedRow& m) {
  const auto& e = *m.errors;
  return {"HL", std::to_string(m.L), to_string(m.format), num(m.mu), num(0.0), num(m.err_u), num(m.err_grad_u),
          std::to_string(m.sweeps), num(m.max_cond), num(e.E_P), num(e.E_Gamma), num(e.E_max), num(e.E_min),
          num(e.E_apriori), num(m.cond_bound)};
}

Row fd_row(const ManufacturedRow& m) {
  return {"FD", std::to_string(m.L), to_string(m.format), "", num(m.gamma), num(m.err_u), num(m.err_grad_u),
          std::to_string(m.sweeps), num(m.max_cond), "", "", "", "", "", num(m.cond_bound)};
}

// ---------------------------------------------------------------------------------------------------------
// solve

struct SolveArgs {
  std::string problem = "manufactured";
  std::string method = "hl";
  int L = 10;
  std::string format = "x1y1";
  std::vector<double> mu{1e4};
  double gamma = 1e-2;
  std::string coefficient, source, f;
  std::string out;
  SolverArgs solver;
};

void add_solve_options(CLI::App* c, SolveArgs& a, bool lists) {
  c->add_option("--problem", a.problem, "manufactured or custom")->capture_default_str();
  c->add_option("--method", a.method, "hl (penalized Fourier) or fd (finite differences)")->capture_default_str();
  if (!lists) {
    c->add_option("--L", a.L, "Levels per axis")->capture_default_str();
    c->add_option("--format", a.format, "Site ordering")->capture_default_str();
  }
  c->add_option("--mu", a.mu, "Penalty; several values give a mu sweep")->delimiter(',')->default_str("1e4");
  c->add_option("--gamma", a.gamma, "Zeroth-order coefficient of the finite-difference problem")->capture_default_str();
  c->add_option("--coefficient", a.coefficient, "custom: physical coefficient train with layout header");
  c->add_option("--source", a.source, "custom: physical vector source train with layout header");
  c->add_option("--f", a.f, "custom fd: physical scalar right-hand side train");
  c->add_option("--out", a.out, "Output directory")->required();
  add_solver_options(c, a.solver);
}

void validate_solve(const SolveArgs& a) {
  if (a.method != "hl" && a.method != "fd") throw ConfigError("--method must be hl or fd");
  if (a.problem != "manufactured" && a.problem != "custom") throw ConfigError("--problem must be manufactured or custom");
  if (a.problem == "manufactured" && a.L < 4) throw ConfigError("manufactured problem needs L >= 4");
  if (a.problem == "custom" && (a.coefficient.empty() || a.source.empty()))
    throw ConfigError("custom problem needs --coefficient and --source");
  if (a.method == "hl" && a.mu.empty()) throw ConfigError("--mu needs at least one value");
  for (double m : a.mu)
    if (!(m >= 0)) throw ConfigError("mu must be non-negative");
  if (a.method == "fd" && !(a.gamma > 0)) throw ConfigError("fd needs gamma > 0");
  format_arg(a.format);
  als_config(a.solver);
}

template <class T>
TensorTrain<T> load_field(const std::string& path, QttLayout& lay) {
  std::optional<QttLayout> l;
  auto t = load_train<T>(path, &l);
  if (!l) throw ConfigError(path + ": train has no layout header");
  lay = *l;
  return t;
}

// Runs one solve configuration into `dir`; returns the table rows.
std::vector<Row> run_solve(const SolveArgs& a, const fs::path& dir, json& seconds) {
  const auto cache = OperatorCache::from_env();
  const OperatorCache* cp = cache ? &*cache : nullptr;
  std::vector<Row> rows;
  const Format fmt = format_arg(a.format);
  if (a.problem == "manufactured" && a.method == "hl") {
    const QttLayout fv{2, a.L, fmt, Space::Fourier, Arity::Vector};
    const auto cfg0 = hl_config(a.solver, a.mu.front(), cp);
    const auto p = cached_projector(fv.with_arity(Arity::Matrix), cfg0.symbols, cp, false);
    const auto q = cached_green(fv, cfg0.symbols, cp, false);
    for (double mu : a.mu) {
      HlResult full;
      const auto row = solve_manufactured_hl(a.L, fmt, hl_config(a.solver, mu, cp), &full, &p, &q);
      rows.push_back(hl_row(row));
      const std::string t = "mu" + tag(mu);
      write_sweeps(dir / ("sweeps_" + t + ".csv"), full.solve);
      save_train(dir / ("psi_hat_" + t + ".qtt"), full.psi_hat, full.system.layout);
      save_train(dir / ("u_" + t + ".qtt"), full.u.u_phys, full.system.layout.with_space(Space::Physical).with_arity(Arity::Scalar));
      seconds[t] = row.seconds;
    }
  } else if (a.problem == "manufactured") {
    FdResult full;
    const auto row = solve_manufactured_fd(a.L, fmt, a.gamma, als_config(a.solver), a.solver.op_tol, &full);
    rows.push_back(fd_row(row));
    const std::string t = "gamma" + tag(a.gamma);
    write_sweeps(dir / ("sweeps_" + t + ".csv"), full.solve);
    save_train(dir / ("u_" + t + ".qtt"), full.u, QttLayout{2, a.L, fmt, Space::Physical, Arity::Scalar});
    seconds[t] = row.seconds;
  } else {
    QttLayout al, gl;
    const auto acoef = load_field<double>(a.coefficient, al);
    const auto g = load_field<double>(a.source, gl);
    if (al.space != Space::Physical || gl.arity != Arity::Vector) throw ConfigError("custom: physical coefficient and vector source expected");
    const CoefficientBounds b = [&] {
      try {
        return estimate_bounds(acoef, al);
      } catch (const std::domain_error& e) {
        throw ConfigError(std::string("custom coefficient: ") + e.what());
      }
    }();
    if (a.method == "hl") {
      for (double mu : a.mu) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = run_hl(acoef, al, g, hl_config(a.solver, mu, cp), b);
        const auto& e = *r.errors;
        rows.push_back({"HL", std::to_string(al.L), to_string(al.format), num(mu), num(0.0), "", "",
                        std::to_string(r.solve.sweeps), num(r.solve.max_cond), num(e.E_P), num(e.E_Gamma), num(e.E_max),
                        num(e.E_min), num(e.E_apriori), num(r.system.cond_bound())});
        const std::string t = "mu" + tag(mu);
        write_sweeps(dir / ("sweeps_" + t + ".csv"), r.solve);
        save_train(dir / ("psi_hat_" + t + ".qtt"), r.psi_hat, r.system.layout);
        save_train(dir / ("u_" + t + ".qtt"), r.u.u_phys, al.with_arity(Arity::Scalar));
        seconds[t] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      }
    } else {
      if (al.arity != Arity::Scalar) throw ConfigError("custom fd: scalar coefficient expected");
      TensorTrain<double> f = TensorTrain<double>::constant(std::span<const Index>(al.site_dims()), 0.0);
      if (!a.f.empty()) {
        QttLayout fl;
        f = load_field<double>(a.f, fl);
      }
      const auto t0 = std::chrono::steady_clock::now();
      const auto r = run_fd(acoef, al, g, f, a.gamma, b.Lambda, als_config(a.solver), a.solver.op_tol);
      rows.push_back({"FD", std::to_string(al.L), to_string(al.format), "", num(a.gamma), "", "",
                      std::to_string(r.solve.sweeps), num(r.solve.max_cond), "", "", "", "", "", num(r.cond_bound)});
      const std::string t = "gamma" + tag(a.gamma);
      write_sweeps(dir / ("sweeps_" + t + ".csv"), r.solve);
      save_train(dir / ("u_" + t + ".qtt"), r.u, al);
      seconds[t] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  }
  return rows;
}

int cmd_solve(const SolveArgs& a, const CLI::App& app) {
  validate_solve(a);
  RunDir run(a.out, "solve", app);
  const auto rows = run_solve(a, run.dir, run.manifest["seconds"]);
  write_table(run.dir / "results.csv", kSolveHeader, rows);
  run.table("results.csv");
  run.manifest["seed"] = a.solver.seed;
  run.save();
  for (const auto& r : rows) std::cout << join(r) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------------------------------------
// sweep

struct SweepArgs {
  SolveArgs base;
  std::vector<int> L{10};
  std::vector<std::string> formats{"x1y1"};
  int jobs = 1;
};

int cmd_sweep(SweepArgs& a, const CLI::App& app) {
  if (a.jobs < 1) throw ConfigError("--jobs must be positive");
  if (a.base.problem != "manufactured") throw ConfigError("sweep supports the manufactured problem only");
  std::vector<SolveArgs> cases;
  for (int L : a.L)
    for (const auto& f : a.formats) {
      SolveArgs c = a.base;
      c.L = L;
      c.format = f;
      validate_solve(c);
      cases.push_back(c);
    }
  RunDir run(a.base.out, "sweep", app);
  std::vector<std::vector<Row>> rows(cases.size());
  std::vector<json> secs(cases.size(), json::object());
  std::vector<std::string> failures(cases.size());
  std::vector<int> codes(cases.size(), 0);
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i; (i = next++) < cases.size();) {
      const fs::path sub = run.dir / ("L" + std::to_string(cases[i].L) + "_" + cases[i].format);
      try {
        fs::create_directories(sub);
        rows[i] = run_solve(cases[i], sub, secs[i]);
        write_table(sub / "results.csv", kSolveHeader, rows[i]);
      } catch (const SolverError& e) {
        failures[i] = e.what();
        codes[i] = kExitSolver;
      } catch (const EstimatorError& e) {
        failures[i] = e.what();
        codes[i] = kExitEstimator;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 0; j < std::min<int>(a.jobs, static_cast<int>(cases.size())); ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  std::vector<Row> all;
  int code = 0;
  for (size_t i = 0; i < cases.size(); ++i) {
    const std::string key = "L" + std::to_string(cases[i].L) + "_" + cases[i].format;
    run.manifest["seconds"][key] = secs[i];
    if (codes[i]) {
      run.manifest["failures"][key] = failures[i];
      std::cerr << key << ": " << failures[i] << '\n';
      code = std::max(code, codes[i]);
    }
    all.insert(all.end(), rows[i].begin(), rows[i].end());
  }
  write_table(run.dir / "results.csv", kSolveHeader, all);
  run.table("results.csv");
  run.manifest["seed"] = a.base.solver.seed;
  run.save();
  for (const auto& r : all) std::cout << join(r) << '\n';
  return code;
}

// ---------------------------------------------------------------------------------------------------------
// build-projector

struct ProjectorArgs {
  int d = 2;
  int L = 10;
  std::string format = "x1y1";
  double tol = 1e-8;
  Index max_rank = 400;
  int mc_samples = 4096;
  std::uint64_t seed = 1;
  std::string kind = "spectral";
  std::vector<Index> rank_sweep;
  std::string out;
};

int cmd_build_projector(const ProjectorArgs& a, const CLI::App& app) {
  if (a.d != 2 && a.d != 3) throw ConfigError("--d must be 2 or 3");
  if (a.L < 1 || !(a.tol > 0) || a.max_rank < 1 || a.mc_samples < 1) throw ConfigError("invalid projector options");
  if (a.kind != "spectral" && a.kind != "fd") throw ConfigError("--kind must be spectral or fd");
  const auto cache = OperatorCache::from_env();
  if (!cache) throw ConfigError("QTTHL_CACHE is not set");
  const QttLayout fm{a.d, a.L, format_arg(a.format), Space::Fourier, Arity::Matrix};
  try {
    fm.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  SymbolOptions o;
  o.tol = a.tol;
  o.max_rank = a.max_rank;
  o.mc_samples = a.mc_samples;
  o.seed = a.seed;
  o.kind = a.kind == "fd" ? SymbolKind::FiniteDifference : SymbolKind::Spectral;
  RunDir run(a.out, "build-projector", app);
  const auto t0 = std::chrono::steady_clock::now();
  bool hit_p = false, hit_q = false;
  const auto p = cached_projector(fm, o, &*cache, true, &hit_p);
  const auto q = cached_green(fm.with_arity(Arity::Vector), o, &*cache, true, &hit_q);
  run.manifest["seconds"]["build"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  run.manifest["cache"] = {{"root", cache->root()}, {"projector_hit", hit_p}, {"green_hit", hit_q},
                           {"key", cache->key(fm, o)}};
  const Row row{std::to_string(a.d), std::to_string(a.L), to_string(fm.format), num(a.tol), std::to_string(a.max_rank),
                std::to_string(p.rank), num(p.mc_error), p.degraded ? "1" : "0"};
  write_table(run.dir / "projector.csv", kProjectorHeader, {row});
  run.table("projector.csv");
  std::cout << "projector rank " << p.rank << " mc_error " << num(p.mc_error) << (p.degraded ? " (degraded)" : "")
            << (hit_p ? " [cache]" : "") << "\nranks " << ranks_string(p.p.ranks()) << "\ngreen rank " << q.rank
            << " mc_error " << num(q.mc_error) << '\n';
  if (!a.rank_sweep.empty()) {
    std::vector<Row> rows;
    for (Index R : a.rank_sweep) {
      SymbolOptions s = o;
      s.max_rank = R;
      const auto ps = build_projector(fm, s);
      rows.push_back({std::to_string(a.d), std::to_string(a.L), to_string(fm.format), num(a.tol), std::to_string(R),
                      std::to_string(ps.rank), num(ps.mc_error), ps.degraded ? "1" : "0"});
      std::cout << join(rows.back()) << '\n';
    }
    write_table(run.dir / "rank_sweep.csv", kProjectorHeader, rows);
    run.table("rank_sweep.csv");
  }
  run.save();
  return 0;
}

// ---------------------------------------------------------------------------------------------------------
// multiscale

struct MultiscaleArgs {
  MultiscaleParams params;
  std::string format = "x1y1";
  std::vector<int> Le{2};
  double mu = 1e4;
  std::string out;
  SolverArgs solver;
};

int cmd_multiscale(MultiscaleArgs& a, const CLI::App& app) {
  a.params.format = format_arg(a.format);
  if (a.params.d != 2 && a.params.d != 3) throw ConfigError("--d must be 2 or 3");
  if (a.params.L0 < 2 || !(a.params.r > 0) || !(a.params.nu >= 0) || a.params.N < 1)
    throw ConfigError("invalid multiscale parameters");
  if (a.Le.empty()) throw ConfigError("--Le needs at least one value");
  for (int le : a.Le)
    if (le < 0) throw ConfigError("--Le must be non-negative");
  const auto cache = OperatorCache::from_env();
  const auto cfg = hl_config(a.solver, a.mu, cache ? &*cache : nullptr);
  RunDir run(a.out, "multiscale", app);
  run.manifest["seed"] = a.params.seed;
  std::string stage = "microstructure";
  try {
    auto p0 = a.params;
    p0.Le = a.Le.front();
    auto t0 = std::chrono::steady_clock::now();
    const auto first = multiscale(p0);
    run.manifest["seconds"]["microstructure"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    save_train(run.dir / "c.qtt", first.c, first.cell_layout);
    run.file("c.qtt");
    run.manifest["c"] = {{"rank", first.c.max_rank()}, {"tci_samples", first.c_tci.evaluations},
                         {"image_truncation", first.image_truncation},
                         {"lambda", first.bounds.lambda}, {"Lambda", first.bounds.Lambda}};
    json centers = json::array();
    for (const auto& x : first.centers) centers.push_back(x);
    run.manifest["centers"] = centers;

    stage = "correctors";
    t0 = std::chrono::steady_clock::now();
    const auto hom = homogenize(first.c, first.cell_layout, cfg);
    run.manifest["seconds"]["correctors"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    run.manifest["correctors_converged"] = hom.converged;
    {
      std::ofstream os(run.dir / "cell_tensor.csv");
      for (Index i = 0; i < hom.cell_tensor.rows(); ++i) {
        Row r;
        for (Index j = 0; j < hom.cell_tensor.cols(); ++j) r.push_back(num(hom.cell_tensor(i, j)));
        os << join(r) << '\n';
      }
    }
    run.file("cell_tensor.csv");
    for (size_t i = 0; i < hom.corrector_grads.size(); ++i) {
      const std::string name = "corrector_grad_" + std::to_string(i) + ".qtt";
      save_train(run.dir / name, hom.corrector_grads[i], first.cell_layout.with_arity(Arity::Vector));
      run.file(name);
    }

    std::vector<Row> rows;
    for (int le : a.Le) {
      stage = "Le=" + std::to_string(le);
      auto p = a.params;
      p.Le = le;
      const auto mc = le == p0.Le ? first : multiscale(p);
      const auto r = run_multiscale(mc, hom, cfg);
      const auto& e = r.errors;
      rows.push_back({num(r.eps), std::to_string(r.L0), std::to_string(r.Le), num(r.E_hom_grad), num(r.E_hom_u),
                      num(e.E_P), num(e.E_Gamma), num(e.E_max), num(e.E_min), num(e.E_apriori),
                      std::to_string(r.sweeps), num(r.max_cond), num(e.cond_bound)});
      std::cout << join(rows.back()) << '\n';
      const std::string name = "ranks_Le" + std::to_string(le) + ".dat";
      std::ofstream os(run.dir / name);
      os << "# bond rank of grad u (Fourier iterate)\n";
      for (size_t k = 0; k < r.psi_ranks.size(); ++k) os << k << ' ' << r.psi_ranks[k] << '\n';
      os << "\n\n# bond rank of u\n";
      for (size_t k = 0; k < r.u_ranks.size(); ++k) os << k << ' ' << r.u_ranks[k] << '\n';
      run.file(name);
      run.manifest["seconds"][stage] = r.seconds;
      write_table(run.dir / "multiscale.csv", kMultiscaleHeader, rows);
    }
    run.table("multiscale.csv");
  } catch (...) {
    run.manifest["failed_stage"] = stage;
    run.save();
    throw;
  }
  run.save();
  return 0;
}

// ---------------------------------------------------------------------------------------------------------
// report

struct ReportArgs {
  std::vector<std::string> runs;
  std::string out;
};

double field(const Row& r, const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) return 0.0;
  const auto& s = r[static_cast<size_t>(it - header.begin())];
  return s.empty() ? 0.0 : std::stod(s);
}

std::string text(const Row& r, const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? "" : r[static_cast<size_t>(it - header.begin())];
}

int cmd_report(const ReportArgs& a) {
  if (a.runs.empty()) throw ConfigError("report needs at least one run directory");
  if (a.out.empty()) throw ConfigError("--out is required");
  const fs::path out = fs::weakly_canonical(a.out);
  // Tables grouped by header line, in input order.
  std::map<std::string, std::pair<std::string, std::vector<Row>>> groups;
  std::vector<std::string> order;
  json inputs = json::array();
  for (const auto& d : a.runs) {
    const fs::path dir = fs::weakly_canonical(d);
    if (dir == out) throw ConfigError("report: output directory " + a.out + " is also an input");
    json m;
    try {
      std::ifstream is(dir / "manifest.json");
      if (!is) throw ConfigError("report: " + d + " has no manifest.json");
      m = json::parse(is);
    } catch (const json::exception& e) {
      throw ConfigError("report: corrupt manifest in " + d + ": " + e.what());
    }
    if (!m.contains("command") || !m.contains("tables")) throw ConfigError("report: incomplete manifest in " + d);
    if (m["command"] == "report") throw ConfigError("report: " + d + " is a report directory; refusing to re-aggregate");
    inputs.push_back({{"dir", dir.string()}, {"command", m["command"]}});
    for (const auto& t : m["tables"]) {
      const std::string name = t.get<std::string>();
      std::ifstream is(dir / name);
      if (!is) throw ConfigError("report: missing table " + (dir / name).string());
      std::string header, line;
      std::getline(is, header);
      if (!groups.count(header)) order.push_back(header);
      auto& g = groups[header];
      if (g.first.empty()) g.first = name;
      while (std::getline(is, line))
        if (!line.empty()) g.second.push_back(split(line));
    }
  }
  fs::create_directories(out);
  json manifest{{"command", "report"}, {"started", timestamp()}, {"inputs", inputs}, {"tables", json::array()}};
  std::map<std::string, int> used_names;
  for (const auto& header : order) {
    auto& [name, rows] = groups[header];
    const auto cols = split(header);
    if (cols == kSolveHeader) {
      std::stable_sort(rows.begin(), rows.end(), [&](const Row& x, const Row& y) {
        const auto kx = std::make_tuple(text(x, cols, "method"), text(x, cols, "format"), field(x, cols, "L"),
                                        field(x, cols, "mu"), field(x, cols, "gamma"));
        const auto ky = std::make_tuple(text(y, cols, "method"), text(y, cols, "format"), field(y, cols, "L"),
                                        field(y, cols, "mu"), field(y, cols, "gamma"));
        return kx < ky;
      });
      std::ofstream dat(out / "fig_mu.dat");
      dat << "# mu Err_grad_u E_max E_apriori meas_max_cond cond_bound, one block per (method, format, L)\n";
      std::string block;
      for (const auto& r : rows) {
        if (text(r, cols, "method") != "HL") continue;
        const std::string key = text(r, cols, "format") + " L=" + text(r, cols, "L");
        if (key != block) {
          dat << (block.empty() ? "" : "\n\n") << "# " << key << '\n';
          block = key;
        }
        dat << text(r, cols, "mu") << ' ' << text(r, cols, "Err_∇u") << ' ' << text(r, cols, "E_max") << ' '
            << text(r, cols, "E_apriori") << ' ' << text(r, cols, "Meas. Max. Cond.") << ' '
            << text(r, cols, "cond_bound") << '\n';
      }
    } else if (cols == kMultiscaleHeader) {
      std::stable_sort(rows.begin(), rows.end(),
                       [&](const Row& x, const Row& y) { return field(x, cols, "eps") > field(y, cols, "eps"); });
      std::ofstream dat(out / "fig_homog.dat");
      dat << "# eps E_hom_grad E_hom_u E_max E_min\n";
      for (const auto& r : rows)
        dat << text(r, cols, "eps") << ' ' << text(r, cols, "E_hom_grad") << ' ' << text(r, cols, "E_hom_u") << ' '
            << text(r, cols, "E_max") << ' ' << text(r, cols, "E_min") << '\n';
    } else if (cols == kProjectorHeader) {
      std::stable_sort(rows.begin(), rows.end(), [&](const Row& x, const Row& y) {
        return std::make_tuple(field(x, cols, "L"), field(x, cols, "max_rank")) <
               std::make_tuple(field(y, cols, "L"), field(y, cols, "max_rank"));
      });
      std::ofstream dat(out / "fig_rank_p.dat");
      dat << "# L rank mc_error\n";
      for (const auto& r : rows)
        dat << text(r, cols, "L") << ' ' << text(r, cols, "rank") << ' ' << text(r, cols, "mc_error") << '\n';
    }
    std::string file = name;
    if (used_names[name]++) file = fs::path(name).stem().string() + "_" + std::to_string(used_names[name]) + ".csv";
    write_table(out / file, cols, rows);
    manifest["tables"].push_back(file);
  }
  manifest["finished"] = timestamp();
  std::ofstream(out / "manifest.json") << manifest.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"QTT solver for periodic diffusion problems through a penalized Helmholtz-Leray formulation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "File of key = value lines under a [subcommand] section; flags override it");

  SolveArgs solve_args;
  auto* solve_cmd = app.add_subcommand("solve", "Manufactured or custom problem, penalized Fourier or finite differences");
  solve_cmd->fallthrough();
  add_solve_options(solve_cmd, solve_args, false);

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "Manufactured runs over levels, formats and penalties");
  sweep_cmd->fallthrough();
  add_solve_options(sweep_cmd, sweep_args.base, true);
  sweep_cmd->add_option("--L", sweep_args.L, "Levels per axis")->delimiter(',')->default_str("10");
  sweep_cmd->add_option("--format", sweep_args.formats, "Site orderings")->delimiter(',')->default_str("x1y1");
  sweep_cmd->add_option("--jobs", sweep_args.jobs, "Concurrent runs")->capture_default_str();

  ProjectorArgs proj_args;
  auto* proj_cmd = app.add_subcommand("build-projector", "Build and cache the projector and Green symbols");
  proj_cmd->fallthrough();
  proj_cmd->add_option("--d", proj_args.d, "Dimension")->capture_default_str();
  proj_cmd->add_option("--L", proj_args.L, "Levels per axis")->capture_default_str();
  proj_cmd->add_option("--format", proj_args.format, "Site ordering")->capture_default_str();
  proj_cmd->add_option("--tol", proj_args.tol, "Cross interpolation tolerance")->capture_default_str();
  proj_cmd->add_option("--max-rank", proj_args.max_rank, "Rank cap")->capture_default_str();
  proj_cmd->add_option("--mc-samples", proj_args.mc_samples, "Monte-Carlo samples")->capture_default_str();
  proj_cmd->add_option("--seed", proj_args.seed, "Pivot and sampling seed")->capture_default_str();
  proj_cmd->add_option("--kind", proj_args.kind, "spectral or fd wave numbers")->capture_default_str();
  proj_cmd->add_option("--rank-sweep", proj_args.rank_sweep, "Rank caps for (rank, error) rows")->delimiter(',');
  proj_cmd->add_option("--out", proj_args.out, "Output directory")->required();

  MultiscaleArgs ms_args;
  ms_args.solver.rank = 40;
  ms_args.solver.sweeps = 40;
  ms_args.solver.sym_tol = 1e-10;
  auto* ms_cmd = app.add_subcommand("multiscale", "Inclusion microstructure, fine solve, correctors and homogenized solve");
  ms_cmd->fallthrough();
  ms_cmd->add_option("--d", ms_args.params.d, "Dimension")->capture_default_str();
  ms_cmd->add_option("--N", ms_args.params.N, "Number of inclusions")->capture_default_str();
  ms_cmd->add_option("--r", ms_args.params.r, "Gaussian width")->capture_default_str();
  ms_cmd->add_option("--nu", ms_args.params.nu, "Inclusion contrast")->capture_default_str();
  ms_cmd->add_option("--L0", ms_args.params.L0, "Cell levels")->capture_default_str();
  ms_cmd->add_option("--Le", ms_args.Le, "Scale separation levels, eps = 2^-Le")->delimiter(',')->default_str("2");
  ms_cmd->add_option("--pack-seed", ms_args.params.seed, "Packing seed")->capture_default_str();
  ms_cmd->add_option("--format", ms_args.format, "Site ordering")->capture_default_str();
  ms_cmd->add_option("--tci-tol", ms_args.params.tci_tol, "Cell field interpolation tolerance")->capture_default_str();
  ms_cmd->add_option("--tci-rank", ms_args.params.tci_max_rank, "Cell field rank cap")->capture_default_str();
  ms_cmd->add_option("--mu", ms_args.mu, "Penalty")->capture_default_str();
  ms_cmd->add_option("--out", ms_args.out, "Output directory")->required();
  add_solver_options(ms_cmd, ms_args.solver);

  ReportArgs rep_args;
  auto* rep_cmd = app.add_subcommand("report", "Merge run directories into sorted tables and plot data");
  rep_cmd->add_option("runs", rep_args.runs, "Run directories")->required();
  rep_cmd->add_option("--out", rep_args.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  try {
    if (*solve_cmd) return cmd_solve(solve_args, *solve_cmd);
    if (*sweep_cmd) return cmd_sweep(sweep_args, *sweep_cmd);
    if (*proj_cmd) return cmd_build_projector(proj_args, *proj_cmd);
    if (*ms_cmd) return cmd_multiscale(ms_args, *ms_cmd);
    if (*rep_cmd) return cmd_report(rep_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  } catch (const EstimatorError& e) {
    std::cerr << "estimator failure: " << e.what() << '\n';
    return kExitEstimator;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
