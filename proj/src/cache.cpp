#include "qtthl/cache.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "qtthl/io.hpp"

namespace qtthl {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class FileLock {
 public:
  FileLock(const std::string& path, bool exclusive) {
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) throw IoError("cache: cannot open lock file " + path);
    if (::flock(fd_, exclusive ? LOCK_EX : LOCK_SH) != 0) {
      ::close(fd_);
      throw IoError("cache: cannot lock " + path);
    }
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

json report_json(const TciReport& r) {
  return {{"error_estimate", r.error_estimate}, {"fmax", r.fmax},           {"max_rank", r.max_rank},
          {"sweeps", r.sweeps},                 {"converged", r.converged}, {"rank_limited", r.rank_limited},
          {"evaluations", r.evaluations}};
}

TciReport report_from(const json& j) {
  TciReport r;
  r.error_estimate = j.at("error_estimate");
  r.fmax = j.at("fmax");
  r.max_rank = j.at("max_rank");
  r.sweeps = j.at("sweeps");
  r.converged = j.at("converged");
  r.rank_limited = j.at("rank_limited");
  r.evaluations = j.at("evaluations");
  return r;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream o(p);
  o << text;
  if (!o) throw IoError("cache: cannot write " + p.string());
}

template <class Symbol>
void store(const std::string& root, const std::string& key, const Symbol& s, const TensorTrain<cplx>& tt) {
  fs::create_directories(root);
  FileLock lock((fs::path(root) / ".lock").string(), true);
  const fs::path base = fs::path(root) / key;
  const std::string tmp = "." + std::to_string(::getpid());
  json meta = {{"layout", {{"d", s.layout.d}, {"L", s.layout.L}, {"format", to_string(s.layout.format)}}},
               {"tol", s.tol},
               {"rank", s.rank},
               {"mc_error", s.mc_error},
               {"degraded", s.degraded},
               {"tci", report_json(s.tci)}};
  save_train(base.string() + ".tt" + tmp, tt, s.layout);
  write_text(base.string() + ".json" + tmp, meta.dump(2));
  fs::rename(base.string() + ".tt" + tmp, base.string() + ".tt");
  fs::rename(base.string() + ".json" + tmp, base.string() + ".json");
}

template <class Symbol>
std::optional<Symbol> load(const std::string& root, const std::string& key, const QttLayout& lay,
                           TensorTrain<cplx> Symbol::*field) {
  const fs::path base = fs::path(root) / key;
  if (!fs::exists(base.string() + ".tt") || !fs::exists(base.string() + ".json")) return std::nullopt;
  FileLock lock((fs::path(root) / ".lock").string(), false);
  std::ifstream in(base.string() + ".json");
  const json meta = json::parse(in);
  std::optional<QttLayout> stored;
  Symbol s;
  s.*field = load_train<cplx>(base.string() + ".tt", &stored);
  if (!stored || *stored != lay) throw IoError("cache: layout mismatch in " + base.string());
  s.layout = lay;
  s.tol = meta.at("tol");
  s.rank = meta.at("rank");
  s.mc_error = meta.at("mc_error");
  s.degraded = meta.at("degraded");
  s.tci = report_from(meta.at("tci"));
  return s;
}

}  // namespace

OperatorCache::OperatorCache(std::string root) : root_(std::move(root)) {}

std::optional<OperatorCache> OperatorCache::from_env() {
  const char* v = std::getenv("QTTHL_CACHE");
  if (!v || !*v) return std::nullopt;
  return OperatorCache(v);
}

std::string OperatorCache::key(const QttLayout& lay, const SymbolOptions& opt) const {
  char tol[32];
  std::snprintf(tol, sizeof tol, "%.3g", opt.tol);
  std::string k = std::string(lay.arity == Arity::Matrix ? "proj" : "green") + "_d" + std::to_string(lay.d) + "_L" +
                  std::to_string(lay.L) + "_" + to_string(lay.format) + "_tol" + tol + "_r" +
                  std::to_string(opt.max_rank);
  if (opt.kind == SymbolKind::FiniteDifference) k += "_fd";
  return k;
}

std::optional<ProjectorSymbol> OperatorCache::load_projector(const QttLayout& lay, const SymbolOptions& opt) const {
  return load<ProjectorSymbol>(root_, key(lay, opt), lay, &ProjectorSymbol::p);
}

void OperatorCache::store_projector(const ProjectorSymbol& p, const SymbolOptions& opt) const {
  store(root_, key(p.layout, opt), p, p.p);
}

std::optional<GreenSymbol> OperatorCache::load_green(const QttLayout& lay, const SymbolOptions& opt) const {
  return load<GreenSymbol>(root_, key(lay, opt), lay, &GreenSymbol::q);
}

void OperatorCache::store_green(const GreenSymbol& q, const SymbolOptions& opt) const {
  store(root_, key(q.layout, opt), q, q.q);
}

ProjectorSymbol cached_projector(const QttLayout& lay, const SymbolOptions& opt, const OperatorCache* cache, bool write,
                                 bool* hit) {
  if (hit) *hit = false;
  if (cache) {
    if (auto p = cache->load_projector(lay, opt)) {
      if (hit) *hit = true;
      return *p;
    }
  }
  ProjectorSymbol p = build_projector(lay, opt);
  if (cache && write) cache->store_projector(p, opt);
  return p;
}

GreenSymbol cached_green(const QttLayout& lay, const SymbolOptions& opt, const OperatorCache* cache, bool write,
                         bool* hit) {
  if (hit) *hit = false;
  if (cache) {
    if (auto q = cache->load_green(lay, opt)) {
      if (hit) *hit = true;
      return *q;
    }
  }
  GreenSymbol q = build_green(lay, opt);
  if (cache && write) cache->store_green(q, opt);
  return q;
}

}  // namespace qtthl
