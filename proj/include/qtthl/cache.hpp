#pragma once

#include <optional>
#include <string>

#include "qtthl/helmholtz.hpp"

namespace qtthl {

// On-disk store of symbols keyed by (d, L, format, tol, kind). Writers hold an exclusive flock on
// <root>/.lock and publish through rename; readers take a shared lock.
class OperatorCache {
 public:
  explicit OperatorCache(std::string root);
  // Cache rooted at $QTTHL_CACHE, if set and non-empty.
  static std::optional<OperatorCache> from_env();

  const std::string& root() const { return root_; }
  std::string key(const QttLayout& lay, const SymbolOptions& opt) const;

  std::optional<ProjectorSymbol> load_projector(const QttLayout& lay, const SymbolOptions& opt) const;
  void store_projector(const ProjectorSymbol& p, const SymbolOptions& opt) const;
  std::optional<GreenSymbol> load_green(const QttLayout& lay, const SymbolOptions& opt) const;
  void store_green(const GreenSymbol& q, const SymbolOptions& opt) const;

 private:
  std::string root_;
};

// Loads from the cache when possible; otherwise builds, and stores if `write` is set.
ProjectorSymbol cached_projector(const QttLayout& lay, const SymbolOptions& opt, const OperatorCache* cache,
                                 bool write, bool* hit = nullptr);
GreenSymbol cached_green(const QttLayout& lay, const SymbolOptions& opt, const OperatorCache* cache, bool write,
                         bool* hit = nullptr);

}  // namespace qtthl
