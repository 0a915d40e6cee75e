#pragma once

// Brute-force reference implementations used only by tests.

#include <complex>
#include <random>
#include <vector>

#include "qtthl/mpo.hpp"

namespace oracle {

using qtthl::Index;

inline std::vector<int> digits(Index flat, const std::vector<Index>& dims) {
  std::vector<int> d(dims.size());
  for (size_t i = dims.size(); i > 0; --i) {
    d[i - 1] = static_cast<int>(flat % dims[i - 1]);
    flat /= dims[i - 1];
  }
  return d;
}

// Entry-by-entry contraction with explicit loops.
template <class T>
std::vector<T> dense(const qtthl::TensorTrain<T>& tt) {
  const auto dims = tt.site_dims();
  Index total = 1;
  for (auto n : dims) total *= n;
  std::vector<T> out(static_cast<size_t>(total));
  for (Index f = 0; f < total; ++f) {
    const auto idx = digits(f, dims);
    std::vector<T> v{T(1)};
    for (size_t i = 0; i < tt.size(); ++i) {
      const auto& c = tt.core(i);
      std::vector<T> w(static_cast<size_t>(c.right), T(0));
      for (Index a = 0; a < c.left; ++a)
        for (Index b = 0; b < c.right; ++b) w[b] += v[a] * c(a, idx[i], b);
      v = w;
    }
    out[static_cast<size_t>(f)] = v[0];
  }
  return out;
}

template <class T>
double rel_diff(const std::vector<T>& a, const std::vector<T>& b) {
  double num = 0, den = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

template <class T>
double l2(const std::vector<T>& a) {
  double s = 0;
  for (auto& v : a) s += std::norm(v);
  return std::sqrt(s);
}

template <class T>
T rnd(std::mt19937_64& g) {
  std::normal_distribution<double> nd;
  if constexpr (std::is_same_v<T, double>) {
    return nd(g);
  } else {
    double re = nd(g);
    double im = nd(g);
    return T(re, im);
  }
}

}  // namespace oracle
