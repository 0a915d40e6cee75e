#include "qtthl/analytic.hpp"

#include <cmath>
#include <numbers>

namespace qtthl {

TensorTrain<double> cos_1d(int L, double omega, double phase) {
  if (L < 1) throw ShapeError("cos_1d: L must be positive");
  // Rotation matrices R(t) = [[cos t, sin t], [-sin t, cos t]] compose additively.
  auto rot = [](double t) {
    RMat<double> r(2, 2);
    r << std::cos(t), std::sin(t), -std::sin(t), std::cos(t);
    return r;
  };
  auto theta = [&](int l, int bit) { return omega * bit * std::ldexp(1.0, -l); };
  if (L == 1) {
    Core<double> c(1, 2, 1);
    for (int s = 0; s < 2; ++s) c(0, s, 0) = std::cos(theta(1, s) + phase);
    return TensorTrain<double>(std::vector<Core<double>>{c});
  }
  std::vector<Core<double>> cores;
  for (int l = 1; l <= L; ++l) {
    const Index left = l == 1 ? 1 : 2, right = l == L ? 1 : 2;
    Core<double> c(left, 2, right);
    for (int s = 0; s < 2; ++s) {
      RMat<double> r = rot(theta(l, s) + (l == 1 ? phase : 0.0));
      for (Index a = 0; a < left; ++a)
        for (Index b = 0; b < right; ++b) c(a, s, b) = r(a, b);
    }
    cores.push_back(std::move(c));
  }
  return TensorTrain<double>(std::move(cores));
}

template <Scalar T>
TensorTrain<T> exp_1d(int L, T rate) {
  std::vector<std::vector<T>> f;
  for (int l = 1; l <= L; ++l) f.push_back({T(1), std::exp(rate * std::ldexp(1.0, -l))});
  return TensorTrain<T>::product(f);
}

template <Scalar T>
TensorTrain<T> reverse_sites(const TensorTrain<T>& tt) {
  std::vector<Core<T>> cores;
  for (size_t k = tt.size(); k-- > 0;) {
    const auto& c = tt.core(k);
    Core<T> r(c.right, c.dim, c.left);
    for (Index a = 0; a < c.left; ++a)
      for (Index s = 0; s < c.dim; ++s)
        for (Index b = 0; b < c.right; ++b) r(b, s, a) = c(a, s, b);
    cores.push_back(std::move(r));
  }
  return TensorTrain<T>(std::move(cores));
}

template <Scalar T>
TensorTrain<T> embed_coordinate(const TensorTrain<T>& f1d, const QttLayout& lay, int i) {
  if (lay.arity != Arity::Scalar) throw ShapeError("embed_coordinate: scalar layout required");
  if (static_cast<int>(f1d.size()) != lay.L) throw ShapeError("embed_coordinate: level mismatch");
  if (i < 0 || i >= lay.d) throw ShapeError("embed_coordinate: coordinate out of range");
  const bool fwd = lay.L == 1 || lay.site_of(i, 1) < lay.site_of(i, 2);
  const TensorTrain<T> src = fwd ? f1d : reverse_sites(f1d);
  std::vector<int> owner(lay.num_sites(), -1);
  for (int l = 1; l <= lay.L; ++l) owner[lay.site_of(i, l)] = l;
  std::vector<Core<T>> cores;
  size_t next = 0;
  Index bond = 1;
  for (size_t s = 0; s < owner.size(); ++s) {
    if (owner[s] >= 0) {
      cores.push_back(src.core(next++));
      bond = cores.back().right;
    } else {
      Core<T> c(bond, 2, bond);
      for (Index a = 0; a < bond; ++a) c(a, 0, a) = c(a, 1, a) = T(1);
      cores.push_back(std::move(c));
    }
  }
  return TensorTrain<T>(std::move(cores));
}

template <Scalar T>
TensorTrain<T> constant_field(const QttLayout& lay, T value) {
  const auto dims = lay.site_dims();
  return TensorTrain<T>::constant(std::span<const Index>(dims), value);
}

TensorTrain<double> cos_field(const QttLayout& lay, int i, double omega, double phase) {
  return embed_coordinate(cos_1d(lay.L, omega, phase), lay, i);
}

TensorTrain<double> sin_field(const QttLayout& lay, int i, double omega) {
  return cos_field(lay, i, omega, -std::numbers::pi / 2);
}

#define QTTHL_INSTANTIATE_ANALYTIC(T)                                              \
  template TensorTrain<T> exp_1d(int, T);                                          \
  template TensorTrain<T> reverse_sites(const TensorTrain<T>&);                    \
  template TensorTrain<T> embed_coordinate(const TensorTrain<T>&, const QttLayout&, int); \
  template TensorTrain<T> constant_field(const QttLayout&, T);

QTTHL_INSTANTIATE_ANALYTIC(double)
QTTHL_INSTANTIATE_ANALYTIC(cplx)

}  // namespace qtthl
