#include "qtthl/layout.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>

#include "qtthl/svd.hpp"

namespace qtthl {

std::string to_string(Format f) {
  switch (f) {
    case Format::X1X2_Y1Y2: return "X1X2_Y1Y2";
    case Format::X1X2_Y2Y1: return "X1X2_Y2Y1";
    case Format::X2X1_Y1Y2: return "X2X1_Y1Y2";
    case Format::X1Y1: return "X1Y1";
  }
  return "?";
}

std::string to_string(Space s) { return s == Space::Physical ? "physical" : "fourier"; }

std::string to_string(Arity a) {
  switch (a) {
    case Arity::Scalar: return "scalar";
    case Arity::Vector: return "vector";
    case Arity::Matrix: return "matrix";
  }
  return "?";
}

Format parse_format(const std::string& s) {
  for (Format f : {Format::X1X2_Y1Y2, Format::X1X2_Y2Y1, Format::X2X1_Y1Y2, Format::X1Y1}) {
    std::string n = to_string(f), lower;
    for (char c : n) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (s == n || s == lower) return f;
  }
  throw std::invalid_argument("unknown format '" + s + "'");
}

Space parse_space(const std::string& s) {
  if (s == "physical") return Space::Physical;
  if (s == "fourier") return Space::Fourier;
  throw std::invalid_argument("unknown space '" + s + "'");
}

Arity parse_arity(const std::string& s) {
  if (s == "scalar") return Arity::Scalar;
  if (s == "vector") return Arity::Vector;
  if (s == "matrix") return Arity::Matrix;
  throw std::invalid_argument("unknown arity '" + s + "'");
}

int bit_position(int d, int L, Format f, int i, int l) {
  const int fwd = i * L + (l - 1);
  const int rev = i * L + (L - l);
  switch (f) {
    case Format::X1X2_Y1Y2: return fwd;
    case Format::X1X2_Y2Y1: return i == 1 ? rev : fwd;
    case Format::X2X1_Y1Y2: return i % 2 == 0 ? rev : fwd;
    case Format::X1Y1: return d * (l - 1) + i;
  }
  return -1;
}

size_t QttLayout::site_of(int i, int l) const {
  return value_offset() + static_cast<size_t>(bit_position(d, L, format, i, l));
}

std::vector<Index> QttLayout::site_dims() const {
  std::vector<Index> dims(num_sites(), 2);
  if (arity != Arity::Scalar) dims[0] = value_dim();
  return dims;
}

void QttLayout::validate() const {
  if (d < 1 || d > 3) throw ShapeError("layout: d must be 1, 2 or 3");
  if (L < 1 || L > 62) throw ShapeError("layout: L out of range");
}

QttLayout QttLayout::with_space(Space s) const {
  QttLayout l = *this;
  l.space = s;
  return l;
}

QttLayout QttLayout::with_arity(Arity a) const {
  QttLayout l = *this;
  l.arity = a;
  return l;
}

QttLayout QttLayout::with_level(int level) const {
  QttLayout l = *this;
  l.L = level;
  return l;
}

std::vector<int> encode(const QttLayout& lay, std::span<const Index> coords, Index component) {
  if (static_cast<int>(coords.size()) != lay.d) throw ShapeError("encode: wrong number of coordinates");
  if (component < 0 || component >= lay.value_dim()) throw ShapeError("encode: component out of range");
  const Index n = lay.grid_size();
  std::vector<int> bits(lay.num_sites(), 0);
  if (lay.value_offset()) bits[0] = static_cast<int>(component);
  for (int i = 0; i < lay.d; ++i) {
    Index c = coords[static_cast<size_t>(i)];
    if (lay.space == Space::Physical) {
      if (c < 0 || c >= n) throw ShapeError("encode: off-grid physical index");
      for (int l = 1; l <= lay.L; ++l) bits[lay.site_of(i, l)] = static_cast<int>((c >> (lay.L - l)) & 1);
    } else {
      if (c < -n / 2 || c >= n / 2) throw ShapeError("encode: frequency out of range");
      const Index u = c < 0 ? c + n : c;
      for (int l = 1; l <= lay.L; ++l) bits[lay.site_of(i, l)] = static_cast<int>((u >> (l - 1)) & 1);
    }
  }
  return bits;
}

std::vector<Index> decode(const QttLayout& lay, std::span<const int> bits, Index* component) {
  if (bits.size() != lay.num_sites()) throw ShapeError("decode: wrong bitstring length");
  const Index n = lay.grid_size();
  std::vector<Index> c(static_cast<size_t>(lay.d), 0);
  for (int i = 0; i < lay.d; ++i) {
    Index v = 0;
    for (int l = 1; l <= lay.L; ++l) {
      const Index b = bits[lay.site_of(i, l)];
      v |= lay.space == Space::Physical ? b << (lay.L - l) : b << (l - 1);
    }
    if (lay.space == Space::Fourier && v >= n / 2) v -= n;
    c[static_cast<size_t>(i)] = v;
  }
  if (component) *component = lay.value_offset() ? bits[0] : 0;
  return c;
}

Index grid_index(double x, int L) {
  const double s = std::ldexp(x, L);
  const double r = std::nearbyint(s);
  if (std::abs(s - r) > 1e-9 || r < 0 || r >= std::ldexp(1.0, L)) throw ShapeError("grid_index: point off grid");
  return static_cast<Index>(r);
}

template <Scalar T>
std::vector<T> evaluate(const TensorTrain<T>& field, const QttLayout& lay, std::span<const Index> coords) {
  if (field.site_dims() != lay.site_dims()) throw ShapeError("evaluate: field does not match layout");
  const auto bits = encode(lay, coords);
  const size_t K = field.size();
  const size_t off = lay.value_offset();
  std::vector<T> v{T(1)};
  for (size_t s = K; s-- > off;) {
    const auto& c = field.core(s);
    std::vector<T> w(static_cast<size_t>(c.left), T(0));
    for (Index a = 0; a < c.left; ++a)
      for (Index b = 0; b < c.right; ++b) w[a] += c(a, bits[s], b) * v[b];
    v = std::move(w);
  }
  if (off == 0) return v;
  const auto& c0 = field.core(0);
  std::vector<T> out(static_cast<size_t>(c0.dim), T(0));
  for (Index i = 0; i < c0.dim; ++i)
    for (Index b = 0; b < c0.right; ++b) out[i] += c0(0, i, b) * v[b];
  return out;
}

namespace {

// Moves the orthogonality center one site to the right via QR.
template <Scalar T>
void shift_center_right(TensorTrain<T>& tt, size_t i) {
  auto& c = tt.core(i);
  auto& n = tt.core(i + 1);
  Eigen::HouseholderQR<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>> qr(c.left_unfolding());
  const Index rows = c.left * c.dim;
  const Index k = std::min(rows, c.right);
  RMat<T> q = qr.householderQ() * Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>::Identity(rows, k);
  RMat<T> r = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
  Core<T> nc(c.left, c.dim, k), nn(k, n.dim, n.right);
  nc.left_unfolding() = q;
  nn.right_unfolding() = r * n.right_unfolding();
  c = std::move(nc);
  n = std::move(nn);
}

// Swaps sites i and i+1 (center at i on entry, at i+1 on exit), truncating at absolute weight delta.
template <Scalar T>
void swap_sites(TensorTrain<T>& tt, size_t i, double delta, Index max_rank) {
  const auto& a = tt.core(i);
  const auto& b = tt.core(i + 1);
  const Index l = a.left, n1 = a.dim, n2 = b.dim, r = b.right;
  RMat<T> th = a.left_unfolding() * b.right_unfolding();  // (l,n1) x (n2,r)
  RMat<T> sw(l * n2, n1 * r);
  for (Index x = 0; x < l; ++x)
    for (Index s = 0; s < n1; ++s)
      for (Index t = 0; t < n2; ++t)
        for (Index y = 0; y < r; ++y) sw(x * n2 + t, s * r + y) = th(x * n1 + s, t * r + y);
  const ThinSvd<T> svd = thin_svd<T>(sw);
  const Eigen::VectorXd sv = svd.s;
  Index k = sv.size();
  double tail = 0.0;
  while (k > 1 && std::sqrt(tail + sv(k - 1) * sv(k - 1)) <= delta) {
    tail += sv(k - 1) * sv(k - 1);
    --k;
  }
  k = std::min(k, max_rank);
  Core<T> na(l, n2, k), nb(k, n1, r);
  na.left_unfolding() = svd.U.leftCols(k);
  nb.right_unfolding() = sv.head(k).asDiagonal() * svd.V.leftCols(k).adjoint();
  tt.core(i) = std::move(na);
  tt.core(i + 1) = std::move(nb);
}

}  // namespace

template <Scalar T>
TensorTrain<T> permute_format(const TensorTrain<T>& field, const QttLayout& from, Format target, double tol,
                              Index max_rank) {
  if (field.site_dims() != from.site_dims()) throw ShapeError("permute_format: field does not match layout");
  if (target == from.format) return field;
  const size_t off = from.value_offset();
  const size_t K = field.size();
  // dest[s]: position of the bit currently at site s in the target format.
  std::vector<int> dest(K);
  for (size_t s = 0; s < off; ++s) dest[s] = static_cast<int>(s);
  for (int i = 0; i < from.d; ++i)
    for (int l = 1; l <= from.L; ++l)
      dest[from.site_of(i, l)] = static_cast<int>(off) + bit_position(from.d, from.L, target, i, l);

  size_t swaps = 0;
  {
    auto p = dest;
    for (size_t pass = 0; pass < K; ++pass)
      for (size_t s = 0; s + 1 < K; ++s)
        if (p[s] > p[s + 1]) {
          std::swap(p[s], p[s + 1]);
          ++swaps;
        }
  }
  TensorTrain<T> tt = field;
  const double nrm = norm(field);
  const double delta = swaps > 0 ? tol * nrm / static_cast<double>(swaps) : 0.0;
  bool sorted = false;
  while (!sorted) {
    sorted = true;
    canonicalize(tt, 0);
    for (size_t s = 0; s + 1 < K; ++s) {
      if (dest[s] > dest[s + 1]) {
        swap_sites(tt, s, delta, max_rank);
        std::swap(dest[s], dest[s + 1]);
        sorted = false;
      } else {
        shift_center_right(tt, s);
      }
    }
  }
  tt.set_ortho_center(K - 1);
  return tt;
}

template <Scalar T>
TensorTrain<T> periodize(const TensorTrain<T>& cell, const QttLayout& cell_layout, int Le) {
  if (cell.site_dims() != cell_layout.site_dims()) throw ShapeError("periodize: field does not match layout");
  if (cell_layout.space != Space::Physical) throw ShapeError("periodize: physical layout required");
  if (Le < 0) throw ShapeError("periodize: negative scale count");
  if (Le == 0) return cell;
  const QttLayout g = cell_layout.with_level(cell_layout.L + Le);
  std::vector<bool> coarse(g.num_sites(), false);
  for (int i = 0; i < g.d; ++i)
    for (int l = 1; l <= Le; ++l) coarse[g.site_of(i, l)] = true;
  TensorTrain<T> out = cell;
  for (size_t s = 0; s < coarse.size(); ++s)
    if (coarse[s]) out = insert_constant_sites(out, s, 1, 2);
  return out;
}

template <Scalar T>
TensorTrain<T> component(const TensorTrain<T>& field, const QttLayout& lay, Index c) {
  if (lay.arity == Arity::Scalar) throw ShapeError("component: scalar field");
  if (field.site_dims() != lay.site_dims()) throw ShapeError("component: field does not match layout");
  if (c < 0 || c >= lay.value_dim()) throw ShapeError("component: index out of range");
  const auto& c0 = field.core(0);
  const auto& c1 = field.core(1);
  RMat<T> row(1, c0.right);
  for (Index b = 0; b < c0.right; ++b) row(0, b) = c0(0, c, b);
  std::vector<Core<T>> cores;
  Core<T> first(1, c1.dim, c1.right);
  first.right_unfolding() = row * c1.right_unfolding();
  cores.push_back(std::move(first));
  for (size_t s = 2; s < field.size(); ++s) cores.push_back(field.core(s));
  return TensorTrain<T>(std::move(cores));
}

template <Scalar T>
TensorTrain<T> stack_components(const std::vector<TensorTrain<T>>& parts, double tol) {
  if (parts.empty()) throw ShapeError("stack_components: no parts");
  const Index D = static_cast<Index>(parts.size());
  TensorTrain<T> acc;
  for (Index c = 0; c < D; ++c) {
    std::vector<Core<T>> cores;
    Core<T> v(1, D, 1);
    v(0, c, 0) = T(1);
    cores.push_back(std::move(v));
    for (const auto& k : parts[static_cast<size_t>(c)].cores()) cores.push_back(k);
    TensorTrain<T> t(std::move(cores));
    acc = c == 0 ? std::move(t) : add(acc, t);
  }
  return tol > 0 ? round(acc, tol) : acc;
}

#define QTTHL_INSTANTIATE_LAYOUT(T)                                                                       \
  template std::vector<T> evaluate(const TensorTrain<T>&, const QttLayout&, std::span<const Index>);      \
  template TensorTrain<T> permute_format(const TensorTrain<T>&, const QttLayout&, Format, double, Index); \
  template TensorTrain<T> periodize(const TensorTrain<T>&, const QttLayout&, int);                        \
  template TensorTrain<T> component(const TensorTrain<T>&, const QttLayout&, Index);                      \
  template TensorTrain<T> stack_components(const std::vector<TensorTrain<T>>&, double);

QTTHL_INSTANTIATE_LAYOUT(double)
QTTHL_INSTANTIATE_LAYOUT(cplx)

}  // namespace qtthl
