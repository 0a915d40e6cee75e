#pragma once

#include <array>
#include <string>
#include <vector>

#include "qtthl/tensor_train.hpp"

namespace qtthl {

enum class Format { X1X2_Y1Y2, X1X2_Y2Y1, X2X1_Y1Y2, X1Y1 };
enum class Space { Physical, Fourier };
enum class Arity { Scalar, Vector, Matrix };

std::string to_string(Format f);
std::string to_string(Space s);
std::string to_string(Arity a);
Format parse_format(const std::string& s);
Space parse_space(const std::string& s);
Arity parse_arity(const std::string& s);

// Site layout of a grid field on the periodic unit cube with 2^L points per axis.
//
// Physical space: the site of (coord i, level l) holds bit x_l of j_i = x_i 2^L, weight 2^(L-l).
// Fourier space: the same site holds the bit of weight 2^(l-1) of m_i mod 2^L, where k_i = 2 pi m_i
// and m_i is in [-2^(L-1), 2^(L-1)). Fourier sites therefore list the frequency bits in reversed
// scale order relative to the physical ones.
//
// A value site (dim d for vectors, d*d for matrices, row-major) precedes the bit sites.
struct QttLayout {
  int d = 2;
  int L = 1;
  Format format = Format::X1Y1;
  Space space = Space::Physical;
  Arity arity = Arity::Scalar;

  size_t num_sites() const { return static_cast<size_t>(d * L) + value_offset(); }
  size_t value_offset() const { return arity == Arity::Scalar ? 0 : 1; }
  Index value_dim() const { return arity == Arity::Scalar ? 1 : arity == Arity::Vector ? d : d * d; }
  Index grid_size() const { return Index(1) << L; }
  // Absolute site index of level l (1-based) of coordinate i.
  size_t site_of(int i, int l) const;
  std::vector<Index> site_dims() const;
  void validate() const;

  QttLayout with_space(Space s) const;
  QttLayout with_arity(Arity a) const;
  QttLayout with_level(int level) const;

  bool operator==(const QttLayout&) const = default;
};

// Sites of every coordinate level among the bit sites, without the value offset.
int bit_position(int d, int L, Format f, int i, int l);

// Coordinates: grid integers j in [0, 2^L) (physical) or signed m in [-2^(L-1), 2^(L-1)) (Fourier).
std::vector<int> encode(const QttLayout& lay, std::span<const Index> coords, Index component = 0);
std::vector<Index> decode(const QttLayout& lay, std::span<const int> bits, Index* component = nullptr);

// Grid integer for a physical coordinate that must lie on the grid.
Index grid_index(double x, int L);

template <Scalar T>
std::vector<T> evaluate(const TensorTrain<T>& field, const QttLayout& lay, std::span<const Index> coords);

// Reorders the bit sites of a field into another format through adjacent swaps.
template <Scalar T>
TensorTrain<T> permute_format(const TensorTrain<T>& field, const QttLayout& from, Format target, double tol,
                              Index max_rank = kUnboundedRank);

// Field on [0,1)^d at level L0+Le that evaluates to cell(x / eps mod 1), eps = 2^-Le.
template <Scalar T>
TensorTrain<T> periodize(const TensorTrain<T>& cell, const QttLayout& cell_layout, int Le);

// Scalar component i (vector) or (i,j) (matrix, flat index i*d+j) of a valued field.
template <Scalar T>
TensorTrain<T> component(const TensorTrain<T>& field, const QttLayout& lay, Index c);

// Stacks scalar fields onto a value site; `parts.size()` must equal the arity's value dimension.
template <Scalar T>
TensorTrain<T> stack_components(const std::vector<TensorTrain<T>>& parts, double tol = 0.0);

}  // namespace qtthl
