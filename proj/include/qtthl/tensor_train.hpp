#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "qtthl/types.hpp"

namespace qtthl {

inline constexpr Index kUnboundedRank = std::numeric_limits<Index>::max() / 4;

// Three-index core (left rank, site dim, right rank), row-major.
template <Scalar T>
struct Core {
  Index left = 1;
  Index dim = 1;
  Index right = 1;
  std::vector<T> data;

  Core() : data(1, T(0)) {}
  Core(Index l, Index n, Index r) : left(l), dim(n), right(r), data(static_cast<size_t>(l * n * r), T(0)) {}

  T& operator()(Index a, Index s, Index b) { return data[static_cast<size_t>((a * dim + s) * right + b)]; }
  const T& operator()(Index a, Index s, Index b) const {
    return data[static_cast<size_t>((a * dim + s) * right + b)];
  }
  Index size() const { return left * dim * right; }

  // (left*dim) x right
  MapRMat<T> left_unfolding() { return MapRMat<T>(data.data(), left * dim, right); }
  CMapRMat<T> left_unfolding() const { return CMapRMat<T>(data.data(), left * dim, right); }
  // left x (dim*right)
  MapRMat<T> right_unfolding() { return MapRMat<T>(data.data(), left, dim * right); }
  CMapRMat<T> right_unfolding() const { return CMapRMat<T>(data.data(), left, dim * right); }
};

template <Scalar T>
class TensorTrain {
 public:
  TensorTrain() = default;
  explicit TensorTrain(std::vector<Core<T>> cores);

  static TensorTrain zeros(std::span<const Index> site_dims);
  static TensorTrain constant(std::span<const Index> site_dims, T value);
  // Rank-1 train from per-site vectors.
  static TensorTrain product(const std::vector<std::vector<T>>& factors);

  size_t size() const { return cores_.size(); }
  bool empty() const { return cores_.empty(); }
  const Core<T>& core(size_t i) const { return cores_[i]; }
  Core<T>& core(size_t i) { return cores_[i]; }
  const std::vector<Core<T>>& cores() const { return cores_; }
  std::vector<Core<T>>& cores() { return cores_; }

  std::vector<Index> site_dims() const;
  // Bond ranks r_0..r_K (length K+1).
  std::vector<Index> ranks() const;
  Index max_rank() const;
  double dense_size() const;

  std::optional<size_t> ortho_center() const { return center_; }
  void set_ortho_center(std::optional<size_t> c) { center_ = c; }

  T evaluate(std::span<const int> idx) const;
  // Throws ShapeError if a rank chain is broken.
  void validate() const;

  TensorTrain& operator*=(T alpha);

 private:
  std::vector<Core<T>> cores_;
  std::optional<size_t> center_;
};

struct TruncationInfo {
  double discarded = 0.0;  // absolute l2 norm of the discarded part (upper bound)
  double norm = 0.0;       // norm of the input
  double relative() const { return norm > 0 ? discarded / norm : 0.0; }
};

template <Scalar T>
TensorTrain<T> add(const TensorTrain<T>& a, const TensorTrain<T>& b);
template <Scalar T>
TensorTrain<T> scale(const TensorTrain<T>& a, T alpha);
// alpha*a + beta*b without rounding
template <Scalar T>
TensorTrain<T> axpby(T alpha, const TensorTrain<T>& a, T beta, const TensorTrain<T>& b);
template <Scalar T>
T inner(const TensorTrain<T>& a, const TensorTrain<T>& b);
// Norm via orthogonalization, accurate also for trains with cancelling terms.
template <Scalar T>
double norm(const TensorTrain<T>& a);
// ||a - b|| computed through an explicit difference train.
template <Scalar T>
double distance(const TensorTrain<T>& a, const TensorTrain<T>& b);
template <Scalar T>
TensorTrain<T> hadamard(const TensorTrain<T>& a, const TensorTrain<T>& b);

template <Scalar T>
void left_orthogonalize(TensorTrain<T>& tt, size_t upto);
template <Scalar T>
void right_orthogonalize(TensorTrain<T>& tt, size_t downto);
template <Scalar T>
void canonicalize(TensorTrain<T>& tt, size_t center);
// Largest deviation from identity of the orthogonality Gram matrices around the center.
template <Scalar T>
double orthogonality_defect(const TensorTrain<T>& tt, size_t center);

template <Scalar T>
TensorTrain<T> round(const TensorTrain<T>& tt, double tol, Index max_rank = kUnboundedRank,
                     TruncationInfo* info = nullptr);

template <Scalar T>
TensorTrain<T> random_train(std::span<const Index> site_dims, std::span<const Index> ranks, std::uint64_t seed);
// Ranks (1, r, ..., r, 1) clipped at each bond.
template <Scalar T>
TensorTrain<T> random_train(std::span<const Index> site_dims, Index rank, std::uint64_t seed);
// Largest representable rank at every bond.
std::vector<Index> rank_caps(std::span<const Index> site_dims);

// Row-major dense vector, first site most significant.
template <Scalar T>
std::vector<T> to_dense(const TensorTrain<T>& tt);
template <Scalar T>
TensorTrain<T> from_dense(std::span<const T> values, std::span<const Index> site_dims, double tol = 0.0,
                          Index max_rank = kUnboundedRank);

// Site-level restructuring helpers.
template <Scalar T>
TensorTrain<T> prepend_unit_site(const TensorTrain<T>& tt);
// Merges a leading site of dimension 1 into its neighbour.
template <Scalar T>
TensorTrain<T> drop_unit_site(const TensorTrain<T>& tt);
// Inserts sites of the given dimension carrying the constant value 1 before position `pos`.
template <Scalar T>
TensorTrain<T> insert_constant_sites(const TensorTrain<T>& tt, size_t pos, Index count, Index dim = 2);

TensorTrain<cplx> to_complex(const TensorTrain<double>& tt);
TensorTrain<double> real_part(const TensorTrain<cplx>& tt);
TensorTrain<double> imag_part(const TensorTrain<cplx>& tt);

}  // namespace qtthl
