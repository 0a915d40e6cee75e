#pragma once

#include <span>
#include <vector>

#include "qtthl/tensor_train.hpp"

namespace qtthl {

// Four-index core (left, row, col, right), row-major. Rows index the output.
template <Scalar T>
struct OpCore {
  Index left = 1;
  Index rows = 1;
  Index cols = 1;
  Index right = 1;
  std::vector<T> data;

  OpCore() : data(1, T(0)) {}
  OpCore(Index l, Index n, Index m, Index r)
      : left(l), rows(n), cols(m), right(r), data(static_cast<size_t>(l * n * m * r), T(0)) {}

  T& operator()(Index a, Index s, Index t, Index b) {
    return data[static_cast<size_t>(((a * rows + s) * cols + t) * right + b)];
  }
  const T& operator()(Index a, Index s, Index t, Index b) const {
    return data[static_cast<size_t>(((a * rows + s) * cols + t) * right + b)];
  }
  Index size() const { return left * rows * cols * right; }
};

template <Scalar T>
class Mpo {
 public:
  Mpo() = default;
  explicit Mpo(std::vector<OpCore<T>> cores);

  static Mpo identity(std::span<const Index> dims);
  // Site-wise Kronecker product of explicit matrices (rank 1).
  static Mpo product(const std::vector<RMat<T>>& factors);

  size_t size() const { return cores_.size(); }
  const OpCore<T>& core(size_t i) const { return cores_[i]; }
  OpCore<T>& core(size_t i) { return cores_[i]; }
  const std::vector<OpCore<T>>& cores() const { return cores_; }

  std::vector<Index> row_dims() const;
  std::vector<Index> col_dims() const;
  std::vector<Index> ranks() const;
  Index max_rank() const;
  void validate() const;

  Mpo& operator*=(T alpha);

 private:
  std::vector<OpCore<T>> cores_;
};

template <Scalar T>
TensorTrain<T> apply(const Mpo<T>& op, const TensorTrain<T>& x);
// (a*b) as operators: a applied after b.
template <Scalar T>
Mpo<T> compose(const Mpo<T>& a, const Mpo<T>& b);
template <Scalar T>
Mpo<T> add(const Mpo<T>& a, const Mpo<T>& b);
template <Scalar T>
Mpo<T> axpby(T alpha, const Mpo<T>& a, T beta, const Mpo<T>& b);
template <Scalar T>
Mpo<T> adjoint(const Mpo<T>& a);
// Reverses the site order (bond indices swap sides).
template <Scalar T>
Mpo<T> reversed(const Mpo<T>& a);
// Concatenates the site chains of two operators (tensor product on disjoint sites).
template <Scalar T>
Mpo<T> concatenate(const Mpo<T>& a, const Mpo<T>& b);

// Views an operator as a train with merged (row, col) sites and back.
template <Scalar T>
TensorTrain<T> as_train(const Mpo<T>& a);
template <Scalar T>
Mpo<T> from_train(const TensorTrain<T>& t, std::span<const Index> rows, std::span<const Index> cols);
template <Scalar T>
Mpo<T> round(const Mpo<T>& a, double tol, Index max_rank = kUnboundedRank, TruncationInfo* info = nullptr);

// Entrywise multiplication by a field: ranks equal field ranks.
template <Scalar T>
Mpo<T> diag_of(const TensorTrain<T>& field);

template <Scalar T>
RMat<T> to_dense(const Mpo<T>& a);
template <Scalar T>
Mpo<T> from_dense(const RMat<T>& m, std::span<const Index> rows, std::span<const Index> cols, double tol = 0.0);

Mpo<cplx> to_complex(const Mpo<double>& a);

}  // namespace qtthl
