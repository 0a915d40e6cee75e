#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <type_traits>

#include <Eigen/Dense>

namespace qtthl {

using Index = std::ptrdiff_t;
using cplx = std::complex<double>;

template <class T>
inline constexpr bool is_complex_v = false;
template <class T>
inline constexpr bool is_complex_v<std::complex<T>> = true;

template <class T>
concept Scalar = std::is_same_v<T, double> || std::is_same_v<T, cplx>;

template <class T>
using RMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T>
using MapRMat = Eigen::Map<RMat<T>>;
template <class T>
using CMapRMat = Eigen::Map<const RMat<T>>;

inline double conj(double x) { return x; }
inline cplx conj(cplx x) { return std::conj(x); }
inline double real_part(double x) { return x; }
inline double real_part(cplx x) { return x.real(); }

// Raised when inputs violate a structural precondition (rank chain, dims, layouts).
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Raised by iterative components that cannot produce a trustworthy result.
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a verification or estimator step is undefined (zero normalizations, etc).
struct EstimatorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace qtthl
