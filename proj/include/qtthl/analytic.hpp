#pragma once

#include "qtthl/layout.hpp"

namespace qtthl {

// One-dimensional trains over L bit sites (most significant first), x = j 2^-L.

// cos(omega x + phase), rank 2 (rank 1 when L == 1).
TensorTrain<double> cos_1d(int L, double omega, double phase = 0.0);
// exp(rate x), rank 1.
template <Scalar T>
TensorTrain<T> exp_1d(int L, T rate);

// Reverses the site order of a train.
template <Scalar T>
TensorTrain<T> reverse_sites(const TensorTrain<T>& tt);

// Lifts a 1-D train in coordinate i to a scalar field of the layout (constant in the other coordinates).
template <Scalar T>
TensorTrain<T> embed_coordinate(const TensorTrain<T>& f1d, const QttLayout& lay, int i);

template <Scalar T>
TensorTrain<T> constant_field(const QttLayout& lay, T value);

// cos(omega x_i + phase) on a scalar physical layout.
TensorTrain<double> cos_field(const QttLayout& lay, int i, double omega, double phase = 0.0);
TensorTrain<double> sin_field(const QttLayout& lay, int i, double omega);

}  // namespace qtthl
