#pragma once

#include <optional>
#include <string>

#include "qtthl/layout.hpp"
#include "qtthl/mpo.hpp"

namespace qtthl {

// Binary train files: magic, element type, optional layout header, site count, site dims, ranks,
// then cores in row-major order as little-endian doubles (complex as re, im).
template <Scalar T>
void save_train(const std::string& path, const TensorTrain<T>& tt, const std::optional<QttLayout>& lay = {});
template <Scalar T>
TensorTrain<T> load_train(const std::string& path, std::optional<QttLayout>* lay = nullptr);

template <Scalar T>
void save_mpo(const std::string& path, const Mpo<T>& op);
template <Scalar T>
Mpo<T> load_mpo(const std::string& path);

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace qtthl
