#pragma once

#include <string>

#include "listenlab/tensor.hpp"

namespace listenlab {

// Binary tensor file: magic "MTNS", u8 version=1, u8 dtype (0 = f32),
// u8 ndim, one padding byte, ndim x u32 little-endian extents, then the
// payload as little-endian f32. Used for checkpoints and feature dumps.

void save_tensor_f32(const std::string& path, const Tensor<float>& t);
Tensor<float> load_tensor_f32(const std::string& path);

template <typename T>
void save_tensor(const std::string& path, const Tensor<T>& t) {
  save_tensor_f32(path, t.template cast<float>());
}

template <typename T>
Tensor<T> load_tensor(const std::string& path) {
  return load_tensor_f32(path).template cast<T>();
}

template <>
inline void save_tensor<float>(const std::string& path, const Tensor<float>& t) {
  save_tensor_f32(path, t);
}

template <>
inline Tensor<float> load_tensor<float>(const std::string& path) {
  return load_tensor_f32(path);
}

}  // namespace listenlab
