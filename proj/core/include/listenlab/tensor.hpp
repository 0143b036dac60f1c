#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "listenlab/common.hpp"

namespace listenlab {

using Shape = std::vector<int64_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t e : s) n *= e;
  return n;
}

inline std::vector<int64_t> row_major_strides(const Shape& s) {
  std::vector<int64_t> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * s[i + 1];
  return st;
}

// Dense row-major tensor. All extents must be >= 1.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(static_cast<size_t>(shape_numel(shape_)), fill);
  }

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (static_cast<int64_t>(data_.size()) != shape_numel(shape_))
      throw ValidationError("tensor: data length " + std::to_string(data_.size()) +
                            " does not match shape " + shape_str(shape_));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), T(0)); }
  static Tensor full(Shape shape, T v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(T v) { return Tensor(Shape{1}, std::vector<T>{v}); }

  int64_t ndim() const { return static_cast<int64_t>(shape_.size()); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  int64_t extent(int64_t axis) const { return shape_[static_cast<size_t>(axis)]; }
  const Shape& shape() const { return shape_; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }
  T* ptr() { return data_.data(); }
  const T* ptr() const { return data_.data(); }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  T& at(std::initializer_list<int64_t> idx) { return data_[static_cast<size_t>(offset(idx))]; }
  const T& at(std::initializer_list<int64_t> idx) const {
    return data_[static_cast<size_t>(offset(idx))];
  }

  int64_t offset(std::initializer_list<int64_t> idx) const {
    int64_t off = 0;
    size_t k = 0;
    auto st = row_major_strides(shape_);
    for (int64_t i : idx) off += i * st[k++];
    return off;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> d(data_.size());
    for (size_t i = 0; i < data_.size(); ++i) d[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(d));
  }

 private:
  void validate_shape() const {
    if (shape_.empty()) throw ValidationError("tensor: shape must have at least one extent");
    for (int64_t e : shape_)
      if (e < 1) throw ValidationError("tensor: all extents must be >= 1, got " + shape_str(shape_));
  }

  Shape shape_;
  std::vector<T> data_;
};

}  // namespace listenlab
