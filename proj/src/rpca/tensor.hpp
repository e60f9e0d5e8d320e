#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "rpca/common.hpp"

namespace rpca {

// Dense row-major tensor. Feature maps are stored channels-last:
// rank 3 = (h, w, c), rank 4 = (batch, h, w, c).
template <typename T>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(std::vector<int> shape) : shape_(std::move(shape)) {
    int64_t n = 1;
    for (int d : shape_) {
      check(d >= 0, ErrorKind::shape, "negative tensor dimension");
      n *= d;
    }
    data_.assign(static_cast<size_t>(n), T(0));
  }

  TensorT(std::initializer_list<int> shape)
      : TensorT(std::vector<int>(shape)) {}

  static TensorT zeros(std::vector<int> shape) { return TensorT(std::move(shape)); }

  static TensorT full(std::vector<int> shape, T value) {
    TensorT t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  T& at(int i, int j) { return data_[static_cast<size_t>(i) * shape_[1] + j]; }
  const T& at(int i, int j) const {
    return data_[static_cast<size_t>(i) * shape_[1] + j];
  }

  T& at(int i, int j, int k) {
    return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }
  const T& at(int i, int j, int k) const {
    return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }

  T& at(int b, int i, int j, int k) {
    return data_[((static_cast<size_t>(b) * shape_[1] + i) * shape_[2] + j) *
                     shape_[3] +
                 k];
  }
  const T& at(int b, int i, int j, int k) const {
    return data_[((static_cast<size_t>(b) * shape_[1] + i) * shape_[2] + j) *
                     shape_[3] +
                 k];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out(shape_);
    for (int64_t i = 0; i < size(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
    return out;
  }

  // View of one image in a rank-4 batch as a rank-3 copy.
  TensorT slice_batch(int b) const {
    check(rank() == 4, ErrorKind::shape, "slice_batch needs a rank-4 tensor");
    TensorT out({shape_[1], shape_[2], shape_[3]});
    int64_t n = out.size();
    const T* src = data_.data() + static_cast<size_t>(b) * n;
    std::copy(src, src + n, out.data());
    return out;
  }

 private:
  std::vector<int> shape_;
  std::vector<T> data_;
};

using Tensor = TensorT<float>;
using DTensor = TensorT<double>;

}  // namespace rpca
