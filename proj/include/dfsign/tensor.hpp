// dfsign/tensor.hpp

// Copyright 2026 The dfsign Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dfsign/error.hpp"

namespace dfsign {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

// Dense row-major array. Real is float for training and double for gradient
// checks; every kernel in the library is templated on it.
template <std::floating_point Real>
class BasicTensor {
 public:
  using value_type = Real;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, Real fill = Real(0))
      : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {
    check_dims();
  }

  BasicTensor(Shape shape, std::vector<Real> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_dims();
    if (data_.size() != shape_numel(shape_))
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
  }

  static BasicTensor vector(std::initializer_list<Real> v) {
    return BasicTensor({v.size()}, std::vector<Real>(v));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  std::vector<Real>& storage() { return data_; }
  const std::vector<Real>& storage() const { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  Real& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  Real at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  Real& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  Real at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  Real& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  Real at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  /// Same data viewed under another shape with the same element count.
  BasicTensor reshaped(Shape s) const {
    if (shape_numel(s) != data_.size())
      throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(s));
    return BasicTensor(std::move(s), data_);
  }

  /// Slice [begin, end) along the leading axis.
  BasicTensor slice0(std::size_t begin, std::size_t end) const {
    if (rank() == 0 || begin > end || end > shape_[0])
      throw ShapeError("slice0 [" + std::to_string(begin) + "," + std::to_string(end) +
                       ") out of range for " + shape_str(shape_));
    Shape s = shape_;
    s[0] = end - begin;
    const std::size_t inner = shape_[0] ? data_.size() / shape_[0] : 0;
    return BasicTensor(std::move(s),
                       std::vector<Real>(data_.begin() + begin * inner, data_.begin() + end * inner));
  }

  void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

  BasicTensor& operator+=(const BasicTensor& o) {
    require_same_shape(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  BasicTensor& operator*=(Real s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
  }

  template <std::floating_point Other>
  BasicTensor<Other> cast() const {
    return BasicTensor<Other>(shape_, std::vector<Other>(data_.begin(), data_.end()));
  }

  void require_shape(const Shape& expected, const char* what) const {
    if (shape_ != expected)
      throw ShapeError(std::string(what) + ": expected shape " + shape_str(expected) +
                       ", got " + shape_str(shape_));
  }

  void require_rank(std::size_t r, const char* what) const {
    if (rank() != r)
      throw ShapeError(std::string(what) + ": expected rank " + std::to_string(r) +
                       ", got shape " + shape_str(shape_));
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  void check_dims() const {
    for (auto d : shape_)
      if (d == 0) throw ShapeError("tensor dims must be positive, got " + shape_str(shape_));
  }

  void require_same_shape(const BasicTensor& o, const char* what) const {
    if (o.shape_ != shape_)
      throw ShapeError(std::string("tensor ") + what + ": shape " + shape_str(shape_) +
                       " vs " + shape_str(o.shape_));
  }

  Shape shape_;
  std::vector<Real> data_;
};

using Tensor = BasicTensor<float>;

/// Concatenate along the leading axis; trailing dims must agree.
template <std::floating_point Real>
BasicTensor<Real> concat0(std::span<const BasicTensor<Real>> parts) {
  if (parts.empty()) throw ShapeError("concat0 of nothing");
  Shape s = parts[0].shape();
  std::size_t lead = 0;
  for (const auto& p : parts) {
    if (p.rank() != s.size() || !std::equal(s.begin() + 1, s.end(), p.shape().begin() + 1))
      throw ShapeError("concat0: incompatible shapes " + shape_str(s) + " and " +
                       shape_str(p.shape()));
    lead += p.dim(0);
  }
  s[0] = lead;
  std::vector<Real> data;
  data.reserve(shape_numel(s));
  for (const auto& p : parts) data.insert(data.end(), p.storage().begin(), p.storage().end());
  return BasicTensor<Real>(std::move(s), std::move(data));
}

/// Concatenate [C, h_i, W] maps along height.
template <std::floating_point Real>
BasicTensor<Real> concat_rows(std::span<const BasicTensor<Real>> parts) {
  if (parts.empty()) throw ShapeError("concat_rows of nothing");
  const std::size_t c = parts[0].dim(0), w = parts[0].dim(2);
  std::size_t h = 0;
  for (const auto& p : parts) {
    p.require_rank(3, "concat_rows");
    if (p.dim(0) != c || p.dim(2) != w)
      throw ShapeError("concat_rows: incompatible shapes " + shape_str(parts[0].shape()) +
                       " and " + shape_str(p.shape()));
    h += p.dim(1);
  }
  BasicTensor<Real> out({c, h, w});
  std::size_t row = 0;
  for (const auto& p : parts) {
    for (std::size_t ch = 0; ch < c; ++ch)
      std::copy_n(&p.storage()[ch * p.dim(1) * w], p.dim(1) * w, &out.storage()[(ch * h + row) * w]);
    row += p.dim(1);
  }
  return out;
}

/// Rows [begin, end) of a [C, H, W] map.
template <std::floating_point Real>
BasicTensor<Real> slice_rows(const BasicTensor<Real>& x, std::size_t begin, std::size_t end) {
  x.require_rank(3, "slice_rows");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (begin >= end || end > h)
    throw ShapeError("slice_rows [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for height " + std::to_string(h));
  BasicTensor<Real> out({c, end - begin, w});
  for (std::size_t ch = 0; ch < c; ++ch)
    std::copy_n(&x.storage()[(ch * h + begin) * w], (end - begin) * w,
                &out.storage()[ch * (end - begin) * w]);
  return out;
}

/// Add a [C, h, W] block into rows starting at `begin` of a [C, H, W] map.
template <std::floating_point Real>
void add_rows(BasicTensor<Real>& dst, const BasicTensor<Real>& src, std::size_t begin) {
  const std::size_t c = dst.dim(0), h = dst.dim(1), w = dst.dim(2), sh = src.dim(1);
  if (src.dim(0) != c || src.dim(2) != w || begin + sh > h)
    throw ShapeError("add_rows: " + shape_str(src.shape()) + " does not fit " +
                     shape_str(dst.shape()));
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < sh * w; ++i)
      dst.storage()[(ch * h + begin) * w + i] += src.storage()[ch * sh * w + i];
}

/// [T, C] <-> [C, T]
template <std::floating_point Real>
BasicTensor<Real> transpose2d(const BasicTensor<Real>& x) {
  x.require_rank(2, "transpose2d");
  const std::size_t r = x.dim(0), c = x.dim(1);
  BasicTensor<Real> out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = x.at(i, j);
  return out;
}

}  // namespace dfsign
