#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "spikedet/error.hpp"

namespace spikedet {

/// Extents of a time-stepped feature volume, row-major in (t, c, y, x).
struct Shape {
  std::size_t t = 1;
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  friend bool operator==(const Shape&, const Shape&) = default;

  /// Element count; throws a size error on a zero extent or overflow.
  std::size_t checked_numel() const {
    const std::size_t dims[] = {t, c, h, w};
    std::size_t n = 1;
    for (std::size_t d : dims) {
      if (d == 0) fail(ErrorKind::Size, "shape " + str() + " has a zero extent");
      if (n > std::numeric_limits<std::size_t>::max() / d)
        fail(ErrorKind::Size, "shape " + str() + " overflows the element count");
      n *= d;
    }
    return n;
  }

  std::size_t numel() const noexcept { return t * c * h * w; }
  std::size_t plane() const noexcept { return h * w; }
  std::size_t step() const noexcept { return c * h * w; }

  Shape with_t(std::size_t nt) const { return {nt, c, h, w}; }
  Shape with_c(std::size_t nc) const { return {t, nc, h, w}; }

  std::string str() const {
    std::ostringstream os;
    os << '(' << t << ',' << c << ',' << h << ',' << w << ')';
    return os.str();
  }
};

template <class T>
inline constexpr bool is_spike_type_v = std::is_same_v<T, std::uint8_t>;

/// Throws a validation error unless every byte is 0 or 1.
inline void validate_binary(std::span<const std::uint8_t> data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i] > 1) {
      fail(ErrorKind::Validation, "spike tensor element " + std::to_string(i) +
                                      " has value " + std::to_string(data[i]) +
                                      ", expected 0 or 1");
    }
  }
}

/// Dense 4-D tensor. `Tensor<std::uint8_t>` is the binary spike volume and is
/// checked for binarity whenever it is built from caller-supplied data.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : shape_{}, data_(1, T{}) {}

  explicit Tensor(const Shape& shape) : shape_(shape), data_(shape.checked_numel(), T{}) {}

  Tensor(const Shape& shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.checked_numel()) {
      fail(ErrorKind::Shape, "data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_.str());
    }
    if constexpr (is_spike_type_v<T>) validate_binary(data_);
  }

  static Tensor zeros(const Shape& shape) { return Tensor(shape); }

  static Tensor filled(const Shape& shape, T value) {
    Tensor out(shape);
    std::fill(out.data_.begin(), out.data_.end(), value);
    if constexpr (is_spike_type_v<T>) validate_binary(out.data_);
    return out;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const T> data() const noexcept { return data_; }
  std::span<T> data() noexcept { return data_; }

  /// Backing vector of a real-valued tensor, for in-place perturbation.
  std::vector<T>& storage() noexcept
    requires(!is_spike_type_v<T>)
  {
    return data_;
  }

  std::size_t index(std::size_t t, std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return ((t * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  T& operator()(std::size_t t, std::size_t c, std::size_t y, std::size_t x) noexcept {
    return data_[index(t, c, y, x)];
  }
  const T& operator()(std::size_t t, std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[index(t, c, y, x)];
  }

  /// One (t, c) spatial plane.
  std::span<const T> plane(std::size_t t, std::size_t c) const noexcept {
    return std::span<const T>(data_).subspan(index(t, c, 0, 0), shape_.plane());
  }
  std::span<T> plane(std::size_t t, std::size_t c) noexcept {
    return std::span<T>(data_).subspan(index(t, c, 0, 0), shape_.plane());
  }

  /// All channels of time step t.
  std::span<const T> step(std::size_t t) const noexcept {
    return std::span<const T>(data_).subspan(t * shape_.step(), shape_.step());
  }
  std::span<T> step(std::size_t t) noexcept {
    return std::span<T>(data_).subspan(t * shape_.step(), shape_.step());
  }

  Tensor time_slice(std::size_t t) const {
    if (t >= shape_.t) fail(ErrorKind::Shape, "time index out of range");
    auto s = step(t);
    return Tensor(shape_.with_t(1), std::vector<T>(s.begin(), s.end()));
  }

  /// Repeat a single-step tensor `steps` times along t.
  Tensor repeat_time(std::size_t steps) const {
    if (shape_.t != 1) fail(ErrorKind::Shape, "repeat_time expects t == 1");
    Tensor out(shape_.with_t(steps));
    for (std::size_t t = 0; t < steps; ++t) {
      std::copy(data_.begin(), data_.end(), out.step(t).begin());
    }
    return out;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

using SpikeTensor = Tensor<std::uint8_t>;
using FloatTensor = Tensor<float>;

template <class T>
Tensor<T> zeros(const Shape& shape) {
  return Tensor<T>::zeros(shape);
}

/// Stack single-step tensors along t.
template <class T>
Tensor<T> stack_time(std::span<const Tensor<T>> steps) {
  if (steps.empty()) fail(ErrorKind::Shape, "stack_time needs at least one step");
  const Shape base = steps.front().shape();
  Tensor<T> out(base.with_t(steps.size() * base.t));
  std::size_t offset = 0;
  for (const auto& s : steps) {
    if (s.shape() != base) fail(ErrorKind::Shape, "stack_time: inconsistent step shapes");
    std::copy(s.data().begin(), s.data().end(), out.data().begin() + offset);
    offset += s.size();
  }
  return out;
}

/// Concatenate along channels; all parts share t, h, w.
template <class T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> parts) {
  if (parts.empty()) fail(ErrorKind::Shape, "concat needs at least one input");
  const Shape& first = parts.front()->shape();
  std::size_t channels = 0;
  for (const auto* p : parts) {
    const Shape& s = p->shape();
    if (s.t != first.t || s.h != first.h || s.w != first.w) {
      fail(ErrorKind::Shape, "concat: " + s.str() + " incompatible with " + first.str());
    }
    channels += s.c;
  }
  Tensor<T> out(first.with_c(channels));
  for (std::size_t t = 0; t < first.t; ++t) {
    auto dst = out.step(t).begin();
    for (const auto* p : parts) {
      auto src = p->step(t);
      dst = std::copy(src.begin(), src.end(), dst);
    }
  }
  return out;
}

template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const Tensor<T>* parts[] = {&a, &b};
  return concat_channels<T>(parts);
}

/// Split channels into [0, at) and [at, c).
template <class T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, std::size_t at) {
  const Shape& s = x.shape();
  if (at == 0 || at >= s.c) fail(ErrorKind::Shape, "split point outside channel range");
  Tensor<T> lo(s.with_c(at));
  Tensor<T> hi(s.with_c(s.c - at));
  const std::size_t plane = s.plane();
  for (std::size_t t = 0; t < s.t; ++t) {
    auto src = x.step(t);
    std::copy(src.begin(), src.begin() + at * plane, lo.step(t).begin());
    std::copy(src.begin() + at * plane, src.end(), hi.step(t).begin());
  }
  return {std::move(lo), std::move(hi)};
}

/// Elementwise cast, e.g. spikes to float membrane input.
template <class To, class From>
Tensor<To> cast(const Tensor<From>& x) {
  std::vector<To> out(x.size());
  auto src = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<To>(src[i]);
  return Tensor<To>(x.shape(), std::move(out));
}

template <class T>
bool all_finite(const Tensor<T>& x) {
  if constexpr (std::is_floating_point_v<T>) {
    for (T v : x.data()) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

}  // namespace spikedet
