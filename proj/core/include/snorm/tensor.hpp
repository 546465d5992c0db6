#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "snorm/errors.hpp"

namespace snorm {

// The four tensor axes, in memory order. Fully-connected activations are
// the Y = X = 1 case.
enum class Axis : int { N = 0, Y = 1, X = 2, C = 3 };

// A subset of {N, Y, X, C}, stored as a 4-bit mask.
class AxisSet {
 public:
  constexpr AxisSet() = default;
  constexpr AxisSet(std::initializer_list<Axis> axes) {
    for (Axis a : axes) add(a);
  }
  constexpr void add(Axis a) { mask_ |= bit(a); }
  constexpr bool contains(Axis a) const { return (mask_ & bit(a)) != 0; }
  constexpr bool empty() const { return mask_ == 0; }
  constexpr bool operator==(const AxisSet&) const = default;

 private:
  static constexpr unsigned bit(Axis a) { return 1u << static_cast<int>(a); }
  unsigned mask_ = 0;
};

// Dense rank-4 shape (batch N, height Y, width X, channels C).
struct Shape4 {
  long n = 1, y = 1, x = 1, c = 1;

  long dim(Axis a) const {
    switch (a) {
      case Axis::N: return n;
      case Axis::Y: return y;
      case Axis::X: return x;
      default: return c;
    }
  }
  long count() const { return n * y * x * c; }
  bool operator==(const Shape4&) const = default;
  std::string str() const;

  // Throws ShapeError on zero-sized or overflow-sized dimensions.
  void validate() const;
};

// Dense rank-4 tensor of 64-bit floats, row-major in (N, Y, X, C) order.
// Tensors are plain values: copy/move freely, no aliasing.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape4 shape, double fill = 0.0);

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }

  const Shape4& shape() const { return shape_; }
  long size() const { return static_cast<long>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](long i) { return data_[static_cast<size_t>(i)]; }
  double operator[](long i) const { return data_[static_cast<size_t>(i)]; }

  long index(long n, long y, long x, long c) const {
    return ((n * shape_.y + y) * shape_.x + x) * shape_.c + c;
  }
  double& at(long n, long y, long x, long c) { return data_[static_cast<size_t>(index(n, y, x, c))]; }
  double at(long n, long y, long x, long c) const { return data_[static_cast<size_t>(index(n, y, x, c))]; }

  void fill(double v);
  bool all_finite() const;

 private:
  Shape4 shape_{0, 0, 0, 0};
  std::vector<double> data_;
};

// Reduction kinds for reduce_over. abs_pow_mean(p) is the discrete p-th
// absolute moment about 0: (1/N) sum |x_i|^p; callers center beforehand.
struct Reducer {
  enum class Kind { sum, mean, abs_pow_mean };
  Kind kind = Kind::sum;
  int p = 1;

  static Reducer sum() { return {Kind::sum, 1}; }
  static Reducer mean() { return {Kind::mean, 1}; }
  static Reducer abs_pow_mean(int p);  // throws ParamError if p < 1
};

// Reduce t over the given axes; reduced axes have size 1 in the result.
// Accumulation is sequential left-to-right in memory order so results are
// bit-identical across runs.
Tensor reduce_over(const Tensor& t, AxisSet axes, const Reducer& r);

// |v|^p by repeated multiplication; exact for integer p.
double abs_ipow(double v, int p);

// Deterministic counter-based random stream. Identical (seed, counter)
// pairs produce identical values on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64();
  double uniform();                     // [0, 1)
  double normal();                      // standard normal, Box-Muller
  long uniform_int(long lo, long hi);   // inclusive range

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (long i = static_cast<long>(v.size()) - 1; i > 0; --i) {
      long j = uniform_int(0, i);
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
    }
  }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t counter_ = 0;
};

// I.i.d. zero-mean Gaussians with the given stddev (> 0, else ParamError).
Tensor rng_normal(Rng& rng, Shape4 shape, double stddev);

}  // namespace snorm
