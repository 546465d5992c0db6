#include "snorm/tensor.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <mutex>

namespace snorm {

namespace {
WarningHandler g_warning_handler;
std::mutex g_warning_mutex;
}  // namespace

void set_warning_handler(WarningHandler handler) {
  std::lock_guard<std::mutex> lock(g_warning_mutex);
  g_warning_handler = std::move(handler);
}

void warn(const std::string& message) {
  WarningHandler h;
  {
    std::lock_guard<std::mutex> lock(g_warning_mutex);
    h = g_warning_handler;
  }
  if (h) {
    h(message);
  } else {
    std::cerr << "[snorm warning] " << message << "\n";
  }
}

std::string Shape4::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(y) + "," +
         std::to_string(x) + "," + std::to_string(c) + ")";
}

void Shape4::validate() const {
  const long dims[4] = {n, y, x, c};
  long long total = 1;
  for (long d : dims) {
    if (d < 1) throw ShapeError("invalid shape " + str() + ": every dimension must be >= 1");
    if (total > std::numeric_limits<long long>::max() / d)
      throw ShapeError("invalid shape " + str() + ": element count overflows");
    total *= d;
  }
  // Keep indices comfortably inside long arithmetic used throughout.
  if (total > (1LL << 46))
    throw ShapeError("invalid shape " + str() + ": element count overflows");
}

Tensor::Tensor(Shape4 shape, double fill) : shape_(shape) {
  shape_.validate();
  data_.assign(static_cast<size_t>(shape_.count()), fill);
}

void Tensor::fill(double v) {
  for (double& e : data_) e = v;
}

bool Tensor::all_finite() const {
  for (double e : data_)
    if (!std::isfinite(e)) return false;
  return true;
}

Reducer Reducer::abs_pow_mean(int p) {
  if (p < 1) throw ParamError("abs_pow_mean requires p >= 1, got " + std::to_string(p));
  return {Kind::abs_pow_mean, p};
}

double abs_ipow(double v, int p) {
  double a = std::fabs(v);
  double r = 1.0;
  for (int i = 0; i < p; ++i) r *= a;
  return r;
}

Tensor reduce_over(const Tensor& t, AxisSet axes, const Reducer& r) {
  const Shape4 in = t.shape();
  Shape4 out = in;
  if (axes.contains(Axis::N)) out.n = 1;
  if (axes.contains(Axis::Y)) out.y = 1;
  if (axes.contains(Axis::X)) out.x = 1;
  if (axes.contains(Axis::C)) out.c = 1;

  Tensor result(out, 0.0);
  // Strides into the output; reduced axes contribute nothing.
  const long sc = axes.contains(Axis::C) ? 0 : 1;
  const long sx = axes.contains(Axis::X) ? 0 : out.c;
  const long sy = axes.contains(Axis::Y) ? 0 : out.c * out.x;
  const long sn = axes.contains(Axis::N) ? 0 : out.c * out.x * out.y;

  const double* src = t.data();
  double* dst = result.data();
  long i = 0;
  for (long n = 0; n < in.n; ++n)
    for (long y = 0; y < in.y; ++y)
      for (long x = 0; x < in.x; ++x)
        for (long c = 0; c < in.c; ++c, ++i) {
          const long o = n * sn + y * sy + x * sx + c * sc;
          const double v = src[i];
          dst[o] += (r.kind == Reducer::Kind::abs_pow_mean) ? abs_ipow(v, r.p) : v;
        }

  if (r.kind != Reducer::Kind::sum) {
    const double inv = 1.0 / static_cast<double>(in.count() / out.count());
    for (long o = 0; o < result.size(); ++o) dst[o] *= inv;
  }
  return result;
}

namespace {
// splitmix64: the standard 64-bit mixer, bit-stable everywhere.
std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace

std::uint64_t Rng::next_u64() {
  ++counter_;
  return mix64(seed_ + counter_ * 0x9E3779B97F4A7C15ULL);
}

double Rng::uniform() {
  // 53 high bits -> double in [0, 1).
  return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
}

double Rng::normal() {
  // Box-Muller; u1 shifted into (0, 1] so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

long Rng::uniform_int(long lo, long hi) {
  if (hi < lo) throw ParamError("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<long>(next_u64() % span);
}

Tensor rng_normal(Rng& rng, Shape4 shape, double stddev) {
  if (!(stddev > 0.0)) throw ParamError("rng_normal requires stddev > 0");
  Tensor t(shape);
  for (long i = 0; i < t.size(); ++i) t[i] = rng.normal() * stddev;
  return t;
}

}  // namespace snorm
