#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "snorm/tensor.hpp"

using namespace snorm;

TEST_CASE("tensor_new fills and validates shapes") {
  Tensor z({1, 1, 1, 4}, 0.0);
  for (long i = 0; i < z.size(); ++i) CHECK(z[i] == 0.0);

  Tensor f({2, 1, 1, 2}, 1.5);
  CHECK(f.size() == 4);
  for (long i = 0; i < f.size(); ++i) CHECK(f[i] == 1.5);

  CHECK_THROWS_AS(Tensor({1, 0, 1, 1}), ShapeError);
  CHECK_THROWS_AS(Tensor({-2, 1, 1, 1}), ShapeError);
  CHECK_THROWS_AS(Tensor({1L << 40, 1L << 40, 1, 1}), ShapeError);
}

TEST_CASE("indexing is row-major in (N,Y,X,C)") {
  Tensor t({2, 2, 2, 3});
  for (long i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  CHECK(t.at(0, 0, 0, 0) == 0.0);
  CHECK(t.at(0, 0, 0, 2) == 2.0);
  CHECK(t.at(0, 0, 1, 0) == 3.0);
  CHECK(t.at(0, 1, 0, 0) == 6.0);
  CHECK(t.at(1, 0, 0, 0) == 12.0);
}

TEST_CASE("reduce_over mean matches direct arithmetic") {
  Tensor t({1, 1, 1, 2});
  t[0] = 1.0;
  t[1] = 3.0;
  Tensor m = reduce_over(t, {Axis::C}, Reducer::mean());
  CHECK(m.size() == 1);
  CHECK(m[0] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("abs_pow_mean follows the discrete absolute moment about 0") {
  // Oracle: (1/N) sum |x_i|^p evaluated by hand.
  Tensor t({1, 1, 1, 4});
  t[0] = 1.0; t[1] = -1.0; t[2] = 2.0; t[3] = -2.0;
  Tensor m1 = reduce_over(t, {Axis::C}, Reducer::abs_pow_mean(1));
  CHECK(m1[0] == doctest::Approx(1.5).epsilon(1e-15));

  Tensor u({1, 1, 1, 2});
  u[0] = 3.0; u[1] = 4.0;
  Tensor m2 = reduce_over(u, {Axis::C}, Reducer::abs_pow_mean(2));
  CHECK(m2[0] == doctest::Approx(12.5).epsilon(1e-15));

  CHECK_THROWS_AS(Reducer::abs_pow_mean(0), ParamError);
}

TEST_CASE("mean over all axes equals sum / count") {
  Rng rng(11);
  Tensor t = rng_normal(rng, {3, 2, 4, 5}, 2.0);
  AxisSet all{Axis::N, Axis::Y, Axis::X, Axis::C};
  Tensor s = reduce_over(t, all, Reducer::sum());
  Tensor m = reduce_over(t, all, Reducer::mean());
  CHECK(m[0] == doctest::Approx(s[0] / static_cast<double>(t.size())).epsilon(1e-12));
}

TEST_CASE("abs_pow_mean(2) equals mean of elementwise square exactly") {
  Rng rng(5);
  Tensor t = rng_normal(rng, {2, 3, 3, 4}, 1.0);
  Tensor sq = Tensor::zeros_like(t);
  for (long i = 0; i < t.size(); ++i) sq[i] = t[i] * t[i];
  AxisSet axes{Axis::Y, Axis::X};
  Tensor a = reduce_over(t, axes, Reducer::abs_pow_mean(2));
  Tensor b = reduce_over(sq, axes, Reducer::mean());
  for (long i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);  // same fp order, bit-equal
}

TEST_CASE("reduction over a size-1 axis is the identity") {
  Rng rng(3);
  Tensor t = rng_normal(rng, {4, 1, 3, 2}, 1.0);
  Tensor r = reduce_over(t, {Axis::Y}, Reducer::mean());
  CHECK(r.shape() == t.shape());
  for (long i = 0; i < t.size(); ++i) CHECK(r[i] == t[i]);
}

TEST_CASE("rng streams are deterministic per (seed, counter)") {
  Rng a(7), b(7);
  Tensor ta = rng_normal(a, {1, 1, 1, 2}, 1.0);
  Tensor tb = rng_normal(b, {1, 1, 1, 2}, 1.0);
  CHECK(ta[0] == tb[0]);
  CHECK(ta[1] == tb[1]);
  CHECK(a.counter() == b.counter());

  Rng c(8);
  Tensor tc = rng_normal(c, {1, 1, 1, 2}, 1.0);
  CHECK(ta[0] != tc[0]);
}

TEST_CASE("rng_normal sample mean obeys the law of large numbers") {
  Rng rng(42);
  Tensor t = rng_normal(rng, {100000, 1, 1, 1}, 1.0);
  double sum = 0.0;
  for (long i = 0; i < t.size(); ++i) sum += t[i];
  CHECK(std::fabs(sum / static_cast<double>(t.size())) < 0.02);
  CHECK(t.all_finite());
}

TEST_CASE("rng_normal rejects degenerate scale") {
  Rng rng(1);
  CHECK_THROWS_AS(rng_normal(rng, {1, 1, 1, 2}, 0.0), ParamError);
}

TEST_CASE("rng sample variance is close to stddev^2") {
  Rng rng(99);
  Tensor t = rng_normal(rng, {50000, 1, 1, 1}, 3.0);
  double sum = 0.0, sq = 0.0;
  for (long i = 0; i < t.size(); ++i) {
    sum += t[i];
    sq += t[i] * t[i];
  }
  const double n = static_cast<double>(t.size());
  const double var = sq / n - (sum / n) * (sum / n);
  CHECK(var == doctest::Approx(9.0).epsilon(0.05));
}
