#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "snorm/lp_stats.hpp"

using namespace snorm;

namespace {

PartitionScheme one_group() { return preset("layer_batch"); }

Tensor row(std::initializer_list<double> vals) {
  Tensor t({1, 1, 1, static_cast<long>(vals.size())});
  long i = 0;
  for (double v : vals) t[i++] = v;
  return t;
}

// Scalar functional E = sum_g grad_mu[g]*mu[g] + grad_sigma[g]*sigma[g],
// differentiated by central differences. Independent of stats_backward.
Tensor fd_stats_grad(const Tensor& x, const PartitionScheme& scheme, const LpConfig& cfg,
                     const std::vector<double>& grad_mu, const std::vector<double>& grad_sigma,
                     const std::vector<double>* mu_hat = nullptr, double h = 1e-5) {
  auto eval = [&](const Tensor& xv) {
    NormStats s = compute_stats(xv, scheme, cfg, mu_hat);
    double e = 0.0;
    for (size_t g = 0; g < s.mu.size(); ++g)
      e += grad_mu[g] * s.mu[g] + grad_sigma[g] * s.sigma[g];
    return e;
  };
  Tensor g(x.shape());
  Tensor xp = x;
  for (long i = 0; i < x.size(); ++i) {
    const double orig = xp[i];
    xp[i] = orig + h;
    const double ep = eval(xp);
    xp[i] = orig - h;
    const double em = eval(xp);
    xp[i] = orig;
    g[i] = (ep - em) / (2.0 * h);
  }
  return g;
}

double max_rel_err(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (long i = 0; i < a.size(); ++i) {
    const double denom = std::max({1e-8, std::fabs(a[i]), std::fabs(b[i])});
    worst = std::max(worst, std::fabs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("setting A with p=2 and eps=0 is the mean/std special case") {
  LpConfig cfg{2, LpSetting::A, 0.0};
  NormStats s = compute_stats(row({0.0, 2.0}), one_group(), cfg);
  CHECK(s.mu[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.sigma[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("setting C with p=1 averages absolute values") {
  LpConfig cfg{1, LpSetting::C, 0.0};
  NormStats s = compute_stats(row({1.0, -1.0, 2.0, -2.0}), one_group(), cfg);
  CHECK(s.mu[0] == doctest::Approx(0.0));
  CHECK(s.sigma[0] == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("constant input exercises the epsilon floor") {
  LpConfig cfg{2, LpSetting::A, 1e-5};
  NormStats s = compute_stats(row({5.0, 5.0, 5.0}), one_group(), cfg);
  CHECK(s.mu[0] == doctest::Approx(5.0));
  CHECK(s.sigma[0] == doctest::Approx(std::sqrt(1e-5)).epsilon(1e-12));
}

TEST_CASE("sigma equals the population standard deviation for A-2") {
  Rng rng(17);
  Tensor x = rng_normal(rng, {4, 1, 1, 6}, 2.5);
  LpConfig cfg{2, LpSetting::A, 0.0};
  NormStats s = compute_stats(x, preset("BN"), cfg);
  GroupMap m = s.groups;
  for (long g = 0; g < m.group_count(); ++g) {
    double mean = 0.0, count = 0.0;
    for (long i = 0; i < x.size(); ++i)
      if (m.group_of_flat(i) == g) { mean += x[i]; count += 1.0; }
    mean /= count;
    double var = 0.0;
    for (long i = 0; i < x.size(); ++i)
      if (m.group_of_flat(i) == g) var += (x[i] - mean) * (x[i] - mean);
    var /= count;
    CHECK(s.sigma[static_cast<size_t>(g)] ==
          doctest::Approx(std::sqrt(var)).epsilon(1e-12));
  }
}

TEST_CASE("setting C sigma is exactly scale-equivariant for k > 0") {
  Rng rng(23);
  Tensor x = rng_normal(rng, {2, 1, 1, 8}, 1.0);
  const double k = 4.0;  // power of two: multiplication is exact
  Tensor kx = x;
  for (long i = 0; i < kx.size(); ++i) kx[i] *= k;
  for (int p : {1, 2, 3}) {
    LpConfig cfg{p, LpSetting::C, 0.0};
    NormStats a = compute_stats(x, preset("BN"), cfg);
    NormStats b = compute_stats(kx, preset("BN"), cfg);
    for (size_t g = 0; g < a.sigma.size(); ++g)
      CHECK(b.sigma[g] == doctest::Approx(k * a.sigma[g]).epsilon(1e-14));
  }
  LpConfig cfg{2, LpSetting::A, 0.0};
  NormStats a = compute_stats(x, preset("BN"), cfg);
  NormStats b = compute_stats(kx, preset("BN"), cfg);
  for (size_t g = 0; g < a.mu.size(); ++g) {
    CHECK(b.mu[g] == doctest::Approx(k * a.mu[g]).epsilon(1e-14));
    CHECK(b.sigma[g] == doctest::Approx(k * a.sigma[g]).epsilon(1e-14));
  }
}

TEST_CASE("setting B requires a center and treats it as constant") {
  LpConfig cfg{2, LpSetting::B, 0.0};
  CHECK_THROWS_AS(compute_stats(row({1.0, 2.0}), one_group(), cfg), ContractError);

  std::vector<double> mu_hat{0.5};
  NormStats s = compute_stats(row({1.0, 2.0}), one_group(), cfg, &mu_hat);
  // moment about 0.5: ((0.5)^2 + (1.5)^2)/2 = 1.25
  CHECK(s.sigma[0] == doctest::Approx(std::sqrt(1.25)).epsilon(1e-15));
  CHECK(s.mu[0] == doctest::Approx(1.5));
}

TEST_CASE("setting A over singleton groups is refused") {
  PartitionScheme none;  // every element its own group
  LpConfig cfg{2, LpSetting::A, 1e-5};
  CHECK_THROWS_AS(compute_stats(row({1.0, 2.0}), none, cfg), DegeneratePartitionError);
  // B and C stay usable on the same partition.
  LpConfig c{2, LpSetting::C, 1e-5};
  CHECK_NOTHROW(compute_stats(row({1.0, 2.0}), none, c));
}

TEST_CASE("p must be a positive integer and epsilon non-negative") {
  LpConfig bad{0, LpSetting::C, 1e-5};
  CHECK_THROWS_AS(bad.validate(), ParamError);
  LpConfig neg{1, LpSetting::C, -1.0};
  CHECK_THROWS_AS(neg.validate(), ParamError);
}

TEST_CASE("hand-differentiated p=1 setting C gradient") {
  LpConfig cfg{1, LpSetting::C, 0.0};
  Tensor x = row({1.0, -2.0});
  NormStats s = compute_stats(x, one_group(), cfg);
  Tensor dx = stats_backward(x, s, {0.0}, {1.0});
  CHECK(dx[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(dx[1] == doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("null upstream gradient gives a zero tensor") {
  LpConfig cfg{2, LpSetting::A, 1e-5};
  Tensor x = row({1.0, 2.0, 3.0});
  NormStats s = compute_stats(x, one_group(), cfg);
  Tensor dx = stats_backward(x, s, {0.0}, {0.0});
  for (long i = 0; i < dx.size(); ++i) CHECK(dx[i] == 0.0);
}

TEST_CASE("stats_backward matches central finite differences") {
  Rng rng(31);
  Tensor x = rng_normal(rng, {1, 1, 1, 16}, 1.0);
  std::vector<double> gmu{0.7}, gsig{-1.3};
  for (int p : {1, 2, 3}) {
    for (LpSetting setting : {LpSetting::A, LpSetting::C}) {
      LpConfig cfg{p, setting, 1e-5};
      NormStats s = compute_stats(x, one_group(), cfg);
      Tensor analytic = stats_backward(x, s, gmu, gsig);
      Tensor numeric = fd_stats_grad(x, one_group(), cfg, gmu, gsig);
      CHECK(max_rel_err(analytic, numeric) < 1e-5);
    }
  }
}

TEST_CASE("stats_backward matches finite differences for setting B") {
  Rng rng(37);
  Tensor x = rng_normal(rng, {1, 1, 1, 16}, 1.0);
  std::vector<double> mu_hat{0.25};
  std::vector<double> gmu{0.4}, gsig{0.9};
  for (int p : {1, 2}) {
    LpConfig cfg{p, LpSetting::B, 1e-5};
    NormStats s = compute_stats(x, one_group(), cfg, &mu_hat);
    Tensor analytic = stats_backward(x, s, gmu, gsig);
    Tensor numeric = fd_stats_grad(x, one_group(), cfg, gmu, gsig, &mu_hat);
    CHECK(max_rel_err(analytic, numeric) < 1e-5);
  }
}

TEST_CASE("p=2 setting A matches the classical batch-norm stats gradient") {
  // Classical: dsigma/dx_i = (x_i - mu) / (|g| sigma), dmu/dx_i = 1/|g|.
  Rng rng(41);
  Tensor x = rng_normal(rng, {1, 1, 1, 12}, 1.5);
  LpConfig cfg{2, LpSetting::A, 0.0};
  NormStats s = compute_stats(x, one_group(), cfg);
  std::vector<double> gmu{0.3}, gsig{1.1};
  Tensor dx = stats_backward(x, s, gmu, gsig);
  const double gs = 12.0;
  for (long i = 0; i < x.size(); ++i) {
    const double expected = gmu[0] / gs + gsig[0] * (x[i] - s.mu[0]) / (gs * s.sigma[0]);
    CHECK(dx[i] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("sigma stays finite and nondecreasing over p in {1,2,3,5,7}") {
  Rng rng(47);
  Tensor x = rng_normal(rng, {1, 1, 1, 32}, 1.0);
  double prev = 0.0;
  for (int p : {1, 2, 3, 5, 7}) {
    LpConfig cfg{p, LpSetting::C, 0.0};
    NormStats s = compute_stats(x, one_group(), cfg);
    CHECK(std::isfinite(s.sigma[0]));
    CHECK(s.sigma[0] >= prev);  // Lyapunov: p-th root moments grow with p
    prev = s.sigma[0];
  }
}

TEST_CASE("gradient mismatch errors are contract errors") {
  LpConfig cfg{2, LpSetting::C, 1e-5};
  Tensor x = row({1.0, 2.0});
  NormStats s = compute_stats(x, one_group(), cfg);
  Tensor other({1, 1, 1, 3});
  CHECK_THROWS_AS(stats_backward(other, s, {0.0}, {0.0}), ContractError);
  CHECK_THROWS_AS(stats_backward(x, s, {0.0, 0.0}, {0.0}), ContractError);
}
