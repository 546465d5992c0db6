#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "snorm/norm_layer.hpp"

using namespace snorm;

namespace {

struct WarnCapture {
  std::vector<std::string> messages;
  WarnCapture() {
    set_warning_handler([this](const std::string& m) { messages.push_back(m); });
  }
  ~WarnCapture() { set_warning_handler(nullptr); }
};

Tensor row(std::initializer_list<double> vals) {
  Tensor t({1, 1, 1, static_cast<long>(vals.size())});
  long i = 0;
  for (double v : vals) t[i++] = v;
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (long i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a[i] - b[i]));
  return worst;
}

// Central finite differences of E = sum w.y over a freshly built layer.
double layer_fd_check(const std::function<std::unique_ptr<NormLayer>()>& make,
                      const Tensor& x0, Rng& rng) {
  Tensor w(x0.shape());
  for (long i = 0; i < w.size(); ++i) w[i] = rng.normal();

  auto layer = make();
  Tensor y = layer->forward(x0);
  Tensor dy(x0.shape());
  for (long i = 0; i < dy.size(); ++i) dy[i] = w[i];
  Tensor analytic = layer->backward(dy);

  const double h = 1e-5;
  double worst = 0.0;
  Tensor xp = x0;
  for (long i = 0; i < x0.size(); ++i) {
    const double orig = xp[i];
    auto eval = [&](double v) {
      xp[i] = v;
      auto fresh = make();
      Tensor yv = fresh->forward(xp);
      double e = 0.0;
      for (long j = 0; j < yv.size(); ++j) e += w[j] * yv[j];
      return e;
    };
    const double num = (eval(orig + h) - eval(orig - h)) / (2.0 * h);
    xp[i] = orig;
    const double denom = std::max({1e-8, std::fabs(num), std::fabs(analytic[i])});
    worst = std::max(worst, std::fabs(num - analytic[i]) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("norm_op evaluates (x - mu) / sigma") {
  LpConfig cfg{2, LpSetting::C, 0.0};
  Tensor x = row({1.0, 3.0});
  NormStats s = compute_stats(x, preset("layer_batch"), cfg);
  s.mu = {2.0};
  s.sigma = {1.0};
  Tensor y = norm_op(x, s);
  CHECK(y[0] == -1.0);
  CHECK(y[1] == 1.0);

  Tensor x3 = row({0.0, 2.0, 4.0});
  NormStats s3 = compute_stats(x3, preset("layer_batch"), cfg);
  s3.mu = {2.0};
  s3.sigma = {2.0};
  Tensor y3 = norm_op(x3, s3);
  CHECK(y3[0] == -1.0);
  CHECK(y3[1] == 0.0);
  CHECK(y3[2] == 1.0);

  s3.mu = {0.0};
  s3.sigma = {1.0};
  Tensor id = norm_op(x3, s3);
  for (long i = 0; i < id.size(); ++i) CHECK(id[i] == x3[i]);

  s3.sigma = {0.0};
  CHECK_THROWS_AS(norm_op(x3, s3), ContractError);
}

TEST_CASE("sample layer normalizes each sample independently") {
  NormLayer layer(NormKind::sample, preset("LN"), {2, LpSetting::A, 0.0});
  Tensor x = row({0.0, 2.0});
  Tensor y = layer.forward(x);
  CHECK(y[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(y[1] == doctest::Approx(1.0).epsilon(1e-12));

  // Two identical samples in one batch give two identical rows.
  Tensor x2({2, 1, 1, 3});
  for (long c = 0; c < 3; ++c) {
    x2.at(0, 0, 0, c) = static_cast<double>(c) - 0.5;
    x2.at(1, 0, 0, c) = static_cast<double>(c) - 0.5;
  }
  layer.clear_cache();
  Tensor y2 = layer.forward(x2);
  for (long c = 0; c < 3; ++c) CHECK(y2.at(0, 0, 0, c) == y2.at(1, 0, 0, c));
}

TEST_CASE("sample layer rejects schemes that pool the batch axis") {
  CHECK_THROWS_AS(NormLayer(NormKind::sample, preset("BN"), {}), ParamError);
  CHECK_THROWS_AS(NormLayer(NormKind::batch, preset("LN"), {}), ParamError);
}

TEST_CASE("single-sample batch matches the sample layer on coinciding schemes") {
  // With one sample, LN's per-sample group and layer_batch's per-batch group
  // are the same element set.
  Rng rng(7);
  Tensor x = rng_normal(rng, {1, 2, 2, 3}, 1.0);
  NormLayer sample(NormKind::sample, preset("LN"), {2, LpSetting::A, 1e-5});
  NormLayer batch(NormKind::batch, preset("layer_batch"), {2, LpSetting::A, 1e-5});
  CHECK(max_abs_diff(sample.forward(x), batch.forward(x)) < 1e-12);
}

TEST_CASE("batch layer train outputs are standardized per group") {
  Rng rng(9);
  Tensor x = rng_normal(rng, {8, 2, 2, 4}, 3.0);
  NormLayer layer(NormKind::batch, preset("BN"), {2, LpSetting::A, 1e-5});
  Tensor y = layer.forward(x);
  GroupMap m = groups_of(preset("BN"), x.shape());
  std::vector<double> mean(static_cast<size_t>(m.group_count()), 0.0);
  std::vector<double> second(static_cast<size_t>(m.group_count()), 0.0);
  for (long i = 0; i < y.size(); ++i) {
    mean[static_cast<size_t>(m.group_of_flat(i))] += y[i];
    second[static_cast<size_t>(m.group_of_flat(i))] += y[i] * y[i];
  }
  for (long g = 0; g < m.group_count(); ++g) {
    CHECK(std::fabs(mean[static_cast<size_t>(g)] / static_cast<double>(m.group_size())) < 1e-10);
    CHECK(std::fabs(second[static_cast<size_t>(g)] / static_cast<double>(m.group_size()) - 1.0) < 1e-3);
  }
}

TEST_CASE("batch layer is deterministic and has an EMA fixed point") {
  Rng rng(13);
  Tensor x = rng_normal(rng, {4, 1, 1, 3}, 1.0);
  NormLayer layer(NormKind::batch, preset("BN"), {2, LpSetting::A, 1e-5});
  Tensor y1 = layer.forward(x);
  Tensor y2 = layer.forward(x);
  CHECK(max_abs_diff(y1, y2) == 0.0);

  // Constant-stats stream keeps the EMA pinned at s, so eval equals train.
  for (int k = 0; k < 5; ++k) layer.forward(x);
  layer.clear_cache();
  layer.set_mode(Mode::eval);
  Tensor ye = layer.forward(x);
  CHECK(max_abs_diff(ye, y1) < 1e-6);
}

TEST_CASE("batch layer eval before any training batch fails") {
  NormLayer layer(NormKind::batch, preset("BN"), {2, LpSetting::A, 1e-5});
  layer.set_mode(Mode::eval);
  Tensor x = row({1.0, 2.0});
  CHECK_THROWS_AS(layer.forward(x), StateError);
}

TEST_CASE("batch backward passes finite differences and the null case") {
  Rng rng(21);
  Tensor x = rng_normal(rng, {2, 1, 1, 3}, 1.0);
  auto make = [] {
    return std::make_unique<NormLayer>(NormKind::batch, preset("BN"),
                                       LpConfig{2, LpSetting::A, 1e-5});
  };
  CHECK(layer_fd_check(make, x, rng) < 1e-5);

  auto layer = make();
  layer->forward(x);
  Tensor zero(x.shape());
  Tensor dx = layer->backward(zero);
  for (long i = 0; i < dx.size(); ++i) CHECK(dx[i] == 0.0);
}

TEST_CASE("batch backward finite differences hold across p and settings") {
  Rng rng(22);
  Tensor x = rng_normal(rng, {4, 1, 1, 2}, 1.0);
  for (int p : {1, 2, 3}) {
    for (LpSetting setting : {LpSetting::A, LpSetting::C}) {
      auto make = [&] {
        return std::make_unique<NormLayer>(NormKind::batch, preset("BN"),
                                           LpConfig{p, setting, 1e-5});
      };
      CHECK(layer_fd_check(make, x, rng) < 1e-5);
    }
  }
}

TEST_CASE("p=2 setting A input gradients are orthogonal to 1 and y") {
  Rng rng(27);
  Tensor x = rng_normal(rng, {6, 1, 1, 3}, 1.0);
  Tensor dy = rng_normal(rng, {6, 1, 1, 3}, 1.0);
  NormLayer layer(NormKind::batch, preset("BN"), {2, LpSetting::A, 0.0});
  Tensor y = layer.forward(x);
  Tensor dx = layer.backward(dy);
  GroupMap m = groups_of(preset("BN"), x.shape());
  std::vector<double> s1(static_cast<size_t>(m.group_count()), 0.0);
  std::vector<double> sy(static_cast<size_t>(m.group_count()), 0.0);
  for (long i = 0; i < dx.size(); ++i) {
    s1[static_cast<size_t>(m.group_of_flat(i))] += dx[i];
    sy[static_cast<size_t>(m.group_of_flat(i))] += dx[i] * y[i];
  }
  for (long g = 0; g < m.group_count(); ++g) {
    CHECK(std::fabs(s1[static_cast<size_t>(g)]) < 1e-9);
    CHECK(std::fabs(sy[static_cast<size_t>(g)]) < 1e-9);
  }
}

TEST_CASE("setting A normalization is shift invariant per group") {
  Rng rng(33);
  Tensor x = rng_normal(rng, {4, 1, 1, 3}, 1.0);
  Tensor shifted = x;
  GroupMap m = groups_of(preset("BN"), x.shape());
  for (long i = 0; i < x.size(); ++i)
    shifted[i] += 10.0 * static_cast<double>(m.group_of_flat(i) + 1);
  NormLayer a(NormKind::batch, preset("BN"), {2, LpSetting::A, 1e-5});
  NormLayer b(NormKind::batch, preset("BN"), {2, LpSetting::A, 1e-5});
  CHECK(max_abs_diff(a.forward(x), b.forward(shifted)) < 1e-9);
}

TEST_CASE("p=1 and p=2 outputs agree in sign") {
  Rng rng(35);
  Tensor x = rng_normal(rng, {8, 1, 1, 2}, 1.0);
  NormLayer l1(NormKind::batch, preset("BN"), {1, LpSetting::A, 1e-5});
  NormLayer l2(NormKind::batch, preset("BN"), {2, LpSetting::A, 1e-5});
  Tensor y1 = l1.forward(x);
  Tensor y2 = l2.forward(x);
  for (long i = 0; i < y1.size(); ++i) {
    if (y1[i] > 0) CHECK(y2[i] >= 0);
    if (y1[i] < 0) CHECK(y2[i] <= 0);
  }
}

TEST_CASE("streaming reduces exactly to GBN under the reduction hypers") {
  Rng rng(51);
  NormLayer stream(NormKind::streaming, preset("BN"), {2, LpSetting::A, 1e-5},
                   StreamHyper::gbn_reduction());
  NormLayer batch(NormKind::batch, preset("BN"), {2, LpSetting::A, 1e-5});
  double worst = 0.0;
  for (int k = 0; k < 120; ++k) {
    Tensor x = rng_normal(rng, {4, 1, 1, 3}, 1.0 + 0.01 * k);
    Tensor dy = rng_normal(rng, {4, 1, 1, 3}, 1.0);
    Tensor ys = stream.forward(x);
    Tensor yb = batch.forward(x);
    worst = std::max(worst, max_abs_diff(ys, yb));
    Tensor dxs = stream.backward(dy);
    Tensor dxb = batch.backward(dy);
    worst = std::max(worst, max_abs_diff(dxs, dxb));
    stream.commit();  // n = 1: every batch ends a weight update
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("short-term store is the exact average since the last commit") {
  Rng rng(55);
  Tensor x = rng_normal(rng, {4, 1, 1, 3}, 1.0);
  NormLayer layer(NormKind::streaming, preset("BN"), {2, LpSetting::A, 1e-5});
  NormStats s = compute_stats(x, preset("BN"), {2, LpSetting::A, 1e-5});
  layer.forward(x);
  layer.forward(x);
  const StreamState& st = layer.stream_state();
  CHECK(st.stats_count == 2);
  for (size_t g = 0; g < s.mu.size(); ++g) {
    CHECK(st.stats_short.mu[g] == s.mu[g]);        // exact on constants
    CHECK(st.stats_short.sigma[g] == s.sigma[g]);
  }
}

TEST_CASE("commit blends with kappa and bootstraps from the short store") {
  WarnCapture warns;
  Rng rng(57);
  Tensor x = rng_normal(rng, {4, 1, 1, 2}, 1.0);
  StreamHyper h;
  h.kappa1 = 0.7;
  h.kappa2 = 0.3;
  NormLayer layer(NormKind::streaming, preset("BN"), {2, LpSetting::A, 1e-5}, h);

  layer.forward(x);
  layer.clear_cache();
  NormStats s = compute_stats(x, preset("BN"), {2, LpSetting::A, 1e-5});
  layer.commit();
  const StreamState& st = layer.stream_state();
  CHECK(st.has_long);
  CHECK(st.stats_count == 0);
  for (size_t g = 0; g < s.mu.size(); ++g) CHECK(st.stats_long.mu[g] == s.mu[g]);

  // Second commit with different stats follows kappa1*L + kappa2*S.
  Tensor x2 = rng_normal(rng, {4, 1, 1, 2}, 2.0);
  NormStats s2 = compute_stats(x2, preset("BN"), {2, LpSetting::A, 1e-5});
  layer.forward(x2);
  layer.clear_cache();
  layer.commit();
  for (size_t g = 0; g < s.mu.size(); ++g) {
    CHECK(layer.stream_state().stats_long.mu[g] ==
          doctest::Approx(0.7 * s.mu[g] + 0.3 * s2.mu[g]).epsilon(1e-14));
    CHECK(layer.stream_state().stats_long.sigma[g] ==
          doctest::Approx(0.7 * s.sigma[g] + 0.3 * s2.sigma[g]).epsilon(1e-14));
  }
}

TEST_CASE("constant stats make the long store an exact fixed point") {
  Rng rng(59);
  Tensor x = rng_normal(rng, {4, 1, 1, 2}, 1.0);
  NormLayer layer(NormKind::streaming, preset("BN"), {2, LpSetting::A, 1e-5});
  NormStats s = compute_stats(x, preset("BN"), {2, LpSetting::A, 1e-5});
  for (int k = 0; k < 3; ++k) {
    layer.forward(x);
    layer.clear_cache();
    layer.commit();
  }
  const StreamState& st = layer.stream_state();
  for (size_t g = 0; g < s.mu.size(); ++g) {
    CHECK(st.stats_long.mu[g] == s.mu[g]);        // exact, not approximate
    CHECK(st.stats_long.sigma[g] == s.sigma[g]);
  }
}

TEST_CASE("kappa1=1 kappa2=0 leaves the long store unchanged") {
  WarnCapture warns;
  Rng rng(61);
  StreamHyper h;
  h.kappa1 = 1.0;
  h.kappa2 = 0.0;
  NormLayer layer(NormKind::streaming, preset("BN"), {2, LpSetting::A, 1e-5}, h);
  Tensor x1 = rng_normal(rng, {4, 1, 1, 2}, 1.0);
  Tensor x2 = rng_normal(rng, {4, 1, 1, 2}, 5.0);
  layer.forward(x1);
  layer.clear_cache();
  layer.commit();
  auto frozen = layer.stream_state().stats_long;
  layer.forward(x2);
  layer.clear_cache();
  layer.commit();
  for (size_t g = 0; g < frozen.mu.size(); ++g) {
    CHECK(layer.stream_state().stats_long.mu[g] == frozen.mu[g]);
    CHECK(layer.stream_state().stats_long.sigma[g] == frozen.sigma[g]);
  }
}

TEST_CASE("blended estimate after identical batches") {
  Rng rng(63);
  Tensor warm = rng_normal(rng, {4, 1, 1, 2}, 2.0);
  Tensor x = rng_normal(rng, {4, 1, 1, 2}, 1.0);
  StreamHyper h;  // defaults alpha = (0.7, 0.3)
  NormLayer layer(NormKind::streaming, preset("BN"), {2, LpSetting::A, 1e-5}, h);
  layer.forward(warm);
  layer.clear_cache();
  layer.commit();
  auto L = layer.stream_state().stats_long;
  NormStats s = compute_stats(x, preset("BN"), {2, LpSetting::A, 1e-5});
  for (int k = 0; k < 4; ++k) {
    layer.forward(x);
    layer.clear_cache();
  }
  const StreamState& st = layer.stream_state();
  for (size_t g = 0; g < s.mu.size(); ++g) {
    CHECK(st.stats_short.mu[g] == s.mu[g]);
    // shat is not stored directly, but eval output reveals it.
  }
  layer.prepare_eval();
  Tensor y = layer.forward(x);
  for (long i = 0; i < y.size(); ++i) {
    const long g = s.groups.group_of_flat(i);
    const double mu = 0.7 * L.mu[static_cast<size_t>(g)] + 0.3 * s.mu[static_cast<size_t>(g)];
    const double sg = 0.7 * L.sigma[static_cast<size_t>(g)] + 0.3 * s.sigma[static_cast<size_t>(g)];
    CHECK(y[i] == doctest::Approx((x[i] - mu) / sg).epsilon(1e-12));
  }
}

TEST_CASE("beta=(0,0,0) suppresses the stats-path gradient entirely") {
  WarnCapture warns;
  Rng rng(65);
  StreamHyper h;
  h.beta1 = h.beta2 = h.beta3 = 0.0;
  NormLayer layer(NormKind::streaming, preset("BN"), {2, LpSetting::A, 1e-5}, h);
  Tensor x = rng_normal(rng, {4, 1, 1, 3}, 1.0);
  Tensor dy = rng_normal(rng, {4, 1, 1, 3}, 1.0);
  layer.forward(x);
  NormStats s = compute_stats(x, preset("BN"), {2, LpSetting::A, 1e-5});
  Tensor dx = layer.backward(dy);
  for (long i = 0; i < dx.size(); ++i) {
    const long g = s.groups.group_of_flat(i);
    CHECK(dx[i] == doctest::Approx(dy[i] / s.sigma[static_cast<size_t>(g)]).epsilon(1e-12));
  }
}

TEST_CASE("zero gradient with empty history stays zero") {
  NormLayer layer(NormKind::streaming, preset("BN"), {2, LpSetting::A, 1e-5});
  Rng rng(67);
  Tensor x = rng_normal(rng, {4, 1, 1, 2}, 1.0);
  layer.forward(x);
  Tensor dx = layer.backward(Tensor(x.shape()));
  for (long i = 0; i < dx.size(); ++i) CHECK(dx[i] == 0.0);
  const StreamState& st = layer.stream_state();
  CHECK(st.grad_count == 1);
  for (double v : st.grad_short.mu) CHECK(v == 0.0);
}

TEST_CASE("prepare_eval freezes state; eval forwards never mutate") {
  Rng rng(71);
  NormLayer layer(NormKind::streaming, preset("BN"), {2, LpSetting::A, 1e-5});
  Tensor x = rng_normal(rng, {4, 1, 1, 2}, 1.0);
  layer.forward(x);
  layer.clear_cache();
  layer.prepare_eval();
  auto snap = layer.snapshot();
  Tensor y1 = layer.forward(x);
  Tensor y2 = layer.forward(x);
  Tensor y3 = layer.forward(x);
  auto after = layer.snapshot();
  CHECK(snap.stream.stats_count == after.stream.stats_count);
  CHECK(snap.stream.stats_short.mu == after.stream.stats_short.mu);
  CHECK(snap.stream.stats_short.sigma == after.stream.stats_short.sigma);
  CHECK(snap.shat_latest->mu == after.shat_latest->mu);
  CHECK(max_abs_diff(y1, y2) == 0.0);
  CHECK(max_abs_diff(y2, y3) == 0.0);

  // The frozen shat equals the single batch's stats here, so eval == train.
  NormLayer twin(NormKind::streaming, preset("BN"), {2, LpSetting::A, 1e-5});
  Tensor ytrain = twin.forward(x);
  CHECK(max_abs_diff(y1, ytrain) < 1e-12);

  CHECK_THROWS_AS(layer.commit(), StateError);
}

TEST_CASE("streaming eval before any training batch fails") {
  NormLayer layer(NormKind::streaming, preset("BN"), {2, LpSetting::A, 1e-5});
  layer.prepare_eval();
  Tensor x({2, 1, 1, 2});
  CHECK_THROWS_AS(layer.forward(x), StateError);
}

TEST_CASE("commit with empty accumulators warns and does nothing") {
  WarnCapture warns;
  NormLayer layer(NormKind::streaming, preset("BN"), {2, LpSetting::A, 1e-5});
  layer.commit();
  CHECK(warns.messages.size() == 1);
  CHECK(layer.commit_count() == 0);
}

TEST_CASE("streaming backward matches finite differences in reduction mode") {
  Rng rng(75);
  Tensor x = rng_normal(rng, {3, 1, 1, 4}, 1.0);
  auto make = [] {
    return std::make_unique<NormLayer>(NormKind::streaming, preset("BN"),
                                       LpConfig{2, LpSetting::A, 1e-5},
                                       StreamHyper::gbn_reduction());
  };
  CHECK(layer_fd_check(make, x, rng) < 1e-5);
}

TEST_CASE("bias/gain layer applies shift and scale per channel") {
  BiasGainLayer layer({1, 1, 1, 2});
  Tensor x = row({1.0, -1.0});
  Tensor y0 = layer.forward(x);
  CHECK(y0[0] == 1.0);  // identity at init
  CHECK(y0[1] == -1.0);

  layer.gain().fill(2.0);
  layer.bias().fill(1.0);
  layer.clear_cache();
  Tensor y = layer.forward(x);
  CHECK(y[0] == 3.0);
  CHECK(y[1] == -1.0);
}

TEST_CASE("bias/gain gradients match finite differences") {
  Rng rng(81);
  Tensor x = rng_normal(rng, {3, 1, 1, 4}, 1.0);
  Tensor w = rng_normal(rng, {3, 1, 1, 4}, 1.0);

  BiasGainLayer layer({1, 1, 1, 4});
  for (long i = 0; i < layer.gain().size(); ++i) {
    layer.gain()[i] = 1.0 + 0.1 * static_cast<double>(i);
    layer.bias()[i] = 0.05 * static_cast<double>(i);
  }
  layer.forward(x);
  Tensor dx = layer.backward(w);

  std::vector<ParamRef> params;
  layer.collect_params("bg", params);
  auto eval = [&](BiasGainLayer& l, const Tensor& xv) {
    l.set_mode(Mode::eval);
    Tensor y = l.forward(xv);
    double e = 0.0;
    for (long j = 0; j < y.size(); ++j) e += w[j] * y[j];
    return e;
  };
  const double h = 1e-6;
  for (const ParamRef& p : params) {
    for (long i = 0; i < p.value->size(); ++i) {
      const double orig = (*p.value)[i];
      (*p.value)[i] = orig + h;
      const double ep = eval(layer, x);
      (*p.value)[i] = orig - h;
      const double em = eval(layer, x);
      (*p.value)[i] = orig;
      const double num = (ep - em) / (2.0 * h);
      const double analytic = (*p.grad)[i];
      const double denom = std::max({1e-8, std::fabs(num), std::fabs(analytic)});
      CHECK(std::fabs(num - analytic) / denom < 1e-6);
    }
  }
  // input gradient: dx = gain * dy
  for (long i = 0; i < dx.size(); ++i) {
    const long c = i % 4;
    CHECK(dx[i] == doctest::Approx(layer.gain()[c] * w[i]).epsilon(1e-12));
  }
}

TEST_CASE("per-neuron bias/gain keeps one parameter per Y*X*C position") {
  BiasGainLayer layer({1, 2, 2, 3}, BiasGainLayer::Granularity::per_neuron);
  CHECK(layer.gain().size() == 12);
  BiasGainLayer chan({1, 2, 2, 3});
  CHECK(chan.gain().size() == 3);
}

TEST_CASE("hyper sum violations warn but do not throw") {
  WarnCapture warns;
  StreamHyper h;
  h.alpha1 = 0.9;  // alpha sum now 1.2
  NormLayer layer(NormKind::streaming, preset("BN"), {2, LpSetting::A, 1e-5}, h);
  CHECK(!warns.messages.empty());
}
