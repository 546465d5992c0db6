#include "snorm/norm_layer.hpp"

#include <cmath>

namespace snorm {

NormKind parse_norm_kind(const std::string& s) {
  if (s == "sample") return NormKind::sample;
  if (s == "batch") return NormKind::batch;
  if (s == "streaming") return NormKind::streaming;
  throw ParamError("unknown norm kind '" + s + "'");
}

std::string format_norm_kind(NormKind k) {
  switch (k) {
    case NormKind::sample: return "sample";
    case NormKind::batch: return "batch";
    default: return "streaming";
  }
}

void StreamHyper::check() const {
  auto near_one = [](double v) { return std::fabs(v - 1.0) < 1e-12; };
  if (!near_one(alpha1 + alpha2)) warn("stream hyper: alpha1 + alpha2 != 1");
  if (!near_one(beta1 + beta2 + beta3)) warn("stream hyper: beta1 + beta2 + beta3 != 1");
  if (!near_one(kappa1 + kappa2)) warn("stream hyper: kappa1 + kappa2 != 1");
  if (!near_one(kappa3 + kappa4)) warn("stream hyper: kappa3 + kappa4 != 1");
}

namespace {

// y = (x - mu) / sigma with per-group arrays laid out by map.
Tensor apply_norm(const Tensor& x, const GroupMap& map,
                  const std::vector<double>& mu, const std::vector<double>& sigma) {
  if (static_cast<long>(mu.size()) != map.group_count())
    throw ContractError("norm stats do not match the tensor's group layout");
  for (double s : sigma)
    if (!(s > 0.0)) throw ContractError("norm_op: sigma must be > 0");
  Tensor y(x.shape());
  const double* src = x.data();
  double* dst = y.data();
  for (long i = 0; i < x.size(); ++i) {
    const long g = map.group_of_flat(i);
    dst[i] = (src[i] - mu[static_cast<size_t>(g)]) / sigma[static_cast<size_t>(g)];
  }
  return y;
}

// blended = w1 * a + w2 * b, written so that w1 + w2 == 1 with a == b is an
// exact fixed point (a + w2*(b-a)); the correction restores literal weights
// when the sums deliberately differ from 1.
void blend_into(StatsVec& a, const StatsVec& b, double w1, double w2) {
  const bool sums_to_one = (w1 + w2 == 1.0);
  for (size_t i = 0; i < a.mu.size(); ++i) {
    double m = a.mu[i] + w2 * (b.mu[i] - a.mu[i]);
    double s = a.sigma[i] + w2 * (b.sigma[i] - a.sigma[i]);
    if (!sums_to_one) {
      m += (w1 + w2 - 1.0) * a.mu[i];
      s += (w1 + w2 - 1.0) * a.sigma[i];
    }
    a.mu[i] = m;
    a.sigma[i] = s;
  }
}

StatsVec weighted_sum(const StatsVec& a, double wa, const StatsVec& b, double wb) {
  StatsVec out;
  out.reset(a.size());
  for (size_t i = 0; i < a.mu.size(); ++i) {
    out.mu[i] = wa * a.mu[i] + wb * b.mu[i];
    out.sigma[i] = wa * a.sigma[i] + wb * b.sigma[i];
  }
  return out;
}

// Exact running average: acc += (v - acc) / count. Idempotent on constants.
void fold_average(StatsVec& acc, const StatsVec& v, long count) {
  const double inv = 1.0 / static_cast<double>(count);
  for (size_t i = 0; i < acc.mu.size(); ++i) {
    acc.mu[i] += (v.mu[i] - acc.mu[i]) * inv;
    acc.sigma[i] += (v.sigma[i] - acc.sigma[i]) * inv;
  }
}

}  // namespace

Tensor norm_op(const Tensor& x, const NormStats& stats) {
  if (!stats.groups.compatible_with(x.shape()))
    throw ContractError("norm_op: stats layout does not match x " + x.shape().str());
  return apply_norm(x, stats.groups, stats.mu, stats.sigma);
}

NormLayer::NormLayer(NormKind kind, PartitionScheme scheme, LpConfig lp,
                     StreamHyper hyper, double ema_momentum)
    : kind_(kind), scheme_(std::move(scheme)), lp_(lp), hyper_(hyper),
      ema_momentum_(ema_momentum) {
  lp_.validate();
  if (kind_ == NormKind::sample && scheme_.pools(Axis::N))
    throw ParamError("sample normalization pools within one sample; scheme '" +
                     format_scheme(scheme_) + "' pools the batch axis");
  if (kind_ != NormKind::sample && !scheme_.pools(Axis::N))
    throw ParamError("batch/streaming normalization needs the batch axis pooled; got '" +
                     format_scheme(scheme_) + "'");
  if (kind_ == NormKind::streaming) hyper_.check();
  if (ema_momentum_ < 0.0 || ema_momentum_ > 1.0)
    throw ParamError("ema momentum must lie in [0, 1]");
}

std::vector<double> NormLayer::group_means(const Tensor& x, const GroupMap& map) const {
  std::vector<double> mu(static_cast<size_t>(map.group_count()), 0.0);
  const double* src = x.data();
  for (long i = 0; i < x.size(); ++i) mu[static_cast<size_t>(map.group_of_flat(i))] += src[i];
  const double inv = 1.0 / static_cast<double>(map.group_size());
  for (double& m : mu) m *= inv;
  return mu;
}

const std::vector<double>* NormLayer::center_for_setting_b(
    const Tensor& x, const GroupMap& map, std::vector<double>& scratch) {
  if (lp_.setting != LpSetting::B) return nullptr;
  if (kind_ == NormKind::batch && has_running_) return &running_.mu;
  if (kind_ == NormKind::streaming && shat_latest_) return &shat_latest_->mu;
  // First batch: no running estimate exists yet, fall back to the batch mean.
  scratch = group_means(x, map);
  return &scratch;
}

Tensor NormLayer::forward(const Tensor& x) {
  GroupMap map(scheme_, x.shape());

  if (mode_ == Mode::eval) {
    switch (kind_) {
      case NormKind::sample: {
        std::vector<double> scratch;
        const std::vector<double>* mu_hat = center_for_setting_b(x, map, scratch);
        NormStats s = compute_stats(x, scheme_, lp_, mu_hat);
        return norm_op(x, s);
      }
      case NormKind::batch:
        if (!has_running_)
          throw StateError("eval before any training batch: no running stats");
        return apply_norm(x, map, running_.mu, running_.sigma);
      default:
        if (!shat_latest_)
          throw StateError("eval before any training batch: no streaming stats");
        return apply_norm(x, map, shat_latest_->mu, shat_latest_->sigma);
    }
  }

  std::vector<double> scratch;
  const std::vector<double>* mu_hat = center_for_setting_b(x, map, scratch);
  NormStats s = compute_stats(x, scheme_, lp_, mu_hat);

  FwdRecord rec;
  rec.x = x;
  rec.fold_weight = 1.0;

  switch (kind_) {
    case NormKind::sample:
      rec.used.mu = s.mu;
      rec.used.sigma = s.sigma;
      break;
    case NormKind::batch: {
      if (!has_running_) {
        running_.mu = s.mu;
        running_.sigma = s.sigma;
        has_running_ = true;
      } else {
        StatsVec sv{s.mu, s.sigma};
        blend_into(running_, sv, ema_momentum_, 1.0 - ema_momentum_);
      }
      rec.used.mu = s.mu;
      rec.used.sigma = s.sigma;
      break;
    }
    default: {  // streaming
      StatsVec sv{s.mu, s.sigma};
      if (stream_.stats_count == 0) stream_.stats_short.reset(map.group_count());
      stream_.stats_count += 1;
      fold_average(stream_.stats_short, sv, stream_.stats_count);

      StatsVec shat;
      double eff_alpha2;
      if (stream_.has_long) {
        shat = weighted_sum(stream_.stats_long, hyper_.alpha1, stream_.stats_short, hyper_.alpha2);
        eff_alpha2 = hyper_.alpha2;
      } else {
        shat = stream_.stats_short;  // bootstrap: only the short store exists
        eff_alpha2 = 1.0;
      }
      rec.fold_weight = eff_alpha2 / static_cast<double>(stream_.stats_count);
      rec.used = shat;
      shat_latest_ = std::move(shat);
      shat_groups_ = map.group_count();
      break;
    }
  }

  Tensor y = apply_norm(x, map, rec.used.mu, rec.used.sigma);
  rec.stats = std::move(s);
  records_.push_back(std::move(rec));
  return y;
}

Tensor NormLayer::backward(const Tensor& dy) {
  if (records_.empty())
    throw ContractError("norm backward without a matching forward");
  FwdRecord rec = std::move(records_.back());
  records_.pop_back();
  if (!(dy.shape() == rec.x.shape()))
    throw ContractError("norm backward: gradient shape " + dy.shape().str() +
                        " does not match forward input " + rec.x.shape().str());

  const GroupMap& map = rec.stats.groups;
  const long gc = map.group_count();

  // Direct path dy/sigma plus dE/d(shat) per group.
  Tensor dx(rec.x.shape());
  StatsVec g;
  g.reset(gc);
  const double* dyp = dy.data();
  const double* xp = rec.x.data();
  double* dxp = dx.data();
  for (long i = 0; i < dy.size(); ++i) {
    const long gi = map.group_of_flat(i);
    const double sigma = rec.used.sigma[static_cast<size_t>(gi)];
    const double mu = rec.used.mu[static_cast<size_t>(gi)];
    dxp[i] = dyp[i] / sigma;
    g.mu[static_cast<size_t>(gi)] -= dyp[i] / sigma;
    g.sigma[static_cast<size_t>(gi)] -= dyp[i] * (xp[i] - mu) / (sigma * sigma);
  }

  StatsVec ghat;
  double weight = rec.fold_weight;
  if (kind_ == NormKind::streaming) {
    if (stream_.grad_count == 0) stream_.grad_short.reset(gc);
    stream_.grad_count += 1;
    fold_average(stream_.grad_short, g, stream_.grad_count);

    if (stream_.has_grad_long) {
      ghat = weighted_sum(stream_.grad_long, hyper_.beta1, stream_.grad_short, hyper_.beta2);
      for (long k = 0; k < gc; ++k) {
        ghat.mu[static_cast<size_t>(k)] += hyper_.beta3 * g.mu[static_cast<size_t>(k)];
        ghat.sigma[static_cast<size_t>(k)] += hyper_.beta3 * g.sigma[static_cast<size_t>(k)];
      }
    } else {
      // Bootstrap: no long-term history yet; renormalize over the available
      // blend mass. Zero mass means the stats gradients are ignored.
      const double denom = hyper_.beta2 + hyper_.beta3;
      ghat.reset(gc);
      if (denom > 0.0) {
        for (long k = 0; k < gc; ++k) {
          ghat.mu[static_cast<size_t>(k)] =
              (hyper_.beta2 * stream_.grad_short.mu[static_cast<size_t>(k)] +
               hyper_.beta3 * g.mu[static_cast<size_t>(k)]) / denom;
          ghat.sigma[static_cast<size_t>(k)] =
              (hyper_.beta2 * stream_.grad_short.sigma[static_cast<size_t>(k)] +
               hyper_.beta3 * g.sigma[static_cast<size_t>(k)]) / denom;
        }
      }
    }
  } else {
    ghat = std::move(g);
    weight = 1.0;
  }

  if (weight != 1.0) {
    for (double& v : ghat.mu) v *= weight;
    for (double& v : ghat.sigma) v *= weight;
  }

  Tensor stats_dx = stats_backward(rec.x, rec.stats, ghat.mu, ghat.sigma);
  for (long i = 0; i < dx.size(); ++i) dxp[i] += stats_dx[i];
  return dx;
}

void NormLayer::set_mode(Mode m) { mode_ = m; }

void NormLayer::commit() {
  if (kind_ != NormKind::streaming)
    throw StateError("commit is only defined for streaming layers");
  if (mode_ == Mode::eval)
    throw StateError("commit after prepare_eval: the short-term stats must survive for testing");
  if (stream_.stats_count == 0 && stream_.grad_count == 0) {
    warn("commit with empty accumulators is a no-op");
    return;
  }
  if (stream_.stats_count > 0) {
    if (stream_.has_long) {
      blend_into(stream_.stats_long, stream_.stats_short, hyper_.kappa1, hyper_.kappa2);
    } else {
      stream_.stats_long = stream_.stats_short;
      stream_.has_long = true;
    }
    stream_.stats_short.reset(stream_.stats_long.size());
    stream_.stats_count = 0;
  }
  if (stream_.grad_count > 0) {
    if (stream_.has_grad_long) {
      blend_into(stream_.grad_long, stream_.grad_short, hyper_.kappa3, hyper_.kappa4);
    } else {
      stream_.grad_long = stream_.grad_short;
      stream_.has_grad_long = true;
    }
    stream_.grad_short.reset(stream_.grad_long.size());
    stream_.grad_count = 0;
  }
  stream_.commits += 1;
}

NormLayer::Snapshot NormLayer::snapshot() const {
  Snapshot s;
  s.stream = stream_;
  s.running = running_;
  s.has_running = has_running_;
  s.shat_latest = shat_latest_;
  s.shat_groups = shat_groups_;
  return s;
}

void NormLayer::restore(const Snapshot& s) {
  stream_ = s.stream;
  running_ = s.running;
  has_running_ = s.has_running;
  shat_latest_ = s.shat_latest;
  shat_groups_ = s.shat_groups;
  records_.clear();
}

BiasGainLayer::BiasGainLayer(Shape4 feature_shape, Granularity granularity)
    : granularity_(granularity), feature_{1, feature_shape.y, feature_shape.x, feature_shape.c} {
  feature_.validate();
  Shape4 pshape = granularity_ == Granularity::per_channel
                      ? Shape4{1, 1, 1, feature_.c}
                      : Shape4{1, feature_.y, feature_.x, feature_.c};
  gain_ = Tensor(pshape, 1.0);
  bias_ = Tensor(pshape, 0.0);
  gain_grad_ = Tensor(pshape, 0.0);
  bias_grad_ = Tensor(pshape, 0.0);
}

long BiasGainLayer::param_index(long y, long x, long c) const {
  if (granularity_ == Granularity::per_channel) return c;
  return (y * feature_.x + x) * feature_.c + c;
}

Tensor BiasGainLayer::forward(const Tensor& x) {
  const Shape4 s = x.shape();
  if (s.y != feature_.y || s.x != feature_.x || s.c != feature_.c)
    throw ContractError("bias/gain layer built for " + feature_.str() +
                        " applied to " + s.str());
  Tensor y(s);
  long i = 0;
  for (long n = 0; n < s.n; ++n)
    for (long yy = 0; yy < s.y; ++yy)
      for (long xx = 0; xx < s.x; ++xx)
        for (long c = 0; c < s.c; ++c, ++i) {
          const long k = param_index(yy, xx, c);
          y[i] = gain_[k] * x[i] + bias_[k];
        }
  if (mode_ == Mode::train) x_cache_.push_back(x);
  return y;
}

Tensor BiasGainLayer::backward(const Tensor& dy) {
  if (x_cache_.empty()) throw ContractError("bias/gain backward without a matching forward");
  Tensor x = std::move(x_cache_.back());
  x_cache_.pop_back();
  if (!(dy.shape() == x.shape()))
    throw ContractError("bias/gain backward: shape mismatch");

  const Shape4 s = x.shape();
  Tensor dx(s);
  long i = 0;
  for (long n = 0; n < s.n; ++n)
    for (long yy = 0; yy < s.y; ++yy)
      for (long xx = 0; xx < s.x; ++xx)
        for (long c = 0; c < s.c; ++c, ++i) {
          const long k = param_index(yy, xx, c);
          dx[i] = gain_[k] * dy[i];
          gain_grad_[k] += dy[i] * x[i];
          bias_grad_[k] += dy[i];
        }
  return dx;
}

void BiasGainLayer::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".gain", &gain_, &gain_grad_});
  out.push_back({prefix + ".bias", &bias_, &bias_grad_});
}

}  // namespace snorm
