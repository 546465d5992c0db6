#include "snorm/lp_stats.hpp"

#include <cmath>

namespace snorm {

LpSetting parse_lp_setting(const std::string& s) {
  if (s == "A") return LpSetting::A;
  if (s == "B") return LpSetting::B;
  if (s == "C") return LpSetting::C;
  throw ParamError("unknown Lp setting '" + s + "' (expected A, B or C)");
}

std::string format_lp_setting(LpSetting s) {
  switch (s) {
    case LpSetting::A: return "A";
    case LpSetting::B: return "B";
    default: return "C";
  }
}

void LpConfig::validate() const {
  if (p < 1) throw ParamError("Lp config requires p >= 1, got " + std::to_string(p));
  if (epsilon < 0.0) throw ParamError("Lp config requires epsilon >= 0");
}

namespace {
double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }
}  // namespace

NormStats compute_stats(const Tensor& x, const PartitionScheme& scheme,
                        const LpConfig& cfg, const std::vector<double>* mu_hat) {
  cfg.validate();
  GroupMap groups(scheme, x.shape());
  const long gc = groups.group_count();
  const long gs = groups.group_size();

  if (cfg.setting == LpSetting::A && gs == 1)
    throw DegeneratePartitionError(
        "setting A over singleton groups is degenerate (sigma would be the "
        "epsilon floor everywhere); use setting B or C, or pool more axes");
  if (cfg.setting == LpSetting::B) {
    if (mu_hat == nullptr)
      throw ContractError("setting B requires a running mean estimate");
    if (static_cast<long>(mu_hat->size()) != gc)
      throw ContractError("running mean length does not match group count");
  }

  NormStats stats;
  stats.config = cfg;
  stats.groups = groups;
  stats.mu.assign(static_cast<size_t>(gc), 0.0);
  stats.sigma.assign(static_cast<size_t>(gc), 0.0);

  const double* src = x.data();
  const long total = x.size();
  for (long i = 0; i < total; ++i) stats.mu[static_cast<size_t>(groups.group_of_flat(i))] += src[i];
  const double inv = 1.0 / static_cast<double>(gs);
  for (long g = 0; g < gc; ++g) stats.mu[static_cast<size_t>(g)] *= inv;

  stats.center.assign(static_cast<size_t>(gc), 0.0);
  for (long g = 0; g < gc; ++g) {
    switch (cfg.setting) {
      case LpSetting::A: stats.center[static_cast<size_t>(g)] = stats.mu[static_cast<size_t>(g)]; break;
      case LpSetting::B: stats.center[static_cast<size_t>(g)] = (*mu_hat)[static_cast<size_t>(g)]; break;
      default: break;
    }
  }
  for (long i = 0; i < total; ++i) {
    const long g = groups.group_of_flat(i);
    stats.sigma[static_cast<size_t>(g)] += abs_ipow(src[i] - stats.center[static_cast<size_t>(g)], cfg.p);
  }
  const double root = 1.0 / static_cast<double>(cfg.p);
  for (long g = 0; g < gc; ++g) {
    double moment = stats.sigma[static_cast<size_t>(g)] * inv + cfg.epsilon;
    stats.sigma[static_cast<size_t>(g)] = std::pow(moment, root);
  }
  return stats;
}

Tensor stats_backward(const Tensor& x, const NormStats& stats,
                      const std::vector<double>& grad_mu,
                      const std::vector<double>& grad_sigma) {
  const GroupMap& groups = stats.groups;
  if (!groups.compatible_with(x.shape()))
    throw ContractError("stats_backward: stats layout does not match x " + x.shape().str());
  const long gc = groups.group_count();
  if (static_cast<long>(grad_mu.size()) != gc || static_cast<long>(grad_sigma.size()) != gc)
    throw ContractError("stats_backward: gradient arrays do not match group count");

  const LpConfig& cfg = stats.config;
  const long gs = groups.group_size();
  const double inv = 1.0 / static_cast<double>(gs);
  const long total = x.size();
  const double* src = x.data();

  // s_i = sign(x_i - c) |x_i - c|^(p-1); dsigma/dx_i = sigma^(1-p)/|g| * s_i,
  // minus the group-mean of s for setting A where c = mu(x).
  std::vector<double> s(static_cast<size_t>(total));
  std::vector<double> s_mean(static_cast<size_t>(gc), 0.0);
  for (long i = 0; i < total; ++i) {
    const long g = groups.group_of_flat(i);
    const double d = src[i] - stats.center[static_cast<size_t>(g)];
    const double v = sign_of(d) * abs_ipow(d, cfg.p - 1);
    s[static_cast<size_t>(i)] = v;
    if (cfg.setting == LpSetting::A) s_mean[static_cast<size_t>(g)] += v;
  }
  for (long g = 0; g < gc; ++g) s_mean[static_cast<size_t>(g)] *= inv;

  std::vector<double> sig_scale(static_cast<size_t>(gc));
  for (long g = 0; g < gc; ++g) {
    const double gsig = grad_sigma[static_cast<size_t>(g)];
    if (gsig == 0.0) {
      sig_scale[static_cast<size_t>(g)] = 0.0;
      continue;
    }
    const double sigma = stats.sigma[static_cast<size_t>(g)];
    // sigma^(p-1); sigma > 0 whenever epsilon > 0.
    double powp1 = 1.0;
    for (int k = 0; k < cfg.p - 1; ++k) powp1 *= sigma;
    sig_scale[static_cast<size_t>(g)] = gsig * inv / powp1;
  }

  Tensor dx(x.shape());
  double* out = dx.data();
  for (long i = 0; i < total; ++i) {
    const long g = groups.group_of_flat(i);
    double sv = s[static_cast<size_t>(i)];
    if (cfg.setting == LpSetting::A) sv -= s_mean[static_cast<size_t>(g)];
    out[i] = grad_mu[static_cast<size_t>(g)] * inv + sig_scale[static_cast<size_t>(g)] * sv;
  }
  return dx;
}

}  // namespace snorm
