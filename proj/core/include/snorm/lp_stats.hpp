#pragma once

#include <optional>
#include <vector>

#include "snorm/partition.hpp"
#include "snorm/tensor.hpp"

namespace snorm {

// How the divisive factor sigma is centered:
//   A: about the group mean of the current reference set
//   B: about a stored running mean (constant w.r.t. the current batch)
//   C: about zero
enum class LpSetting { A, B, C };

LpSetting parse_lp_setting(const std::string& s);
std::string format_lp_setting(LpSetting s);

struct LpConfig {
  int p = 2;
  LpSetting setting = LpSetting::A;
  double epsilon = 1e-5;  // added to the p-th moment before the root

  void validate() const;  // p >= 1 (integer by construction), epsilon >= 0
  bool operator==(const LpConfig&) const = default;
};

// Per-group mean/divisor pair: mu[g] is the group mean, sigma[g] the p-th
// root of the p-th absolute moment about the configured center, floored by
// epsilon inside the root.
struct NormStats {
  std::vector<double> mu;
  std::vector<double> sigma;
  std::vector<double> center;  // the c each group's moment was taken about
  LpConfig config;
  GroupMap groups;

  long group_count() const { return static_cast<long>(mu.size()); }
};

// S(.): NormStats of x under the scheme. Setting B requires mu_hat (one
// center per group). Setting A with only singleton groups is refused with
// DegeneratePartitionError.
NormStats compute_stats(const Tensor& x, const PartitionScheme& scheme,
                        const LpConfig& cfg,
                        const std::vector<double>* mu_hat = nullptr);

// dE/dx through the stats path: grad_mu[g] = dE/dmu[g], grad_sigma[g] =
// dE/dsigma[g]. Setting A chains sigma's dependence on the group mean;
// B/C treat the center as constant. sign(0) contributes 0.
Tensor stats_backward(const Tensor& x, const NormStats& stats,
                      const std::vector<double>& grad_mu,
                      const std::vector<double>& grad_sigma);

}  // namespace snorm
