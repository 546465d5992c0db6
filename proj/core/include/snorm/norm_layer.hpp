#pragma once

#include <optional>
#include <vector>

#include "snorm/layer_base.hpp"
#include "snorm/lp_stats.hpp"

namespace snorm {

enum class NormKind { sample, batch, streaming };

NormKind parse_norm_kind(const std::string& s);
std::string format_norm_kind(NormKind k);

// Blend weights of the dual long/short-term accumulator scheme.
//   shat = alpha1 * long + alpha2 * short
//   ghat = beta1 * g_long + beta2 * g_short + beta3 * g_current
// and at every commit
//   long <- kappa1 * long + kappa2 * short   (kappa3/kappa4 on the grad side)
struct StreamHyper {
  double alpha1 = 0.7, alpha2 = 0.3;
  double beta1 = 0.7, beta2 = 0.0, beta3 = 0.3;
  double kappa1 = 0.7, kappa2 = 0.3;
  double kappa3 = 0.7, kappa4 = 0.3;

  // With n=1 this makes the streaming layer exactly the GBN layer.
  static StreamHyper gbn_reduction() {
    StreamHyper h;
    h.alpha1 = 0.0; h.alpha2 = 1.0;
    h.beta1 = 0.0; h.beta2 = 0.0; h.beta3 = 1.0;
    return h;
  }

  // Warn (not error) when the conventional sum constraints are violated.
  void check() const;
};

// Per-group (mu, sigma) accumulator used for running estimates on both the
// stats and the gradient side.
struct StatsVec {
  std::vector<double> mu, sigma;

  bool empty() const { return mu.empty(); }
  long size() const { return static_cast<long>(mu.size()); }
  void reset(long groups) {
    mu.assign(static_cast<size_t>(groups), 0.0);
    sigma.assign(static_cast<size_t>(groups), 0.0);
  }
};

// H1/H2 of the streaming scheme: exact short-term averages since the last
// weight update plus exponential long-term averages since the beginning
// of training, for the NormStats and their gradients.
struct StreamState {
  StatsVec stats_long, stats_short;
  long stats_count = 0;  // batches folded into stats_short
  bool has_long = false;

  StatsVec grad_long, grad_short;
  long grad_count = 0;
  bool has_grad_long = false;

  long commits = 0;
};

// N(x, {mu, sigma}) = (x - mu) / sigma. Throws ContractError when the stats
// layout does not match x or any sigma is <= 0.
Tensor norm_op(const Tensor& x, const NormStats& stats);

// One normalization layer covering the three families:
//   sample:    stats from the current sample only, train == eval
//   batch:     stats from the current mini-batch, EMA running estimates
//              for eval
//   streaming: stats and their gradients estimated online across batches
//              via the long/short accumulators; commit() folds the short
//              stores at every weight update
class NormLayer final : public Layer {
 public:
  NormLayer(NormKind kind, PartitionScheme scheme, LpConfig lp,
            StreamHyper hyper = {}, double ema_momentum = 0.9);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void set_mode(Mode m) override;
  void clear_cache() override { records_.clear(); }
  void visit_norms(const std::function<void(NormLayer&)>& fn) override { fn(*this); }

  // Fold the short-term stores into the long-term ones and clear them.
  // Fires on every weight update; illegal in eval mode; no-op with a
  // warning when nothing was accumulated.
  void commit();

  // Switch to eval without committing: the short store survives and the
  // latest blended shat keeps normalizing test batches.
  void prepare_eval() { mode_ = Mode::eval; }

  NormKind kind() const { return kind_; }
  const PartitionScheme& scheme() const { return scheme_; }
  const LpConfig& lp() const { return lp_; }
  const StreamHyper& hyper() const { return hyper_; }
  double ema_momentum() const { return ema_momentum_; }

  const StreamState& stream_state() const { return stream_; }
  bool has_running() const { return has_running_; }
  const StatsVec& running() const { return running_; }
  long commit_count() const { return stream_.commits; }

  // Full mutable-state snapshot (records excluded); restore clears records.
  struct Snapshot {
    StreamState stream;
    StatsVec running;
    bool has_running = false;
    std::optional<StatsVec> shat_latest;
    long shat_groups = 0;
  };
  Snapshot snapshot() const;
  void restore(const Snapshot& s);

 private:
  struct FwdRecord {
    Tensor x;
    NormStats stats;        // current-batch s, the quantity dE/dx chains through
    StatsVec used;          // what actually normalized (s, or blended shat)
    double fold_weight;     // d shat / d s for this batch (1 for sample/batch)
  };

  std::vector<double> group_means(const Tensor& x, const GroupMap& map) const;
  const std::vector<double>* center_for_setting_b(const Tensor& x, const GroupMap& map,
                                                  std::vector<double>& scratch);

  NormKind kind_;
  PartitionScheme scheme_;
  LpConfig lp_;
  StreamHyper hyper_;
  double ema_momentum_;

  StatsVec running_;        // batch kind EMA estimates
  bool has_running_ = false;

  StreamState stream_;
  std::optional<StatsVec> shat_latest_;  // latest blended estimate, kept for eval
  long shat_groups_ = 0;

  std::vector<FwdRecord> records_;
};

// Learnable shift/scale following a normalization layer. One (gain, bias)
// pair per channel, or per neuron (= per Y*X*C position); gains start at 1
// and biases at 0.
class BiasGainLayer final : public Layer {
 public:
  enum class Granularity { per_channel, per_neuron };

  BiasGainLayer(Shape4 feature_shape, Granularity granularity = Granularity::per_channel);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  void clear_cache() override { x_cache_.clear(); }

  Tensor& gain() { return gain_; }
  Tensor& bias() { return bias_; }

 private:
  long param_index(long y, long x, long c) const;

  Granularity granularity_;
  Shape4 feature_;  // (1, Y, X, C) of one sample
  Tensor gain_, bias_;
  Tensor gain_grad_, bias_grad_;
  std::vector<Tensor> x_cache_;
};

}  // namespace snorm
