#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "snorm/layers.hpp"
#include "snorm/norm_layer.hpp"

namespace snorm {

enum class BindingKind { shared, time_specific };

BindingKind parse_binding(const std::string& s);
std::string format_binding(BindingKind b);

// Everything needed to instantiate one normalization slot.
struct NormSpec {
  bool enabled = true;
  NormKind kind = NormKind::batch;
  PartitionScheme scheme = preset("BN");
  LpConfig lp{};
  StreamHyper hyper{};
  double ema_momentum = 0.9;
  bool bias_gain = true;
  BindingKind binding = BindingKind::shared;

  static NormSpec none() {
    NormSpec s;
    s.enabled = false;
    return s;
  }
};

// Binds norm layers to unrolled timesteps. shared keeps exactly one
// stats/stream store regardless of the unroll length; time_specific keeps
// one store per timestep (TSBN) and refuses unseen timesteps at eval.
class NormBinding {
 public:
  using Factory = std::function<std::unique_ptr<NormLayer>()>;

  NormBinding(BindingKind kind, Factory factory);

  // Layer serving step t. In train mode a time_specific binding grows its
  // store list on first visit; in eval mode an untrained t throws
  // UnseenTimestepError.
  NormLayer& at_step(long t);

  BindingKind kind() const { return kind_; }
  long store_count() const { return static_cast<long>(layers_.size()); }

  void set_mode(Mode m);
  void for_each(const std::function<void(NormLayer&)>& fn);
  void clear_cache();

 private:
  BindingKind kind_;
  Factory factory_;
  Mode mode_ = Mode::train;
  std::vector<std::unique_ptr<NormLayer>> layers_;
};

// A normalization occurrence inside a network: the bound norm layer(s)
// followed by one time-shared bias/gain layer. Disabled slots are the
// identity.
class NormSlot {
 public:
  NormSlot() = default;  // disabled
  NormSlot(const NormSpec& spec, Shape4 feature_shape,
           BiasGainLayer::Granularity granularity = BiasGainLayer::Granularity::per_channel);

  Tensor forward(const Tensor& x, long t);
  Tensor backward(const Tensor& dy, long t);

  bool enabled() const { return binding_ != nullptr; }
  long store_count() const { return binding_ ? binding_->store_count() : 0; }
  NormBinding* binding() { return binding_.get(); }

  void set_mode(Mode m);
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out);
  void visit_norms(const std::function<void(NormLayer&)>& fn);
  void clear_cache();

 private:
  std::unique_ptr<NormBinding> binding_;
  std::unique_ptr<BiasGainLayer> bias_gain_;
};

// h_t = NonLinear(Norm(W_x x_t) + Norm(W_h h_{t-1})), tanh by default.
class RnnCell {
 public:
  RnnCell(long input_size, long hidden_size, const NormSpec& norm, Rng& rng,
          Nonlin nonlin = Nonlin::tanh);

  Tensor step(const Tensor& x_t, const Tensor& h_prev, long t);
  // Returns (dx_t, dh_prev); call with t descending.
  std::pair<Tensor, Tensor> step_backward(const Tensor& dh, long t);

  long hidden_size() const { return hidden_; }
  void set_mode(Mode m);
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out);
  void visit_norms(const std::function<void(NormLayer&)>& fn);
  void clear_cache();
  NormSlot& input_slot() { return norm_x_; }
  NormSlot& hidden_slot() { return norm_h_; }

 private:
  long hidden_;
  FcLayer wx_, wh_;
  NormSlot norm_x_, norm_h_;
  NonlinLayer nonlin_;
};

// Gated recurrent unit with six normalization slots, one per Norm(.)
// occurrence:
//   g_r   = sigmoid(Norm(W_xr x) + Norm(W_hr h))
//   g_z   = sigmoid(Norm(W_xz x) + Norm(W_hz h))
//   h_new = NonLinear(Norm(W_xh x) + Norm(W_hh (h .* g_r)))
//   h_t   = g_z .* h_new + (1 - g_z) .* h
class GruCell {
 public:
  GruCell(long input_size, long hidden_size, const NormSpec& norm, Rng& rng,
          Nonlin nonlin = Nonlin::tanh);

  Tensor step(const Tensor& x_t, const Tensor& h_prev, long t);
  std::pair<Tensor, Tensor> step_backward(const Tensor& dh, long t);

  long hidden_size() const { return hidden_; }
  void set_mode(Mode m);
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out);
  void visit_norms(const std::function<void(NormLayer&)>& fn);
  void clear_cache();
  long norm_store_count();

 private:
  struct StepRecord {
    Tensor g_r, g_z, h_new, h_prev;
  };

  long hidden_;
  FcLayer wxr_, whr_, wxz_, whz_, wxh_, whh_;
  NormSlot nr_x_, nr_h_, nz_x_, nz_h_, nh_x_, nh_h_;
  Nonlin nonlin_kind_;
  Mode mode_ = Mode::train;
  std::vector<StepRecord> steps_;
};

// Residual recurrent conv block: h_0 = x, h_t = relu(Slot(conv(h_{t-1})) +
// h_{t-1}) for t = 1..k with one shared conv weight.
class RecurrentConvBlock final : public Layer {
 public:
  RecurrentConvBlock(long channels, long kernel, long unroll, const NormSpec& norm, Rng& rng);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void set_mode(Mode m) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  void visit_norms(const std::function<void(NormLayer&)>& fn) override;
  void clear_cache() override;

  long unroll() const { return unroll_; }
  long norm_store_count() { return slot_.store_count(); }

 private:
  long unroll_;
  Conv2dLayer conv_;
  NormSpec norm_spec_;
  NormSlot slot_;
  bool slot_ready_ = false;
  std::vector<std::vector<Tensor>> h_cache_;  // per forward: h_1..h_k (post-relu)
};

// Densely recurrent conv block: h_0 = 0, h_t = relu(Slot(conv_x(x) +
// conv_h(h_{t-1}))) for t = 1..k; the input is re-injected every step.
class DenseRecurrentConvBlock final : public Layer {
 public:
  DenseRecurrentConvBlock(long in_channels, long channels, long kernel, long unroll,
                          const NormSpec& norm, Rng& rng);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void set_mode(Mode m) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  void visit_norms(const std::function<void(NormLayer&)>& fn) override;
  void clear_cache() override;

  long norm_store_count() { return slot_.store_count(); }

 private:
  long unroll_;
  Conv2dLayer conv_x_, conv_h_;
  NormSpec norm_spec_;
  NormSlot slot_;
  bool slot_ready_ = false;
  std::vector<std::vector<Tensor>> h_cache_;
};

}  // namespace snorm
