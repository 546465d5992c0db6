#pragma once

#include <memory>
#include <string>
#include <vector>

#include "snorm/recurrent.hpp"

namespace snorm {

// One training batch: either an image/label pair or an (m x steps) block of
// sequence ids with next-step targets.
struct Batch {
  Tensor x;
  std::vector<int> labels;

  std::vector<int> seq_inputs;   // row-major (m, steps)
  std::vector<int> seq_targets;
  long seq_m = 0;
  long seq_steps = 0;

  bool is_sequence() const { return seq_steps > 0; }
};

struct EvalStats {
  double loss_sum = 0.0;
  long items = 0;
  long errors = 0;

  double mean_loss() const { return items > 0 ? loss_sum / static_cast<double>(items) : 0.0; }
  double error_rate() const { return items > 0 ? static_cast<double>(errors) / static_cast<double>(items) : 0.0; }
};

class Sequential {
 public:
  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void set_mode(Mode m);
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out);
  void visit_norms(const std::function<void(NormLayer&)>& fn);
  void clear_cache();

  size_t size() const { return layers_.size(); }
  Layer& layer(size_t i) { return *layers_[i]; }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

// A trainable network with hand-written backprop and explicit norm state.
class Model {
 public:
  virtual ~Model() = default;

  // Train-mode forward with activation caching; returns the batch loss.
  virtual double forward_loss(const Batch& b) = 0;
  // Backprop of the matching forward_loss; accumulates parameter gradients
  // and returns the input gradient.
  virtual Tensor backward() = 0;
  // Eval-mode forward only; the model must already be in eval mode.
  virtual EvalStats eval_batch(const Batch& b) = 0;

  virtual const Tensor& last_logits() const = 0;
  virtual std::vector<ParamRef> params() = 0;
  virtual void set_mode(Mode m) = 0;
  virtual void visit_norms(const std::function<void(NormLayer&)>& fn) = 0;
  virtual void clear_cache() = 0;

  // Sequence models: reset the carried hidden state (epoch start).
  virtual void reset_sequence_state() {}
  virtual void reset_eval_state() {}

  void zero_grads();
  void commit_norms();            // streaming layers only
  void prepare_eval_norms();

  // Norm-layer state capture for finite-difference harnesses.
  std::vector<NormLayer::Snapshot> snapshot_norms();
  void restore_norms(const std::vector<NormLayer::Snapshot>& snaps);
};

// Feedforward stack ending in softmax loss over class logits.
class FeedforwardModel final : public Model {
 public:
  explicit FeedforwardModel(Sequential net) : net_(std::move(net)) {}

  double forward_loss(const Batch& b) override;
  Tensor backward() override;
  EvalStats eval_batch(const Batch& b) override;
  const Tensor& last_logits() const override { return logits_; }
  std::vector<ParamRef> params() override;
  void set_mode(Mode m) override;
  void visit_norms(const std::function<void(NormLayer&)>& fn) override;
  void clear_cache() override;

  Sequential& net() { return net_; }

 private:
  Sequential net_;
  SoftmaxLoss loss_;
  Tensor logits_;
};

enum class CellKind { rnn, gru };

// Character-level recurrent LM: one-hot ids -> cell -> output fc ->
// per-step softmax loss, truncated BPTT within each window, hidden state
// carried (detached) across windows.
class CharRnnModel final : public Model {
 public:
  CharRnnModel(CellKind kind, long vocab, long hidden, const NormSpec& norm,
               std::uint64_t seed, Nonlin nonlin = Nonlin::tanh);

  double forward_loss(const Batch& b) override;
  Tensor backward() override;
  EvalStats eval_batch(const Batch& b) override;
  const Tensor& last_logits() const override { return logits_; }
  std::vector<ParamRef> params() override;
  void set_mode(Mode m) override;
  void visit_norms(const std::function<void(NormLayer&)>& fn) override;
  void clear_cache() override;
  void reset_sequence_state() override { h_train_ = Tensor(); }
  void reset_eval_state() override { h_eval_ = Tensor(); }

  long norm_store_count();
  long vocab() const { return vocab_; }

 private:
  Tensor one_hot(const std::vector<int>& ids, long offset, long m, long stride) const;

  CellKind cell_kind_;
  long vocab_, hidden_;
  std::unique_ptr<RnnCell> rnn_;
  std::unique_ptr<GruCell> gru_;
  std::unique_ptr<FcLayer> w_out_;
  SoftmaxLoss loss_;
  Tensor h_train_, h_eval_;
  Tensor logits_;
  long last_steps_ = 0;
};

// Desk-scale reference architectures. Widths and depths are reconstruction
// defaults, overridable from the experiment config.
struct ArchConfig {
  std::string arch = "arch_a";  // arch_a | arch_b | arch_c | arch_d | rnn | gru
  long hidden = 32;             // fc width / conv base channels / rnn hidden
  long depth = 2;               // arch_a block count
  long k1 = 2, k2 = 1;          // arch_c unroll counts
  long k = 2;                   // arch_d unroll count
  long classes = 10;
  Shape4 input{1, 1, 1, 16};    // one sample (N ignored)
  long vocab = 0;               // sequence models
  Nonlin nonlin = Nonlin::relu;
};

std::unique_ptr<Model> build_model(const ArchConfig& arch, const NormSpec& norm,
                                   std::uint64_t seed);

}  // namespace snorm
