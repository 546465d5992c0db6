#pragma once

#include <memory>
#include <vector>

#include "snorm/layer_base.hpp"

namespace snorm {

// Fully-connected layer. Flattens (Y,X,C) of each sample; weights are
// (1,1,in,out), optional bias (1,1,1,out).
class FcLayer final : public Layer {
 public:
  FcLayer(long in_features, long out_features, bool bias, Rng& rng);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  void clear_cache() override { x_cache_.clear(); }

  Tensor& weights() { return w_; }
  Tensor& bias() { return b_; }
  bool has_bias() const { return has_bias_; }

 private:
  long in_ = 0, out_ = 0;
  bool has_bias_ = true;
  Tensor w_, b_;
  Tensor w_grad_, b_grad_;
  std::vector<Tensor> x_cache_;
};

// 2-D cross-correlation with zero padding. Weights are (out_c, k, k, in_c).
class Conv2dLayer final : public Layer {
 public:
  Conv2dLayer(long in_channels, long out_channels, long kernel, long stride,
              long pad, bool bias, Rng& rng);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  void clear_cache() override { x_cache_.clear(); }

  Tensor& weights() { return w_; }

 private:
  long in_c_, out_c_, kernel_, stride_, pad_;
  bool has_bias_;
  Tensor w_, b_;
  Tensor w_grad_, b_grad_;
  std::vector<Tensor> x_cache_;
};

// Max or average pooling over (Y, X) windows.
class PoolLayer final : public Layer {
 public:
  enum class Kind { max, avg };

  PoolLayer(Kind kind, long window, long stride);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void clear_cache() override { cache_.clear(); }

 private:
  struct Record {
    Shape4 in_shape;
    std::vector<long> argmax;  // max kind: flat source index per output
  };
  Kind kind_;
  long window_, stride_;
  std::vector<Record> cache_;
};

enum class Nonlin { relu, tanh, sigmoid };

class NonlinLayer final : public Layer {
 public:
  explicit NonlinLayer(Nonlin kind) : kind_(kind) {}

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void clear_cache() override { y_cache_.clear(); }

 private:
  Nonlin kind_;
  std::vector<Tensor> y_cache_;  // derivative computable from the output
};

// Softmax over the channel axis fused with mean negative log-likelihood.
// Logits must be (N,1,1,classes); loss is the per-sample mean over the batch.
class SoftmaxLoss {
 public:
  double forward(const Tensor& logits, const std::vector<int>& labels);
  // dE/dlogits of the matching forward, times scale.
  Tensor backward(double scale = 1.0);
  void clear_cache() { cache_.clear(); }

  const Tensor& last_probs() const;

 private:
  struct Record {
    Tensor probs;
    std::vector<int> labels;
  };
  std::vector<Record> cache_;
};

// Class predictions by channel-axis argmax.
std::vector<int> argmax_classes(const Tensor& logits);

}  // namespace snorm
