#pragma once

#include <functional>
#include <string>
#include <vector>

#include "snorm/tensor.hpp"

namespace snorm {

enum class Mode { train, eval };

class NormLayer;

// Named handle to a parameter tensor and its gradient accumulator.
struct ParamRef {
  std::string name;
  Tensor* value = nullptr;
  Tensor* grad = nullptr;
};

// Stateful layer with hand-written backprop. forward in train mode pushes
// an activation record; backward pops the matching record, so a layer may
// be visited several times per pass (unrolled recurrence) as long as
// backward calls come in reverse order. Eval forwards cache nothing and
// mutate nothing.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Tensor forward(const Tensor& x) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;

  virtual void set_mode(Mode m) { mode_ = m; }
  Mode mode() const { return mode_; }

  virtual void collect_params(const std::string& /*prefix*/, std::vector<ParamRef>& /*out*/) {}
  virtual void visit_norms(const std::function<void(NormLayer&)>& /*fn*/) {}
  virtual void clear_cache() {}

 protected:
  Mode mode_ = Mode::train;
};

}  // namespace snorm
