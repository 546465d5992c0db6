#pragma once

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "snorm/model.hpp"

namespace snorm {

enum class OptimizerKind { sgd_momentum, manhattan };

OptimizerKind parse_optimizer(const std::string& s);
std::string format_optimizer(OptimizerKind k);

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(const std::vector<ParamRef>& params, double lr) = 0;
};

// Heavy ball: v <- momentum * v + g; w <- w - lr * v.
class SgdMomentum final : public Optimizer {
 public:
  explicit SgdMomentum(double momentum) : momentum_(momentum) {}
  void step(const std::vector<ParamRef>& params, double lr) override;

 private:
  double momentum_;
  std::vector<Tensor> velocity_;
};

// Sign-of-gradient update: w <- w - lr * sign(g), sign(0) = 0.
class ManhattanRule final : public Optimizer {
 public:
  void step(const std::vector<ParamRef>& params, double lr) override;
};

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, double momentum);

// Piecewise-constant learning rate: a list of (lr, epochs) stages.
struct LrSchedule {
  std::vector<std::pair<double, long>> stages;

  long total_epochs() const;
  double lr_at_epoch(long epoch) const;

  // "0.1x25,0.01x5" -> lr 0.1 for 25 epochs then 0.01 for 5.
  static LrSchedule parse(const std::string& text);
  std::string str() const;
};

struct TrainConfig {
  long samples_per_batch = 32;  // m
  long batches_per_update = 1;  // n
  OptimizerKind optimizer = OptimizerKind::sgd_momentum;
  double momentum = 0.9;
  LrSchedule schedule{{{0.1, 1}}};
  std::uint64_t seed = 0;
  long eval_every = 0;  // mini-batches between mid-training evals; 0 = per-epoch only
  bool log_wall_time = false;
  long smooth_window = 50;
};

constexpr double kBlank = std::numeric_limits<double>::quiet_NaN();

// One row per mini-batch; eval columns are blank (NaN) except on eval
// batches, wall time blank unless enabled.
struct LogRow {
  long epoch = 0;
  long batch_index = 0;
  long update_index = 0;
  double train_loss = 0.0;
  double smoothed_loss = 0.0;
  double eval_loss = kBlank;
  double eval_error = kBlank;
  double wall_time_s = kBlank;
};

struct TrainResult {
  std::vector<LogRow> rows;
  long updates = 0;
  double final_loss = kBlank;
  double final_smoothed_loss = kBlank;
  double final_eval_loss = kBlank;
  double final_eval_error = kBlank;
  double final_train_error = kBlank;  // filled when an eval-on-train pass runs

  // Set when training stopped on a non-finite loss; the rows up to the
  // failing batch are kept so divergence is inspectable (sweeps record
  // these instead of aborting).
  bool numeric_failure = false;
  long failed_batch_index = -1;
};

// Strictly ordered source of mini-batches. Data arrives online: the loop
// never revisits a batch within an epoch.
class BatchStream {
 public:
  virtual ~BatchStream() = default;
  virtual void start_epoch(long epoch, Rng& rng) = 0;
  virtual bool next(Batch& out) = 0;
  virtual long batches_per_epoch() const = 0;
};

// Per-parameter gradient sums plus the batch counter; cleared after every
// weight update.
class GradAccumulator {
 public:
  explicit GradAccumulator(std::vector<ParamRef> params) : params_(std::move(params)) {}

  void note_batch() { ++count_; }
  long count() const { return count_; }
  void average_in_place();
  void clear();

 private:
  std::vector<ParamRef> params_;
  long count_ = 0;
};

// Eval-mode pass over a stream; restores train mode afterwards and leaves
// all norm state untouched.
EvalStats evaluate(Model& model, BatchStream& stream);

// The decoupled accumulation-and-update loop: gradients accumulate for n
// mini-batches, then one optimizer step on their average, then the
// accumulator clears and every streaming layer commits.
TrainResult dau_train(Model& model, BatchStream& train, BatchStream* val,
                      const TrainConfig& cfg);

}  // namespace snorm
