#include "snorm/train.hpp"

#include <chrono>
#include <cmath>
#include <deque>

namespace snorm {

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd_momentum") return OptimizerKind::sgd_momentum;
  if (s == "manhattan") return OptimizerKind::manhattan;
  throw ParamError("unknown optimizer '" + s + "'");
}

std::string format_optimizer(OptimizerKind k) {
  return k == OptimizerKind::sgd_momentum ? "sgd_momentum" : "manhattan";
}

void SgdMomentum::step(const std::vector<ParamRef>& params, double lr) {
  if (velocity_.empty()) {
    for (const ParamRef& p : params) velocity_.emplace_back(p.value->shape());
  }
  if (velocity_.size() != params.size())
    throw ContractError("optimizer bound to a different parameter set");
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& v = velocity_[i];
    Tensor& w = *params[i].value;
    const Tensor& g = *params[i].grad;
    for (long j = 0; j < w.size(); ++j) {
      v[j] = momentum_ * v[j] + g[j];
      w[j] -= lr * v[j];
    }
  }
}

void ManhattanRule::step(const std::vector<ParamRef>& params, double lr) {
  for (const ParamRef& p : params) {
    Tensor& w = *p.value;
    const Tensor& g = *p.grad;
    for (long j = 0; j < w.size(); ++j) {
      if (g[j] > 0.0) w[j] -= lr;
      else if (g[j] < 0.0) w[j] += lr;
    }
  }
}

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, double momentum) {
  if (kind == OptimizerKind::sgd_momentum) return std::make_unique<SgdMomentum>(momentum);
  return std::make_unique<ManhattanRule>();
}

long LrSchedule::total_epochs() const {
  long total = 0;
  for (const auto& [lr, epochs] : stages) total += epochs;
  return total;
}

double LrSchedule::lr_at_epoch(long epoch) const {
  long e = epoch;
  for (const auto& [lr, epochs] : stages) {
    if (e < epochs) return lr;
    e -= epochs;
  }
  if (stages.empty()) throw ParamError("empty learning-rate schedule");
  return stages.back().first;
}

LrSchedule LrSchedule::parse(const std::string& text) {
  LrSchedule s;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t comma = text.find(',', pos);
    const std::string tok =
        text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const size_t xpos = tok.find('x');
    try {
      if (xpos == std::string::npos) {
        s.stages.emplace_back(std::stod(tok), 1L);
      } else {
        s.stages.emplace_back(std::stod(tok.substr(0, xpos)),
                              std::stol(tok.substr(xpos + 1)));
      }
    } catch (const std::exception&) {
      throw ParamError("bad schedule token '" + tok + "' (expected LRxEPOCHS)");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (s.stages.empty()) throw ParamError("empty learning-rate schedule '" + text + "'");
  for (const auto& [lr, epochs] : s.stages)
    if (epochs < 1) throw ParamError("schedule stage needs epochs >= 1");
  return s;
}

std::string LrSchedule::str() const {
  std::string out;
  for (size_t i = 0; i < stages.size(); ++i) {
    if (i) out += ",";
    char buf[64];
    snprintf(buf, sizeof buf, "%gx%ld", stages[i].first, stages[i].second);
    out += buf;
  }
  return out;
}

void GradAccumulator::average_in_place() {
  if (count_ == 0) return;
  const double inv = 1.0 / static_cast<double>(count_);
  for (const ParamRef& p : params_)
    for (long j = 0; j < p.grad->size(); ++j) (*p.grad)[j] *= inv;
}

void GradAccumulator::clear() {
  for (const ParamRef& p : params_) p.grad->fill(0.0);
  count_ = 0;
}

EvalStats evaluate(Model& model, BatchStream& stream) {
  model.prepare_eval_norms();
  model.set_mode(Mode::eval);
  model.reset_eval_state();
  Rng unused(0);
  stream.start_epoch(0, unused);
  EvalStats total;
  Batch b;
  while (stream.next(b)) {
    EvalStats s = model.eval_batch(b);
    total.loss_sum += s.loss_sum;
    total.items += s.items;
    total.errors += s.errors;
  }
  if (total.items == 0) throw StateError("evaluation stream produced no batches");
  model.set_mode(Mode::train);
  return total;
}

TrainResult dau_train(Model& model, BatchStream& train, BatchStream* val,
                      const TrainConfig& cfg) {
  if (cfg.samples_per_batch < 1 || cfg.batches_per_update < 1)
    throw ParamError("train config needs m >= 1 and n >= 1");

  model.set_mode(Mode::train);
  std::vector<ParamRef> params = model.params();
  GradAccumulator accumulator(params);
  accumulator.clear();
  std::unique_ptr<Optimizer> optimizer = make_optimizer(cfg.optimizer, cfg.momentum);

  Rng order_rng(cfg.seed);
  TrainResult result;
  std::deque<double> window;
  double window_sum = 0.0;
  long batch_index = 0;
  const auto t0 = std::chrono::steady_clock::now();

  const long epochs = cfg.schedule.total_epochs();
  for (long epoch = 0; epoch < epochs; ++epoch) {
    const double lr = cfg.schedule.lr_at_epoch(epoch);
    train.start_epoch(epoch, order_rng);
    model.reset_sequence_state();

    Batch b;
    bool epoch_had_batches = false;
    while (train.next(b)) {
      epoch_had_batches = true;
      const double loss = model.forward_loss(b);
      if (!std::isfinite(loss)) {
        result.numeric_failure = true;
        result.failed_batch_index = batch_index;
        warn("non-finite training loss at batch " + std::to_string(batch_index) +
             ", stopping this run");
        if (!result.rows.empty()) {
          result.final_loss = result.rows.back().train_loss;
          result.final_smoothed_loss = result.rows.back().smoothed_loss;
        }
        return result;
      }
      model.backward();
      accumulator.note_batch();

      window.push_back(loss);
      window_sum += loss;
      if (static_cast<long>(window.size()) > cfg.smooth_window) {
        window_sum -= window.front();
        window.pop_front();
      }

      LogRow row;
      row.epoch = epoch;
      row.batch_index = batch_index;
      row.train_loss = loss;
      row.smoothed_loss = window_sum / static_cast<double>(window.size());

      if (accumulator.count() == cfg.batches_per_update) {
        accumulator.average_in_place();
        optimizer->step(params, lr);
        accumulator.clear();
        model.commit_norms();
        ++result.updates;
      }
      row.update_index = result.updates;

      if (val != nullptr && cfg.eval_every > 0 && (batch_index + 1) % cfg.eval_every == 0) {
        EvalStats es = evaluate(model, *val);
        row.eval_loss = es.mean_loss();
        row.eval_error = es.error_rate();
      }
      if (cfg.log_wall_time) {
        row.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      }
      result.rows.push_back(row);
      ++batch_index;
    }

    if (val != nullptr && epoch_had_batches) {
      EvalStats es = evaluate(model, *val);
      LogRow& last = result.rows.back();
      last.eval_loss = es.mean_loss();
      last.eval_error = es.error_rate();
      result.final_eval_loss = es.mean_loss();
      result.final_eval_error = es.error_rate();
    }
  }

  if (result.updates == 0)
    warn("batches_per_update exceeds the total batch count: no weight update performed");
  if (!result.rows.empty()) {
    result.final_loss = result.rows.back().train_loss;
    result.final_smoothed_loss = result.rows.back().smoothed_loss;
  }
  return result;
}

}  // namespace snorm
