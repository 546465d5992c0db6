#include "snorm/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace snorm {

GradCheckReport gradcheck_model(Model& model, const Batch& batch, double step,
                                long max_per_tensor, std::uint64_t pick_seed) {
  model.set_mode(Mode::train);
  model.clear_cache();
  const auto snaps = model.snapshot_norms();

  auto loss_at_snapshot = [&]() {
    model.restore_norms(snaps);  // also clears norm caches
    model.clear_cache();
    model.reset_sequence_state();
    const double e = model.forward_loss(batch);
    model.clear_cache();
    return e;
  };

  // Analytic pass from the same state the finite differences will see.
  model.restore_norms(snaps);
  model.clear_cache();
  model.reset_sequence_state();
  model.zero_grads();
  model.forward_loss(batch);
  model.backward();

  std::vector<ParamRef> params = model.params();
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const ParamRef& p : params) analytic.push_back(*p.grad);
  model.clear_cache();

  GradCheckReport report;
  Rng pick(pick_seed);
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& w = *params[pi].value;
    const Tensor& g = analytic[pi];

    std::vector<long> indices(static_cast<size_t>(w.size()));
    for (long i = 0; i < w.size(); ++i) indices[static_cast<size_t>(i)] = i;
    if (max_per_tensor > 0 && w.size() > max_per_tensor) {
      pick.shuffle(indices);
      indices.resize(static_cast<size_t>(max_per_tensor));
    }

    GradCheckEntry entry;
    entry.name = params[pi].name;
    entry.checked = static_cast<long>(indices.size());
    for (long idx : indices) {
      const double orig = w[idx];
      w[idx] = orig + step;
      const double ep = loss_at_snapshot();
      w[idx] = orig - step;
      const double em = loss_at_snapshot();
      w[idx] = orig;
      const double numeric = (ep - em) / (2.0 * step);
      const double denom = std::max({1e-4, std::fabs(numeric), std::fabs(g[idx])});
      entry.max_rel_err = std::max(entry.max_rel_err, std::fabs(numeric - g[idx]) / denom);
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }

  model.restore_norms(snaps);
  model.clear_cache();
  return report;
}

}  // namespace snorm
