#pragma once

#include <string>
#include <vector>

#include "snorm/model.hpp"

namespace snorm {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  long checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;

  bool passed(double tol = 1e-4) const { return max_rel_err < tol; }
};

// Central finite differences of the batch loss against the model's analytic
// parameter gradients. Norm-layer state is snapshotted and restored around
// every loss evaluation so stateful estimators see identical history.
// max_per_tensor > 0 subsamples that many coordinates per tensor
// (deterministic in pick_seed); 0 checks every coordinate.
GradCheckReport gradcheck_model(Model& model, const Batch& batch, double step = 1e-5,
                                long max_per_tensor = 0, std::uint64_t pick_seed = 1234);

}  // namespace snorm
