#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "snorm/config.hpp"
#include "snorm/data.hpp"
#include "snorm/gradcheck.hpp"

namespace snorm {

// A fully materialized experiment: datasets, streams, model and loop
// parameters, all derived from one Config.
struct Experiment {
  std::string experiment_kind;  // "train" or "gbn_reduction"
  long equivalence_batches = 100;

  ArchConfig arch;
  NormSpec norm;
  TrainConfig train_cfg;
  bool is_sequence = false;

  std::shared_ptr<ImageDataset> images;
  std::shared_ptr<CharDataset> chars;
  std::unique_ptr<Model> model;
  std::unique_ptr<BatchStream> train_stream;
  std::unique_ptr<BatchStream> val_stream;        // null when no validation split
  std::unique_ptr<BatchStream> train_eval_stream;  // unshuffled pass over the train split
};

// Reads every key (materializing defaults into cfg's resolved view) and
// builds the experiment. Unknown values throw ConfigError naming the key.
Experiment build_experiment(Config& cfg);

// Streaming layer with these settings matches GBN exactly.
bool is_gbn_reduction(const NormSpec& norm, const TrainConfig& train);

// Twin-run lockstep comparison: the config's net once with streaming norm
// under reduction hyperparameters, once with batch norm, identical seeds
// and data. Reports elementwise deltas of outputs, input gradients and
// parameters after each update.
struct EquivalenceReport {
  double max_output_delta = 0.0;
  double max_input_grad_delta = 0.0;
  double max_param_delta = 0.0;
  long batches = 0;

  double max_delta() const;
};
EquivalenceReport run_gbn_reduction(const Config& base);

// run.csv schema: one row per mini-batch, blank eval/wall-time fields when
// absent.
std::string csv_text(const std::vector<LogRow>& rows);

struct CliOptions {
  std::string config_path;
  std::vector<std::string> sets;   // key=value overrides, applied in order
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> axes;   // sweep: key=v1,v2,...
};

// Exit codes: 0 success, 2 invalid config, 3 numeric failure (NaN loss),
// 4 gradient check not applicable to the configured mode.
int cmd_train(const CliOptions& opts);
int cmd_gradcheck(const CliOptions& opts);
int cmd_sweep(const CliOptions& opts);
int cmd_eval(const CliOptions& opts);

}  // namespace snorm
