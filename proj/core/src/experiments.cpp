#include "snorm/experiments.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace snorm {

namespace {

std::string fmt(double v) {
  char buf[64];
  snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_or_blank(double v) { return std::isnan(v) ? "" : fmt(v); }

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
}

Shape4 parse_sample_shape(const std::string& text) {
  long dims[3] = {1, 1, 1};
  size_t pos = 0;
  int d = 0;
  while (pos < text.size() && d < 3) {
    size_t comma = text.find(',', pos);
    const std::string tok =
        text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      dims[d++] = std::stol(trim(tok));
    } catch (const std::exception&) {
      throw ConfigError("config key 'data.shape': bad dimension '" + tok + "'");
    }
    if (comma == std::string::npos) { pos = text.size(); break; }
    pos = comma + 1;
  }
  if (pos < text.size() || d != 3)
    throw ConfigError("config key 'data.shape': expected Y,X,C, got '" + text + "'");
  return {1, dims[0], dims[1], dims[2]};
}

Nonlin parse_nonlin(const std::string& s) {
  if (s == "relu") return Nonlin::relu;
  if (s == "tanh") return Nonlin::tanh;
  if (s == "sigmoid") return Nonlin::sigmoid;
  throw ConfigError("config key 'net.nonlin': unknown nonlinearity '" + s + "'");
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

}  // namespace

Experiment build_experiment(Config& cfg) {
  Experiment e;
  e.experiment_kind = cfg.get_string("experiment.kind", "train");
  if (e.experiment_kind != "train" && e.experiment_kind != "gbn_reduction")
    throw ConfigError("config key 'experiment.kind': unknown kind '" + e.experiment_kind + "'");
  e.equivalence_batches = cfg.get_long("experiment.batches", 100);

  // Normalization. All hyperparameters are read (and therefore resolved)
  // regardless of the configured kind.
  const std::string kind_s = cfg.get_string("norm.kind", "batch");
  e.norm.enabled = kind_s != "none";
  NormKind nk = NormKind::batch;
  if (e.norm.enabled) {
    try {
      nk = parse_norm_kind(kind_s);
    } catch (const ParamError& err) {
      throw ConfigError(std::string("config key 'norm.kind': ") + err.what());
    }
  }
  e.norm.kind = nk;
  const std::string default_partition = nk == NormKind::sample ? "LN" : "BN";
  try {
    e.norm.scheme = parse_scheme(cfg.get_string("norm.partition", default_partition));
    e.norm.binding = parse_binding(cfg.get_string("norm.binding", "shared"));
  } catch (const ParamError& err) {
    throw ConfigError(std::string("config key 'norm.partition|norm.binding': ") + err.what());
  }
  e.norm.lp.p = static_cast<int>(cfg.get_long("norm.lp.p", 2));
  try {
    e.norm.lp.setting = parse_lp_setting(cfg.get_string("norm.lp.setting", "A"));
  } catch (const ParamError& err) {
    throw ConfigError(std::string("config key 'norm.lp.setting': ") + err.what());
  }
  e.norm.lp.epsilon = cfg.get_double("norm.lp.epsilon", 1e-5);
  e.norm.hyper.alpha1 = cfg.get_double("norm.hyper.alpha1", 0.7);
  e.norm.hyper.alpha2 = cfg.get_double("norm.hyper.alpha2", 0.3);
  e.norm.hyper.beta1 = cfg.get_double("norm.hyper.beta1", 0.7);
  e.norm.hyper.beta2 = cfg.get_double("norm.hyper.beta2", 0.0);
  e.norm.hyper.beta3 = cfg.get_double("norm.hyper.beta3", 0.3);
  e.norm.hyper.kappa1 = cfg.get_double("norm.hyper.kappa1", 0.7);
  e.norm.hyper.kappa2 = cfg.get_double("norm.hyper.kappa2", 0.3);
  e.norm.hyper.kappa3 = cfg.get_double("norm.hyper.kappa3", 0.7);
  e.norm.hyper.kappa4 = cfg.get_double("norm.hyper.kappa4", 0.3);
  e.norm.ema_momentum = cfg.get_double("norm.ema_momentum", 0.9);
  e.norm.bias_gain = cfg.get_bool("norm.bias_gain", true);

  // Training loop.
  e.train_cfg.samples_per_batch = cfg.get_long("train.samples_per_batch", 32);
  e.train_cfg.batches_per_update = cfg.get_long("train.batches_per_update", 1);
  try {
    e.train_cfg.optimizer = parse_optimizer(cfg.get_string("train.optimizer", "sgd_momentum"));
    e.train_cfg.schedule = LrSchedule::parse(cfg.get_string("train.schedule", "0.1x1"));
  } catch (const ParamError& err) {
    throw ConfigError(std::string("config key 'train.optimizer|train.schedule': ") + err.what());
  }
  e.train_cfg.momentum = cfg.get_double("train.momentum", 0.9);
  e.train_cfg.seed = cfg.get_u64("train.seed", 0);
  e.train_cfg.eval_every = cfg.get_long("train.eval_every", 0);
  e.train_cfg.smooth_window = cfg.get_long("train.smooth_window", 50);
  e.train_cfg.log_wall_time = cfg.get_bool("log.wall_time", false);
  const long bptt_window = cfg.get_long("train.bptt_window", 100);

  // Data.
  const std::string data_kind = cfg.get_string("data.kind", "synth");
  const std::uint64_t data_seed = cfg.get_u64("data.seed", 1234);
  const double val_fraction = cfg.get_double("data.val_fraction", 0.01);
  const bool vary_window = cfg.get_bool("data.vary_window", false);
  const long m = e.train_cfg.samples_per_batch;

  if (data_kind == "synth") {
    e.images = std::make_shared<ImageDataset>(synth_classification(
        data_seed, cfg.get_long("data.n", 2048), cfg.get_long("data.val_n", 512),
        cfg.get_long("data.classes", 10), cfg.get_double("data.separation", 3.0),
        parse_sample_shape(cfg.get_string("data.shape", "1,1,16"))));
  } else if (data_kind == "cifar10") {
    e.images = std::make_shared<ImageDataset>(load_cifar10(cfg.require_string("data.path")));
  } else if (data_kind == "chars") {
    e.chars = std::make_shared<CharDataset>(
        load_char_corpus(cfg.require_string("data.path"), val_fraction));
  } else if (data_kind == "synth_text") {
    e.chars = std::make_shared<CharDataset>(char_dataset_from_text(
        synth_text(data_seed, static_cast<std::size_t>(cfg.get_long("data.bytes", 200000))),
        val_fraction));
  } else {
    throw ConfigError("config key 'data.kind': unknown kind '" + data_kind + "'");
  }
  e.is_sequence = e.chars != nullptr;

  // Architecture.
  e.arch.arch = cfg.get_string("net.arch", e.is_sequence ? "rnn" : "arch_a");
  e.arch.hidden = cfg.get_long("net.hidden", e.is_sequence ? 100 : 32);
  e.arch.depth = cfg.get_long("net.depth", 2);
  e.arch.k1 = cfg.get_long("net.k1", 2);
  e.arch.k2 = cfg.get_long("net.k2", 1);
  e.arch.k = cfg.get_long("net.k", 2);
  e.arch.nonlin = parse_nonlin(cfg.get_string("net.nonlin", "relu"));

  if (e.is_sequence) {
    if (e.arch.arch != "rnn" && e.arch.arch != "gru")
      throw ConfigError("character data needs net.arch = rnn or gru, got '" + e.arch.arch + "'");
    e.arch.vocab = e.chars->vocab_size();
    e.train_stream = std::make_unique<SequenceStream>(e.chars->train_ids, m, bptt_window,
                                                      vary_window);
    if (static_cast<long>(e.chars->val_ids.size()) > bptt_window)
      e.val_stream = std::make_unique<SequenceStream>(e.chars->val_ids, 1, bptt_window);
    e.train_eval_stream = std::make_unique<SequenceStream>(e.chars->train_ids, m, bptt_window);
  } else {
    e.arch.classes = e.images->classes;
    e.arch.input = e.images->train_images.shape();
    e.arch.input.n = 1;
    e.train_stream = std::make_unique<ClassificationStream>(e.images->train_images,
                                                            e.images->train_labels, m, true);
    if (!e.images->val_labels.empty())
      e.val_stream = std::make_unique<ClassificationStream>(
          e.images->val_images, e.images->val_labels, std::max(m, 64L), false, true);
    e.train_eval_stream = std::make_unique<ClassificationStream>(
        e.images->train_images, e.images->train_labels, std::max(m, 64L), false, true);
  }

  try {
    e.model = build_model(e.arch, e.norm, e.train_cfg.seed);
  } catch (const ParamError& err) {
    throw ConfigError(std::string("invalid net/norm configuration: ") + err.what());
  }
  return e;
}

bool is_gbn_reduction(const NormSpec& norm, const TrainConfig& train) {
  return norm.kind == NormKind::streaming && train.batches_per_update == 1 &&
         norm.hyper.alpha1 == 0.0 && norm.hyper.alpha2 == 1.0 && norm.hyper.beta1 == 0.0 &&
         norm.hyper.beta2 == 0.0 && norm.hyper.beta3 == 1.0;
}

double EquivalenceReport::max_delta() const {
  return std::max({max_output_delta, max_input_grad_delta, max_param_delta});
}

namespace {
double max_abs_delta(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (long i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a[i] - b[i]));
  return worst;
}
}  // namespace

EquivalenceReport run_gbn_reduction(const Config& base) {
  Config cfg_stream = base;
  cfg_stream.set("experiment.kind", "train");
  cfg_stream.set("norm.kind", "streaming");
  cfg_stream.set("norm.hyper.alpha1", "0");
  cfg_stream.set("norm.hyper.alpha2", "1");
  cfg_stream.set("norm.hyper.beta1", "0");
  cfg_stream.set("norm.hyper.beta2", "0");
  cfg_stream.set("norm.hyper.beta3", "1");
  cfg_stream.set("train.batches_per_update", "1");

  Config cfg_batch = cfg_stream;
  cfg_batch.set("norm.kind", "batch");

  Config probe = base;
  const long budget = probe.get_long("experiment.batches", 100);

  Experiment a = build_experiment(cfg_stream);
  Experiment b = build_experiment(cfg_batch);

  std::vector<ParamRef> pa = a.model->params();
  std::vector<ParamRef> pb = b.model->params();
  if (pa.size() != pb.size())
    throw ContractError("twin models disagree on parameter layout");

  auto opt_a = make_optimizer(a.train_cfg.optimizer, a.train_cfg.momentum);
  auto opt_b = make_optimizer(b.train_cfg.optimizer, b.train_cfg.momentum);
  Rng rng_a(a.train_cfg.seed), rng_b(b.train_cfg.seed);

  EquivalenceReport report;
  const long epochs = std::max(1L, a.train_cfg.schedule.total_epochs());
  for (long epoch = 0; epoch < epochs && report.batches < budget; ++epoch) {
    const double lr = a.train_cfg.schedule.lr_at_epoch(epoch);
    a.train_stream->start_epoch(epoch, rng_a);
    b.train_stream->start_epoch(epoch, rng_b);
    a.model->reset_sequence_state();
    b.model->reset_sequence_state();
    Batch ba, bb;
    while (report.batches < budget && a.train_stream->next(ba)) {
      if (!b.train_stream->next(bb)) break;
      a.model->zero_grads();
      b.model->zero_grads();
      a.model->forward_loss(ba);
      b.model->forward_loss(bb);
      report.max_output_delta = std::max(
          report.max_output_delta, max_abs_delta(a.model->last_logits(), b.model->last_logits()));
      Tensor dxa = a.model->backward();
      Tensor dxb = b.model->backward();
      report.max_input_grad_delta =
          std::max(report.max_input_grad_delta, max_abs_delta(dxa, dxb));
      opt_a->step(pa, lr);
      opt_b->step(pb, lr);
      a.model->commit_norms();
      for (size_t i = 0; i < pa.size(); ++i)
        report.max_param_delta =
            std::max(report.max_param_delta, max_abs_delta(*pa[i].value, *pb[i].value));
      ++report.batches;
    }
  }
  return report;
}

std::string csv_text(const std::vector<LogRow>& rows) {
  std::string out =
      "epoch,batch_index,update_index,train_loss,smoothed_loss,eval_loss,eval_error,"
      "wall_time_s\n";
  for (const LogRow& r : rows) {
    out += std::to_string(r.epoch) + "," + std::to_string(r.batch_index) + "," +
           std::to_string(r.update_index) + "," + fmt(r.train_loss) + "," +
           fmt(r.smoothed_loss) + "," + fmt_or_blank(r.eval_loss) + "," +
           fmt_or_blank(r.eval_error) + "," + fmt_or_blank(r.wall_time_s) + "\n";
  }
  return out;
}

namespace {

// Shared train/eval runner behind cmd_train and cmd_eval.
struct RunArtifacts {
  TrainResult result;
  std::string summary;
};

Config load_config(const CliOptions& opts) {
  Config cfg = Config::from_file(opts.config_path);
  for (const std::string& s : opts.sets) cfg.set_pair(s);
  if (opts.seed) cfg.set("train.seed", std::to_string(*opts.seed));
  return cfg;
}

void check_unused(const Config& cfg) {
  const auto unused = cfg.unused_keys();
  if (!unused.empty()) {
    std::string msg = "unknown config key(s):";
    for (const auto& k : unused) msg += " '" + k + "'";
    throw ConfigError(msg);
  }
}

RunArtifacts run_experiment(Experiment& e) {
  RunArtifacts art;
  const auto t0 = std::chrono::steady_clock::now();
  art.result = dau_train(*e.model, *e.train_stream, e.val_stream.get(), e.train_cfg);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!e.is_sequence && !art.result.numeric_failure && e.train_eval_stream) {
    EvalStats tr = evaluate(*e.model, *e.train_eval_stream);
    art.result.final_train_error = tr.error_rate();
  }

  art.summary += "batches = " + std::to_string(art.result.rows.size()) + "\n";
  art.summary += "updates = " + std::to_string(art.result.updates) + "\n";
  art.summary += "final_train_loss = " + fmt_or_blank(art.result.final_loss) + "\n";
  art.summary += "final_smoothed_train_loss = " + fmt_or_blank(art.result.final_smoothed_loss) + "\n";
  art.summary += "final_train_error = " + fmt_or_blank(art.result.final_train_error) + "\n";
  art.summary += "final_eval_loss = " + fmt_or_blank(art.result.final_eval_loss) + "\n";
  art.summary += "final_eval_error = " + fmt_or_blank(art.result.final_eval_error) + "\n";
  if (art.result.numeric_failure)
    art.summary += "numeric_failure_at_batch = " +
                   std::to_string(art.result.failed_batch_index) + "\n";
  art.summary += "wall_time_s = " + fmt(elapsed) + "\n";
  return art;
}

void write_run_outputs(const std::string& out_dir, const Config& cfg,
                       const RunArtifacts& art, const std::string& extra_summary) {
  if (out_dir.empty()) return;
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir + "/run.csv", csv_text(art.result.rows));
  write_text_file(out_dir + "/config.resolved", cfg.resolved_text());
  write_text_file(out_dir + "/summary.txt", art.summary + extra_summary);
}

}  // namespace

int cmd_train(const CliOptions& opts) {
  try {
    Config cfg = load_config(opts);
    Experiment e = build_experiment(cfg);
    check_unused(cfg);

    if (e.experiment_kind == "gbn_reduction") {
      EquivalenceReport rep = run_gbn_reduction(cfg);
      std::string summary;
      summary += "gbn_reduction_batches = " + std::to_string(rep.batches) + "\n";
      summary += "max_forward_delta = " + fmt(rep.max_output_delta) + "\n";
      summary += "max_input_grad_delta = " + fmt(rep.max_input_grad_delta) + "\n";
      summary += "max_param_delta = " + fmt(rep.max_param_delta) + "\n";
      summary += "max_streaming_vs_batch_delta = " + fmt(rep.max_delta()) + "\n";
      std::cout << summary;
      if (!opts.out_dir.empty()) {
        std::filesystem::create_directories(opts.out_dir);
        write_text_file(opts.out_dir + "/config.resolved", cfg.resolved_text());
        write_text_file(opts.out_dir + "/summary.txt", summary);
      }
      return 0;
    }

    RunArtifacts art = run_experiment(e);
    write_run_outputs(opts.out_dir, cfg, art, "");
    std::cout << art.summary;
    if (art.result.numeric_failure) {
      std::cerr << "numeric failure (non-finite loss) at batch "
                << art.result.failed_batch_index << "\n";
      return 3;
    }
    return 0;
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  } catch (const FormatError& err) {
    std::cerr << "data format error: " << err.what() << "\n";
    return 2;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
}

int cmd_gradcheck(const CliOptions& opts) {
  try {
    Config cfg = load_config(opts);
    Experiment e = build_experiment(cfg);
    check_unused(cfg);

    if (e.norm.enabled && e.norm.kind == NormKind::streaming) {
      const bool reduction = is_gbn_reduction(e.norm, e.train_cfg);
      const bool multi_visit =
          e.is_sequence || (e.arch.arch == "arch_c" && (e.arch.k1 > 1 || e.arch.k2 > 1)) ||
          (e.arch.arch == "arch_d" && e.arch.k > 1);
      if (!reduction) {
        std::cerr << "gradcheck not applicable: streaming normalization with history "
                     "blending abandons exact backprop; use the reduction "
                     "hyperparameters (n=1, alpha=(0,1), beta=(0,0,1)) or check the "
                     "GBN/sample configuration instead\n";
        return 4;
      }
      if (multi_visit && e.norm.binding != BindingKind::time_specific) {
        std::cerr << "gradcheck not applicable: a shared streaming binding folds stats "
                     "at every unrolled step, so within-window backprop is inexact; "
                     "use norm.binding = time_specific for the check\n";
        return 4;
      }
    }

    // One warm-up batch so running centers (setting B) and eval stores
    // exist, then a commit to reset the short-term folds.
    Rng rng(e.train_cfg.seed);
    e.train_stream->start_epoch(0, rng);
    Batch warm;
    if (!e.train_stream->next(warm)) throw ConfigError("training stream is empty");
    e.model->reset_sequence_state();
    e.model->forward_loss(warm);
    e.model->clear_cache();
    e.model->commit_norms();
    e.model->zero_grads();

    Batch check;
    if (!e.train_stream->next(check)) check = warm;

    const long max_per_tensor = cfg.get_long("gradcheck.max_per_tensor", 48);
    const double step = cfg.get_double("gradcheck.step", 1e-5);
    GradCheckReport report = gradcheck_model(*e.model, check, step, max_per_tensor,
                                             e.train_cfg.seed + 99);
    for (const auto& entry : report.entries) {
      std::printf("%-32s max_rel_err %.3e  (%ld checked)\n", entry.name.c_str(),
                  entry.max_rel_err, entry.checked);
    }
    std::printf("max relative error: %.3e\n", report.max_rel_err);
    return report.passed(1e-4) ? 0 : 1;
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
}

int cmd_sweep(const CliOptions& opts) {
  try {
    if (opts.axes.empty()) {
      std::cerr << "sweep needs at least one axis (key=v1,v2,...)\n";
      return 2;
    }
    struct Axis {
      std::string key;
      std::vector<std::string> values;
    };
    std::vector<Axis> axes;
    for (const std::string& spec : opts.axes) {
      const size_t eq = spec.find('=');
      if (eq == std::string::npos || eq + 1 >= spec.size())
        throw ConfigError("sweep axis '" + spec + "' is not key=v1,v2,...");
      Axis axis;
      axis.key = trim(spec.substr(0, eq));
      std::string rest = spec.substr(eq + 1);
      size_t pos = 0;
      while (pos <= rest.size()) {
        size_t comma = rest.find(',', pos);
        const std::string v =
            trim(rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
        if (!v.empty()) axis.values.push_back(v);
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      if (axis.values.empty())
        throw ConfigError("sweep axis '" + spec + "' has an empty value list");
      axes.push_back(std::move(axis));
    }

    long combos = 1;
    for (const Axis& a : axes) combos *= static_cast<long>(a.values.size());

    std::string csv;
    for (const Axis& a : axes) csv += csv_escape(a.key) + ",";
    csv += "status,updates,final_train_loss,final_smoothed_train_loss,final_train_error,"
           "final_eval_loss,final_eval_error,out_dir\n";

    for (long c = 0; c < combos; ++c) {
      std::vector<std::string> values;
      long rest = c;
      for (const Axis& a : axes) {
        values.push_back(a.values[static_cast<size_t>(rest) % a.values.size()]);
        rest /= static_cast<long>(a.values.size());
      }

      std::string run_name = "run";
      for (size_t i = 0; i < axes.size(); ++i)
        run_name += "_" + sanitize(axes[i].key) + "_" + sanitize(values[i]);
      const std::string run_dir =
          opts.out_dir.empty() ? "" : opts.out_dir + "/" + run_name;

      for (size_t i = 0; i < axes.size(); ++i) csv += csv_escape(values[i]) + ",";

      try {
        Config cfg = load_config(opts);
        for (size_t i = 0; i < axes.size(); ++i) cfg.set(axes[i].key, values[i]);
        Experiment e = build_experiment(cfg);
        check_unused(cfg);
        RunArtifacts art = run_experiment(e);
        write_run_outputs(run_dir, cfg, art, "");
        const TrainResult& r = art.result;
        csv += (r.numeric_failure
                    ? "numeric_failure_at_batch_" + std::to_string(r.failed_batch_index)
                    : "ok");
        csv += "," + std::to_string(r.updates) + "," + fmt_or_blank(r.final_loss) + "," +
               fmt_or_blank(r.final_smoothed_loss) + "," + fmt_or_blank(r.final_train_error) +
               "," + fmt_or_blank(r.final_eval_loss) + "," + fmt_or_blank(r.final_eval_error) +
               "," + csv_escape(run_dir) + "\n";
      } catch (const Error& err) {
        csv += csv_escape(std::string("error: ") + err.what()) + ",,,,,,," +
               csv_escape(run_dir) + "\n";
      }
    }

    if (!opts.out_dir.empty()) {
      std::filesystem::create_directories(opts.out_dir);
      write_text_file(opts.out_dir + "/sweep.csv", csv);
    }
    std::cout << csv;
    return 0;
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
}

int cmd_eval(const CliOptions& opts) {
  try {
    Config cfg = load_config(opts);
    Experiment e = build_experiment(cfg);
    check_unused(cfg);

    // No model persistence: training is deterministic per config+seed, so
    // eval re-runs it and reports validation metrics.
    RunArtifacts art = run_experiment(e);
    if (art.result.numeric_failure) {
      std::cerr << "numeric failure (non-finite loss) at batch "
                << art.result.failed_batch_index << "\n";
      return 3;
    }
    std::string text;
    if (e.val_stream) {
      EvalStats es = evaluate(*e.model, *e.val_stream);
      text += "eval_loss = " + fmt(es.mean_loss()) + "\n";
      text += "eval_error = " + fmt(es.error_rate()) + "\n";
    } else {
      text += "no validation split configured\n";
    }
    std::cout << text;
    if (!opts.out_dir.empty()) {
      std::filesystem::create_directories(opts.out_dir);
      write_text_file(opts.out_dir + "/eval.txt", text);
      write_text_file(opts.out_dir + "/config.resolved", cfg.resolved_text());
    }
    return 0;
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
}

}  // namespace snorm
