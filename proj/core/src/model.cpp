#include "snorm/model.hpp"

namespace snorm {

Tensor Sequential::forward(const Tensor& x) {
  Tensor h = x;
  for (auto& l : layers_) h = l->forward(h);
  return h;
}

Tensor Sequential::backward(const Tensor& dy) {
  Tensor d = dy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) d = (*it)->backward(d);
  return d;
}

void Sequential::set_mode(Mode m) {
  for (auto& l : layers_) l->set_mode(m);
}

void Sequential::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  for (size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->collect_params(prefix + ".l" + std::to_string(i), out);
}

void Sequential::visit_norms(const std::function<void(NormLayer&)>& fn) {
  for (auto& l : layers_) l->visit_norms(fn);
}

void Sequential::clear_cache() {
  for (auto& l : layers_) l->clear_cache();
}

void Model::zero_grads() {
  for (const ParamRef& p : params()) p.grad->fill(0.0);
}

void Model::commit_norms() {
  visit_norms([](NormLayer& l) {
    if (l.kind() == NormKind::streaming) l.commit();
  });
}

void Model::prepare_eval_norms() {
  visit_norms([](NormLayer& l) { l.prepare_eval(); });
}

std::vector<NormLayer::Snapshot> Model::snapshot_norms() {
  std::vector<NormLayer::Snapshot> snaps;
  visit_norms([&](NormLayer& l) { snaps.push_back(l.snapshot()); });
  return snaps;
}

void Model::restore_norms(const std::vector<NormLayer::Snapshot>& snaps) {
  size_t i = 0;
  visit_norms([&](NormLayer& l) { l.restore(snaps.at(i++)); });
}

double FeedforwardModel::forward_loss(const Batch& b) {
  logits_ = net_.forward(b.x);
  return loss_.forward(logits_, b.labels);
}

Tensor FeedforwardModel::backward() {
  return net_.backward(loss_.backward());
}

EvalStats FeedforwardModel::eval_batch(const Batch& b) {
  logits_ = net_.forward(b.x);
  SoftmaxLoss scratch;
  EvalStats stats;
  stats.loss_sum = scratch.forward(logits_, b.labels) * static_cast<double>(b.x.shape().n);
  stats.items = b.x.shape().n;
  std::vector<int> pred = argmax_classes(logits_);
  for (size_t i = 0; i < pred.size(); ++i)
    if (pred[i] != b.labels[i]) ++stats.errors;
  return stats;
}

std::vector<ParamRef> FeedforwardModel::params() {
  std::vector<ParamRef> out;
  net_.collect_params("net", out);
  return out;
}

void FeedforwardModel::set_mode(Mode m) { net_.set_mode(m); }

void FeedforwardModel::visit_norms(const std::function<void(NormLayer&)>& fn) {
  net_.visit_norms(fn);
}

void FeedforwardModel::clear_cache() {
  net_.clear_cache();
  loss_.clear_cache();
}

CharRnnModel::CharRnnModel(CellKind kind, long vocab, long hidden, const NormSpec& norm,
                           std::uint64_t seed, Nonlin nonlin)
    : cell_kind_(kind), vocab_(vocab), hidden_(hidden) {
  if (vocab_ < 2) throw ParamError("sequence model needs vocab >= 2");
  Rng rng(seed);
  if (kind == CellKind::rnn)
    rnn_ = std::make_unique<RnnCell>(vocab, hidden, norm, rng, nonlin);
  else
    gru_ = std::make_unique<GruCell>(vocab, hidden, norm, rng, nonlin);
  w_out_ = std::make_unique<FcLayer>(hidden, vocab, true, rng);
}

Tensor CharRnnModel::one_hot(const std::vector<int>& ids, long offset, long m,
                             long stride) const {
  Tensor x({m, 1, 1, vocab_});
  for (long r = 0; r < m; ++r) {
    const int id = ids[static_cast<size_t>(r * stride + offset)];
    if (id < 0 || id >= vocab_)
      throw ContractError("sequence id " + std::to_string(id) + " out of vocab range");
    x.at(r, 0, 0, id) = 1.0;
  }
  return x;
}

double CharRnnModel::forward_loss(const Batch& b) {
  if (!b.is_sequence()) throw ContractError("sequence model fed a non-sequence batch");
  const long m = b.seq_m, T = b.seq_steps;
  if (h_train_.empty() || h_train_.shape().n != m) h_train_ = Tensor({m, 1, 1, hidden_});

  Tensor h = h_train_;
  double loss = 0.0;
  for (long t = 0; t < T; ++t) {
    Tensor x_t = one_hot(b.seq_inputs, t, m, T);
    h = cell_kind_ == CellKind::rnn ? rnn_->step(x_t, h, t) : gru_->step(x_t, h, t);
    logits_ = w_out_->forward(h);
    std::vector<int> targets(static_cast<size_t>(m));
    for (long r = 0; r < m; ++r) targets[static_cast<size_t>(r)] = b.seq_targets[static_cast<size_t>(r * T + t)];
    loss += loss_.forward(logits_, targets);
  }
  h_train_ = h;  // carried across windows, gradients stop here
  last_steps_ = T;
  return loss / static_cast<double>(T);
}

Tensor CharRnnModel::backward() {
  const long T = last_steps_;
  const double scale = 1.0 / static_cast<double>(T);
  Tensor dh;
  Tensor dx_first;
  for (long t = T - 1; t >= 0; --t) {
    Tensor dlogits = loss_.backward(scale);
    Tensor dht = w_out_->backward(dlogits);
    if (!dh.empty())
      for (long i = 0; i < dht.size(); ++i) dht[i] += dh[i];
    auto [dx, dh_prev] = cell_kind_ == CellKind::rnn ? rnn_->step_backward(dht, t)
                                                     : gru_->step_backward(dht, t);
    dh = std::move(dh_prev);
    if (t == 0) dx_first = std::move(dx);
  }
  return dx_first;
}

EvalStats CharRnnModel::eval_batch(const Batch& b) {
  const long m = b.seq_m, T = b.seq_steps;
  if (h_eval_.empty() || h_eval_.shape().n != m) h_eval_ = Tensor({m, 1, 1, hidden_});

  Tensor h = h_eval_;
  EvalStats stats;
  SoftmaxLoss scratch;
  for (long t = 0; t < T; ++t) {
    Tensor x_t = one_hot(b.seq_inputs, t, m, T);
    h = cell_kind_ == CellKind::rnn ? rnn_->step(x_t, h, t) : gru_->step(x_t, h, t);
    logits_ = w_out_->forward(h);
    std::vector<int> targets(static_cast<size_t>(m));
    for (long r = 0; r < m; ++r) targets[static_cast<size_t>(r)] = b.seq_targets[static_cast<size_t>(r * T + t)];
    stats.loss_sum += scratch.forward(logits_, targets) * static_cast<double>(m);
    std::vector<int> pred = argmax_classes(logits_);
    for (long r = 0; r < m; ++r)
      if (pred[static_cast<size_t>(r)] != targets[static_cast<size_t>(r)]) ++stats.errors;
    stats.items += m;
  }
  h_eval_ = h;
  return stats;
}

std::vector<ParamRef> CharRnnModel::params() {
  std::vector<ParamRef> out;
  if (rnn_) rnn_->collect_params("cell", out);
  if (gru_) gru_->collect_params("cell", out);
  w_out_->collect_params("out", out);
  return out;
}

void CharRnnModel::set_mode(Mode m) {
  if (rnn_) rnn_->set_mode(m);
  if (gru_) gru_->set_mode(m);
  w_out_->set_mode(m);
}

void CharRnnModel::visit_norms(const std::function<void(NormLayer&)>& fn) {
  if (rnn_) rnn_->visit_norms(fn);
  if (gru_) gru_->visit_norms(fn);
}

void CharRnnModel::clear_cache() {
  if (rnn_) rnn_->clear_cache();
  if (gru_) gru_->clear_cache();
  w_out_->clear_cache();
  loss_.clear_cache();
}

long CharRnnModel::norm_store_count() {
  long total = 0;
  visit_norms([&](NormLayer&) { ++total; });
  return total;
}

namespace {

void add_norm_stack(Sequential& net, const NormSpec& norm, Shape4 feature, Nonlin nonlin) {
  if (norm.enabled) {
    net.add(std::make_unique<NormLayer>(norm.kind, norm.scheme, norm.lp, norm.hyper,
                                        norm.ema_momentum));
    if (norm.bias_gain) net.add(std::make_unique<BiasGainLayer>(feature));
  }
  net.add(std::make_unique<NonlinLayer>(nonlin));
}

}  // namespace

std::unique_ptr<Model> build_model(const ArchConfig& arch, const NormSpec& norm,
                                   std::uint64_t seed) {
  if (arch.arch == "rnn" || arch.arch == "gru") {
    if (arch.vocab < 2) throw ParamError("sequence architectures need a vocabulary");
    return std::make_unique<CharRnnModel>(
        arch.arch == "rnn" ? CellKind::rnn : CellKind::gru, arch.vocab, arch.hidden,
        norm, seed, Nonlin::tanh);
  }

  Rng rng(seed);
  Sequential net;
  const Shape4 in = arch.input;
  const bool fc_bias = !norm.enabled;

  if (arch.arch == "arch_a") {
    long features = in.y * in.x * in.c;
    for (long d = 0; d < arch.depth; ++d) {
      net.add(std::make_unique<FcLayer>(features, arch.hidden, fc_bias, rng));
      add_norm_stack(net, norm, {1, 1, 1, arch.hidden}, arch.nonlin);
      features = arch.hidden;
    }
    net.add(std::make_unique<FcLayer>(features, arch.classes, true, rng));
    return std::make_unique<FeedforwardModel>(std::move(net));
  }

  if (arch.arch == "arch_b" || arch.arch == "arch_c") {
    // arch_b is arch_c with both unroll counts at 1: a residual conv block
    // applied once per stage. The recurrent variant re-applies the same
    // block weights k1/k2 times.
    const long k1 = arch.arch == "arch_b" ? 1 : arch.k1;
    const long k2 = arch.arch == "arch_b" ? 1 : arch.k2;
    const long f = arch.hidden;
    net.add(std::make_unique<Conv2dLayer>(in.c, f, 3, 1, 1, fc_bias, rng));
    add_norm_stack(net, norm, {1, in.y, in.x, f}, arch.nonlin);
    net.add(std::make_unique<RecurrentConvBlock>(f, 3, k1, norm, rng));
    net.add(std::make_unique<PoolLayer>(PoolLayer::Kind::avg, 2, 2));
    net.add(std::make_unique<RecurrentConvBlock>(f, 3, k2, norm, rng));
    net.add(std::make_unique<PoolLayer>(PoolLayer::Kind::avg, 2, 2));
    net.add(std::make_unique<FcLayer>((in.y / 4) * (in.x / 4) * f, arch.classes, true, rng));
    return std::make_unique<FeedforwardModel>(std::move(net));
  }

  if (arch.arch == "arch_d") {
    const long f = arch.hidden;
    net.add(std::make_unique<DenseRecurrentConvBlock>(in.c, f, 3, arch.k, norm, rng));
    net.add(std::make_unique<PoolLayer>(PoolLayer::Kind::avg, 2, 2));
    net.add(std::make_unique<FcLayer>((in.y / 2) * (in.x / 2) * f, arch.classes, true, rng));
    return std::make_unique<FeedforwardModel>(std::move(net));
  }

  throw ParamError("unknown architecture '" + arch.arch + "'");
}

}  // namespace snorm
