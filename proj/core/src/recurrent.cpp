#include "snorm/recurrent.hpp"

#include <cmath>

namespace snorm {

BindingKind parse_binding(const std::string& s) {
  if (s == "shared") return BindingKind::shared;
  if (s == "time_specific") return BindingKind::time_specific;
  throw ParamError("unknown norm binding '" + s + "'");
}

std::string format_binding(BindingKind b) {
  return b == BindingKind::shared ? "shared" : "time_specific";
}

NormBinding::NormBinding(BindingKind kind, Factory factory)
    : kind_(kind), factory_(std::move(factory)) {
  if (kind_ == BindingKind::shared) {
    layers_.push_back(factory_());
  }
}

NormLayer& NormBinding::at_step(long t) {
  if (kind_ == BindingKind::shared) return *layers_.front();
  if (t < 0) throw ParamError("negative timestep");
  if (t < static_cast<long>(layers_.size())) return *layers_[static_cast<size_t>(t)];
  if (mode_ == Mode::eval)
    throw UnseenTimestepError("timestep " + std::to_string(t) +
                              " has no trained stats store (" +
                              std::to_string(layers_.size()) + " trained)");
  if (t != static_cast<long>(layers_.size()))
    throw ContractError("timesteps must be visited in order during training");
  layers_.push_back(factory_());
  layers_.back()->set_mode(mode_);
  return *layers_.back();
}

void NormBinding::set_mode(Mode m) {
  mode_ = m;
  for (auto& l : layers_) l->set_mode(m);
}

void NormBinding::for_each(const std::function<void(NormLayer&)>& fn) {
  for (auto& l : layers_) fn(*l);
}

void NormBinding::clear_cache() {
  for (auto& l : layers_) l->clear_cache();
}

NormSlot::NormSlot(const NormSpec& spec, Shape4 feature_shape,
                   BiasGainLayer::Granularity granularity) {
  if (!spec.enabled) return;
  binding_ = std::make_unique<NormBinding>(spec.binding, [spec] {
    return std::make_unique<NormLayer>(spec.kind, spec.scheme, spec.lp, spec.hyper,
                                       spec.ema_momentum);
  });
  if (spec.bias_gain)
    bias_gain_ = std::make_unique<BiasGainLayer>(feature_shape, granularity);
}

Tensor NormSlot::forward(const Tensor& x, long t) {
  if (!binding_) return x;
  Tensor y = binding_->at_step(t).forward(x);
  if (bias_gain_) y = bias_gain_->forward(y);
  return y;
}

Tensor NormSlot::backward(const Tensor& dy, long t) {
  if (!binding_) return dy;
  Tensor d = dy;
  if (bias_gain_) d = bias_gain_->backward(d);
  return binding_->at_step(t).backward(d);
}

void NormSlot::set_mode(Mode m) {
  if (binding_) binding_->set_mode(m);
  if (bias_gain_) bias_gain_->set_mode(m);
}

void NormSlot::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  if (bias_gain_) bias_gain_->collect_params(prefix, out);
}

void NormSlot::visit_norms(const std::function<void(NormLayer&)>& fn) {
  if (binding_) binding_->for_each(fn);
}

void NormSlot::clear_cache() {
  if (binding_) binding_->clear_cache();
  if (bias_gain_) bias_gain_->clear_cache();
}

RnnCell::RnnCell(long input_size, long hidden_size, const NormSpec& norm, Rng& rng,
                 Nonlin nonlin)
    : hidden_(hidden_size),
      wx_(input_size, hidden_size, !norm.enabled, rng),
      wh_(hidden_size, hidden_size, false, rng),
      norm_x_(norm, {1, 1, 1, hidden_size}),
      norm_h_(norm, {1, 1, 1, hidden_size}),
      nonlin_(nonlin) {}

Tensor RnnCell::step(const Tensor& x_t, const Tensor& h_prev, long t) {
  Tensor a = norm_x_.forward(wx_.forward(x_t), t);
  Tensor b = norm_h_.forward(wh_.forward(h_prev), t);
  for (long i = 0; i < a.size(); ++i) a[i] += b[i];
  return nonlin_.forward(a);
}

std::pair<Tensor, Tensor> RnnCell::step_backward(const Tensor& dh, long t) {
  Tensor dpre = nonlin_.backward(dh);
  Tensor dx = wx_.backward(norm_x_.backward(dpre, t));
  Tensor dh_prev = wh_.backward(norm_h_.backward(dpre, t));
  return {std::move(dx), std::move(dh_prev)};
}

void RnnCell::set_mode(Mode m) {
  wx_.set_mode(m);
  wh_.set_mode(m);
  norm_x_.set_mode(m);
  norm_h_.set_mode(m);
  nonlin_.set_mode(m);
}

void RnnCell::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  wx_.collect_params(prefix + ".wx", out);
  wh_.collect_params(prefix + ".wh", out);
  norm_x_.collect_params(prefix + ".norm_x", out);
  norm_h_.collect_params(prefix + ".norm_h", out);
}

void RnnCell::visit_norms(const std::function<void(NormLayer&)>& fn) {
  norm_x_.visit_norms(fn);
  norm_h_.visit_norms(fn);
}

void RnnCell::clear_cache() {
  wx_.clear_cache();
  wh_.clear_cache();
  norm_x_.clear_cache();
  norm_h_.clear_cache();
  nonlin_.clear_cache();
}

GruCell::GruCell(long input_size, long hidden_size, const NormSpec& norm, Rng& rng,
                 Nonlin nonlin)
    : hidden_(hidden_size),
      wxr_(input_size, hidden_size, !norm.enabled, rng),
      whr_(hidden_size, hidden_size, false, rng),
      wxz_(input_size, hidden_size, !norm.enabled, rng),
      whz_(hidden_size, hidden_size, false, rng),
      wxh_(input_size, hidden_size, !norm.enabled, rng),
      whh_(hidden_size, hidden_size, false, rng),
      nr_x_(norm, {1, 1, 1, hidden_size}),
      nr_h_(norm, {1, 1, 1, hidden_size}),
      nz_x_(norm, {1, 1, 1, hidden_size}),
      nz_h_(norm, {1, 1, 1, hidden_size}),
      nh_x_(norm, {1, 1, 1, hidden_size}),
      nh_h_(norm, {1, 1, 1, hidden_size}),
      nonlin_kind_(nonlin) {}

namespace {
Tensor sigmoid_of_sum(const Tensor& a, const Tensor& b) {
  Tensor y(a.shape());
  for (long i = 0; i < a.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-(a[i] + b[i])));
  return y;
}
}  // namespace

Tensor GruCell::step(const Tensor& x_t, const Tensor& h_prev, long t) {
  StepRecord rec;
  rec.h_prev = h_prev;

  Tensor ar = nr_x_.forward(wxr_.forward(x_t), t);
  Tensor br = nr_h_.forward(whr_.forward(h_prev), t);
  rec.g_r = sigmoid_of_sum(ar, br);

  Tensor az = nz_x_.forward(wxz_.forward(x_t), t);
  Tensor bz = nz_h_.forward(whz_.forward(h_prev), t);
  rec.g_z = sigmoid_of_sum(az, bz);

  Tensor gated = h_prev;
  for (long i = 0; i < gated.size(); ++i) gated[i] *= rec.g_r[i];
  Tensor ah = nh_x_.forward(wxh_.forward(x_t), t);
  Tensor bh = nh_h_.forward(whh_.forward(gated), t);
  rec.h_new = Tensor(ah.shape());
  for (long i = 0; i < ah.size(); ++i) {
    const double pre = ah[i] + bh[i];
    rec.h_new[i] = nonlin_kind_ == Nonlin::tanh ? std::tanh(pre) : (pre > 0.0 ? pre : 0.0);
  }

  Tensor h(rec.h_new.shape());
  for (long i = 0; i < h.size(); ++i)
    h[i] = rec.g_z[i] * rec.h_new[i] + (1.0 - rec.g_z[i]) * h_prev[i];
  if (mode_ == Mode::train) steps_.push_back(std::move(rec));
  return h;
}

std::pair<Tensor, Tensor> GruCell::step_backward(const Tensor& dh, long t) {
  if (steps_.empty()) throw ContractError("gru backward without a matching step");
  StepRecord rec = std::move(steps_.back());
  steps_.pop_back();

  const long sz = dh.size();
  Tensor dh_new(dh.shape()), dg_z(dh.shape()), dh_prev(dh.shape());
  for (long i = 0; i < sz; ++i) {
    dh_new[i] = dh[i] * rec.g_z[i];
    dg_z[i] = dh[i] * (rec.h_new[i] - rec.h_prev[i]);
    dh_prev[i] = dh[i] * (1.0 - rec.g_z[i]);
  }

  // Candidate state path.
  Tensor dpre_h(dh.shape());
  for (long i = 0; i < sz; ++i) {
    const double d = nonlin_kind_ == Nonlin::tanh
                         ? 1.0 - rec.h_new[i] * rec.h_new[i]
                         : (rec.h_new[i] > 0.0 ? 1.0 : 0.0);
    dpre_h[i] = dh_new[i] * d;
  }
  Tensor dx = wxh_.backward(nh_x_.backward(dpre_h, t));
  Tensor dgated = whh_.backward(nh_h_.backward(dpre_h, t));
  Tensor dg_r(dh.shape());
  for (long i = 0; i < sz; ++i) {
    dh_prev[i] += dgated[i] * rec.g_r[i];
    dg_r[i] = dgated[i] * rec.h_prev[i];
  }

  // Update gate path.
  Tensor dpre_z(dh.shape());
  for (long i = 0; i < sz; ++i) dpre_z[i] = dg_z[i] * rec.g_z[i] * (1.0 - rec.g_z[i]);
  {
    Tensor d = wxz_.backward(nz_x_.backward(dpre_z, t));
    for (long i = 0; i < sz; ++i) dx[i] += d[i];
    Tensor dhp = whz_.backward(nz_h_.backward(dpre_z, t));
    for (long i = 0; i < sz; ++i) dh_prev[i] += dhp[i];
  }

  // Reset gate path.
  Tensor dpre_r(dh.shape());
  for (long i = 0; i < sz; ++i) dpre_r[i] = dg_r[i] * rec.g_r[i] * (1.0 - rec.g_r[i]);
  {
    Tensor d = wxr_.backward(nr_x_.backward(dpre_r, t));
    for (long i = 0; i < sz; ++i) dx[i] += d[i];
    Tensor dhp = whr_.backward(nr_h_.backward(dpre_r, t));
    for (long i = 0; i < sz; ++i) dh_prev[i] += dhp[i];
  }

  return {std::move(dx), std::move(dh_prev)};
}

void GruCell::set_mode(Mode m) {
  mode_ = m;
  for (FcLayer* f : {&wxr_, &whr_, &wxz_, &whz_, &wxh_, &whh_}) f->set_mode(m);
  for (NormSlot* s : {&nr_x_, &nr_h_, &nz_x_, &nz_h_, &nh_x_, &nh_h_}) s->set_mode(m);
}

void GruCell::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  wxr_.collect_params(prefix + ".wxr", out);
  whr_.collect_params(prefix + ".whr", out);
  wxz_.collect_params(prefix + ".wxz", out);
  whz_.collect_params(prefix + ".whz", out);
  wxh_.collect_params(prefix + ".wxh", out);
  whh_.collect_params(prefix + ".whh", out);
  nr_x_.collect_params(prefix + ".nr_x", out);
  nr_h_.collect_params(prefix + ".nr_h", out);
  nz_x_.collect_params(prefix + ".nz_x", out);
  nz_h_.collect_params(prefix + ".nz_h", out);
  nh_x_.collect_params(prefix + ".nh_x", out);
  nh_h_.collect_params(prefix + ".nh_h", out);
}

void GruCell::visit_norms(const std::function<void(NormLayer&)>& fn) {
  for (NormSlot* s : {&nr_x_, &nr_h_, &nz_x_, &nz_h_, &nh_x_, &nh_h_}) s->visit_norms(fn);
}

void GruCell::clear_cache() {
  for (FcLayer* f : {&wxr_, &whr_, &wxz_, &whz_, &wxh_, &whh_}) f->clear_cache();
  for (NormSlot* s : {&nr_x_, &nr_h_, &nz_x_, &nz_h_, &nh_x_, &nh_h_}) s->clear_cache();
  steps_.clear();
}

long GruCell::norm_store_count() {
  long total = 0;
  for (NormSlot* s : {&nr_x_, &nr_h_, &nz_x_, &nz_h_, &nh_x_, &nh_h_})
    total += s->store_count();
  return total;
}

RecurrentConvBlock::RecurrentConvBlock(long channels, long kernel, long unroll,
                                       const NormSpec& norm, Rng& rng)
    : unroll_(unroll),
      conv_(channels, channels, kernel, 1, (kernel - 1) / 2, !norm.enabled, rng),
      norm_spec_(norm) {
  if (unroll_ < 1) throw ParamError("recurrent block needs unroll >= 1");
}

Tensor RecurrentConvBlock::forward(const Tensor& x) {
  if (!slot_ready_) {
    slot_ = NormSlot(norm_spec_, {1, x.shape().y, x.shape().x, x.shape().c});
    slot_.set_mode(mode_);
    slot_ready_ = true;
  }
  std::vector<Tensor> hs;
  Tensor h = x;
  for (long t = 0; t < unroll_; ++t) {
    Tensor u = slot_.forward(conv_.forward(h), t);
    for (long i = 0; i < u.size(); ++i) {
      const double v = u[i] + h[i];
      u[i] = v > 0.0 ? v : 0.0;
    }
    h = u;
    if (mode_ == Mode::train) hs.push_back(h);
  }
  if (mode_ == Mode::train) h_cache_.push_back(std::move(hs));
  return h;
}

Tensor RecurrentConvBlock::backward(const Tensor& dy) {
  if (h_cache_.empty()) throw ContractError("recurrent block backward without forward");
  std::vector<Tensor> hs = std::move(h_cache_.back());
  h_cache_.pop_back();

  Tensor dh = dy;
  for (long t = unroll_ - 1; t >= 0; --t) {
    const Tensor& h_t = hs[static_cast<size_t>(t)];
    Tensor du(dh.shape());
    for (long i = 0; i < dh.size(); ++i) du[i] = h_t[i] > 0.0 ? dh[i] : 0.0;
    Tensor dconv = slot_.backward(du, t);
    Tensor dprev = conv_.backward(dconv);
    for (long i = 0; i < dprev.size(); ++i) dprev[i] += du[i];  // residual path
    dh = std::move(dprev);
  }
  return dh;
}

void RecurrentConvBlock::set_mode(Mode m) {
  mode_ = m;
  conv_.set_mode(m);
  slot_.set_mode(m);
}

void RecurrentConvBlock::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  conv_.collect_params(prefix + ".conv", out);
  slot_.collect_params(prefix + ".slot", out);
}

void RecurrentConvBlock::visit_norms(const std::function<void(NormLayer&)>& fn) {
  slot_.visit_norms(fn);
}

void RecurrentConvBlock::clear_cache() {
  conv_.clear_cache();
  slot_.clear_cache();
  h_cache_.clear();
}

DenseRecurrentConvBlock::DenseRecurrentConvBlock(long in_channels, long channels,
                                                 long kernel, long unroll,
                                                 const NormSpec& norm, Rng& rng)
    : unroll_(unroll),
      conv_x_(in_channels, channels, kernel, 1, (kernel - 1) / 2, !norm.enabled, rng),
      conv_h_(channels, channels, kernel, 1, (kernel - 1) / 2, false, rng),
      norm_spec_(norm) {
  if (unroll_ < 1) throw ParamError("recurrent block needs unroll >= 1");
}

Tensor DenseRecurrentConvBlock::forward(const Tensor& x) {
  Tensor h;
  std::vector<Tensor> hs;
  for (long t = 0; t < unroll_; ++t) {
    Tensor u = conv_x_.forward(x);
    if (!slot_ready_) {
      slot_ = NormSlot(norm_spec_, {1, u.shape().y, u.shape().x, u.shape().c});
      slot_.set_mode(mode_);
      slot_ready_ = true;
    }
    if (t == 0) h = Tensor(u.shape());  // h_0 = 0
    Tensor r = conv_h_.forward(h);
    for (long i = 0; i < u.size(); ++i) u[i] += r[i];
    u = slot_.forward(u, t);
    for (long i = 0; i < u.size(); ++i) u[i] = u[i] > 0.0 ? u[i] : 0.0;
    h = u;
    if (mode_ == Mode::train) hs.push_back(h);
  }
  if (mode_ == Mode::train) h_cache_.push_back(std::move(hs));
  return h;
}

Tensor DenseRecurrentConvBlock::backward(const Tensor& dy) {
  if (h_cache_.empty()) throw ContractError("recurrent block backward without forward");
  std::vector<Tensor> hs = std::move(h_cache_.back());
  h_cache_.pop_back();

  Tensor dh = dy;
  Tensor dx;
  for (long t = unroll_ - 1; t >= 0; --t) {
    const Tensor& h_t = hs[static_cast<size_t>(t)];
    Tensor du(dh.shape());
    for (long i = 0; i < dh.size(); ++i) du[i] = h_t[i] > 0.0 ? dh[i] : 0.0;
    Tensor dpre = slot_.backward(du, t);
    Tensor dhp = conv_h_.backward(dpre);
    Tensor dxt = conv_x_.backward(dpre);
    if (dx.empty()) dx = std::move(dxt);
    else for (long i = 0; i < dx.size(); ++i) dx[i] += dxt[i];
    dh = std::move(dhp);
  }
  return dx;
}

void DenseRecurrentConvBlock::set_mode(Mode m) {
  mode_ = m;
  conv_x_.set_mode(m);
  conv_h_.set_mode(m);
  slot_.set_mode(m);
}

void DenseRecurrentConvBlock::collect_params(const std::string& prefix,
                                             std::vector<ParamRef>& out) {
  conv_x_.collect_params(prefix + ".conv_x", out);
  conv_h_.collect_params(prefix + ".conv_h", out);
  slot_.collect_params(prefix + ".slot", out);
}

void DenseRecurrentConvBlock::visit_norms(const std::function<void(NormLayer&)>& fn) {
  slot_.visit_norms(fn);
}

void DenseRecurrentConvBlock::clear_cache() {
  conv_x_.clear_cache();
  conv_h_.clear_cache();
  slot_.clear_cache();
  h_cache_.clear();
}

}  // namespace snorm
