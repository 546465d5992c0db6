#include "snorm/layers.hpp"

#include <cmath>

namespace snorm {

FcLayer::FcLayer(long in_features, long out_features, bool bias, Rng& rng)
    : in_(in_features), out_(out_features), has_bias_(bias) {
  if (in_ < 1 || out_ < 1) throw ParamError("fc layer needs positive feature counts");
  w_ = rng_normal(rng, {1, 1, in_, out_}, 1.0 / std::sqrt(static_cast<double>(in_)));
  w_grad_ = Tensor({1, 1, in_, out_});
  if (has_bias_) {
    b_ = Tensor({1, 1, 1, out_});
    b_grad_ = Tensor({1, 1, 1, out_});
  }
}

Tensor FcLayer::forward(const Tensor& x) {
  const Shape4 s = x.shape();
  const long features = s.y * s.x * s.c;
  if (features != in_)
    throw ContractError("fc layer expects " + std::to_string(in_) + " features, got " +
                        std::to_string(features) + " from " + s.str());
  Tensor y({s.n, 1, 1, out_});
  for (long n = 0; n < s.n; ++n) {
    const double* xr = x.data() + n * features;
    double* yr = y.data() + n * out_;
    for (long o = 0; o < out_; ++o) yr[o] = has_bias_ ? b_[o] : 0.0;
    for (long i = 0; i < features; ++i) {
      const double xv = xr[i];
      const double* wr = w_.data() + i * out_;
      for (long o = 0; o < out_; ++o) yr[o] += xv * wr[o];
    }
  }
  if (mode_ == Mode::train) x_cache_.push_back(x);
  return y;
}

Tensor FcLayer::backward(const Tensor& dy) {
  if (x_cache_.empty()) throw ContractError("fc backward without a matching forward");
  Tensor x = std::move(x_cache_.back());
  x_cache_.pop_back();
  const Shape4 s = x.shape();
  if (dy.shape().n != s.n || dy.shape().c != out_)
    throw ContractError("fc backward: gradient shape mismatch");

  Tensor dx(s);
  for (long n = 0; n < s.n; ++n) {
    const double* xr = x.data() + n * in_;
    const double* dyr = dy.data() + n * out_;
    double* dxr = dx.data() + n * in_;
    for (long i = 0; i < in_; ++i) {
      const double xv = xr[i];
      double* wg = w_grad_.data() + i * out_;
      const double* wr = w_.data() + i * out_;
      double acc = 0.0;
      for (long o = 0; o < out_; ++o) {
        wg[o] += xv * dyr[o];
        acc += wr[o] * dyr[o];
      }
      dxr[i] = acc;
    }
    if (has_bias_) {
      for (long o = 0; o < out_; ++o) b_grad_[o] += dyr[o];
    }
  }
  return dx;
}

void FcLayer::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".w", &w_, &w_grad_});
  if (has_bias_) out.push_back({prefix + ".b", &b_, &b_grad_});
}

Conv2dLayer::Conv2dLayer(long in_channels, long out_channels, long kernel,
                         long stride, long pad, bool bias, Rng& rng)
    : in_c_(in_channels), out_c_(out_channels), kernel_(kernel), stride_(stride),
      pad_(pad), has_bias_(bias) {
  if (in_c_ < 1 || out_c_ < 1 || kernel_ < 1 || stride_ < 1 || pad_ < 0)
    throw ParamError("invalid conv geometry");
  const double stddev = 1.0 / std::sqrt(static_cast<double>(kernel_ * kernel_ * in_c_));
  w_ = rng_normal(rng, {out_c_, kernel_, kernel_, in_c_}, stddev);
  w_grad_ = Tensor({out_c_, kernel_, kernel_, in_c_});
  if (has_bias_) {
    b_ = Tensor({1, 1, 1, out_c_});
    b_grad_ = Tensor({1, 1, 1, out_c_});
  }
}

Tensor Conv2dLayer::forward(const Tensor& x) {
  const Shape4 s = x.shape();
  if (s.c != in_c_) throw ContractError("conv expects " + std::to_string(in_c_) + " channels");
  const long oy = (s.y + 2 * pad_ - kernel_) / stride_ + 1;
  const long ox = (s.x + 2 * pad_ - kernel_) / stride_ + 1;
  if (oy < 1 || ox < 1) throw ContractError("conv output would be empty for input " + s.str());

  Tensor y({s.n, oy, ox, out_c_});
  for (long n = 0; n < s.n; ++n)
    for (long py = 0; py < oy; ++py)
      for (long px = 0; px < ox; ++px)
        for (long oc = 0; oc < out_c_; ++oc) {
          double acc = has_bias_ ? b_[oc] : 0.0;
          for (long ky = 0; ky < kernel_; ++ky) {
            const long iy = py * stride_ - pad_ + ky;
            if (iy < 0 || iy >= s.y) continue;
            for (long kx = 0; kx < kernel_; ++kx) {
              const long ix = px * stride_ - pad_ + kx;
              if (ix < 0 || ix >= s.x) continue;
              const double* xr = x.data() + x.index(n, iy, ix, 0);
              const double* wr = w_.data() + w_.index(oc, ky, kx, 0);
              for (long ic = 0; ic < in_c_; ++ic) acc += xr[ic] * wr[ic];
            }
          }
          y.at(n, py, px, oc) = acc;
        }
  if (mode_ == Mode::train) x_cache_.push_back(x);
  return y;
}

Tensor Conv2dLayer::backward(const Tensor& dy) {
  if (x_cache_.empty()) throw ContractError("conv backward without a matching forward");
  Tensor x = std::move(x_cache_.back());
  x_cache_.pop_back();
  const Shape4 s = x.shape();
  const Shape4 g = dy.shape();

  Tensor dx(s);
  for (long n = 0; n < g.n; ++n)
    for (long py = 0; py < g.y; ++py)
      for (long px = 0; px < g.x; ++px)
        for (long oc = 0; oc < out_c_; ++oc) {
          const double dv = dy.at(n, py, px, oc);
          if (has_bias_) b_grad_[oc] += dv;
          for (long ky = 0; ky < kernel_; ++ky) {
            const long iy = py * stride_ - pad_ + ky;
            if (iy < 0 || iy >= s.y) continue;
            for (long kx = 0; kx < kernel_; ++kx) {
              const long ix = px * stride_ - pad_ + kx;
              if (ix < 0 || ix >= s.x) continue;
              const double* xr = x.data() + x.index(n, iy, ix, 0);
              const double* wr = w_.data() + w_.index(oc, ky, kx, 0);
              double* wgr = w_grad_.data() + w_.index(oc, ky, kx, 0);
              double* dxr = dx.data() + dx.index(n, iy, ix, 0);
              for (long ic = 0; ic < in_c_; ++ic) {
                wgr[ic] += xr[ic] * dv;
                dxr[ic] += wr[ic] * dv;
              }
            }
          }
        }
  return dx;
}

void Conv2dLayer::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".w", &w_, &w_grad_});
  if (has_bias_) out.push_back({prefix + ".b", &b_, &b_grad_});
}

PoolLayer::PoolLayer(Kind kind, long window, long stride)
    : kind_(kind), window_(window), stride_(stride) {
  if (window_ < 1 || stride_ < 1) throw ParamError("invalid pool geometry");
}

Tensor PoolLayer::forward(const Tensor& x) {
  const Shape4 s = x.shape();
  const long oy = (s.y - window_) / stride_ + 1;
  const long ox = (s.x - window_) / stride_ + 1;
  if (oy < 1 || ox < 1) throw ContractError("pool output would be empty for input " + s.str());

  Tensor y({s.n, oy, ox, s.c});
  Record rec;
  rec.in_shape = s;
  if (kind_ == Kind::max) rec.argmax.resize(static_cast<size_t>(y.size()));

  long o = 0;
  for (long n = 0; n < s.n; ++n)
    for (long py = 0; py < oy; ++py)
      for (long px = 0; px < ox; ++px)
        for (long c = 0; c < s.c; ++c, ++o) {
          if (kind_ == Kind::max) {
            double best = -1e300;
            long best_idx = -1;
            for (long wy = 0; wy < window_; ++wy)
              for (long wx = 0; wx < window_; ++wx) {
                const long idx = x.index(n, py * stride_ + wy, px * stride_ + wx, c);
                if (x[idx] > best) { best = x[idx]; best_idx = idx; }
              }
            y[o] = best;
            rec.argmax[static_cast<size_t>(o)] = best_idx;
          } else {
            double acc = 0.0;
            for (long wy = 0; wy < window_; ++wy)
              for (long wx = 0; wx < window_; ++wx)
                acc += x.at(n, py * stride_ + wy, px * stride_ + wx, c);
            y[o] = acc / static_cast<double>(window_ * window_);
          }
        }
  if (mode_ == Mode::train) cache_.push_back(std::move(rec));
  return y;
}

Tensor PoolLayer::backward(const Tensor& dy) {
  if (cache_.empty()) throw ContractError("pool backward without a matching forward");
  Record rec = std::move(cache_.back());
  cache_.pop_back();

  Tensor dx(rec.in_shape);
  const Shape4 g = dy.shape();
  if (kind_ == Kind::max) {
    for (long o = 0; o < dy.size(); ++o) dx[rec.argmax[static_cast<size_t>(o)]] += dy[o];
    return dx;
  }
  const double inv = 1.0 / static_cast<double>(window_ * window_);
  long o = 0;
  for (long n = 0; n < g.n; ++n)
    for (long py = 0; py < g.y; ++py)
      for (long px = 0; px < g.x; ++px)
        for (long c = 0; c < g.c; ++c, ++o)
          for (long wy = 0; wy < window_; ++wy)
            for (long wx = 0; wx < window_; ++wx)
              dx.at(n, py * stride_ + wy, px * stride_ + wx, c) += dy[o] * inv;
  return dx;
}

Tensor NonlinLayer::forward(const Tensor& x) {
  Tensor y(x.shape());
  switch (kind_) {
    case Nonlin::relu:
      for (long i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
      break;
    case Nonlin::tanh:
      for (long i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
      break;
    case Nonlin::sigmoid:
      for (long i = 0; i < x.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
      break;
  }
  if (mode_ == Mode::train) y_cache_.push_back(y);
  return y;
}

Tensor NonlinLayer::backward(const Tensor& dy) {
  if (y_cache_.empty()) throw ContractError("nonlinearity backward without a matching forward");
  Tensor y = std::move(y_cache_.back());
  y_cache_.pop_back();
  Tensor dx(dy.shape());
  switch (kind_) {
    case Nonlin::relu:
      for (long i = 0; i < dy.size(); ++i) dx[i] = y[i] > 0.0 ? dy[i] : 0.0;
      break;
    case Nonlin::tanh:
      for (long i = 0; i < dy.size(); ++i) dx[i] = dy[i] * (1.0 - y[i] * y[i]);
      break;
    case Nonlin::sigmoid:
      for (long i = 0; i < dy.size(); ++i) dx[i] = dy[i] * y[i] * (1.0 - y[i]);
      break;
  }
  return dx;
}

double SoftmaxLoss::forward(const Tensor& logits, const std::vector<int>& labels) {
  const Shape4 s = logits.shape();
  if (s.y != 1 || s.x != 1) throw ContractError("softmax loss expects (N,1,1,C) logits");
  if (static_cast<long>(labels.size()) != s.n)
    throw ContractError("softmax loss: label count does not match batch size");

  Record rec;
  rec.probs = Tensor(s);
  rec.labels = labels;
  double loss = 0.0;
  for (long n = 0; n < s.n; ++n) {
    const int label = labels[static_cast<size_t>(n)];
    if (label < 0 || label >= s.c)
      throw ContractError("label " + std::to_string(label) + " out of range for " +
                          std::to_string(s.c) + " classes");
    const double* z = logits.data() + n * s.c;
    double zmax = z[0];
    for (long c = 1; c < s.c; ++c) zmax = std::max(zmax, z[c]);
    double sum = 0.0;
    for (long c = 0; c < s.c; ++c) sum += std::exp(z[c] - zmax);
    const double logsum = zmax + std::log(sum);
    loss -= z[label] - logsum;
    double* p = rec.probs.data() + n * s.c;
    for (long c = 0; c < s.c; ++c) p[c] = std::exp(z[c] - logsum);
  }
  cache_.push_back(std::move(rec));
  return loss / static_cast<double>(s.n);
}

Tensor SoftmaxLoss::backward(double scale) {
  if (cache_.empty()) throw ContractError("softmax loss backward without a matching forward");
  Record rec = std::move(cache_.back());
  cache_.pop_back();
  const Shape4 s = rec.probs.shape();
  Tensor dz = rec.probs;
  const double w = scale / static_cast<double>(s.n);
  for (long n = 0; n < s.n; ++n) {
    double* row = dz.data() + n * s.c;
    row[rec.labels[static_cast<size_t>(n)]] -= 1.0;
    for (long c = 0; c < s.c; ++c) row[c] *= w;
  }
  return dz;
}

const Tensor& SoftmaxLoss::last_probs() const {
  if (cache_.empty()) throw ContractError("no cached softmax probabilities");
  return cache_.back().probs;
}

std::vector<int> argmax_classes(const Tensor& logits) {
  const Shape4 s = logits.shape();
  std::vector<int> out(static_cast<size_t>(s.n));
  for (long n = 0; n < s.n; ++n) {
    const double* z = logits.data() + n * s.y * s.x * s.c;
    int best = 0;
    for (long c = 1; c < s.c; ++c)
      if (z[c] > z[best]) best = static_cast<int>(c);
    out[static_cast<size_t>(n)] = best;
  }
  return out;
}

}  // namespace snorm
