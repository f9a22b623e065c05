#include "pmlgan/nn.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "pmlgan/kernels.hpp"

namespace pmlgan::nn {
namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> column_sums(const Matrix& m) {
  std::vector<double> out(m.cols(), 0.0);
  kernels::active().col_sums(m.data(), out.data(), m.rows(), m.cols());
  return out;
}

std::vector<double> column_dot_sums(const Matrix& a, const Matrix& b) {
  std::vector<double> out(a.cols(), 0.0);
  kernels::active().col_dot_sums(a.data(), b.data(), out.data(), a.rows(),
                                 a.cols());
  return out;
}

// Training-mode batchnorm with the intermediates backward needs.
Matrix batchnorm_train(const Matrix& x, BatchNormLayer& layer, Matrix* xhat_out,
                       std::vector<double>* inv_std_out) {
  const std::size_t m = x.rows();
  const std::size_t width = layer.gamma.size();
  if (x.cols() != width) {
    throw std::invalid_argument("batchnorm_forward: input width " +
                                std::to_string(x.cols()) +
                                " does not match layer width " +
                                std::to_string(width));
  }
  if (m < 2) {
    throw std::runtime_error(
        "batchnorm_forward: training mode requires a batch of at least 2 "
        "rows, got " +
        std::to_string(m));
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  std::vector<double> mu = column_sums(x);
  for (double& v : mu) {
    v *= inv_m;
  }
  Matrix centered(m, width);
  kernels::active().sub_row_vector(x.data(), mu.data(), centered.data(), m,
                                   width);
  std::vector<double> var = column_dot_sums(centered, centered);
  for (double& v : var) {
    v *= inv_m;
  }
  std::vector<double> inv_std(width);
  for (std::size_t j = 0; j < width; ++j) {
    inv_std[j] = 1.0 / std::sqrt(var[j] + layer.epsilon);
  }
  Matrix xhat(m, width);
  kernels::active().mul_row_vector(centered.data(), inv_std.data(),
                                   xhat.data(), m, width);
  Matrix out(m, width);
  kernels::active().colwise_affine(xhat.data(), layer.gamma.data(),
                                   layer.beta.data(), out.data(), m, width);
  for (std::size_t j = 0; j < width; ++j) {
    layer.running_mean[j] =
        layer.momentum * layer.running_mean[j] + (1.0 - layer.momentum) * mu[j];
    layer.running_var[j] =
        layer.momentum * layer.running_var[j] + (1.0 - layer.momentum) * var[j];
  }
  if (xhat_out != nullptr) {
    *xhat_out = std::move(xhat);
  }
  if (inv_std_out != nullptr) {
    *inv_std_out = std::move(inv_std);
  }
  return out;
}

Matrix batchnorm_eval(const Matrix& x, const BatchNormLayer& layer) {
  const std::size_t width = layer.gamma.size();
  if (x.cols() != width) {
    throw std::invalid_argument("batchnorm_forward: input width mismatch");
  }
  // (x - rm) * inv * gamma + beta folded into one scale/shift pass.
  std::vector<double> scale(width), shift(width);
  for (std::size_t j = 0; j < width; ++j) {
    const double inv = 1.0 / std::sqrt(layer.running_var[j] + layer.epsilon);
    scale[j] = layer.gamma[j] * inv;
    shift[j] = layer.beta[j] - layer.running_mean[j] * scale[j];
  }
  Matrix out(x.rows(), width);
  kernels::active().colwise_affine(x.data(), scale.data(), shift.data(),
                                   out.data(), x.rows(), width);
  return out;
}

}  // namespace

Matrix affine_forward(const Matrix& x, const AffineLayer& layer) {
  if (x.cols() != layer.w.rows()) {
    throw std::invalid_argument(
        "affine_forward: input width " + std::to_string(x.cols()) +
        " does not match weight rows " + std::to_string(layer.w.rows()));
  }
  Matrix out = matmul(x, layer.w);
  if (!layer.b.empty()) {
    kernels::active().add_row_vector(out.data(), layer.b.data(), out.rows(),
                                     out.cols());
  }
  return out;
}

Matrix activation_apply(Act kind, const Matrix& x, double slope) {
  Matrix out(x.rows(), x.cols());
  switch (kind) {
    case Act::relu:
      kernels::active().leaky_relu(x.data(), out.data(), x.size(), 0.0);
      break;
    case Act::leaky_relu:
      kernels::active().leaky_relu(x.data(), out.data(), x.size(), slope);
      break;
    case Act::sigmoid:
      for (std::size_t i = 0; i < x.size(); ++i) {
        out.data()[i] = stable_sigmoid(x.data()[i]);
      }
      break;
    case Act::tanh:
      for (std::size_t i = 0; i < x.size(); ++i) {
        out.data()[i] = std::tanh(x.data()[i]);
      }
      break;
  }
  return out;
}

Matrix batchnorm_forward(const Matrix& x, BatchNormLayer& layer, Mode mode) {
  if (mode == Mode::train) {
    return batchnorm_train(x, layer, nullptr, nullptr);
  }
  return batchnorm_eval(x, layer);
}

void Network::add_affine(std::size_t in, std::size_t out, Rng& rng,
                         bool bias) {
  if (out_width_ != 0 && in != out_width_) {
    throw std::invalid_argument("add_affine: input width " +
                                std::to_string(in) +
                                " does not chain onto current output width " +
                                std::to_string(out_width_));
  }
  AffineLayer layer;
  layer.w = Matrix(in, out);
  layer.dw = Matrix(in, out);
  if (bias) {
    layer.b.assign(out, 0.0);
    layer.db.assign(out, 0.0);
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (std::size_t i = 0; i < layer.w.size(); ++i) {
    layer.w.data()[i] = rng.uniform(-bound, bound);
  }
  layers_.push_back(std::move(layer));
  if (in_width_ == 0) {
    in_width_ = in;
  }
  out_width_ = out;
}

void Network::add_activation(Act kind, double slope) {
  if (out_width_ == 0) {
    throw std::invalid_argument("add_activation: no preceding affine layer");
  }
  layers_.push_back(ActLayer{kind, slope});
}

void Network::add_batchnorm(double momentum, double epsilon) {
  if (out_width_ == 0) {
    throw std::invalid_argument("add_batchnorm: no preceding affine layer");
  }
  BatchNormLayer layer;
  layer.gamma.assign(out_width_, 1.0);
  layer.beta.assign(out_width_, 0.0);
  layer.running_mean.assign(out_width_, 0.0);
  layer.running_var.assign(out_width_, 1.0);
  layer.dgamma.assign(out_width_, 0.0);
  layer.dbeta.assign(out_width_, 0.0);
  layer.momentum = momentum;
  layer.epsilon = epsilon;
  layers_.push_back(std::move(layer));
}

Matrix Network::forward(const Matrix& x, Mode mode) {
  if (mode == Mode::train) {
    return forward_traced(x, trace_);
  }
  trace_.valid = false;
  Matrix cur = x;
  for (Layer& layer : layers_) {
    if (auto* aff = std::get_if<AffineLayer>(&layer)) {
      cur = affine_forward(cur, *aff);
    } else if (auto* act = std::get_if<ActLayer>(&layer)) {
      cur = activation_apply(act->kind, cur, act->slope);
    } else {
      cur = batchnorm_eval(cur, std::get<BatchNormLayer>(layer));
    }
  }
  return cur;
}

Matrix Network::forward_traced(const Matrix& x, Trace& trace) {
  trace.caches.assign(layers_.size(), LayerCache{});
  trace.valid = false;
  Matrix cur = x;
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    Layer& layer = layers_[li];
    LayerCache& cache = trace.caches[li];
    if (auto* aff = std::get_if<AffineLayer>(&layer)) {
      cache.input = cur;
      cur = affine_forward(cur, *aff);
    } else if (auto* act = std::get_if<ActLayer>(&layer)) {
      if (act->kind == Act::relu || act->kind == Act::leaky_relu) {
        cache.input = cur;
        cur = activation_apply(act->kind, cur, act->slope);
      } else {
        cur = activation_apply(act->kind, cur, act->slope);
        cache.output = cur;
      }
    } else {
      cur = batchnorm_train(cur, std::get<BatchNormLayer>(layer), &cache.xhat,
                            &cache.inv_std);
    }
  }
  trace.output = cur;
  trace.valid = true;
  return cur;
}

Matrix Network::backward(const Matrix& grad_out) {
  return backward_traced(trace_, grad_out);
}

Matrix Network::backward_traced(const Trace& trace, const Matrix& grad_out) {
  if (!trace.valid || trace.caches.size() != layers_.size()) {
    throw std::runtime_error(
        "network backward called without a cached training-mode forward pass");
  }
  if (!grad_out.same_shape(trace.output)) {
    throw std::invalid_argument(
        "network backward: gradient shape does not match traced output");
  }
  const kernels::Ops& ops = kernels::active();
  Matrix g = grad_out;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    Layer& layer = layers_[li];
    const LayerCache& cache = trace.caches[li];
    if (auto* aff = std::get_if<AffineLayer>(&layer)) {
      const Matrix dw = matmul_transpose_a(cache.input, g);
      ops.acc_add(aff->dw.data(), dw.data(), dw.size());
      if (!aff->db.empty()) {
        const std::vector<double> db = column_sums(g);
        ops.acc_add(aff->db.data(), db.data(), db.size());
      }
      g = matmul_transpose_b(g, aff->w);
    } else if (auto* act = std::get_if<ActLayer>(&layer)) {
      Matrix gi(g.rows(), g.cols());
      switch (act->kind) {
        case Act::relu:
          ops.leaky_relu_grad(cache.input.data(), g.data(), gi.data(),
                              g.size(), 0.0);
          break;
        case Act::leaky_relu:
          ops.leaky_relu_grad(cache.input.data(), g.data(), gi.data(),
                              g.size(), act->slope);
          break;
        case Act::sigmoid:
          ops.sigmoid_grad_from_out(cache.output.data(), g.data(), gi.data(),
                                    g.size());
          break;
        case Act::tanh:
          ops.tanh_grad_from_out(cache.output.data(), g.data(), gi.data(),
                                 g.size());
          break;
      }
      g = std::move(gi);
    } else {
      auto& bn = std::get<BatchNormLayer>(layer);
      const std::size_t m = g.rows();
      const std::size_t width = g.cols();
      const std::vector<double> dgamma = column_dot_sums(g, cache.xhat);
      ops.acc_add(bn.dgamma.data(), dgamma.data(), width);
      const std::vector<double> dbeta = column_sums(g);
      ops.acc_add(bn.dbeta.data(), dbeta.data(), width);
      Matrix dxhat(m, width);
      ops.mul_row_vector(g.data(), bn.gamma.data(), dxhat.data(), m, width);
      const std::vector<double> sum_d = column_sums(dxhat);
      const std::vector<double> sum_dx = column_dot_sums(dxhat, cache.xhat);
      Matrix gi(m, width);
      ops.bn_input_grad(dxhat.data(), cache.xhat.data(), sum_d.data(),
                        sum_dx.data(), cache.inv_std.data(),
                        1.0 / static_cast<double>(m), gi.data(), m, width);
      g = std::move(gi);
    }
  }
  return g;
}

void Network::zero_grads() {
  for_each_param([](std::span<double>, std::span<double> g) {
    std::memset(g.data(), 0, g.size() * sizeof(double));
  });
}

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for_each_param(
      [&n](std::span<const double> p, std::span<const double>) { n += p.size(); });
  return n;
}

std::uint64_t param_hash(const Network& net) {
  std::uint64_t h = 14695981039346656037ULL;
  net.for_each_param([&h](std::span<const double> p, std::span<const double>) {
    const unsigned char* bytes = reinterpret_cast<const unsigned char*>(p.data());
    for (std::size_t i = 0; i < p.size() * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  });
  return h;
}

void AdamState::init(const Network& net, double learning_rate) {
  lr = learning_rate;
  t = 0;
  m.clear();
  v.clear();
  net.for_each_param([this](std::span<const double> p, std::span<const double>) {
    m.emplace_back(p.size(), 0.0);
    v.emplace_back(p.size(), 0.0);
  });
}

void adam_step(Network& net, AdamState& state) {
  state.t += 1;
  const double c1 = 1.0 / (1.0 - std::pow(state.beta1,
                                          static_cast<double>(state.t)));
  const double c2 = 1.0 / (1.0 - std::pow(state.beta2,
                                          static_cast<double>(state.t)));
  std::size_t bi = 0;
  net.for_each_param([&](std::span<double> p, std::span<double> g) {
    if (bi >= state.m.size() || state.m[bi].size() != p.size()) {
      throw std::invalid_argument(
          "adam_step: optimizer state does not match network layout");
    }
    kernels::active().adam_update(p.data(), g.data(), state.m[bi].data(),
                                  state.v[bi].data(), p.size(), state.lr,
                                  state.beta1, state.beta2, state.eps, c1, c2);
    ++bi;
  });
  if (bi != state.m.size()) {
    throw std::invalid_argument(
        "adam_step: optimizer state does not match network layout");
  }
}

void adam_update_block(std::span<double> p, std::span<const double> g,
                       std::span<double> m, std::span<double> v,
                       AdamState& state_hyper, long long t) {
  const double c1 =
      1.0 / (1.0 - std::pow(state_hyper.beta1, static_cast<double>(t)));
  const double c2 =
      1.0 / (1.0 - std::pow(state_hyper.beta2, static_cast<double>(t)));
  kernels::active().adam_update(p.data(), g.data(), m.data(), v.data(),
                                p.size(), state_hyper.lr, state_hyper.beta1,
                                state_hyper.beta2, state_hyper.eps, c1, c2);
}

double gradient_check(Network& net, const ScalarLoss& loss, const Matrix& input,
                      double h) {
  net.zero_grads();
  Trace trace;
  const Matrix out = net.forward_traced(input, trace);
  const Matrix g0 = loss.grad(out);
  net.backward_traced(trace, g0);

  std::vector<std::vector<double>> analytic;
  net.for_each_param([&analytic](std::span<double>, std::span<double> g) {
    analytic.emplace_back(g.begin(), g.end());
  });

  double max_rel = 0.0;
  std::size_t bi = 0;
  net.for_each_param([&](std::span<double> p, std::span<double>) {
    for (std::size_t e = 0; e < p.size(); ++e) {
      const double saved = p[e];
      p[e] = saved + h;
      const double lp = loss.value(net.forward(input, Mode::train));
      p[e] = saved - h;
      const double lm = loss.value(net.forward(input, Mode::train));
      p[e] = saved;
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = analytic[bi][e];
      const double denom =
          std::max(std::max(std::fabs(a), std::fabs(numeric)), 1e-8);
      max_rel = std::max(max_rel, std::fabs(a - numeric) / denom);
    }
    ++bi;
  });
  return max_rel;
}

Network make_mlp3(std::size_t in, std::size_t hidden, std::size_t out,
                  Act out_act, Rng& rng) {
  Network net;
  net.add_affine(in, hidden, rng);
  net.add_activation(Act::leaky_relu, 0.2);
  net.add_affine(hidden, hidden, rng);
  net.add_activation(Act::leaky_relu, 0.2);
  net.add_affine(hidden, out, rng);
  net.add_activation(out_act);
  return net;
}

Network make_generator5(std::size_t in, std::size_t hidden, std::size_t out,
                        Rng& rng) {
  Network net;
  // The hidden maps carry no bias: batchnorm cancels any uniform shift of
  // a column, so a bias ahead of one (directly, or for the first map via
  // the stack it feeds) would receive gradient only from leaky-ReLU corner
  // crossings. The batchnorm shift parameters supply the offsets instead;
  // the output map keeps a bias because nothing renormalizes after it.
  net.add_affine(in, hidden, rng, /*bias=*/false);
  net.add_activation(Act::leaky_relu, 0.2);
  for (int i = 0; i < 3; ++i) {
    net.add_affine(hidden, hidden, rng, /*bias=*/false);
    net.add_batchnorm();
    net.add_activation(Act::leaky_relu, 0.2);
  }
  net.add_affine(hidden, out, rng);
  net.add_activation(Act::tanh);
  return net;
}

}  // namespace pmlgan::nn
