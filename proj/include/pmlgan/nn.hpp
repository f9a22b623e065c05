#pragma once

// Feed-forward network building blocks: affine layers, elementwise
// activations, batch normalization, reverse-mode backprop, Adam, and a
// finite-difference gradient checker. All math is 64-bit and routed through
// the dispatched kernels where it is data-parallel.

#include <cstdint>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "pmlgan/matrix.hpp"
#include "pmlgan/rng.hpp"

namespace pmlgan::nn {

enum class Act { sigmoid, tanh, relu, leaky_relu };
enum class Mode { train, eval };

struct AffineLayer {
  Matrix w;                // [in x out]
  std::vector<double> b;   // [out]; empty means the layer carries no bias
  Matrix dw;
  std::vector<double> db;
};

struct ActLayer {
  Act kind = Act::relu;
  double slope = 0.0;  // used by leaky_relu only
};

struct BatchNormLayer {
  std::vector<double> gamma, beta;
  std::vector<double> running_mean, running_var;
  std::vector<double> dgamma, dbeta;
  double momentum = 0.9;
  double epsilon = 1e-5;
};

using Layer = std::variant<AffineLayer, ActLayer, BatchNormLayer>;

// out = x * W + b
Matrix affine_forward(const Matrix& x, const AffineLayer& layer);
// elementwise activation
Matrix activation_apply(Act kind, const Matrix& x, double slope = 0.0);
// train mode normalizes with batch statistics (batch of >= 2 required) and
// updates running stats; eval mode uses the stored running stats.
Matrix batchnorm_forward(const Matrix& x, BatchNormLayer& layer, Mode mode);

// Per-layer values cached by a training-mode forward pass, as needed by
// backward: affine keeps its input, relu-family activations their input,
// sigmoid/tanh their output, batchnorm its normalized values and 1/std.
struct LayerCache {
  Matrix input;
  Matrix output;
  Matrix xhat;
  std::vector<double> inv_std;
};

struct Trace {
  std::vector<LayerCache> caches;
  Matrix output;
  bool valid = false;
};

class Network {
 public:
  // bias=false builds x*W only; use it when a batchnorm follows, whose
  // shift makes a bias a dead parameter.
  void add_affine(std::size_t in, std::size_t out, Rng& rng, bool bias = true);
  void add_activation(Act kind, double slope = 0.0);
  void add_batchnorm(double momentum = 0.9, double epsilon = 1e-5);

  // Eval mode caches nothing and is bit-deterministic; train mode records
  // the internal trace consumed by backward().
  Matrix forward(const Matrix& x, Mode mode);
  // Training-mode forward into a caller-owned trace, so several passes
  // through the same network can coexist (the generator needs two).
  Matrix forward_traced(const Matrix& x, Trace& trace);

  // Backprop from d(loss)/d(output); accumulates parameter gradients and
  // returns d(loss)/d(input). backward() consumes the internal trace and
  // is an error without a prior training-mode forward.
  Matrix backward(const Matrix& grad_out);
  Matrix backward_traced(const Trace& trace, const Matrix& grad_out);

  void zero_grads();

  std::size_t input_width() const { return in_width_; }
  std::size_t output_width() const { return out_width_; }
  std::size_t param_count() const;

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  // Visits parameter blocks paired with their gradient blocks, in a fixed
  // order (layer order; affine w then b; batchnorm gamma then beta).
  template <typename F>
  void for_each_param(F&& f) {
    for (Layer& layer : layers_) {
      if (auto* aff = std::get_if<AffineLayer>(&layer)) {
        f(std::span<double>(aff->w.data(), aff->w.size()),
          std::span<double>(aff->dw.data(), aff->dw.size()));
        if (!aff->b.empty())
          f(std::span<double>(aff->b), std::span<double>(aff->db));
      } else if (auto* bn = std::get_if<BatchNormLayer>(&layer)) {
        f(std::span<double>(bn->gamma), std::span<double>(bn->dgamma));
        f(std::span<double>(bn->beta), std::span<double>(bn->dbeta));
      }
    }
  }

  template <typename F>
  void for_each_param(F&& f) const {
    for (const Layer& layer : layers_) {
      if (const auto* aff = std::get_if<AffineLayer>(&layer)) {
        f(std::span<const double>(aff->w.data(), aff->w.size()),
          std::span<const double>(aff->dw.data(), aff->dw.size()));
        if (!aff->b.empty())
          f(std::span<const double>(aff->b),
            std::span<const double>(aff->db));
      } else if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) {
        f(std::span<const double>(bn->gamma),
          std::span<const double>(bn->dgamma));
        f(std::span<const double>(bn->beta),
          std::span<const double>(bn->dbeta));
      }
    }
  }

 private:
  std::vector<Layer> layers_;
  Trace trace_;
  std::size_t in_width_ = 0;
  std::size_t out_width_ = 0;
};

// FNV-1a over the raw bytes of all parameter blocks; used by tests and
// invariant checks to assert which networks a training phase touched.
std::uint64_t param_hash(const Network& net);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long t = 0;
  std::vector<std::vector<double>> m, v;

  void init(const Network& net, double learning_rate = 1e-3);
};

// One Adam update from the network's accumulated gradients. The state must
// have been initialized against a network of identical layout.
void adam_step(Network& net, AdamState& state);

// Raw single-block form (exposed for tests and small fixtures).
void adam_update_block(std::span<double> p, std::span<const double> g,
                       std::span<double> m, std::span<double> v,
                       AdamState& state_hyper, long long t);

// Scalar loss of a network output, with its analytic gradient.
struct ScalarLoss {
  std::function<double(const Matrix&)> value;
  std::function<Matrix(const Matrix&)> grad;
};

// Central finite differences over every parameter, in training mode.
// Returns the maximum relative error |a-n| / max(|a|,|n|,1e-8).
double gradient_check(Network& net, const ScalarLoss& loss,
                      const Matrix& input, double h = 1e-5);

// Three-affine stack in -> hidden -> hidden -> out with leaky ReLU (slope
// 0.2) after the first two maps and the given output activation.
Network make_mlp3(std::size_t in, std::size_t hidden, std::size_t out,
                  Act out_act, Rng& rng);

// Five-affine stack with leaky ReLU after the first map and
// batchnorm + leaky ReLU after each of the middle three, tanh output.
Network make_generator5(std::size_t in, std::size_t hidden, std::size_t out,
                        Rng& rng);

}  // namespace pmlgan::nn
