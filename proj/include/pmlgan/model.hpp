#pragma once

// The adversarial disambiguation model: a predictor and a disambiguator
// mapping features to label space, a generator mapping label vectors back to
// feature space, and a discriminator separating real from generated
// features. Training minimizes classification + generation losses plus a
// beta-weighted adversarial term over {predictor, generator, disambiguator}
// while the discriminator ascends its own objective.

#include <cstddef>
#include <vector>

#include "pmlgan/matrix.hpp"
#include "pmlgan/nn.hpp"
#include "pmlgan/rng.hpp"

namespace pmlgan::model {

struct PmlGanModel {
  nn::Network predictor;      // features -> label scores, sigmoid output
  nn::Network disambiguator;  // features -> candidate-noise estimate, sigmoid
  nn::Network generator;      // label vector -> features, tanh output
  nn::Network discriminator;  // features -> realness score, sigmoid
  double beta = 1.0;
  std::size_t feature_dim = 0;
  std::size_t label_dim = 0;
};

// Builds the four networks (fixed creation order, so one seed pins every
// initial weight): predictor, disambiguator, generator, discriminator.
PmlGanModel make_model(std::size_t feature_dim, std::size_t label_dim,
                       std::size_t hidden, double beta, Rng& rng);

// z = max(y - delta, 0)
Matrix disambiguate(const Matrix& y, const Matrix& delta);

// Mean over rows of the label-wise cross entropy of f against targets z,
// with f clamped to [1e-7, 1-1e-7].
double classification_loss(const Matrix& f, const Matrix& z);

// Mean over rows of the squared feature-space distance.
double generation_loss(const Matrix& x_hat, const Matrix& x);

// mean log d_real + mean log(1 - d_fake); the discriminator ascends this.
double discriminator_loss(const Matrix& d_real, const Matrix& d_fake);

// mean log(1 - d_fake); the generator descends this (saturating form).
double generator_adv_loss(const Matrix& d_fake);

struct TermMask {
  bool cls = true;
  bool gen = true;
  bool adv = true;
};

struct LossRecord {
  double cls = 0.0;
  double gen = 0.0;
  double adv = 0.0;   // beta-scaled generator-side adversarial term
  double disc = 0.0;  // beta-scaled discriminator ascent objective
  double objective() const { return cls + gen + adv; }
};

struct GeneratorSideOptions {
  TermMask mask;
  bool use_disambiguation = true;  // false trains against raw candidates
  bool nonsaturating = false;      // swap in -mean log d_fake for the generator
  bool accumulate_grads = true;
};

// One forward (and optionally backward) pass of the generator-side
// objective. Gradients accumulate into predictor/generator/disambiguator
// buffers; the disambiguator receives both the classification-target path
// and the generator-input path. The discriminator is treated as a constant
// (its buffers may still pick up transient values; the trainer zeroes them
// before its own phase).
LossRecord generator_side_pass(PmlGanModel& m, const Matrix& x,
                               const Matrix& y, const Matrix& prior_z,
                               const GeneratorSideOptions& opts);

// Value of the full three-term objective with every term enabled.
double joint_generator_side_loss(PmlGanModel& m, const Matrix& x,
                                 const Matrix& y, const Matrix& prior_z);

// Discriminator objective on a real batch and generated prior batch.
// Returns the raw (un-scaled) objective; when accumulating, the
// discriminator's grad buffers receive d(-beta * objective)/d(theta_D) so a
// plain descent step performs the ascent.
double discriminator_pass(PmlGanModel& m, const Matrix& x_real,
                          const Matrix& prior_z, bool accumulate_grads);

// Predictor scores in eval mode; binary form thresholds at > threshold.
Matrix predict(PmlGanModel& m, const Matrix& x);
Matrix predict_binary(PmlGanModel& m, const Matrix& x, double threshold = 0.5);

// Sum over components of the binary entropy -p log p - (1-p) log(1-p).
double entropy_binomial(const std::vector<double>& z);

// Pointwise p_s / (p_s + p_g) over a discrete support (0.5 where both
// masses vanish).
std::vector<double> optimal_discriminator(const std::vector<double>& p_s,
                                          const std::vector<double>& p_g);

// E_s[log D*] + E_g[log(1 - D*)] at the optimal discriminator; equals
// -log 4 iff the two distributions coincide and is never below it.
double adv_value_at_optimum(const std::vector<double>& p_s,
                            const std::vector<double>& p_g);

// Per-network maximum relative gradient errors |a-n| / max(|a|,|n|,1e-8)
// from central finite differences of the full joint objective (covering
// the classification-target path through the disambiguator and the
// adversarial path through the discriminator).
struct JointCheckReport {
  double predictor = 0.0;
  double disambiguator = 0.0;
  double generator = 0.0;
  double discriminator = 0.0;

  double max() const;
};

JointCheckReport joint_gradient_check_detail(PmlGanModel& m, const Matrix& x,
                                             const Matrix& y,
                                             const Matrix& prior_z,
                                             double h = 1e-5);

// Maximum over all four networks.
double joint_gradient_check(PmlGanModel& m, const Matrix& x, const Matrix& y,
                            const Matrix& prior_z, double h = 1e-5);

// Same comparison for the discriminator's own ascent objective, whose
// real-batch term the joint objective never touches.
double discriminator_gradient_check(PmlGanModel& m, const Matrix& x,
                                    const Matrix& prior_z, double h = 1e-5);

}  // namespace pmlgan::model
