#pragma once

// Training loop: model variants, prior sampling, the two-phase minimax step,
// epoch bookkeeping, and trade-off weight selection.

#include <cstdint>
#include <string>
#include <vector>

#include "pmlgan/data.hpp"
#include "pmlgan/model.hpp"
#include "pmlgan/nn.hpp"
#include "pmlgan/rng.hpp"

namespace pmlgan::train {

// Which objective terms a run optimizes, and whether the candidate labels
// are disambiguated first.
enum class Variant {
  pml_gan,  // classification + generation + adversarial
  cls_gen,  // classification + generation
  cls_gan,  // classification + adversarial
  cls_ml,   // classification only, still on disambiguated targets
  raw_ce,   // classification only, directly on the candidate labels
};

model::TermMask variant_mask(Variant v);
bool variant_uses_disambiguation(Variant v);
const char* variant_name(Variant v);
Variant parse_variant(const std::string& name);
std::vector<Variant> all_variants();

// How the label priors for generated samples are drawn each step.
enum class PriorKind {
  empirical_disambiguated,  // disambiguator output on resampled instances
  bernoulli_marginal,       // independent per-label candidate frequencies
};

const char* prior_kind_name(PriorKind k);
PriorKind parse_prior_kind(const std::string& name);

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t prior_samples = 1024;  // generated batch size per step
  std::size_t disc_steps = 1;        // inner discriminator updates per step
  std::vector<double> beta_grid{0.001, 0.01, 0.1, 1.0, 10.0};
  std::size_t epochs = 100;
  double learning_rate = 1e-3;
  PriorKind prior_kind = PriorKind::empirical_disambiguated;
  Variant variant = Variant::pml_gan;
  std::uint64_t seed = 1;
  std::size_t hidden_width = 100;
  bool nonsaturating_generator = false;
  bool freeze_disambiguator = false;

  void validate() const;  // throws std::invalid_argument
};

// One Adam state per network, initialized together.
struct AdamSet {
  nn::AdamState predictor;
  nn::AdamState disambiguator;
  nn::AdamState generator;
  nn::AdamState discriminator;

  void init(const model::PmlGanModel& m, double learning_rate);
};

// Draws `count` label priors from the training pool (x, y). The empirical
// kind resamples instances with replacement and disambiguates them with the
// current model; the Bernoulli kind uses per-label candidate frequencies.
Matrix sample_prior(model::PmlGanModel& m, const Matrix& x, const Matrix& y,
                    std::size_t count, PriorKind kind, Rng& rng);

// One minimax step on a batch: generator-side descent on the masked
// objective, then disc_steps discriminator ascents, each on its own fresh
// prior batch from disc_priors. Returns the losses observed at this step,
// with .disc the beta-scaled discriminator objective averaged over the
// inner steps (0 when the adversarial term is off).
model::LossRecord train_step(model::PmlGanModel& m, AdamSet& opt,
                             const Matrix& x, const Matrix& y,
                             const Matrix& prior_z,
                             const std::vector<Matrix>& disc_priors,
                             const TrainConfig& cfg);

// Batch-mean losses for one epoch. wall_ms is measurement, not state: it is
// excluded from any determinism comparison.
struct EpochRecord {
  double cls = 0.0;
  double gen = 0.0;
  double adv = 0.0;
  double disc = 0.0;
  double wall_ms = 0.0;
};

// Full training loop over shuffled batches; throws if any loss term stops
// being finite, naming the term.
std::vector<EpochRecord> train_model(model::PmlGanModel& m, AdamSet& opt,
                                     const data::MultiLabelDataset& ds,
                                     const TrainConfig& cfg, Rng& rng);

struct TrainedRun {
  model::PmlGanModel model;
  AdamSet opt;
  std::vector<EpochRecord> history;
  double beta = 0.0;
};

// Builds a fresh model (seeded from cfg.seed) with the given trade-off
// weight and trains it to completion.
TrainedRun train_fresh(const data::MultiLabelDataset& ds,
                       const TrainConfig& cfg, double beta);

struct BetaSelection {
  double beta = 0.0;
  TrainedRun run;                 // the winning run, ready to evaluate
  std::vector<double> grid;       // weights tried, ascending
  std::vector<double> final_cls;  // final classification loss per weight
                                  // (NaN marks a run that threw)
};

// Trains one run per grid weight and keeps the one with the smallest final
// classification loss, ties resolved toward the smaller weight. Throws only
// if every candidate run fails.
BetaSelection select_beta(const data::MultiLabelDataset& ds,
                          const TrainConfig& cfg);

}  // namespace pmlgan::train
