#include "pmlgan/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace pmlgan::train {

namespace {

// Distinct streams for weight initialization and the shuffle/prior draws,
// both derived from the one user-facing seed.
constexpr std::uint64_t kModelSalt = 0x6d6f64656cULL;
constexpr std::uint64_t kLoopSalt = 0x6c6f6f70ULL;

void check_finite(double value, const char* term, std::size_t epoch) {
  if (!std::isfinite(value)) {
    throw std::runtime_error(std::string("training diverged: ") + term +
                             " loss is not finite at epoch " +
                             std::to_string(epoch + 1));
  }
}

}  // namespace

model::TermMask variant_mask(Variant v) {
  switch (v) {
    case Variant::pml_gan: return {true, true, true};
    case Variant::cls_gen: return {true, true, false};
    case Variant::cls_gan: return {true, false, true};
    case Variant::cls_ml: return {true, false, false};
    case Variant::raw_ce: return {true, false, false};
  }
  throw std::logic_error("unreachable variant");
}

bool variant_uses_disambiguation(Variant v) {
  return v != Variant::raw_ce;
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::pml_gan: return "PML-GAN";
    case Variant::cls_gen: return "CLS-GEN";
    case Variant::cls_gan: return "CLS-GAN";
    case Variant::cls_ml: return "CLS-ML";
    case Variant::raw_ce: return "RAW-CE";
  }
  throw std::logic_error("unreachable variant");
}

Variant parse_variant(const std::string& name) {
  for (Variant v : all_variants()) {
    if (name == variant_name(v)) return v;
  }
  throw std::invalid_argument(
      "unknown variant: " + name +
      " (expected PML-GAN, CLS-GEN, CLS-GAN, CLS-ML, or RAW-CE)");
}

std::vector<Variant> all_variants() {
  return {Variant::pml_gan, Variant::cls_gen, Variant::cls_gan,
          Variant::cls_ml, Variant::raw_ce};
}

const char* prior_kind_name(PriorKind k) {
  switch (k) {
    case PriorKind::empirical_disambiguated: return "empirical";
    case PriorKind::bernoulli_marginal: return "bernoulli";
  }
  throw std::logic_error("unreachable prior kind");
}

PriorKind parse_prior_kind(const std::string& name) {
  if (name == "empirical") return PriorKind::empirical_disambiguated;
  if (name == "bernoulli") return PriorKind::bernoulli_marginal;
  throw std::invalid_argument("unknown prior kind: " + name +
                              " (expected empirical or bernoulli)");
}

void TrainConfig::validate() const {
  if (batch_size < 2)
    throw std::invalid_argument("config: batch_size must be at least 2");
  if (prior_samples < 1)
    throw std::invalid_argument("config: prior_samples must be positive");
  if (disc_steps < 1)
    throw std::invalid_argument("config: disc_steps must be positive");
  if (epochs < 1)
    throw std::invalid_argument("config: epochs must be positive");
  if (!(learning_rate > 0.0))
    throw std::invalid_argument("config: learning_rate must be positive");
  if (hidden_width < 1)
    throw std::invalid_argument("config: hidden_width must be positive");
  if (beta_grid.empty())
    throw std::invalid_argument("config: beta_grid must not be empty");
  for (double b : beta_grid) {
    if (!(b >= 0.0) || !std::isfinite(b))
      throw std::invalid_argument(
          "config: trade-off weights must be finite and non-negative");
  }
}

void AdamSet::init(const model::PmlGanModel& m, double learning_rate) {
  predictor.init(m.predictor, learning_rate);
  disambiguator.init(m.disambiguator, learning_rate);
  generator.init(m.generator, learning_rate);
  discriminator.init(m.discriminator, learning_rate);
}

Matrix sample_prior(model::PmlGanModel& m, const Matrix& x, const Matrix& y,
                    std::size_t count, PriorKind kind, Rng& rng) {
  if (x.rows() == 0 || x.rows() != y.rows())
    throw std::invalid_argument("sample_prior: empty or mismatched pool");
  if (count == 0)
    throw std::invalid_argument("sample_prior: count must be positive");

  if (kind == PriorKind::empirical_disambiguated) {
    std::vector<std::size_t> idx(count);
    for (auto& v : idx) v = rng.uniform_index(x.rows());
    const Matrix xs = gather_rows(x, idx);
    const Matrix ys = gather_rows(y, idx);
    const Matrix delta = m.disambiguator.forward(xs, nn::Mode::eval);
    return model::disambiguate(ys, delta);
  }

  std::vector<double> freq(y.cols(), 0.0);
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) freq[j] += y(i, j);
  for (double& f : freq) f /= static_cast<double>(y.rows());

  Matrix z(count, y.cols());
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = 0; j < y.cols(); ++j)
      z(i, j) = rng.bernoulli(freq[j]) ? 1.0 : 0.0;
  return z;
}

model::LossRecord train_step(model::PmlGanModel& m, AdamSet& opt,
                             const Matrix& x, const Matrix& y,
                             const Matrix& prior_z,
                             const std::vector<Matrix>& disc_priors,
                             const TrainConfig& cfg) {
  model::GeneratorSideOptions gopts;
  gopts.mask = variant_mask(cfg.variant);
  gopts.use_disambiguation = variant_uses_disambiguation(cfg.variant);
  gopts.nonsaturating = cfg.nonsaturating_generator;
  gopts.accumulate_grads = true;

  if (gopts.mask.adv && disc_priors.size() < cfg.disc_steps)
    throw std::invalid_argument(
        "train_step: need one prior batch per discriminator step");

  m.predictor.zero_grads();
  m.disambiguator.zero_grads();
  m.generator.zero_grads();
  model::LossRecord rec = model::generator_side_pass(m, x, y, prior_z, gopts);

  nn::adam_step(m.predictor, opt.predictor);
  if (gopts.use_disambiguation && !cfg.freeze_disambiguator)
    nn::adam_step(m.disambiguator, opt.disambiguator);
  if (gopts.mask.gen || gopts.mask.adv)
    nn::adam_step(m.generator, opt.generator);

  if (gopts.mask.adv) {
    double total = 0.0;
    for (std::size_t r = 0; r < cfg.disc_steps; ++r) {
      m.discriminator.zero_grads();
      total += model::discriminator_pass(m, x, disc_priors[r], true);
      nn::adam_step(m.discriminator, opt.discriminator);
    }
    rec.disc = m.beta * (total / static_cast<double>(cfg.disc_steps));
  }
  return rec;
}

std::vector<EpochRecord> train_model(model::PmlGanModel& m, AdamSet& opt,
                                     const data::MultiLabelDataset& ds,
                                     const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t n = ds.size();
  if (n < 2)
    throw std::invalid_argument("train_model: need at least 2 instances");
  if (ds.feature_dim() != m.feature_dim || ds.label_dim() != m.label_dim)
    throw std::invalid_argument(
        "train_model: dataset dimensions do not match the model");

  const model::TermMask mask = variant_mask(cfg.variant);
  std::vector<std::size_t> perm(n);

  std::vector<EpochRecord> history;
  history.reserve(cfg.epochs);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    // Restart from the identity so the epoch's batch order is a function of
    // the rng state alone; a resumed run then replays the same batches a
    // straight run would have seen.
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);

    EpochRecord rec;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - start);
      if (count < 2) continue;  // batch statistics need at least two rows
      std::span<const std::size_t> idx(perm.data() + start, count);
      const Matrix xb = gather_rows(ds.x, idx);
      const Matrix yb = gather_rows(ds.y_candidate, idx);

      Matrix prior;
      std::vector<Matrix> disc_priors;
      if (mask.adv) {
        prior = sample_prior(m, ds.x, ds.y_candidate, cfg.prior_samples,
                             cfg.prior_kind, rng);
        disc_priors.reserve(cfg.disc_steps);
        for (std::size_t r = 0; r < cfg.disc_steps; ++r)
          disc_priors.push_back(sample_prior(m, ds.x, ds.y_candidate,
                                             cfg.prior_samples,
                                             cfg.prior_kind, rng));
      }

      const model::LossRecord step = train_step(m, opt, xb, yb, prior,
                                                disc_priors, cfg);
      check_finite(step.cls, "classification", epoch);
      check_finite(step.gen, "generation", epoch);
      check_finite(step.adv, "adversarial", epoch);
      check_finite(step.disc, "discriminator", epoch);
      rec.cls += step.cls;
      rec.gen += step.gen;
      rec.adv += step.adv;
      rec.disc += step.disc;
      ++batches;
    }
    if (batches == 0)
      throw std::runtime_error(
          "train_model: every batch was smaller than 2 instances");
    const double inv = 1.0 / static_cast<double>(batches);
    rec.cls *= inv;
    rec.gen *= inv;
    rec.adv *= inv;
    rec.disc *= inv;
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    history.push_back(rec);
  }
  return history;
}

TrainedRun train_fresh(const data::MultiLabelDataset& ds,
                       const TrainConfig& cfg, double beta) {
  cfg.validate();
  TrainedRun run;
  run.beta = beta;
  Rng model_rng(mix_seed(cfg.seed, kModelSalt));
  run.model = model::make_model(ds.feature_dim(), ds.label_dim(),
                                cfg.hidden_width, beta, model_rng);
  run.opt.init(run.model, cfg.learning_rate);
  Rng loop_rng(mix_seed(cfg.seed, kLoopSalt));
  run.history = train_model(run.model, run.opt, ds, cfg, loop_rng);
  return run;
}

BetaSelection select_beta(const data::MultiLabelDataset& ds,
                          const TrainConfig& cfg) {
  cfg.validate();
  BetaSelection sel;
  sel.grid = cfg.beta_grid;
  std::sort(sel.grid.begin(), sel.grid.end());
  sel.grid.erase(std::unique(sel.grid.begin(), sel.grid.end()),
                 sel.grid.end());
  sel.final_cls.assign(sel.grid.size(),
                       std::numeric_limits<double>::quiet_NaN());

  bool have = false;
  double best = 0.0;
  std::string last_error;
  for (std::size_t i = 0; i < sel.grid.size(); ++i) {
    TrainedRun run;
    try {
      run = train_fresh(ds, cfg, sel.grid[i]);
    } catch (const std::exception& e) {
      last_error = e.what();
      continue;
    }
    const double final_cls = run.history.back().cls;
    sel.final_cls[i] = final_cls;
    if (!have || final_cls < best) {
      have = true;
      best = final_cls;
      sel.beta = sel.grid[i];
      sel.run = std::move(run);
    }
  }
  if (!have)
    throw std::runtime_error(
        "select_beta: every candidate run failed; last error: " + last_error);
  return sel;
}

}  // namespace pmlgan::train
