#include "pmlgan/model.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "pmlgan/kernels.hpp"

namespace pmlgan::model {
namespace {

constexpr double kProbClamp = 1e-7;

double clamp_prob(double p) {
  if (p < kProbClamp) {
    return kProbClamp;
  }
  if (p > 1.0 - kProbClamp) {
    return 1.0 - kProbClamp;
  }
  return p;
}

bool is_clamped(double p) { return p < kProbClamp || p > 1.0 - kProbClamp; }

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
  }
}

}  // namespace

PmlGanModel make_model(std::size_t feature_dim, std::size_t label_dim,
                       std::size_t hidden, double beta, Rng& rng) {
  if (feature_dim == 0 || label_dim == 0 || hidden == 0) {
    throw std::invalid_argument("make_model: dimensions must be positive");
  }
  PmlGanModel m;
  m.predictor = nn::make_mlp3(feature_dim, hidden, label_dim,
                              nn::Act::sigmoid, rng);
  m.disambiguator = nn::make_mlp3(feature_dim, hidden, label_dim,
                                  nn::Act::sigmoid, rng);
  m.generator = nn::make_generator5(label_dim, hidden, feature_dim, rng);
  m.discriminator = nn::make_mlp3(feature_dim, hidden, 1, nn::Act::sigmoid,
                                  rng);
  m.beta = beta;
  m.feature_dim = feature_dim;
  m.label_dim = label_dim;
  return m;
}

Matrix disambiguate(const Matrix& y, const Matrix& delta) {
  require_same_shape(y, delta, "disambiguate");
  Matrix z(y.rows(), y.cols());
  kernels::active().sub_relu(y.data(), delta.data(), z.data(), z.size());
  return z;
}

double classification_loss(const Matrix& f, const Matrix& z) {
  require_same_shape(f, z, "classification_loss");
  if (f.rows() == 0) {
    return 0.0;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double fc = clamp_prob(f.data()[i]);
    const double zi = z.data()[i];
    sum += -zi * std::log(fc) - (1.0 - zi) * std::log(1.0 - fc);
  }
  return sum / static_cast<double>(f.rows());
}

double generation_loss(const Matrix& x_hat, const Matrix& x) {
  require_same_shape(x_hat, x, "generation_loss");
  if (x.rows() == 0) {
    return 0.0;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    sum += kernels::active().sq_dist(x_hat.data() + i * x.cols(),
                                     x.data() + i * x.cols(), x.cols());
  }
  return sum / static_cast<double>(x.rows());
}

double discriminator_loss(const Matrix& d_real, const Matrix& d_fake) {
  if (d_real.size() == 0 || d_fake.size() == 0) {
    throw std::invalid_argument("discriminator_loss: empty score batch");
  }
  double real_sum = 0.0;
  for (std::size_t i = 0; i < d_real.size(); ++i) {
    real_sum += std::log(clamp_prob(d_real.data()[i]));
  }
  double fake_sum = 0.0;
  for (std::size_t i = 0; i < d_fake.size(); ++i) {
    fake_sum += std::log(1.0 - clamp_prob(d_fake.data()[i]));
  }
  return real_sum / static_cast<double>(d_real.size()) +
         fake_sum / static_cast<double>(d_fake.size());
}

double generator_adv_loss(const Matrix& d_fake) {
  if (d_fake.size() == 0) {
    throw std::invalid_argument("generator_adv_loss: empty score batch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < d_fake.size(); ++i) {
    sum += std::log(1.0 - clamp_prob(d_fake.data()[i]));
  }
  return sum / static_cast<double>(d_fake.size());
}

LossRecord generator_side_pass(PmlGanModel& m, const Matrix& x,
                               const Matrix& y, const Matrix& prior_z,
                               const GeneratorSideOptions& opts) {
  if (x.rows() != y.rows()) {
    throw std::invalid_argument(
        "generator_side_pass: feature and label batches differ in size");
  }
  LossRecord rec;
  nn::Trace tr_f, tr_dtil, tr_g1, tr_g2, tr_d;

  Matrix delta;
  Matrix z;
  if (opts.use_disambiguation) {
    delta = m.disambiguator.forward_traced(x, tr_dtil);
    z = disambiguate(y, delta);
  } else {
    z = y;
  }

  Matrix f;
  if (opts.mask.cls) {
    f = m.predictor.forward_traced(x, tr_f);
    rec.cls = classification_loss(f, z);
  }
  Matrix x_hat;
  if (opts.mask.gen) {
    x_hat = m.generator.forward_traced(z, tr_g1);
    rec.gen = generation_loss(x_hat, x);
  }
  Matrix d_fake;
  if (opts.mask.adv) {
    const Matrix x_fake = m.generator.forward_traced(prior_z, tr_g2);
    d_fake = m.discriminator.forward_traced(x_fake, tr_d);
    const double term = opts.nonsaturating
                            ? [&] {
                                double s = 0.0;
                                for (std::size_t i = 0; i < d_fake.size(); ++i) {
                                  s -= std::log(clamp_prob(d_fake.data()[i]));
                                }
                                return s / static_cast<double>(d_fake.size());
                              }()
                            : generator_adv_loss(d_fake);
    rec.adv = m.beta * term;
  }

  if (!opts.accumulate_grads) {
    return rec;
  }

  const bool need_dz = opts.use_disambiguation;
  Matrix dz(z.rows(), z.cols());

  if (opts.mask.cls) {
    const double inv_m = 1.0 / static_cast<double>(x.rows());
    Matrix df(f.rows(), f.cols());
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double fv = f.data()[i];
      const double fc = clamp_prob(fv);
      const double zi = z.data()[i];
      df.data()[i] = is_clamped(fv)
                         ? 0.0
                         : inv_m * (-zi / fc + (1.0 - zi) / (1.0 - fc));
      if (need_dz) {
        dz.data()[i] += inv_m * std::log((1.0 - fc) / fc);
      }
    }
    m.predictor.backward_traced(tr_f, df);
  }
  if (opts.mask.gen) {
    const double scale = 2.0 / static_cast<double>(x.rows());
    Matrix dx_hat(x_hat.rows(), x_hat.cols());
    for (std::size_t i = 0; i < x_hat.size(); ++i) {
      dx_hat.data()[i] = scale * (x_hat.data()[i] - x.data()[i]);
    }
    const Matrix dz_gen = m.generator.backward_traced(tr_g1, dx_hat);
    if (need_dz) {
      kernels::active().acc_add(dz.data(), dz_gen.data(), dz.size());
    }
  }
  if (opts.mask.adv) {
    const double scale = m.beta / static_cast<double>(d_fake.size());
    Matrix dd(d_fake.rows(), d_fake.cols());
    for (std::size_t i = 0; i < d_fake.size(); ++i) {
      const double dv = d_fake.data()[i];
      if (is_clamped(dv)) {
        dd.data()[i] = 0.0;
      } else if (opts.nonsaturating) {
        dd.data()[i] = scale * (-1.0 / dv);
      } else {
        dd.data()[i] = scale * (-1.0 / (1.0 - dv));
      }
    }
    const Matrix dx_fake = m.discriminator.backward_traced(tr_d, dd);
    m.generator.backward_traced(tr_g2, dx_fake);
  }
  if (need_dz) {
    Matrix ddelta(delta.rows(), delta.cols());
    kernels::active().sub_relu_grad(y.data(), delta.data(), dz.data(),
                                    ddelta.data(), ddelta.size());
    m.disambiguator.backward_traced(tr_dtil, ddelta);
  }
  return rec;
}

double joint_generator_side_loss(PmlGanModel& m, const Matrix& x,
                                 const Matrix& y, const Matrix& prior_z) {
  GeneratorSideOptions opts;
  opts.accumulate_grads = false;
  return generator_side_pass(m, x, y, prior_z, opts).objective();
}

double discriminator_pass(PmlGanModel& m, const Matrix& x_real,
                          const Matrix& prior_z, bool accumulate_grads) {
  nn::Trace tr_real, tr_fake;
  const Matrix d_real = m.discriminator.forward_traced(x_real, tr_real);
  const Matrix x_fake = m.generator.forward(prior_z, nn::Mode::train);
  const Matrix d_fake = m.discriminator.forward_traced(x_fake, tr_fake);
  const double obj = discriminator_loss(d_real, d_fake);
  if (accumulate_grads) {
    Matrix g_real(d_real.rows(), d_real.cols());
    const double real_scale = -m.beta / static_cast<double>(d_real.size());
    for (std::size_t i = 0; i < d_real.size(); ++i) {
      const double dv = d_real.data()[i];
      g_real.data()[i] = is_clamped(dv) ? 0.0 : real_scale / dv;
    }
    Matrix g_fake(d_fake.rows(), d_fake.cols());
    const double fake_scale = m.beta / static_cast<double>(d_fake.size());
    for (std::size_t i = 0; i < d_fake.size(); ++i) {
      const double dv = d_fake.data()[i];
      g_fake.data()[i] = is_clamped(dv) ? 0.0 : fake_scale / (1.0 - dv);
    }
    m.discriminator.backward_traced(tr_real, g_real);
    m.discriminator.backward_traced(tr_fake, g_fake);
  }
  return obj;
}

Matrix predict(PmlGanModel& m, const Matrix& x) {
  return m.predictor.forward(x, nn::Mode::eval);
}

Matrix predict_binary(PmlGanModel& m, const Matrix& x, double threshold) {
  Matrix scores = predict(m, x);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores.data()[i] = scores.data()[i] > threshold ? 1.0 : 0.0;
  }
  return scores;
}

double entropy_binomial(const std::vector<double>& z) {
  double h = 0.0;
  for (double p : z) {
    if (p < 0.0 || p > 1.0) {
      throw std::invalid_argument(
          "entropy_binomial: component outside [0,1]");
    }
    if (p > 0.0) {
      h -= p * std::log(p);
    }
    if (p < 1.0) {
      h -= (1.0 - p) * std::log(1.0 - p);
    }
  }
  return h;
}

std::vector<double> optimal_discriminator(const std::vector<double>& p_s,
                                          const std::vector<double>& p_g) {
  if (p_s.size() != p_g.size()) {
    throw std::invalid_argument("optimal_discriminator: support size mismatch");
  }
  std::vector<double> d(p_s.size());
  for (std::size_t i = 0; i < p_s.size(); ++i) {
    if (p_s[i] < 0.0 || p_g[i] < 0.0) {
      throw std::invalid_argument("optimal_discriminator: negative mass");
    }
    const double denom = p_s[i] + p_g[i];
    d[i] = denom == 0.0 ? 0.5 : p_s[i] / denom;
  }
  return d;
}

double adv_value_at_optimum(const std::vector<double>& p_s,
                            const std::vector<double>& p_g) {
  if (p_s.size() != p_g.size()) {
    throw std::invalid_argument("adv_value_at_optimum: support size mismatch");
  }
  double sum_s = 0.0, sum_g = 0.0;
  for (std::size_t i = 0; i < p_s.size(); ++i) {
    if (p_s[i] < 0.0 || p_g[i] < 0.0) {
      throw std::invalid_argument("adv_value_at_optimum: negative mass");
    }
    sum_s += p_s[i];
    sum_g += p_g[i];
  }
  if (std::fabs(sum_s - 1.0) > 1e-6 || std::fabs(sum_g - 1.0) > 1e-6) {
    throw std::invalid_argument(
        "adv_value_at_optimum: inputs must be probability distributions");
  }
  double value = 0.0;
  for (std::size_t i = 0; i < p_s.size(); ++i) {
    const double denom = p_s[i] + p_g[i];
    if (p_s[i] > 0.0) {
      value += p_s[i] * std::log(p_s[i] / denom);
    }
    if (p_g[i] > 0.0) {
      value += p_g[i] * std::log(p_g[i] / denom);
    }
  }
  return value;
}

namespace {

// Compares a network's accumulated gradients against central differences of
// an arbitrary scalar evaluation. The analytic gradients must already be
// stored; value() must not disturb them.
double fd_check_network(nn::Network& net,
                        const std::function<double()>& value, double h) {
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
      const double lp = value();
      p[e] = saved - h;
      const double lm = value();
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

}  // namespace

double JointCheckReport::max() const {
  return std::max(std::max(predictor, disambiguator),
                  std::max(generator, discriminator));
}

JointCheckReport joint_gradient_check_detail(PmlGanModel& m, const Matrix& x,
                                             const Matrix& y,
                                             const Matrix& prior_z, double h) {
  m.predictor.zero_grads();
  m.generator.zero_grads();
  m.disambiguator.zero_grads();
  m.discriminator.zero_grads();

  GeneratorSideOptions opts;
  generator_side_pass(m, x, y, prior_z, opts);

  const auto value = [&]() {
    return joint_generator_side_loss(m, x, y, prior_z);
  };
  JointCheckReport report;
  report.predictor = fd_check_network(m.predictor, value, h);
  report.disambiguator = fd_check_network(m.disambiguator, value, h);
  report.generator = fd_check_network(m.generator, value, h);
  report.discriminator = fd_check_network(m.discriminator, value, h);
  return report;
}

double joint_gradient_check(PmlGanModel& m, const Matrix& x, const Matrix& y,
                            const Matrix& prior_z, double h) {
  return joint_gradient_check_detail(m, x, y, prior_z, h).max();
}

double discriminator_gradient_check(PmlGanModel& m, const Matrix& x,
                                    const Matrix& prior_z, double h) {
  m.discriminator.zero_grads();
  discriminator_pass(m, x, prior_z, true);
  const auto value = [&]() {
    // The stored gradients descend -beta times the ascent objective.
    return -m.beta * discriminator_pass(m, x, prior_z, false);
  };
  return fd_check_network(m.discriminator, value, h);
}

}  // namespace pmlgan::model
