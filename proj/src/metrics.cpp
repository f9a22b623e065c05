#include "pmlgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace pmlgan::metrics {
namespace {

void require_binary(const Matrix& truth, const char* op) {
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double v = truth.data()[i];
    if (v != 0.0 && v != 1.0) {
      throw std::invalid_argument(std::string(op) +
                                  ": truth matrix is not binary");
    }
  }
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b) || a.rows() == 0) {
    throw std::invalid_argument(std::string(op) +
                                ": empty input or shape mismatch");
  }
}

// Label indices sorted by (score descending, index ascending).
std::vector<std::size_t> ranked_indices(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&scores](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) {
      return scores[a] > scores[b];
    }
    return a < b;
  });
  return idx;
}

}  // namespace

double hamming_loss(const Matrix& pred_binary, const Matrix& truth) {
  require_same_shape(pred_binary, truth, "hamming_loss");
  require_binary(truth, "hamming_loss");
  require_binary(pred_binary, "hamming_loss");
  std::size_t disagreements = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (pred_binary.data()[i] != truth.data()[i]) {
      ++disagreements;
    }
  }
  return static_cast<double>(disagreements) /
         static_cast<double>(truth.size());
}

double ranking_loss(const Matrix& scores, const Matrix& truth) {
  require_same_shape(scores, truth, "ranking_loss");
  require_binary(truth, "ranking_loss");
  const std::size_t l = scores.cols();
  double total = 0.0;
  std::size_t eligible = 0;
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    std::size_t relevant = 0;
    for (std::size_t j = 0; j < l; ++j) {
      relevant += truth(i, j) == 1.0 ? 1 : 0;
    }
    const std::size_t irrelevant = l - relevant;
    if (relevant == 0 || irrelevant == 0) {
      continue;
    }
    ++eligible;
    // Walk tie groups in descending score order; a relevant label is
    // violated by every irrelevant label scored strictly above it and, per
    // the ties-as-violations rule, by every irrelevant label tied with it.
    const std::vector<std::size_t> order = ranked_indices(scores.row(i));
    std::size_t violations = 0;
    std::size_t irr_above = 0;
    std::size_t g = 0;
    while (g < l) {
      std::size_t g_end = g;
      while (g_end < l &&
             scores(i, order[g_end]) == scores(i, order[g])) {
        ++g_end;
      }
      std::size_t group_rel = 0, group_irr = 0;
      for (std::size_t k = g; k < g_end; ++k) {
        if (truth(i, order[k]) == 1.0) {
          ++group_rel;
        } else {
          ++group_irr;
        }
      }
      violations += group_rel * (irr_above + group_irr);
      irr_above += group_irr;
      g = g_end;
    }
    total += static_cast<double>(violations) /
             static_cast<double>(relevant * irrelevant);
  }
  if (eligible == 0) {
    throw std::runtime_error(
        "ranking_loss: no instance has both relevant and irrelevant labels");
  }
  return total / static_cast<double>(eligible);
}

double one_error(const Matrix& scores, const Matrix& truth) {
  require_same_shape(scores, truth, "one_error");
  require_binary(truth, "one_error");
  std::size_t errors = 0;
  std::size_t eligible = 0;
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    bool has_relevant = false;
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      if (truth(i, j) == 1.0) {
        has_relevant = true;
        break;
      }
    }
    if (!has_relevant) {
      continue;
    }
    ++eligible;
    std::size_t top = 0;
    for (std::size_t j = 1; j < scores.cols(); ++j) {
      if (scores(i, j) > scores(i, top)) {
        top = j;
      }
    }
    if (truth(i, top) != 1.0) {
      ++errors;
    }
  }
  if (eligible == 0) {
    throw std::runtime_error("one_error: no instance has a relevant label");
  }
  return static_cast<double>(errors) / static_cast<double>(eligible);
}

double average_precision(const Matrix& scores, const Matrix& truth) {
  require_same_shape(scores, truth, "average_precision");
  require_binary(truth, "average_precision");
  double total = 0.0;
  std::size_t eligible = 0;
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    std::size_t relevant = 0;
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      relevant += truth(i, j) == 1.0 ? 1 : 0;
    }
    if (relevant == 0) {
      continue;
    }
    ++eligible;
    const std::vector<std::size_t> order = ranked_indices(scores.row(i));
    double inst = 0.0;
    std::size_t rel_seen = 0;
    for (std::size_t rank = 1; rank <= order.size(); ++rank) {
      if (truth(i, order[rank - 1]) == 1.0) {
        ++rel_seen;
        inst += static_cast<double>(rel_seen) / static_cast<double>(rank);
      }
    }
    total += inst / static_cast<double>(relevant);
  }
  if (eligible == 0) {
    throw std::runtime_error(
        "average_precision: no instance has a relevant label");
  }
  return total / static_cast<double>(eligible);
}

EvalReport evaluate(const Matrix& scores, const Matrix& truth,
                    double threshold) {
  Matrix pred(scores.rows(), scores.cols());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    pred.data()[i] = scores.data()[i] > threshold ? 1.0 : 0.0;
  }
  EvalReport report;
  report.hamming = hamming_loss(pred, truth);
  report.ranking = ranking_loss(scores, truth);
  report.one_err = one_error(scores, truth);
  report.avg_prec = average_precision(scores, truth);
  report.n_instances = scores.rows();
  return report;
}

double t_critical_5pct(std::size_t df) {
  // Two-sided 5% quantiles of Student's t for df 1..30.
  static const double table[30] = {
      12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
      2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
      2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
  if (df == 0) {
    throw std::invalid_argument("t_critical_5pct: zero degrees of freedom");
  }
  if (df <= 30) {
    return table[df - 1];
  }
  return 1.960;
}

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::win:
      return "win";
    case Outcome::tie:
      return "tie";
    case Outcome::loss:
      return "loss";
  }
  return "tie";
}

PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b,
                          bool larger_is_better) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("paired_t_test: sample size mismatch");
  }
  const std::size_t r = a.size();
  if (r < 2) {
    throw std::invalid_argument("paired_t_test: need at least 2 pairs");
  }
  double mean = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    mean += a[i] - b[i];
  }
  mean /= static_cast<double>(r);
  double var = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    const double dev = (a[i] - b[i]) - mean;
    var += dev * dev;
  }
  var /= static_cast<double>(r - 1);
  const double sd = std::sqrt(var);

  PairedTTest result;
  if (sd == 0.0) {
    if (mean == 0.0) {
      return result;  // tie, t = 0
    }
    result.t = mean > 0.0 ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();
    result.significant = true;
  } else {
    result.t = mean / (sd / std::sqrt(static_cast<double>(r)));
    result.significant = std::fabs(result.t) > t_critical_5pct(r - 1);
  }
  if (!result.significant) {
    return result;
  }
  const bool a_larger = mean > 0.0;
  result.outcome =
      a_larger == larger_is_better ? Outcome::win : Outcome::loss;
  return result;
}

}  // namespace pmlgan::metrics
