#pragma once

// Multi-label evaluation metrics and the paired significance test used by
// the comparison harness. Tie rules are part of the contract: ranking loss
// counts tied relevant/irrelevant pairs as violations, argmax breaks ties
// toward the lowest label index, and ranks order equal scores by ascending
// label index.

#include <cstdint>
#include <span>
#include <string>

#include "pmlgan/matrix.hpp"

namespace pmlgan::metrics {

// Fraction of instance-label entries where binary prediction and truth
// disagree.
double hamming_loss(const Matrix& pred_binary, const Matrix& truth);

// Fraction of (relevant, irrelevant) pairs with score_rel <= score_irr,
// averaged over instances having both sets nonempty. Errors if no instance
// is eligible.
double ranking_loss(const Matrix& scores, const Matrix& truth);

// Fraction of instances whose top-scoring label is not relevant; instances
// without a relevant label are skipped.
double one_error(const Matrix& scores, const Matrix& truth);

// Mean over relevant labels of precision at that label's rank, averaged
// over instances with at least one relevant label.
double average_precision(const Matrix& scores, const Matrix& truth);

struct EvalReport {
  double hamming = 0.0;
  double ranking = 0.0;
  double one_err = 0.0;
  double avg_prec = 0.0;
  std::size_t n_instances = 0;
};

// All four metrics from raw scores; hamming uses scores thresholded at
// > threshold.
EvalReport evaluate(const Matrix& scores, const Matrix& truth,
                    double threshold = 0.5);

// Two-sided 5% critical value of Student's t; embedded table for df 1..30,
// normal approximation 1.960 beyond.
double t_critical_5pct(std::size_t df);

enum class Outcome { win, tie, loss };
const char* outcome_name(Outcome o);

struct PairedTTest {
  double t = 0.0;
  bool significant = false;
  Outcome outcome = Outcome::tie;
};

// Paired t-test of a against b. larger_is_better gives the orientation of
// the metric the samples came from; the outcome is from a's perspective.
// Zero variance degenerates to: zero mean difference → tie, otherwise an
// infinite t (significant).
PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b,
                          bool larger_is_better);

}  // namespace pmlgan::metrics
