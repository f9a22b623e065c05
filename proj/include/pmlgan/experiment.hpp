#pragma once

// Config-driven experiment harness: candidate-count sweeps, repeated seeded
// trials over model variants, trade-off weight selection per run, CSV
// emission, and paired win/tie/loss comparison of finished tables.

#include <cstdint>
#include <string>
#include <vector>

#include "pmlgan/data.hpp"
#include "pmlgan/train.hpp"

namespace pmlgan::experiment {

struct DatasetSource {
  bool synthetic = true;
  std::string name = "synthetic";  // dataset tag carried into result rows
  // synthetic parameters
  std::size_t n = 2000;
  std::size_t d = 20;
  std::size_t l = 8;
  double avg_true_labels = 3.0;
  // file parameters
  std::string path;
  data::FileFormat format = data::FileFormat::dense_csv;
};

struct ExperimentSpec {
  DatasetSource source;
  std::vector<std::size_t> corruption_targets{3};
  std::vector<train::Variant> variants{train::Variant::pml_gan};
  std::size_t repeats = 10;
  double split_ratio = 0.8;
  std::size_t max_classes = 15;
  train::TrainConfig train;
  std::uint64_t seed = 1;
  std::string out_dir = ".";

  void validate() const;  // throws std::invalid_argument
};

// Parses the documented key = value schema; unknown keys are an error.
ExperimentSpec load_spec(const std::string& path);

// Plain CSV table: one header row, no quoting, cells free of commas.
struct ResultTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // throws if absent
};

const std::vector<std::string>& result_columns();

void write_csv(const ResultTable& t, const std::string& path);
ResultTable read_csv(const std::string& path);

struct ExperimentResult {
  ResultTable table;
  std::string csv_path;
};

// Full sweep: for every (corruption target, variant, repeat), split the
// data, corrupt the training half, normalize, select the trade-off weight,
// train, and score the clean test labels. Detail rows come first, then one
// mean/std summary row per (dataset, c, variant). Failures become rows with
// status=failed; everything except wall_ms is deterministic in the seed.
ExperimentResult run_experiment(const ExperimentSpec& spec);

struct ComparisonRow {
  std::string variant;
  std::size_t wins = 0;
  std::size_t ties = 0;
  std::size_t losses = 0;
};

// Paired t-test of each variant against the baseline, one test per
// (dataset, c) cell, pairing repeats by matching seeds. Outcomes are from
// the variant's perspective. A table holding only the baseline variant
// compares it against itself (all ties).
std::vector<ComparisonRow> compare_runs(const ResultTable& table,
                                        const std::string& metric,
                                        const std::string& baseline_variant);

}  // namespace pmlgan::experiment
