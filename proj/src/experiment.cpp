#include "pmlgan/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "pmlgan/config.hpp"
#include "pmlgan/metrics.hpp"
#include "pmlgan/model.hpp"

namespace pmlgan::experiment {

namespace {

constexpr std::uint64_t kDataSalt = 0x64617461ULL;
constexpr std::uint64_t kSplitSalt = 0x73706c6974ULL;
constexpr std::uint64_t kCorruptSalt = 0x636f7272ULL;
constexpr std::uint64_t kTrainSalt = 0x747261696eULL;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_ms(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(',', start);
    std::string piece = s.substr(
        start, pos == std::string::npos ? std::string::npos : pos - start);
    auto b = piece.find_first_not_of(" \t");
    auto e = piece.find_last_not_of(" \t");
    out.push_back(b == std::string::npos
                      ? ""
                      : piece.substr(b, e - b + 1));
    if (pos == std::string::npos) return out;
    start = pos + 1;
  }
}

// Mean and, when defined, the sample standard deviation.
std::pair<double, double> mean_std(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

struct RunOutcome {
  bool ok = false;
  std::uint64_t seed = 0;
  double realized = std::numeric_limits<double>::quiet_NaN();
  double beta = 0.0;
  double final_cls = 0.0;
  metrics::EvalReport report;
  double wall_ms = 0.0;
};

RunOutcome run_single(const ExperimentSpec& spec,
                      const data::MultiLabelDataset& base, std::size_t c,
                      train::Variant variant, std::size_t repeat) {
  const std::uint64_t pair_seed =
      mix_seed(mix_seed(spec.seed, static_cast<std::uint64_t>(c)),
               static_cast<std::uint64_t>(repeat));
  RunOutcome out;
  out.seed = pair_seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    Rng split_rng(mix_seed(pair_seed, kSplitSalt));
    auto [train_ds, test_ds] = data::split(base, spec.split_ratio, split_rng);

    data::CorruptionSpec cs;
    cs.target_candidate_count = c;
    cs.seed = mix_seed(pair_seed, kCorruptSalt);
    data::MultiLabelDataset corrupted = data::inject_noise(train_ds, cs);
    out.realized = corrupted.realized_avg_candidates;

    data::normalize_features(corrupted, {&test_ds});

    train::TrainConfig tc = spec.train;
    tc.variant = variant;
    tc.seed = mix_seed(pair_seed, kTrainSalt);
    train::BetaSelection sel = train::select_beta(corrupted, tc);
    out.beta = sel.beta;
    out.final_cls = sel.run.history.back().cls;

    if (!test_ds.y_true)
      throw std::runtime_error("experiment: test split lacks ground truth");
    const Matrix scores = model::predict(sel.run.model, test_ds.x);
    out.report = metrics::evaluate(scores, *test_ds.y_true);
    out.ok = true;
  } catch (const std::exception& e) {
    std::fprintf(stderr,
                 "run failed (dataset=%s c=%zu variant=%s repeat=%zu): %s\n",
                 spec.source.name.c_str(), c, train::variant_name(variant),
                 repeat, e.what());
  }
  out.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return out;
}

data::MultiLabelDataset load_base(const ExperimentSpec& spec) {
  if (spec.source.synthetic) {
    return data::make_synthetic(spec.source.n, spec.source.d, spec.source.l,
                                spec.source.avg_true_labels,
                                mix_seed(spec.seed, kDataSalt));
  }
  data::MultiLabelDataset ds =
      data::load_dataset(spec.source.path, spec.source.format);
  ds = data::filter_labels(ds, spec.max_classes);
  // Observed labels are treated as clean truth; corruption is synthetic.
  ds.adopt_labels_as_truth();
  return ds;
}

}  // namespace

void ExperimentSpec::validate() const {
  if (repeats < 1)
    throw std::invalid_argument("spec: repeats must be at least 1");
  if (corruption_targets.empty())
    throw std::invalid_argument("spec: corruption_targets must not be empty");
  for (std::size_t c : corruption_targets)
    if (c < 1)
      throw std::invalid_argument(
          "spec: corruption targets must be positive");
  if (variants.empty())
    throw std::invalid_argument("spec: variants must not be empty");
  if (!(split_ratio > 0.0 && split_ratio < 1.0))
    throw std::invalid_argument(
        "spec: split_ratio must lie strictly in (0, 1)");
  if (max_classes < 1)
    throw std::invalid_argument("spec: max_classes must be positive");
  if (source.synthetic) {
    if (source.n < 5 || source.d < 1 || source.l < 2)
      throw std::invalid_argument(
          "spec: synthetic data needs n >= 5, d >= 1, l >= 2");
    if (source.avg_true_labels < 1.0)
      throw std::invalid_argument(
          "spec: synthetic average true-label count must be at least 1");
  } else if (source.path.empty()) {
    throw std::invalid_argument("spec: dataset file path is empty");
  }
  train.validate();
}

ExperimentSpec load_spec(const std::string& path) {
  const config::Config cfg = config::Config::parse_file(path);
  ExperimentSpec spec;

  const std::string dataset = cfg.get_string("dataset", "synthetic");
  if (dataset == "synthetic") {
    spec.source.synthetic = true;
    spec.source.name = cfg.get_string("dataset_name", "synthetic");
    spec.source.n = cfg.get_size("synthetic_n", spec.source.n);
    spec.source.d = cfg.get_size("synthetic_d", spec.source.d);
    spec.source.l = cfg.get_size("synthetic_l", spec.source.l);
    spec.source.avg_true_labels =
        cfg.get_double("synthetic_avg_labels", spec.source.avg_true_labels);
  } else {
    spec.source.synthetic = false;
    spec.source.path = dataset;
    spec.source.format =
        data::parse_format(cfg.get_string("format", "dense_csv"));
    spec.source.name = cfg.get_string(
        "dataset_name", std::filesystem::path(dataset).stem().string());
  }

  if (cfg.has("corruption_targets")) {
    spec.corruption_targets.clear();
    for (double v : cfg.get_double_list("corruption_targets")) {
      if (v < 1.0 || v != std::floor(v))
        throw std::runtime_error(
            "spec: corruption targets must be positive integers");
      spec.corruption_targets.push_back(static_cast<std::size_t>(v));
    }
  }
  if (cfg.has("variants")) {
    spec.variants.clear();
    for (const std::string& name :
         split_list(cfg.get_string("variants"))) {
      spec.variants.push_back(train::parse_variant(name));
    }
  }
  spec.repeats = cfg.get_size("repeats", spec.repeats);
  spec.split_ratio = cfg.get_double("split_ratio", spec.split_ratio);
  spec.max_classes = cfg.get_size("max_classes", spec.max_classes);
  spec.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
  spec.out_dir = cfg.get_string("out_dir", spec.out_dir);

  train::TrainConfig& tc = spec.train;
  tc.batch_size = cfg.get_size("batch_size", tc.batch_size);
  tc.prior_samples = cfg.get_size("prior_samples", tc.prior_samples);
  tc.disc_steps = cfg.get_size("disc_steps", tc.disc_steps);
  tc.beta_grid = cfg.get_double_list("beta_grid", tc.beta_grid);
  tc.epochs = cfg.get_size("epochs", tc.epochs);
  tc.learning_rate = cfg.get_double("learning_rate", tc.learning_rate);
  tc.prior_kind = train::parse_prior_kind(
      cfg.get_string("prior_kind", train::prior_kind_name(tc.prior_kind)));
  tc.hidden_width = cfg.get_size("hidden_width", tc.hidden_width);
  tc.nonsaturating_generator =
      cfg.get_bool("nonsaturating_generator", tc.nonsaturating_generator);
  tc.freeze_disambiguator =
      cfg.get_bool("freeze_disambiguator", tc.freeze_disambiguator);
  tc.seed = spec.seed;

  const std::vector<std::string> unknown = cfg.unused_keys();
  if (!unknown.empty()) {
    std::string joined;
    for (const std::string& k : unknown) {
      if (!joined.empty()) joined += ", ";
      joined += k;
    }
    throw std::runtime_error(path + ": unknown keys: " + joined);
  }
  spec.validate();
  return spec;
}

std::size_t ResultTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw std::invalid_argument("result table has no column named " + name);
}

const std::vector<std::string>& result_columns() {
  static const std::vector<std::string> cols = {
      "kind",          "dataset",
      "c",             "realized_avg_cl",
      "variant",       "repeat",
      "seed",          "beta",
      "final_lc",      "hamming_loss",
      "ranking_loss",  "one_error",
      "average_precision", "hamming_loss_std",
      "ranking_loss_std",  "one_error_std",
      "average_precision_std", "status",
      "wall_ms"};
  return cols;
}

void write_csv(const ResultTable& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write table: " + path);
  auto emit_row = [&](const std::vector<std::string>& row) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row[i].find_first_of(",\n") != std::string::npos)
        throw std::invalid_argument(
            "table cells must not contain commas or newlines");
      if (i) line += ',';
      line += row[i];
    }
    line += '\n';
    out << line;
  };
  emit_row(t.header);
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size())
      throw std::invalid_argument("table row width differs from header");
    emit_row(row);
  }
  if (!out) throw std::runtime_error("failed writing table: " + path);
}

ResultTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open table: " + path);
  ResultTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells = split_list(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
    } else {
      if (cells.size() != t.header.size())
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": row width differs from header");
      t.rows.push_back(std::move(cells));
    }
  }
  if (t.header.empty())
    throw std::runtime_error(path + ": empty table");
  return t;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const data::MultiLabelDataset base = load_base(spec);

  ResultTable table;
  table.header = result_columns();
  std::vector<std::vector<std::string>> summary_rows;

  for (std::size_t c : spec.corruption_targets) {
    for (train::Variant variant : spec.variants) {
      std::vector<double> hams, ranks, ones, aps, finals, realized;
      double wall_total = 0.0;
      std::size_t failed = 0;
      for (std::size_t repeat = 0; repeat < spec.repeats; ++repeat) {
        const RunOutcome run = run_single(spec, base, c, variant, repeat);
        wall_total += run.wall_ms;

        std::vector<std::string> row;
        row.push_back("run");
        row.push_back(spec.source.name);
        row.push_back(std::to_string(c));
        row.push_back(std::isnan(run.realized) ? "" : fmt(run.realized));
        row.push_back(train::variant_name(variant));
        row.push_back(std::to_string(repeat));
        row.push_back(std::to_string(run.seed));
        if (run.ok) {
          row.push_back(fmt(run.beta));
          row.push_back(fmt(run.final_cls));
          row.push_back(fmt(run.report.hamming));
          row.push_back(fmt(run.report.ranking));
          row.push_back(fmt(run.report.one_err));
          row.push_back(fmt(run.report.avg_prec));
        } else {
          for (int k = 0; k < 6; ++k) row.push_back("");
        }
        for (int k = 0; k < 4; ++k) row.push_back("");  // std columns
        row.push_back(run.ok ? "ok" : "failed");
        row.push_back(fmt_ms(run.wall_ms));
        table.rows.push_back(std::move(row));

        if (run.ok) {
          hams.push_back(run.report.hamming);
          ranks.push_back(run.report.ranking);
          ones.push_back(run.report.one_err);
          aps.push_back(run.report.avg_prec);
          finals.push_back(run.final_cls);
          if (!std::isnan(run.realized)) realized.push_back(run.realized);
        } else {
          ++failed;
        }
      }

      std::vector<std::string> row;
      row.push_back("summary");
      row.push_back(spec.source.name);
      row.push_back(std::to_string(c));
      row.push_back(realized.empty() ? "" : fmt(mean_std(realized).first));
      row.push_back(train::variant_name(variant));
      row.push_back("");
      row.push_back(std::to_string(spec.seed));
      row.push_back("");
      if (hams.empty()) {
        for (int k = 0; k < 9; ++k) row.push_back("");
        row.push_back("failed");
      } else {
        const auto [hm, hs] = mean_std(hams);
        const auto [rm, rs] = mean_std(ranks);
        const auto [om, os] = mean_std(ones);
        const auto [am, as] = mean_std(aps);
        row.push_back(fmt(mean_std(finals).first));
        row.push_back(fmt(hm));
        row.push_back(fmt(rm));
        row.push_back(fmt(om));
        row.push_back(fmt(am));
        row.push_back(fmt(hs));
        row.push_back(fmt(rs));
        row.push_back(fmt(os));
        row.push_back(fmt(as));
        row.push_back(failed == 0 ? "ok" : "partial");
      }
      row.push_back(fmt_ms(wall_total));
      summary_rows.push_back(std::move(row));
    }
  }
  for (auto& row : summary_rows) table.rows.push_back(std::move(row));

  std::filesystem::create_directories(spec.out_dir);
  ExperimentResult result;
  result.csv_path =
      (std::filesystem::path(spec.out_dir) / "results.csv").string();
  write_csv(table, result.csv_path);
  result.table = std::move(table);
  return result;
}

std::vector<ComparisonRow> compare_runs(const ResultTable& table,
                                        const std::string& metric,
                                        const std::string& baseline_variant) {
  if (metric != "hamming_loss" && metric != "ranking_loss" &&
      metric != "one_error" && metric != "average_precision")
    throw std::invalid_argument(
        "compare: metric must be hamming_loss, ranking_loss, one_error, or "
        "average_precision");
  const bool larger_is_better = metric == "average_precision";

  const std::size_t c_kind = table.column("kind");
  const std::size_t c_ds = table.column("dataset");
  const std::size_t c_c = table.column("c");
  const std::size_t c_var = table.column("variant");
  const std::size_t c_rep = table.column("repeat");
  const std::size_t c_seed = table.column("seed");
  const std::size_t c_status = table.column("status");
  const std::size_t c_val = table.column(metric);

  struct RepRow {
    long long repeat;
    std::string seed;
    double value;
  };
  // (dataset, c) cell -> variant -> repeats. Ordered maps keep the cell
  // iteration deterministic; variant order follows first appearance.
  std::map<std::pair<std::string, std::string>,
           std::map<std::string, std::vector<RepRow>>>
      cells;
  std::vector<std::string> variant_order;
  for (const auto& row : table.rows) {
    if (row[c_kind] != "run" || row[c_status] != "ok") continue;
    RepRow rep;
    rep.repeat = std::stoll(row[c_rep]);
    rep.seed = row[c_seed];
    rep.value = std::stod(row[c_val]);
    cells[{row[c_ds], row[c_c]}][row[c_var]].push_back(rep);
    if (std::find(variant_order.begin(), variant_order.end(), row[c_var]) ==
        variant_order.end())
      variant_order.push_back(row[c_var]);
  }
  if (cells.empty())
    throw std::runtime_error("compare: table holds no successful runs");
  if (std::find(variant_order.begin(), variant_order.end(),
                baseline_variant) == variant_order.end())
    throw std::runtime_error("compare: baseline variant " + baseline_variant +
                             " has no successful runs in the table");

  std::vector<std::string> contenders;
  for (const std::string& v : variant_order)
    if (v != baseline_variant) contenders.push_back(v);
  if (contenders.empty()) contenders.push_back(baseline_variant);

  auto by_repeat = [](std::vector<RepRow>& rows) {
    std::sort(rows.begin(), rows.end(),
              [](const RepRow& a, const RepRow& b) {
                return a.repeat < b.repeat;
              });
  };

  std::map<std::string, ComparisonRow> counts;
  for (auto& [cell_key, variants] : cells) {
    auto base_it = variants.find(baseline_variant);
    if (base_it == variants.end())
      throw std::runtime_error("compare: baseline variant missing from cell "
                               "(dataset=" + cell_key.first +
                               ", c=" + cell_key.second + ")");
    by_repeat(base_it->second);
    for (const std::string& v : contenders) {
      auto it = variants.find(v);
      if (it == variants.end())
        throw std::runtime_error("compare: variant " + v +
                                 " missing from cell (dataset=" +
                                 cell_key.first + ", c=" + cell_key.second +
                                 ")");
      by_repeat(it->second);
      const auto& a_rows = it->second;
      const auto& b_rows = base_it->second;
      if (a_rows.size() != b_rows.size())
        throw std::runtime_error(
            "compare: unpaired repeat counts in cell (dataset=" +
            cell_key.first + ", c=" + cell_key.second + ")");
      std::vector<double> a, b;
      for (std::size_t i = 0; i < a_rows.size(); ++i) {
        if (a_rows[i].repeat != b_rows[i].repeat ||
            a_rows[i].seed != b_rows[i].seed)
          throw std::runtime_error(
              "compare: repeats are not seed-matched in cell (dataset=" +
              cell_key.first + ", c=" + cell_key.second + ")");
        a.push_back(a_rows[i].value);
        b.push_back(b_rows[i].value);
      }
      const metrics::PairedTTest t =
          metrics::paired_t_test(a, b, larger_is_better);
      ComparisonRow& row = counts[v];
      row.variant = v;
      switch (t.outcome) {
        case metrics::Outcome::win: ++row.wins; break;
        case metrics::Outcome::tie: ++row.ties; break;
        case metrics::Outcome::loss: ++row.losses; break;
      }
    }
  }

  std::vector<ComparisonRow> out;
  for (const std::string& v : contenders) out.push_back(counts[v]);
  return out;
}

}  // namespace pmlgan::experiment
