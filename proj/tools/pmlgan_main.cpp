// Command-line entry point: experiment sweeps, dataset corruption, score
// evaluation, table comparison, and the gradient verification suite.
//
// Exit codes: 0 success, 1 usage error, 2 run failure, 3 verification
// failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pmlgan/checkpoint.hpp"
#include "pmlgan/data.hpp"
#include "pmlgan/experiment.hpp"
#include "pmlgan/kernels.hpp"
#include "pmlgan/metrics.hpp"
#include "pmlgan/model.hpp"
#include "pmlgan/train.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRunFailure = 2;
constexpr int kExitVerifyFailure = 3;

int cmd_run(const std::string& config_path,
            const std::optional<long long>& seed,
            const std::optional<std::string>& variant,
            const std::optional<double>& beta,
            const std::optional<std::string>& out_dir) {
  pmlgan::experiment::ExperimentSpec spec =
      pmlgan::experiment::load_spec(config_path);
  if (seed) {
    spec.seed = static_cast<std::uint64_t>(*seed);
    spec.train.seed = spec.seed;
  }
  if (variant) spec.variants = {pmlgan::train::parse_variant(*variant)};
  if (beta) spec.train.beta_grid = {*beta};
  if (out_dir) spec.out_dir = *out_dir;

  const pmlgan::experiment::ExperimentResult result =
      pmlgan::experiment::run_experiment(spec);

  const std::size_t c_kind = result.table.column("kind");
  const std::size_t c_status = result.table.column("status");
  std::size_t runs = 0, failed = 0;
  for (const auto& row : result.table.rows) {
    if (row[c_kind] != "run") continue;
    ++runs;
    if (row[c_status] != "ok") ++failed;
  }
  std::printf("wrote %s (%zu runs, %zu failed)\n", result.csv_path.c_str(),
              runs, failed);
  return kExitOk;
}

// First non-blank line made of exactly three integer tokens marks the dense
// header; anything else is the sparse form.
pmlgan::data::FileFormat sniff_format(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
    if (tokens.empty()) continue;
    if (tokens.size() != 3) return pmlgan::data::FileFormat::sparse_svm;
    for (const std::string& t : tokens) {
      if (t.find_first_not_of("0123456789") != std::string::npos)
        return pmlgan::data::FileFormat::sparse_svm;
    }
    return pmlgan::data::FileFormat::dense_csv;
  }
  throw std::runtime_error(path + ": empty dataset file");
}

int cmd_corrupt(const std::string& in_path, const std::string& format,
                std::size_t target, long long seed,
                const std::string& out_path) {
  pmlgan::data::MultiLabelDataset ds = pmlgan::data::load_dataset(
      in_path, pmlgan::data::parse_format(format));
  ds.adopt_labels_as_truth();
  pmlgan::data::CorruptionSpec spec;
  spec.target_candidate_count = target;
  spec.seed = static_cast<std::uint64_t>(seed);
  const pmlgan::data::MultiLabelDataset corrupted =
      pmlgan::data::inject_noise(ds, spec);
  pmlgan::data::save_dense_csv(corrupted, out_path);
  std::printf("wrote %s (%zu instances, realized avg candidates %.6f)\n",
              out_path.c_str(), corrupted.size(),
              corrupted.realized_avg_candidates);
  return kExitOk;
}

int cmd_eval(const std::string& scores_path, const std::string& truth_path) {
  const pmlgan::Matrix scores = pmlgan::data::load_scores_csv(scores_path);
  const pmlgan::data::MultiLabelDataset truth =
      pmlgan::data::load_dataset(truth_path, sniff_format(truth_path));
  if (truth.size() != scores.rows() || truth.label_dim() != scores.cols())
    throw std::runtime_error(
        "eval: scores are " + std::to_string(scores.rows()) + "x" +
        std::to_string(scores.cols()) + " but the truth labels are " +
        std::to_string(truth.size()) + "x" +
        std::to_string(truth.label_dim()));
  const pmlgan::metrics::EvalReport report =
      pmlgan::metrics::evaluate(scores, truth.y_candidate);
  std::printf("hamming_loss=%.17g\n", report.hamming);
  std::printf("ranking_loss=%.17g\n", report.ranking);
  std::printf("one_error=%.17g\n", report.one_err);
  std::printf("average_precision=%.17g\n", report.avg_prec);
  std::printf("instances=%zu\n", report.n_instances);
  return kExitOk;
}

int cmd_compare(const std::string& table_path, const std::string& metric,
                const std::string& baseline) {
  const pmlgan::experiment::ResultTable table =
      pmlgan::experiment::read_csv(table_path);
  const std::vector<pmlgan::experiment::ComparisonRow> rows =
      pmlgan::experiment::compare_runs(table, metric, baseline);
  std::printf("variant,wins,ties,losses\n");
  for (const auto& row : rows) {
    std::printf("%s,%zu,%zu,%zu\n", row.variant.c_str(), row.wins, row.ties,
                row.losses);
  }
  return kExitOk;
}

int cmd_gradcheck() {
  constexpr double kTol = 1e-4;
  bool all_ok = true;
  auto report = [&](const std::string& name, double err) {
    const bool ok = std::isfinite(err) && err <= kTol;
    std::printf("%-40s max_rel_err=%.3e  [%s]\n", name.c_str(), err,
                ok ? "ok" : "FAIL");
    all_ok = all_ok && ok;
  };

  std::printf("kernel backend: %s\n", pmlgan::kernels::active().name);
  pmlgan::Rng rng(20250817);
  const struct {
    std::size_t d, l, batch, hidden;
  } trials[] = {{4, 3, 3, 5}, {7, 5, 3, 6}, {10, 6, 4, 8}};

  for (const auto& t : trials) {
    pmlgan::model::PmlGanModel m =
        pmlgan::model::make_model(t.d, t.l, t.hidden, 0.7, rng);
    pmlgan::Matrix x(t.batch, t.d);
    for (std::size_t i = 0; i < x.size(); ++i)
      x.data()[i] = rng.uniform(-1.0, 1.0);
    // Candidate rows are never empty in real data; an all-zero row would
    // also park the generator's zero-initialized biases exactly on the
    // leaky-ReLU corner, where finite differences are meaningless.
    pmlgan::Matrix y(t.batch, t.l);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      auto row = y.row(i);
      do {
        for (std::size_t j = 0; j < row.size(); ++j)
          row[j] = rng.bernoulli(0.5) ? 1.0 : 0.0;
      } while (std::count(row.begin(), row.end(), 1.0) == 0);
    }
    // Priors mirror the soft disambiguated labels seen in training.
    pmlgan::Matrix prior(3, t.l);
    for (std::size_t i = 0; i < prior.size(); ++i)
      prior.data()[i] = rng.uniform(0.05, 0.95);

    const pmlgan::model::JointCheckReport rep =
        pmlgan::model::joint_gradient_check_detail(m, x, y, prior);
    const std::string tag = "d=" + std::to_string(t.d) +
                            ",L=" + std::to_string(t.l) +
                            ",m=" + std::to_string(t.batch) + " ";
    report(tag + "predictor", rep.predictor);
    report(tag + "disambiguator", rep.disambiguator);
    report(tag + "generator", rep.generator);
    report(tag + "discriminator(joint)", rep.discriminator);
    report(tag + "discriminator(ascent)",
           pmlgan::model::discriminator_gradient_check(m, x, prior));
  }
  std::printf("gradient verification: %s\n", all_ok ? "PASS" : "FAIL");
  return all_ok ? kExitOk : kExitVerifyFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partial multi-label learning laboratory"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a config-driven experiment");
  std::string run_config;
  std::optional<long long> run_seed;
  std::optional<std::string> run_variant;
  std::optional<double> run_beta;
  std::optional<std::string> run_out;
  run->add_option("--config", run_config, "Experiment config file")
      ->required();
  run->add_option("--seed", run_seed, "Override the experiment seed");
  run->add_option("--variant", run_variant,
                  "Run a single variant (PML-GAN, CLS-GEN, CLS-GAN, CLS-ML, "
                  "RAW-CE)");
  run->add_option("--beta", run_beta,
                  "Pin the trade-off weight instead of selecting from the "
                  "grid");
  run->add_option("--out", run_out, "Output directory");

  auto* corrupt = app.add_subcommand(
      "corrupt", "Pad a clean dataset with irrelevant candidate labels");
  std::string corrupt_in, corrupt_format, corrupt_out;
  std::size_t corrupt_target = 0;
  long long corrupt_seed = 0;
  corrupt->add_option("--in", corrupt_in, "Input dataset")->required();
  corrupt->add_option("--format", corrupt_format,
                      "dense_csv or sparse_svm")
      ->required();
  corrupt->add_option("--target-cl", corrupt_target,
                      "Target candidate count per instance")
      ->required();
  corrupt->add_option("--seed", corrupt_seed, "Corruption seed")->required();
  corrupt->add_option("--out", corrupt_out, "Output dense_csv path")
      ->required();

  auto* eval = app.add_subcommand("eval", "Score predictions against truth");
  std::string eval_scores, eval_truth;
  eval->add_option("--scores", eval_scores, "Score matrix csv")->required();
  eval->add_option("--truth", eval_truth, "Dataset file with true labels")
      ->required();

  auto* compare = app.add_subcommand(
      "compare", "Paired win/tie/loss comparison of a results table");
  std::string compare_table, compare_metric, compare_baseline;
  compare->add_option("--table", compare_table, "results.csv path")
      ->required();
  compare->add_option("--metric", compare_metric,
                      "hamming_loss, ranking_loss, one_error, or "
                      "average_precision")
      ->required();
  compare->add_option("--baseline", compare_baseline, "Baseline variant")
      ->required();

  app.add_subcommand("gradcheck",
                     "Verify analytic gradients against finite differences");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (app.got_subcommand("run"))
      return cmd_run(run_config, run_seed, run_variant, run_beta, run_out);
    if (app.got_subcommand("corrupt"))
      return cmd_corrupt(corrupt_in, corrupt_format, corrupt_target,
                         corrupt_seed, corrupt_out);
    if (app.got_subcommand("eval")) return cmd_eval(eval_scores, eval_truth);
    if (app.got_subcommand("compare"))
      return cmd_compare(compare_table, compare_metric, compare_baseline);
    if (app.got_subcommand("gradcheck")) return cmd_gradcheck();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRunFailure;
  }
  std::fprintf(stderr, "error: no subcommand given\n");
  return kExitUsage;
}
