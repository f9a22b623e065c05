#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "pmlgan/experiment.hpp"
#include "pmlgan/train.hpp"

using namespace pmlgan;
using experiment::ExperimentSpec;
using experiment::ResultTable;
using train::Variant;

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name)
      : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

ExperimentSpec small_spec(const std::string& out_dir) {
  ExperimentSpec spec;
  spec.source.synthetic = true;
  spec.source.name = "toy";
  spec.source.n = 60;
  spec.source.d = 5;
  spec.source.l = 4;
  spec.source.avg_true_labels = 1.5;
  spec.corruption_targets = {2};
  spec.variants = {Variant::cls_ml};
  spec.repeats = 2;
  spec.seed = 11;
  spec.out_dir = out_dir;
  spec.train.batch_size = 8;
  spec.train.prior_samples = 8;
  spec.train.epochs = 2;
  spec.train.hidden_width = 6;
  spec.train.beta_grid = {0.1};
  return spec;
}

// A blank row of the standard width whose named cells can then be assigned.
std::vector<std::string> blank_row(const ResultTable& t) {
  return std::vector<std::string>(t.header.size(), "");
}

void set_cell(ResultTable& t, std::vector<std::string>& row,
              const std::string& name, const std::string& value) {
  row[t.column(name)] = value;
}

// One successful detail row, enough for compare_runs to consume.
void add_run_row(ResultTable& t, const std::string& variant, int repeat,
                 const std::string& metric, double value,
                 const std::string& c = "3") {
  std::vector<std::string> row = blank_row(t);
  set_cell(t, row, "kind", "run");
  set_cell(t, row, "dataset", "toy");
  set_cell(t, row, "c", c);
  set_cell(t, row, "variant", variant);
  set_cell(t, row, "repeat", std::to_string(repeat));
  set_cell(t, row, "seed", "seed" + c + std::to_string(repeat));
  set_cell(t, row, "status", "ok");
  set_cell(t, row, metric, std::to_string(value));
  t.rows.push_back(std::move(row));
}

}  // namespace

TEST_CASE("spec validation rejects out-of-range settings") {
  ExperimentSpec ok = small_spec(".");
  CHECK_NOTHROW(ok.validate());

  const auto rejects = [](void (*tweak)(ExperimentSpec&)) {
    ExperimentSpec spec;
    tweak(spec);
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  };
  rejects([](ExperimentSpec& s) { s.repeats = 0; });
  rejects([](ExperimentSpec& s) { s.corruption_targets.clear(); });
  rejects([](ExperimentSpec& s) { s.corruption_targets = {0}; });
  rejects([](ExperimentSpec& s) { s.variants.clear(); });
  rejects([](ExperimentSpec& s) { s.split_ratio = 0.0; });
  rejects([](ExperimentSpec& s) { s.split_ratio = 1.0; });
  rejects([](ExperimentSpec& s) { s.max_classes = 0; });
  rejects([](ExperimentSpec& s) { s.source.n = 4; });
  rejects([](ExperimentSpec& s) { s.source.l = 1; });
  rejects([](ExperimentSpec& s) { s.source.avg_true_labels = 0.5; });
  rejects([](ExperimentSpec& s) {
    s.source.synthetic = false;
    s.source.path.clear();
  });
  rejects([](ExperimentSpec& s) { s.train.epochs = 0; });
}

TEST_CASE("experiment emits detail rows then per-cell summaries") {
  TempDir dir("pmlgan_exp_rows");
  const ExperimentSpec spec = small_spec(dir.file("out"));
  const experiment::ExperimentResult result = experiment::run_experiment(spec);
  const ResultTable& t = result.table;

  CHECK(t.header == experiment::result_columns());
  REQUIRE(t.rows.size() == 3);  // two repeats plus one summary

  const std::size_t c_kind = t.column("kind");
  const std::size_t c_status = t.column("status");
  const std::size_t c_repeat = t.column("repeat");
  const std::size_t c_variant = t.column("variant");
  const std::size_t c_beta = t.column("beta");
  const std::size_t c_ap = t.column("average_precision");

  for (std::size_t r = 0; r < 2; ++r) {
    const auto& row = t.rows[r];
    CHECK(row[c_kind] == "run");
    CHECK(row[c_status] == "ok");
    CHECK(row[c_repeat] == std::to_string(r));
    CHECK(row[c_variant] == "CLS-ML");
    CHECK(row[c_beta] == "0.10000000000000001");
    const double ap = std::stod(row[c_ap]);
    CHECK(ap >= 0.0);
    CHECK(ap <= 1.0);
  }
  const auto& summary = t.rows[2];
  CHECK(summary[c_kind] == "summary");
  CHECK(summary[c_status] == "ok");
  CHECK(summary[c_repeat].empty());
  CHECK(summary[c_beta].empty());
  CHECK(summary[t.column("seed")] == std::to_string(spec.seed));
  CHECK_FALSE(summary[t.column("average_precision_std")].empty());

  // The table also landed on disk and reads back identically.
  CHECK(std::filesystem::exists(result.csv_path));
  const ResultTable reread = experiment::read_csv(result.csv_path);
  CHECK(reread.header == t.header);
  CHECK(reread.rows == t.rows);
}

TEST_CASE("rerunning a spec reproduces every cell except wall time") {
  TempDir dir("pmlgan_exp_repro");
  ExperimentSpec spec = small_spec(dir.file("a"));
  const ResultTable a = experiment::run_experiment(spec).table;
  spec.out_dir = dir.file("b");
  const ResultTable b = experiment::run_experiment(spec).table;

  REQUIRE(a.rows.size() == b.rows.size());
  const std::size_t c_wall = a.column("wall_ms");
  for (std::size_t r = 0; r < a.rows.size(); ++r) {
    REQUIRE(a.rows[r].size() == b.rows[r].size());
    for (std::size_t c = 0; c < a.rows[r].size(); ++c) {
      if (c == c_wall) continue;
      CHECK(a.rows[r][c] == b.rows[r][c]);
    }
  }
}

TEST_CASE("corruption sweep emits one block per target") {
  TempDir dir("pmlgan_exp_sweep");
  ExperimentSpec spec = small_spec(dir.file("out"));
  spec.corruption_targets = {2, 3};
  spec.repeats = 1;
  const ResultTable t = experiment::run_experiment(spec).table;

  REQUIRE(t.rows.size() == 4);  // (run + summary) per target
  const std::size_t c_kind = t.column("kind");
  const std::size_t c_c = t.column("c");
  const std::size_t c_realized = t.column("realized_avg_cl");
  CHECK(t.rows[0][c_kind] == "run");
  CHECK(t.rows[0][c_c] == "2");
  CHECK(t.rows[1][c_kind] == "run");
  CHECK(t.rows[1][c_c] == "3");
  CHECK(t.rows[2][c_kind] == "summary");
  CHECK(t.rows[3][c_kind] == "summary");
  // A higher target pads in more candidates.
  CHECK(std::stod(t.rows[0][c_realized]) < std::stod(t.rows[1][c_realized]));
}

TEST_CASE("compare_runs scores a lone variant against itself as ties") {
  TempDir dir("pmlgan_exp_self");
  const ExperimentSpec spec = small_spec(dir.file("out"));
  const ResultTable t = experiment::run_experiment(spec).table;

  const auto rows =
      experiment::compare_runs(t, "average_precision", "CLS-ML");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].variant == "CLS-ML");
  CHECK(rows[0].wins == 0);
  CHECK(rows[0].ties == 1);
  CHECK(rows[0].losses == 0);
}

TEST_CASE("compare_runs orients outcomes by the metric's direction") {
  ResultTable t;
  t.header = experiment::result_columns();
  // Five seed-matched repeats where A sits a tenth above the baseline on
  // both metrics; that is a win on a reward and a loss on an error rate.
  const double deltas[5] = {0.10, 0.11, 0.09, 0.10, 0.12};
  for (int r = 0; r < 5; ++r) {
    add_run_row(t, "A", r, "average_precision", 0.5 + deltas[r]);
    add_run_row(t, "B", r, "average_precision", 0.5);
  }
  auto rows = experiment::compare_runs(t, "average_precision", "B");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].variant == "A");
  CHECK(rows[0].wins == 1);
  CHECK(rows[0].ties == 0);
  CHECK(rows[0].losses == 0);

  ResultTable h;
  h.header = experiment::result_columns();
  for (int r = 0; r < 5; ++r) {
    add_run_row(h, "A", r, "hamming_loss", 0.2 + deltas[r]);
    add_run_row(h, "B", r, "hamming_loss", 0.2);
  }
  rows = experiment::compare_runs(h, "hamming_loss", "B");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].losses == 1);

  // Outcome counts accumulate across (dataset, c) cells.
  ResultTable multi;
  multi.header = experiment::result_columns();
  for (int r = 0; r < 5; ++r) {
    add_run_row(multi, "A", r, "average_precision", 0.5 + deltas[r], "2");
    add_run_row(multi, "B", r, "average_precision", 0.5, "2");
    add_run_row(multi, "A", r, "average_precision", 0.5, "7");
    add_run_row(multi, "B", r, "average_precision", 0.5, "7");
  }
  rows = experiment::compare_runs(multi, "average_precision", "B");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].wins + rows[0].ties + rows[0].losses == 2);
  CHECK(rows[0].wins == 1);
  CHECK(rows[0].ties == 1);
}

TEST_CASE("compare_runs validates its inputs") {
  ResultTable t;
  t.header = experiment::result_columns();
  for (int r = 0; r < 3; ++r) {
    add_run_row(t, "A", r, "average_precision", 0.5);
    add_run_row(t, "B", r, "average_precision", 0.4);
  }
  CHECK_THROWS_AS(
      (void)experiment::compare_runs(t, "accuracy", "B"),
      std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      (void)experiment::compare_runs(t, "average_precision", "C"),
      doctest::Contains("has no successful runs"), std::runtime_error);

  ResultTable empty;
  empty.header = experiment::result_columns();
  CHECK_THROWS_WITH_AS(
      (void)experiment::compare_runs(empty, "average_precision", "B"),
      doctest::Contains("no successful runs"), std::runtime_error);

  // Unequal repeat counts cannot be paired.
  ResultTable ragged;
  ragged.header = experiment::result_columns();
  for (int r = 0; r < 3; ++r)
    add_run_row(ragged, "A", r, "average_precision", 0.5);
  for (int r = 0; r < 2; ++r)
    add_run_row(ragged, "B", r, "average_precision", 0.4);
  CHECK_THROWS_WITH_AS(
      (void)experiment::compare_runs(ragged, "average_precision", "B"),
      doctest::Contains("unpaired repeat counts"), std::runtime_error);

  // Equal counts but mismatched repeat indices are not seed-matched pairs.
  ResultTable skewed;
  skewed.header = experiment::result_columns();
  add_run_row(skewed, "A", 0, "average_precision", 0.5);
  add_run_row(skewed, "A", 1, "average_precision", 0.5);
  add_run_row(skewed, "B", 0, "average_precision", 0.4);
  add_run_row(skewed, "B", 2, "average_precision", 0.4);
  CHECK_THROWS_WITH_AS(
      (void)experiment::compare_runs(skewed, "average_precision", "B"),
      doctest::Contains("not seed-matched"), std::runtime_error);
}

TEST_CASE("csv writer round-trips and rejects malformed tables") {
  TempDir dir("pmlgan_exp_csv");
  ResultTable t;
  t.header = {"a", "b"};
  t.rows = {{"1", "x"}, {"2", ""}};
  const std::string path = dir.file("table.csv");
  experiment::write_csv(t, path);
  const ResultTable back = experiment::read_csv(path);
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);

  ResultTable comma = t;
  comma.rows[0][1] = "x,y";
  CHECK_THROWS_AS(experiment::write_csv(comma, dir.file("bad1.csv")),
                  std::invalid_argument);
  ResultTable ragged = t;
  ragged.rows[0].push_back("extra");
  CHECK_THROWS_AS(experiment::write_csv(ragged, dir.file("bad2.csv")),
                  std::invalid_argument);

  CHECK_THROWS_AS((void)experiment::read_csv(dir.file("missing.csv")),
                  std::runtime_error);
  std::ofstream(dir.file("empty.csv")).close();
  CHECK_THROWS_WITH_AS((void)experiment::read_csv(dir.file("empty.csv")),
                       doctest::Contains("empty table"), std::runtime_error);
  std::ofstream ragged_file(dir.file("ragged.csv"));
  ragged_file << "a,b\n1\n";
  ragged_file.close();
  CHECK_THROWS_WITH_AS((void)experiment::read_csv(dir.file("ragged.csv")),
                       doctest::Contains("row width differs"),
                       std::runtime_error);

  CHECK(t.column("b") == 1);
  CHECK_THROWS_AS((void)t.column("z"), std::exception);
}

TEST_CASE("load_spec parses the documented keys") {
  TempDir dir("pmlgan_exp_spec");
  const std::string path = dir.file("exp.cfg");
  std::ofstream out(path);
  out << "dataset = synthetic\n"
         "dataset_name = desk\n"
         "synthetic_n = 80\n"
         "synthetic_d = 6\n"
         "synthetic_l = 5\n"
         "synthetic_avg_labels = 2.0\n"
         "corruption_targets = 2, 4\n"
         "variants = PML-GAN, CLS-ML\n"
         "repeats = 3\n"
         "split_ratio = 0.75\n"
         "max_classes = 10\n"
         "seed = 21\n"
         "out_dir = " << dir.file("out") << "\n"
         "batch_size = 16\n"
         "prior_samples = 32\n"
         "disc_steps = 2\n"
         "beta_grid = 0.01, 0.1\n"
         "epochs = 4\n"
         "learning_rate = 0.002\n"
         "prior_kind = bernoulli\n"
         "hidden_width = 12\n"
         "nonsaturating_generator = true\n"
         "freeze_disambiguator = false\n";
  out.close();

  const ExperimentSpec spec = experiment::load_spec(path);
  CHECK(spec.source.synthetic);
  CHECK(spec.source.name == "desk");
  CHECK(spec.source.n == 80);
  CHECK(spec.source.d == 6);
  CHECK(spec.source.l == 5);
  CHECK(spec.source.avg_true_labels == 2.0);
  CHECK(spec.corruption_targets == std::vector<std::size_t>{2, 4});
  CHECK(spec.variants ==
        std::vector<Variant>{Variant::pml_gan, Variant::cls_ml});
  CHECK(spec.repeats == 3);
  CHECK(spec.split_ratio == 0.75);
  CHECK(spec.max_classes == 10);
  CHECK(spec.seed == 21);
  CHECK(spec.train.batch_size == 16);
  CHECK(spec.train.prior_samples == 32);
  CHECK(spec.train.disc_steps == 2);
  CHECK(spec.train.beta_grid == std::vector<double>{0.01, 0.1});
  CHECK(spec.train.epochs == 4);
  CHECK(spec.train.learning_rate == 0.002);
  CHECK(spec.train.prior_kind == train::PriorKind::bernoulli_marginal);
  CHECK(spec.train.hidden_width == 12);
  CHECK(spec.train.nonsaturating_generator);
  CHECK_FALSE(spec.train.freeze_disambiguator);
  CHECK(spec.train.seed == 21);
}

TEST_CASE("load_spec rejects unknown keys and bad targets") {
  TempDir dir("pmlgan_exp_badspec");
  const std::string bogus = dir.file("bogus.cfg");
  std::ofstream(bogus) << "dataset = synthetic\nbogus_key = 1\n";
  CHECK_THROWS_WITH_AS((void)experiment::load_spec(bogus),
                       doctest::Contains("unknown keys: bogus_key"),
                       std::runtime_error);

  const std::string frac = dir.file("frac.cfg");
  std::ofstream(frac) << "corruption_targets = 2.5\n";
  CHECK_THROWS_WITH_AS((void)experiment::load_spec(frac),
                       doctest::Contains("positive integers"),
                       std::runtime_error);

  const std::string file_ds = dir.file("file.cfg");
  std::ofstream(file_ds) << "dataset = /data/scene.csv\nformat = dense_csv\n";
  const ExperimentSpec spec = experiment::load_spec(file_ds);
  CHECK_FALSE(spec.source.synthetic);
  CHECK(spec.source.path == "/data/scene.csv");
  CHECK(spec.source.name == "scene");
}
