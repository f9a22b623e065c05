#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "pmlgan/checkpoint.hpp"
#include "pmlgan/config.hpp"
#include "pmlgan/data.hpp"
#include "pmlgan/model.hpp"
#include "pmlgan/nn.hpp"
#include "pmlgan/rng.hpp"
#include "pmlgan/train.hpp"

using namespace pmlgan;
using config::Config;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name)
      : path((std::filesystem::temp_directory_path() / name).string()) {}
  ~TempFile() { std::remove(path.c_str()); }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

bool same_adam(const nn::AdamState& a, const nn::AdamState& b) {
  return a.lr == b.lr && a.beta1 == b.beta1 && a.beta2 == b.beta2 &&
         a.eps == b.eps && a.t == b.t && a.m == b.m && a.v == b.v;
}

}  // namespace

TEST_CASE("config parses assignments, comments, and blank lines") {
  const Config cfg = Config::parse_string(
      "# leading comment\n"
      "\n"
      "  epochs = 25   # trailing comment\n"
      "name=scene\n"
      "rate =\t0.5\n");
  CHECK(cfg.has("epochs"));
  CHECK(cfg.get_int("epochs") == 25);
  CHECK(cfg.get_string("name") == "scene");
  CHECK(cfg.get_double("rate") == 0.5);
  CHECK_FALSE(cfg.has("missing"));
}

TEST_CASE("config rejects malformed lines") {
  CHECK_THROWS_WITH_AS(Config::parse_string("epochs 25\n", "bad.cfg"),
                       doctest::Contains("bad.cfg:1"), std::runtime_error);
  CHECK_THROWS_WITH_AS(Config::parse_string("ok = 1\n = 2\n", "bad.cfg"),
                       doctest::Contains("empty key"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      Config::parse_string("epochs = 1\nepochs = 2\n", "bad.cfg"),
      doctest::Contains("duplicate key 'epochs'"), std::runtime_error);
  CHECK_THROWS_AS((void)Config::parse_file("/nonexistent/path.cfg"),
                  std::runtime_error);
}

TEST_CASE("config typed accessors convert and validate") {
  const Config cfg = Config::parse_string(
      "count = 12\n"
      "weight = -0.25\n"
      "flag_on = true\n"
      "flag_off = 0\n"
      "flag_bad = yes\n"
      "grid = 0.001, 0.01,0.1\n"
      "grid_bad = 1,,2\n"
      "text = hello\n"
      "negative = -3\n");

  CHECK(cfg.get_int("count") == 12);
  CHECK(cfg.get_size("count", 0) == 12);
  CHECK(cfg.get_double("weight") == -0.25);
  CHECK(cfg.get_bool("flag_on", false));
  CHECK_FALSE(cfg.get_bool("flag_off", true));
  CHECK(cfg.get_double_list("grid") ==
        std::vector<double>{0.001, 0.01, 0.1});

  CHECK(cfg.get_int("absent", 7) == 7);
  CHECK(cfg.get_double("absent", 2.5) == 2.5);
  CHECK(cfg.get_string("absent", "d") == "d");
  CHECK(cfg.get_bool("absent", true));
  CHECK(cfg.get_double_list("absent", {1.0}) == std::vector<double>{1.0});

  CHECK_THROWS_WITH_AS((void)cfg.get_int("text"),
                       doctest::Contains("not an integer"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS((void)cfg.get_double("text"),
                       doctest::Contains("not a number"), std::runtime_error);
  CHECK_THROWS_WITH_AS((void)cfg.get_bool("flag_bad", false),
                       doctest::Contains("must be true, false, 1, or 0"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS((void)cfg.get_double_list("grid_bad"),
                       doctest::Contains("empty list element"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS((void)cfg.get_size("negative", 0),
                       doctest::Contains("non-negative"), std::runtime_error);
  CHECK_THROWS_WITH_AS((void)cfg.get_string("nowhere"),
                       doctest::Contains("missing required key 'nowhere'"),
                       std::runtime_error);
}

TEST_CASE("config rejects numbers with trailing characters") {
  const Config cfg = Config::parse_string("count = 12x\nrate = 0.5 0.6\n");
  CHECK_THROWS_WITH_AS((void)cfg.get_int("count"),
                       doctest::Contains("trailing characters"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS((void)cfg.get_double("rate"),
                       doctest::Contains("trailing characters"),
                       std::runtime_error);
}

TEST_CASE("config tracks which keys were consumed") {
  const Config cfg = Config::parse_string("a = 1\nb = 2\nc = 3\n");
  CHECK(cfg.unused_keys() == std::vector<std::string>{"a", "b", "c"});
  (void)cfg.get_int("b");
  CHECK(cfg.unused_keys() == std::vector<std::string>{"a", "c"});
  (void)cfg.get_int("a");
  (void)cfg.get_int("c");
  CHECK(cfg.unused_keys().empty());
}

TEST_CASE("checkpoint round-trips a freshly built model") {
  Rng rng(101);
  model::PmlGanModel m = model::make_model(5, 3, 8, 0.25, rng);

  TempFile tmp("pmlgan_ckpt_fresh.ckpt");
  checkpoint::save(tmp.path, m);
  const checkpoint::Loaded loaded = checkpoint::load(tmp.path);

  CHECK_FALSE(loaded.opt.has_value());
  CHECK(loaded.model.beta == 0.25);
  CHECK(loaded.model.feature_dim == 5);
  CHECK(loaded.model.label_dim == 3);
  CHECK(nn::param_hash(loaded.model.predictor) ==
        nn::param_hash(m.predictor));
  CHECK(nn::param_hash(loaded.model.disambiguator) ==
        nn::param_hash(m.disambiguator));
  CHECK(nn::param_hash(loaded.model.generator) ==
        nn::param_hash(m.generator));
  CHECK(nn::param_hash(loaded.model.discriminator) ==
        nn::param_hash(m.discriminator));
}

TEST_CASE("checkpoint preserves bias-free layers and running statistics") {
  Rng rng(103);
  model::PmlGanModel m = model::make_model(4, 3, 6, 1.0, rng);

  // Move the generator's normalization statistics off their initial values
  // so the round-trip has something nontrivial to preserve.
  Rng draw(7);
  Matrix z(6, 3);
  for (std::size_t i = 0; i < z.size(); ++i)
    z.data()[i] = draw.uniform01() < 0.5 ? 0.0 : 1.0;
  (void)m.generator.forward(z, nn::Mode::train);

  TempFile tmp("pmlgan_ckpt_bn.ckpt");
  checkpoint::save(tmp.path, m);
  checkpoint::Loaded loaded = checkpoint::load(tmp.path);

  const auto& first =
      std::get<nn::AffineLayer>(loaded.model.generator.layers().front());
  CHECK(first.b.empty());
  bool saw_bias = false;
  for (const auto& layer : loaded.model.generator.layers()) {
    if (const auto* aff = std::get_if<nn::AffineLayer>(&layer))
      saw_bias = saw_bias || !aff->b.empty();
  }
  CHECK(saw_bias);  // the output map keeps its bias

  const Matrix before = m.generator.forward(z, nn::Mode::eval);
  Matrix after = loaded.model.generator.forward(z, nn::Mode::eval);
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i)
    CHECK(before.data()[i] == after.data()[i]);
}

TEST_CASE("checkpoint round-trips optimizer state") {
  data::MultiLabelDataset ds = data::make_synthetic(24, 4, 3, 1.5, 107);
  train::TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.prior_samples = 8;
  cfg.epochs = 2;
  cfg.hidden_width = 6;
  cfg.beta_grid = {0.1};
  cfg.variant = train::Variant::pml_gan;
  const train::TrainedRun run = train::train_fresh(ds, cfg, 0.1);

  TempFile tmp("pmlgan_ckpt_opt.ckpt");
  checkpoint::save(tmp.path, run.model, &run.opt);
  const checkpoint::Loaded loaded = checkpoint::load(tmp.path);

  REQUIRE(loaded.opt.has_value());
  CHECK(loaded.opt->predictor.t > 0);
  CHECK(same_adam(loaded.opt->predictor, run.opt.predictor));
  CHECK(same_adam(loaded.opt->disambiguator, run.opt.disambiguator));
  CHECK(same_adam(loaded.opt->generator, run.opt.generator));
  CHECK(same_adam(loaded.opt->discriminator, run.opt.discriminator));
}

TEST_CASE("checkpoint load rejects damaged files") {
  CHECK_THROWS_WITH_AS((void)checkpoint::load("/nonexistent/model.ckpt"),
                       doctest::Contains("cannot open checkpoint"),
                       std::runtime_error);

  TempFile bad("pmlgan_ckpt_bad_magic.ckpt");
  write_file(bad.path, "NOTACKPT and then some");
  CHECK_THROWS_WITH_AS((void)checkpoint::load(bad.path),
                       doctest::Contains("bad magic"), std::runtime_error);

  Rng rng(109);
  model::PmlGanModel m = model::make_model(3, 2, 4, 1.0, rng);
  TempFile good("pmlgan_ckpt_damaged.ckpt");
  checkpoint::save(good.path, m);

  std::ifstream in(good.path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  in.close();
  REQUIRE(bytes.size() > 64);

  TempFile truncated("pmlgan_ckpt_truncated.ckpt");
  write_file(truncated.path, bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_WITH_AS((void)checkpoint::load(truncated.path),
                       doctest::Contains("truncated"), std::runtime_error);

  TempFile padded("pmlgan_ckpt_padded.ckpt");
  write_file(padded.path, bytes + '\0');
  CHECK_THROWS_WITH_AS((void)checkpoint::load(padded.path),
                       doctest::Contains("trailing bytes"),
                       std::runtime_error);
}
