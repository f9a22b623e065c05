#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "pmlgan/data.hpp"
#include "pmlgan/rng.hpp"

using namespace pmlgan;
using namespace pmlgan::data;

namespace {

// Unique scratch file per test body; removed on destruction.
struct TempFile {
  std::string path;

  explicit TempFile(const std::string& name) {
    path = (std::filesystem::temp_directory_path() /
            ("pmlgan_test_" + name))
               .string();
  }
  ~TempFile() { std::remove(path.c_str()); }

  void write(const std::string& text) const {
    std::ofstream f(path);
    f << text;
  }
};

}  // namespace

TEST_CASE("dense loader parses the hand-written fixture exactly") {
  TempFile tf("dense.csv");
  tf.write(
      "2 3 2\n"
      "1.5,-2,0.25,1,0\n"
      "0,4.5,-1,1,1\n");
  const MultiLabelDataset ds = load_dataset(tf.path, FileFormat::dense_csv);
  CHECK(ds.size() == 2);
  CHECK(ds.feature_dim() == 3);
  CHECK(ds.label_dim() == 2);
  CHECK(ds.x == Matrix{{1.5, -2.0, 0.25}, {0.0, 4.5, -1.0}});
  CHECK(ds.y_candidate == Matrix{{1.0, 0.0}, {1.0, 1.0}});
  CHECK_FALSE(ds.y_true.has_value());
}

TEST_CASE("dense loader rejects malformed content with line numbers") {
  TempFile tf("dense_bad.csv");

  tf.write("2 3\n");
  CHECK_THROWS_WITH_AS(
      (void)load_dataset(tf.path, FileFormat::dense_csv),
      doctest::Contains(":1:"), std::runtime_error);

  tf.write("1 2 1\n0.5,bad,1\n");
  CHECK_THROWS_WITH_AS(
      (void)load_dataset(tf.path, FileFormat::dense_csv),
      doctest::Contains(":2:"), std::runtime_error);

  tf.write("1 2 1\n0.5,1.0,2\n");  // label must be 0 or 1
  CHECK_THROWS(load_dataset(tf.path, FileFormat::dense_csv));

  tf.write("2 2 1\n0.5,1.0,1\n");  // fewer rows than the header claims
  CHECK_THROWS(load_dataset(tf.path, FileFormat::dense_csv));

  CHECK_THROWS(load_dataset("/no/such/file.csv", FileFormat::dense_csv));
}

TEST_CASE("dense loader skips zero-candidate instances") {
  TempFile tf("dense_skip.csv");
  tf.write(
      "3 1 2\n"
      "1,1,0\n"
      "2,0,0\n"
      "3,0,1\n");
  const MultiLabelDataset ds = load_dataset(tf.path, FileFormat::dense_csv);
  CHECK(ds.size() == 2);
  CHECK(ds.x == Matrix{{1.0}, {3.0}});

  tf.write("1 1 1\n5,0\n");  // every instance empty
  CHECK_THROWS(load_dataset(tf.path, FileFormat::dense_csv));
}

TEST_CASE("sparse loader parses the reference line") {
  TempFile tf("sparse.svm");
  tf.write(
      "1,3 2:0.5\n"
      "2 1:1.0 2:-2.5\n");
  const MultiLabelDataset ds = load_dataset(tf.path, FileFormat::sparse_svm);
  CHECK(ds.size() == 2);
  CHECK(ds.feature_dim() == 2);
  CHECK(ds.label_dim() == 3);
  CHECK(ds.x == Matrix{{0.0, 0.5}, {1.0, -2.5}});
  CHECK(ds.y_candidate == Matrix{{1.0, 0.0, 1.0}, {0.0, 1.0, 0.0}});
}

TEST_CASE("sparse loader skips label-free lines and flags bad ones") {
  TempFile tf("sparse_bad.svm");
  tf.write(
      "1:0.5 2:0.5\n"
      "1 1:2.0\n");
  const MultiLabelDataset ds = load_dataset(tf.path, FileFormat::sparse_svm);
  CHECK(ds.size() == 1);

  tf.write("1 0:0.5\n");  // feature indices are 1-based
  CHECK_THROWS(load_dataset(tf.path, FileFormat::sparse_svm));

  tf.write("1\n2\n");  // no feature entry anywhere: width unknown
  CHECK_THROWS(load_dataset(tf.path, FileFormat::sparse_svm));
}

TEST_CASE("parse_format accepts the two documented names") {
  CHECK(parse_format("dense_csv") == FileFormat::dense_csv);
  CHECK(parse_format("sparse_svm") == FileFormat::sparse_svm);
  CHECK_THROWS(parse_format("arff"));
}

TEST_CASE("dense round-trip is bit-identical") {
  MultiLabelDataset ds = make_synthetic(25, 4, 5, 2.0, 99);
  const CorruptionSpec spec{4, 7};
  ds = inject_noise(ds, spec);

  TempFile tf("roundtrip.csv");
  save_dense_csv(ds, tf.path);
  const MultiLabelDataset back = load_dataset(tf.path, FileFormat::dense_csv);
  CHECK(back.x == ds.x);
  CHECK(back.y_candidate == ds.y_candidate);

  TempFile tt("roundtrip_truth.csv");
  save_dense_csv(ds, tt.path, /*write_truth=*/true);
  const MultiLabelDataset truth = load_dataset(tt.path, FileFormat::dense_csv);
  CHECK(truth.y_candidate == *ds.y_true);
}

TEST_CASE("filter_labels keeps the most frequent labels") {
  MultiLabelDataset ds;
  ds.x = Matrix{{1.0}, {2.0}, {3.0}, {4.0}, {5.0}};
  // Frequencies: label0 -> 5, label1 -> 1, label2 -> 3.
  ds.y_candidate = Matrix{{1.0, 1.0, 1.0},
                          {1.0, 0.0, 1.0},
                          {1.0, 0.0, 1.0},
                          {1.0, 0.0, 0.0},
                          {1.0, 0.0, 0.0}};
  ds.label_names = {"a", "b", "c"};

  const MultiLabelDataset kept = filter_labels(ds, 2);
  CHECK(kept.label_dim() == 2);
  CHECK(kept.label_names == std::vector<std::string>{"a", "c"});
  CHECK(kept.size() == 5);
  CHECK(kept.y_candidate(0, 1) == 1.0);

  // max at or above L is the identity.
  const MultiLabelDataset same = filter_labels(ds, 3);
  CHECK(same.y_candidate == ds.y_candidate);

  // Idempotence.
  const MultiLabelDataset twice = filter_labels(kept, 2);
  CHECK(twice.y_candidate == kept.y_candidate);
}

TEST_CASE("filter_labels drops instances left without candidates") {
  MultiLabelDataset ds;
  ds.x = Matrix{{1.0}, {2.0}, {3.0}};
  // Label 1 is the rarest; instance 2 holds only label 1.
  ds.y_candidate = Matrix{{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  ds.label_names = {"a", "b"};
  const MultiLabelDataset kept = filter_labels(ds, 1);
  CHECK(kept.size() == 2);
  CHECK(kept.label_dim() == 1);

  // The kept labels are the most frequent ones, so an instance can only
  // lose every candidate when all counts are zero.
  MultiLabelDataset empty;
  empty.x = Matrix{{1.0}};
  empty.y_candidate = Matrix{{0.0, 0.0}};
  empty.label_names = {"a", "b"};
  CHECK_THROWS(filter_labels(empty, 1));
}

TEST_CASE("inject_noise pads candidates without touching the truth") {
  MultiLabelDataset ds = make_synthetic(200, 3, 15, 3.0, 5);
  // The synthetic construction starts with candidates equal to the truth.
  CHECK(ds.y_candidate == *ds.y_true);

  const MultiLabelDataset noisy = inject_noise(ds, CorruptionSpec{10, 77});
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    for (std::size_t j = 0; j < noisy.label_dim(); ++j) {
      if ((*noisy.y_true)(i, j) == 1.0) CHECK(noisy.y_candidate(i, j) == 1.0);
    }
  }
  CHECK(*noisy.y_true == *ds.y_true);
}

TEST_CASE("inject_noise hits the target count exactly when it can") {
  MultiLabelDataset ds = make_synthetic(300, 2, 15, 1.0, 11);
  // Force exactly three true labels per instance so the padding arithmetic
  // is predictable.
  Matrix truth(300, 15);
  Rng rng(13);
  for (std::size_t i = 0; i < 300; ++i)
    for (std::size_t j : {rng.uniform_index(5), 5 + rng.uniform_index(5),
                          10 + rng.uniform_index(5)})
      truth(i, j) = 1.0;
  ds.y_true = truth;
  ds.y_candidate = truth;

  const MultiLabelDataset noisy = inject_noise(ds, CorruptionSpec{10, 3});
  CHECK(noisy.realized_avg_candidates == 10.0);
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    double count = 0.0;
    for (std::size_t j = 0; j < 15; ++j) count += noisy.y_candidate(i, j);
    CHECK(count == 10.0);
  }

  // c at or below the true count changes nothing.
  const MultiLabelDataset same = inject_noise(ds, CorruptionSpec{2, 3});
  CHECK(same.y_candidate == *ds.y_true);

  // c = L saturates every instance.
  const MultiLabelDataset full = inject_noise(ds, CorruptionSpec{15, 3});
  for (std::size_t i = 0; i < full.size(); ++i)
    for (std::size_t j = 0; j < 15; ++j)
      CHECK(full.y_candidate(i, j) == 1.0);

  MultiLabelDataset no_truth;
  no_truth.x = Matrix{{1.0}};
  no_truth.y_candidate = Matrix{{1.0}};
  CHECK_THROWS(inject_noise(no_truth, CorruptionSpec{1, 1}));
}

TEST_CASE("normalize_features maps the training range onto [-1, 1]") {
  MultiLabelDataset train;
  train.x = Matrix{{0.0, 5.0}, {10.0, 5.0}};
  train.y_candidate = Matrix{{1.0}, {1.0}};
  MultiLabelDataset test;
  test.x = Matrix{{20.0, 5.0}};
  test.y_candidate = Matrix{{1.0}};

  normalize_features(train, {&test});
  CHECK(train.x == Matrix{{-1.0, 0.0}, {1.0, 0.0}});
  // Held-out values extrapolate through the same affine map.
  CHECK(test.x(0, 0) == 3.0);
  CHECK(test.x(0, 1) == 0.0);
  CHECK(train.feature_scaler.size() == 2);
  CHECK(test.feature_scaler == train.feature_scaler);
}

TEST_CASE("normalize_features keeps every training value inside [-1, 1]") {
  MultiLabelDataset ds = make_synthetic(100, 6, 3, 1.5, 21);
  normalize_features(ds);
  for (std::size_t i = 0; i < ds.x.size(); ++i) {
    CHECK(ds.x.data()[i] >= -1.0);
    CHECK(ds.x.data()[i] <= 1.0);
  }
}

TEST_CASE("split respects the ratio and partitions the indices") {
  const MultiLabelDataset ds = make_synthetic(10, 2, 3, 1.5, 31);
  Rng rng(5);
  const auto [train, test] = split(ds, 0.8, rng);
  CHECK(train.size() == 8);
  CHECK(test.size() == 2);

  // Every original row appears exactly once across the two halves.
  std::multiset<double> seen;
  for (std::size_t i = 0; i < train.size(); ++i) seen.insert(train.x(i, 0));
  for (std::size_t i = 0; i < test.size(); ++i) seen.insert(test.x(i, 0));
  std::multiset<double> expected;
  for (std::size_t i = 0; i < ds.size(); ++i) expected.insert(ds.x(i, 0));
  CHECK(seen == expected);

  // Same seed, same partition.
  Rng rng2(5);
  const auto [train2, test2] = split(ds, 0.8, rng2);
  CHECK(train2.x == train.x);
  CHECK(test2.x == test.x);

  Rng rng3(6);
  CHECK_THROWS(split(make_synthetic(4, 2, 3, 1.5, 1), 0.8, rng3));
  CHECK_THROWS(split(ds, 0.0, rng3));
  CHECK_THROWS(split(ds, 1.0, rng3));
}

TEST_CASE("make_synthetic is seed-deterministic with nonempty truth rows") {
  const MultiLabelDataset a = make_synthetic(50, 4, 6, 2.5, 17);
  const MultiLabelDataset b = make_synthetic(50, 4, 6, 2.5, 17);
  CHECK(a.x == b.x);
  CHECK(*a.y_true == *b.y_true);
  const MultiLabelDataset c = make_synthetic(50, 4, 6, 2.5, 18);
  CHECK_FALSE(a.x == c.x);

  for (std::size_t i = 0; i < a.size(); ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < a.label_dim(); ++j)
      row_sum += (*a.y_true)(i, j);
    CHECK(row_sum >= 1.0);
  }
}

TEST_CASE("scores csv round-trips bit for bit") {
  Rng rng(23);
  Matrix scores(7, 3);
  for (std::size_t i = 0; i < scores.size(); ++i)
    scores.data()[i] = rng.uniform(0.0, 1.0);

  TempFile tf("scores.csv");
  save_scores_csv(scores, tf.path);
  CHECK(load_scores_csv(tf.path) == scores);

  TempFile bad("scores_bad.csv");
  bad.write("2 2\n0.5,0.5\n");
  CHECK_THROWS(load_scores_csv(bad.path));
}
