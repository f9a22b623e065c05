#pragma once

// Dataset ingestion, label filtering, synthetic candidate-label corruption,
// feature normalization, splitting, and the synthetic fixture generator.
// File formats are documented bit-exactly in docs/formats.md.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pmlgan/matrix.hpp"
#include "pmlgan/rng.hpp"

namespace pmlgan::data {

struct MultiLabelDataset {
  Matrix x;             // N x d features
  Matrix y_candidate;   // N x L binary candidate labels
  std::optional<Matrix> y_true;  // N x L binary ground truth, when known
  std::vector<std::string> label_names;
  // Per-feature (min, max) of the training split this dataset was scaled
  // against; empty before normalize_features.
  std::vector<std::pair<double, double>> feature_scaler;
  // Mean candidate count produced by inject_noise; 0 before corruption.
  double realized_avg_candidates = 0.0;

  std::size_t size() const { return x.rows(); }
  std::size_t feature_dim() const { return x.cols(); }
  std::size_t label_dim() const { return y_candidate.cols(); }

  // Declares the stored candidate labels to be ground truth (clean data).
  void adopt_labels_as_truth() { y_true = y_candidate; }
};

enum class FileFormat { dense_csv, sparse_svm };
FileFormat parse_format(const std::string& name);

// Loads a dataset file. Relative paths that do not resolve directly are
// retried under $PMLGAN_DATA_DIR when that is set. Instances without any
// candidate label are rejected with a diagnostic on stderr; malformed lines
// raise an error naming the line.
MultiLabelDataset load_dataset(const std::string& path, FileFormat format);

// Writes the dense_csv form (features plus one label block: candidates by
// default, ground truth when write_truth). Reloading reproduces the
// matrices bit for bit.
void save_dense_csv(const MultiLabelDataset& ds, const std::string& path,
                    bool write_truth = false);

// Keeps the max_classes most frequent candidate labels (ties by original
// index ascending) and drops instances left without candidates.
MultiLabelDataset filter_labels(const MultiLabelDataset& ds,
                                std::size_t max_classes = 15);

struct CorruptionSpec {
  std::size_t target_candidate_count = 1;
  std::uint64_t seed = 0;
};

// Pads each instance's candidate set with irrelevant labels drawn uniformly
// without replacement until it holds target_candidate_count labels (or all
// of them). Requires ground truth; never removes a true label.
MultiLabelDataset inject_noise(const MultiLabelDataset& ds,
                               const CorruptionSpec& spec);

// Per-feature affine map of the training min/max onto [-1, 1] (constant
// features to 0), applied identically to the other datasets, whose values
// may then fall outside [-1, 1].
void normalize_features(MultiLabelDataset& train,
                        std::vector<MultiLabelDataset*> others = {});

// Seeded uniform permutation split into (train, test).
std::pair<MultiLabelDataset, MultiLabelDataset> split(
    const MultiLabelDataset& ds, double ratio, Rng& rng);

// Score matrices as text: header "N L", then one comma-separated row per
// instance. Round-trips bit for bit.
Matrix load_scores_csv(const std::string& path);
void save_scores_csv(const Matrix& scores, const std::string& path);

// Synthetic fixture: standard-normal features, a fixed random linear
// teacher, and Y_true = the teacher's top-r labels per instance with
// r ~ 1 + min(Poisson(avg_true_labels - 1), L - 1). Candidates start equal
// to the truth; corruption is a separate step.
MultiLabelDataset make_synthetic(std::size_t n, std::size_t d, std::size_t l,
                                 double avg_true_labels, std::uint64_t seed);

}  // namespace pmlgan::data
