#include "pmlgan/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace pmlgan::data {

namespace {

[[noreturn]] void parse_fail(const std::string& path, std::size_t line,
                             const std::string& message) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + message);
}

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  auto begin = s.find_first_not_of(ws);
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(ws);
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_double(const std::string& token, const std::string& path,
                    std::size_t line) {
  const std::string t = trim(token);
  if (t.empty()) parse_fail(path, line, "empty numeric field");
  std::size_t consumed = 0;
  double value = 0.0;
  try {
    value = std::stod(t, &consumed);
  } catch (const std::exception&) {
    parse_fail(path, line, "not a number: '" + t + "'");
  }
  if (consumed != t.size())
    parse_fail(path, line, "trailing characters in number: '" + t + "'");
  return value;
}

std::size_t parse_index(const std::string& token, const std::string& path,
                        std::size_t line, const char* what) {
  const std::string t = trim(token);
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
    parse_fail(path, line,
               std::string("bad ") + what + " index: '" + t + "'");
  unsigned long long v = std::stoull(t);
  if (v == 0)
    parse_fail(path, line, std::string(what) + " indices are 1-based");
  return static_cast<std::size_t>(v);
}

std::string resolve_path(const std::string& path) {
  namespace fs = std::filesystem;
  if (fs::exists(path)) return path;
  if (!fs::path(path).is_absolute()) {
    if (const char* dir = std::getenv("PMLGAN_DATA_DIR")) {
      fs::path alt = fs::path(dir) / path;
      if (fs::exists(alt)) return alt.string();
    }
  }
  return path;  // let the open fail with the original name
}

struct SparseRow {
  std::vector<std::size_t> labels;                      // 1-based
  std::vector<std::pair<std::size_t, double>> features; // 1-based
};

MultiLabelDataset load_dense(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);

  std::string line;
  std::size_t line_no = 0;

  // Header: instance count, feature count, label count.
  std::size_t n = 0, d = 0, l = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream hs(line);
    if (!(hs >> n >> d >> l))
      parse_fail(path, line_no, "expected header 'N d L'");
    std::string rest;
    if (hs >> rest) parse_fail(path, line_no, "trailing header content");
    break;
  }
  if (n == 0 || d == 0 || l == 0)
    throw std::runtime_error(path + ": missing or degenerate header");

  Matrix x = Matrix::zeros(n, d);
  Matrix y = Matrix::zeros(n, l);
  std::vector<std::size_t> keep;
  keep.reserve(n);
  std::size_t row = 0;
  std::size_t dropped = 0;
  while (row < n && std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_on(line, ',');
    if (fields.size() != d + l)
      parse_fail(path, line_no,
                 "expected " + std::to_string(d + l) + " fields, got " +
                     std::to_string(fields.size()));
    for (std::size_t j = 0; j < d; ++j)
      x(row, j) = parse_double(fields[j], path, line_no);
    std::size_t candidates = 0;
    for (std::size_t j = 0; j < l; ++j) {
      double v = parse_double(fields[d + j], path, line_no);
      if (v != 0.0 && v != 1.0)
        parse_fail(path, line_no, "label flags must be 0 or 1");
      y(row, j) = v;
      if (v == 1.0) ++candidates;
    }
    if (candidates == 0) {
      std::fprintf(stderr, "%s:%zu: instance has no candidate labels; skipped\n",
                   path.c_str(), line_no);
      ++dropped;
    } else {
      keep.push_back(row);
    }
    ++row;
  }
  if (row < n)
    throw std::runtime_error(path + ": header promises " + std::to_string(n) +
                             " instances, file holds " + std::to_string(row));
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty())
      parse_fail(path, line_no, "content after the declared instances");
  }
  if (keep.empty())
    throw std::runtime_error(path + ": no usable instances");

  MultiLabelDataset ds;
  if (dropped == 0) {
    ds.x = std::move(x);
    ds.y_candidate = std::move(y);
  } else {
    ds.x = gather_rows(x, keep);
    ds.y_candidate = gather_rows(y, keep);
  }
  return ds;
}

MultiLabelDataset load_sparse(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);

  std::vector<SparseRow> rows;
  std::size_t max_label = 0;
  std::size_t max_feature = 0;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dropped = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) continue;
    if (token.find(':') != std::string::npos) {
      std::fprintf(stderr, "%s:%zu: instance has no candidate labels; skipped\n",
                   path.c_str(), line_no);
      ++dropped;
      continue;
    }
    SparseRow r;
    for (const auto& piece : split_on(token, ',')) {
      std::size_t idx = parse_index(piece, path, line_no, "label");
      r.labels.push_back(idx);
      max_label = std::max(max_label, idx);
    }
    while (ls >> token) {
      auto colon = token.find(':');
      if (colon == std::string::npos)
        parse_fail(path, line_no, "expected index:value, got '" + token + "'");
      std::size_t idx =
          parse_index(token.substr(0, colon), path, line_no, "feature");
      double value = parse_double(token.substr(colon + 1), path, line_no);
      r.features.emplace_back(idx, value);
      max_feature = std::max(max_feature, idx);
    }
    rows.push_back(std::move(r));
  }
  (void)dropped;
  if (rows.empty())
    throw std::runtime_error(path + ": no usable instances");
  if (max_feature == 0)
    throw std::runtime_error(path + ": no feature entries anywhere");

  MultiLabelDataset ds;
  ds.x = Matrix::zeros(rows.size(), max_feature);
  ds.y_candidate = Matrix::zeros(rows.size(), max_label);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t idx : rows[i].labels) ds.y_candidate(i, idx - 1) = 1.0;
    for (const auto& [idx, value] : rows[i].features) ds.x(i, idx - 1) = value;
  }
  return ds;
}

void append_number(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

FileFormat parse_format(const std::string& name) {
  if (name == "dense_csv") return FileFormat::dense_csv;
  if (name == "sparse_svm") return FileFormat::sparse_svm;
  throw std::invalid_argument("unknown dataset format: " + name +
                              " (expected dense_csv or sparse_svm)");
}

MultiLabelDataset load_dataset(const std::string& path, FileFormat format) {
  const std::string resolved = resolve_path(path);
  switch (format) {
    case FileFormat::dense_csv: return load_dense(resolved);
    case FileFormat::sparse_svm: return load_sparse(resolved);
  }
  throw std::logic_error("unreachable dataset format");
}

void save_dense_csv(const MultiLabelDataset& ds, const std::string& path,
                    bool write_truth) {
  const Matrix* labels = &ds.y_candidate;
  if (write_truth) {
    if (!ds.y_true)
      throw std::invalid_argument(
          "save_dense_csv: ground truth requested but absent");
    labels = &*ds.y_true;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  std::string buf;
  buf += std::to_string(ds.size());
  buf += ' ';
  buf += std::to_string(ds.feature_dim());
  buf += ' ';
  buf += std::to_string(ds.label_dim());
  buf += '\n';
  out << buf;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    buf.clear();
    for (std::size_t j = 0; j < ds.feature_dim(); ++j) {
      if (j) buf += ',';
      append_number(buf, ds.x(i, j));
    }
    for (std::size_t j = 0; j < ds.label_dim(); ++j) {
      buf += ',';
      append_number(buf, (*labels)(i, j));
    }
    buf += '\n';
    out << buf;
  }
  if (!out) throw std::runtime_error("failed writing dataset file: " + path);
}

MultiLabelDataset filter_labels(const MultiLabelDataset& ds,
                                std::size_t max_classes) {
  if (max_classes == 0)
    throw std::invalid_argument("filter_labels: max_classes must be positive");
  const std::size_t l = ds.label_dim();
  if (l <= max_classes) return ds;

  std::vector<std::size_t> count(l, 0);
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = 0; j < l; ++j)
      if (ds.y_candidate(i, j) == 1.0) ++count[j];

  std::vector<std::size_t> order(l);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (count[a] != count[b]) return count[a] > count[b];
                     return a < b;
                   });
  std::vector<std::size_t> kept(order.begin(),
                                order.begin() +
                                    static_cast<std::ptrdiff_t>(max_classes));
  std::sort(kept.begin(), kept.end());

  std::vector<std::size_t> keep_rows;
  keep_rows.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    bool any = false;
    for (std::size_t j : kept)
      if (ds.y_candidate(i, j) == 1.0) { any = true; break; }
    if (any) keep_rows.push_back(i);
  }
  if (keep_rows.empty())
    throw std::runtime_error(
        "filter_labels: every instance lost all candidate labels");
  if (keep_rows.size() < ds.size())
    std::fprintf(stderr,
                 "filter_labels: dropped %zu instances left without "
                 "candidate labels\n",
                 ds.size() - keep_rows.size());

  MultiLabelDataset out;
  out.x = gather_rows(ds.x, keep_rows);
  out.y_candidate = Matrix::zeros(keep_rows.size(), kept.size());
  for (std::size_t i = 0; i < keep_rows.size(); ++i)
    for (std::size_t j = 0; j < kept.size(); ++j)
      out.y_candidate(i, j) = ds.y_candidate(keep_rows[i], kept[j]);
  if (ds.y_true) {
    Matrix t = Matrix::zeros(keep_rows.size(), kept.size());
    for (std::size_t i = 0; i < keep_rows.size(); ++i)
      for (std::size_t j = 0; j < kept.size(); ++j)
        t(i, j) = (*ds.y_true)(keep_rows[i], kept[j]);
    out.y_true = std::move(t);
  }
  if (!ds.label_names.empty()) {
    for (std::size_t j : kept) out.label_names.push_back(ds.label_names[j]);
  }
  out.feature_scaler = ds.feature_scaler;
  out.realized_avg_candidates = ds.realized_avg_candidates;
  return out;
}

MultiLabelDataset inject_noise(const MultiLabelDataset& ds,
                               const CorruptionSpec& spec) {
  if (!ds.y_true)
    throw std::invalid_argument(
        "inject_noise: dataset has no ground-truth labels to corrupt from");
  if (spec.target_candidate_count == 0)
    throw std::invalid_argument(
        "inject_noise: target candidate count must be positive");

  const std::size_t n = ds.size();
  const std::size_t l = ds.label_dim();
  MultiLabelDataset out = ds;
  out.y_candidate = *ds.y_true;

  Rng rng(spec.seed);
  std::vector<std::size_t> complement;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    complement.clear();
    std::size_t true_count = 0;
    for (std::size_t j = 0; j < l; ++j) {
      if ((*ds.y_true)(i, j) == 1.0) ++true_count;
      else complement.push_back(j);
    }
    std::size_t extras = 0;
    if (spec.target_candidate_count > true_count)
      extras = std::min(spec.target_candidate_count - true_count,
                        l - true_count);
    // Partial Fisher-Yates: the first `extras` slots end up holding a
    // uniform sample without replacement.
    for (std::size_t t = 0; t < extras; ++t) {
      std::size_t j = t + rng.uniform_index(complement.size() - t);
      std::swap(complement[t], complement[j]);
      out.y_candidate(i, complement[t]) = 1.0;
    }
    total += static_cast<double>(true_count + extras);
  }
  out.realized_avg_candidates = total / static_cast<double>(n);
  return out;
}

void normalize_features(MultiLabelDataset& train,
                        std::vector<MultiLabelDataset*> others) {
  const std::size_t n = train.size();
  const std::size_t d = train.feature_dim();
  if (n == 0)
    throw std::invalid_argument("normalize_features: empty training set");
  for (MultiLabelDataset* o : others)
    if (o->feature_dim() != d)
      throw std::invalid_argument(
          "normalize_features: feature dimension mismatch");

  std::vector<std::pair<double, double>> range(d);
  for (std::size_t j = 0; j < d; ++j) {
    double lo = train.x(0, j);
    double hi = lo;
    for (std::size_t i = 1; i < n; ++i) {
      double v = train.x(i, j);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    range[j] = {lo, hi};
  }

  // x' = 2 * (x - min) / (max - min) - 1. At the endpoints the division is
  // exact (p/p == 1), so training values land in [-1, 1] with no rounding
  // spill. Constant features collapse to 0.
  auto apply = [&](MultiLabelDataset& ds) {
    for (std::size_t i = 0; i < ds.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) {
        auto [lo, hi] = range[j];
        if (hi == lo) {
          ds.x(i, j) = 0.0;
        } else {
          ds.x(i, j) = 2.0 * ((ds.x(i, j) - lo) / (hi - lo)) - 1.0;
        }
      }
    ds.feature_scaler = range;
  };
  apply(train);
  for (MultiLabelDataset* o : others) apply(*o);
}

namespace {

MultiLabelDataset take_rows(const MultiLabelDataset& ds,
                            std::span<const std::size_t> rows) {
  MultiLabelDataset out;
  out.x = gather_rows(ds.x, rows);
  out.y_candidate = gather_rows(ds.y_candidate, rows);
  if (ds.y_true) out.y_true = gather_rows(*ds.y_true, rows);
  out.label_names = ds.label_names;
  out.feature_scaler = ds.feature_scaler;
  out.realized_avg_candidates = ds.realized_avg_candidates;
  return out;
}

}  // namespace

std::pair<MultiLabelDataset, MultiLabelDataset> split(
    const MultiLabelDataset& ds, double ratio, Rng& rng) {
  const std::size_t n = ds.size();
  if (n < 5)
    throw std::invalid_argument("split: need at least 5 instances, have " +
                                std::to_string(n));
  if (!(ratio > 0.0 && ratio < 1.0))
    throw std::invalid_argument("split: ratio must lie strictly in (0, 1)");

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);

  auto n_train = static_cast<std::size_t>(
      std::llround(ratio * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  std::span<const std::size_t> all(perm);
  return {take_rows(ds, all.subspan(0, n_train)),
          take_rows(ds, all.subspan(n_train))};
}

Matrix load_scores_csv(const std::string& path) {
  std::ifstream in(resolve_path(path));
  if (!in) throw std::runtime_error("cannot open scores file: " + path);
  std::string line;
  std::size_t line_no = 0;

  std::size_t n = 0, l = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream hs(line);
    if (!(hs >> n >> l)) parse_fail(path, line_no, "expected header 'N L'");
    std::string rest;
    if (hs >> rest) parse_fail(path, line_no, "trailing header content");
    break;
  }
  if (n == 0 || l == 0)
    throw std::runtime_error(path + ": missing or degenerate header");

  Matrix scores = Matrix::zeros(n, l);
  std::size_t row = 0;
  while (row < n && std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_on(line, ',');
    if (fields.size() != l)
      parse_fail(path, line_no,
                 "expected " + std::to_string(l) + " fields, got " +
                     std::to_string(fields.size()));
    for (std::size_t j = 0; j < l; ++j)
      scores(row, j) = parse_double(fields[j], path, line_no);
    ++row;
  }
  if (row < n)
    throw std::runtime_error(path + ": header promises " + std::to_string(n) +
                             " rows, file holds " + std::to_string(row));
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty())
      parse_fail(path, line_no, "content after the declared rows");
  }
  return scores;
}

void save_scores_csv(const Matrix& scores, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scores file: " + path);
  std::string buf;
  buf += std::to_string(scores.rows());
  buf += ' ';
  buf += std::to_string(scores.cols());
  buf += '\n';
  out << buf;
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    buf.clear();
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      if (j) buf += ',';
      append_number(buf, scores(i, j));
    }
    buf += '\n';
    out << buf;
  }
  if (!out) throw std::runtime_error("failed writing scores file: " + path);
}

MultiLabelDataset make_synthetic(std::size_t n, std::size_t d, std::size_t l,
                                 double avg_true_labels, std::uint64_t seed) {
  if (n == 0 || d == 0 || l < 2)
    throw std::invalid_argument(
        "make_synthetic: need n >= 1, d >= 1, l >= 2");
  if (avg_true_labels < 1.0)
    throw std::invalid_argument(
        "make_synthetic: average true-label count must be at least 1");

  Rng rng(seed);
  MultiLabelDataset ds;
  ds.x = Matrix::zeros(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) ds.x(i, j) = rng.normal();

  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Matrix teacher = Matrix::zeros(d, l);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < l; ++j) teacher(i, j) = rng.normal() * scale;

  Matrix scores = matmul(ds.x, teacher);

  Matrix truth = Matrix::zeros(n, l);
  std::vector<std::size_t> order(l);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 1 + std::min<std::size_t>(rng.poisson(avg_true_labels - 1.0),
                                              l - 1);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       if (scores(i, a) != scores(i, b))
                         return scores(i, a) > scores(i, b);
                       return a < b;
                     });
    for (std::size_t k = 0; k < r; ++k) truth(i, order[k]) = 1.0;
  }
  ds.y_candidate = truth;
  ds.y_true = std::move(truth);

  ds.label_names.reserve(l);
  for (std::size_t j = 0; j < l; ++j)
    ds.label_names.push_back("label_" + std::to_string(j));
  return ds;
}

}  // namespace pmlgan::data
