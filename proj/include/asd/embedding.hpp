// SPDX-License-Identifier: Apache-2.0
#pragma once

// EmbeddingSet and its delimited interchange format:
//   clip_id,label,e0,e1,...,e{D-1}
// with label one of normal | anomaly | unlabeled. An optional leading comment line
// `# source_tag=<tag>` records which backbone produced the vectors.

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "asd/csv.hpp"
#include "asd/error.hpp"
#include "asd/types.hpp"

namespace asd {

enum class Label { normal, anomalous, unlabeled };

inline Label parse_label(std::string_view s) {
  if (s == "normal") return Label::normal;
  if (s == "anomaly" || s == "anomalous") return Label::anomalous;
  if (s == "unlabeled" || s.empty()) return Label::unlabeled;
  fail(ErrorCode::format, "unknown label '" + std::string(s) + "'");
}

inline std::string_view embedding_label_name(Label l) {
  switch (l) {
    case Label::normal: return "normal";
    case Label::anomalous: return "anomaly";
    case Label::unlabeled: return "unlabeled";
  }
  return "?";
}

struct EmbeddingSet {
  MatrixXd vectors;  // [N x D]
  std::vector<std::string> clip_ids;
  std::vector<Label> labels;
  std::string source_tag;

  Eigen::Index size() const noexcept { return vectors.rows(); }
  Eigen::Index dim() const noexcept { return vectors.cols(); }

  void validate() const {
    if (static_cast<std::size_t>(vectors.rows()) != clip_ids.size() || clip_ids.size() != labels.size())
      fail(ErrorCode::shape, "embedding set: row, id and label counts differ");
    if (!vectors.allFinite()) fail(ErrorCode::format, "embedding set contains non-finite entries");
  }

  /// Subset of rows, in the given order.
  EmbeddingSet select(const std::vector<std::size_t>& rows) const {
    EmbeddingSet out;
    out.source_tag = source_tag;
    out.vectors.resize(static_cast<Eigen::Index>(rows.size()), vectors.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.vectors.row(static_cast<Eigen::Index>(i)) = vectors.row(static_cast<Eigen::Index>(rows[i]));
      out.clip_ids.push_back(clip_ids[rows[i]]);
      out.labels.push_back(labels[rows[i]]);
    }
    return out;
  }

  std::vector<bool> anomalous_mask() const {
    std::vector<bool> out;
    out.reserve(labels.size());
    for (auto l : labels) out.push_back(l == Label::anomalous);
    return out;
  }
};

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string encode_embeddings(const EmbeddingSet& set) {
  set.validate();
  std::string out;
  if (!set.source_tag.empty()) out += "# source_tag=" + set.source_tag + "\n";
  std::vector<std::string> header{"clip_id", "label"};
  for (Eigen::Index d = 0; d < set.dim(); ++d) header.push_back("e" + std::to_string(d));
  out += csv_row(header);
  for (Eigen::Index i = 0; i < set.size(); ++i) {
    std::vector<std::string> row{set.clip_ids[static_cast<std::size_t>(i)],
                                 std::string(embedding_label_name(set.labels[static_cast<std::size_t>(i)]))};
    for (Eigen::Index d = 0; d < set.dim(); ++d) row.push_back(format_double(set.vectors(i, d)));
    out += csv_row(row);
  }
  return out;
}

inline EmbeddingSet decode_embeddings(std::string_view text) {
  const CsvTable t = parse_csv(text);
  if (t.header.size() < 3 || t.header[0] != "clip_id" || t.header[1] != "label")
    fail(ErrorCode::format, "embedding file header must start with clip_id,label,e0");
  const std::size_t dim = t.header.size() - 2;
  for (std::size_t d = 0; d < dim; ++d)
    if (t.header[d + 2] != "e" + std::to_string(d))
      fail(ErrorCode::format, "embedding column " + std::to_string(d + 2) + " should be named e" + std::to_string(d));

  EmbeddingSet set;
  for (const auto& c : t.comments)
    if (c.rfind(" source_tag=", 0) == 0 || c.rfind("source_tag=", 0) == 0)
      set.source_tag = c.substr(c.find('=') + 1);
  set.vectors.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    set.clip_ids.push_back(row[0]);
    set.labels.push_back(parse_label(row[1]));
    for (std::size_t d = 0; d < dim; ++d) {
      try {
        std::size_t used = 0;
        const double v = std::stod(row[d + 2], &used);
        if (used != row[d + 2].size()) throw std::invalid_argument(row[d + 2]);
        set.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = v;
      } catch (const std::exception&) {
        fail(ErrorCode::format, "embedding row " + std::to_string(i + 1) + ": '" + row[d + 2] + "' is not a number");
      }
    }
  }
  set.validate();
  return set;
}

inline EmbeddingSet read_embeddings(const std::filesystem::path& path) { return decode_embeddings(read_file(path)); }

inline void write_embeddings(const std::filesystem::path& path, const EmbeddingSet& set) {
  write_file(path, encode_embeddings(set));
}

/// Per-dimension mean and standard deviation (floored to 1) over the rows of `x`.
struct Standardizer {
  VectorXd mean;
  VectorXd stddev;

  static Standardizer fit(const MatrixXd& x) {
    Standardizer s;
    s.mean = x.colwise().mean().transpose();
    const MatrixXd c = x.rowwise() - s.mean.transpose();
    s.stddev = (c.array().square().colwise().sum() / static_cast<double>(std::max<Eigen::Index>(x.rows(), 1)))
                   .sqrt()
                   .transpose();
    for (Eigen::Index i = 0; i < s.stddev.size(); ++i)
      if (s.stddev(i) < 1e-8) s.stddev(i) = 1.0;
    return s;
  }

  MatrixXd apply(const MatrixXd& x) const {
    return (x.rowwise() - mean.transpose()).array().rowwise() / stddev.transpose().array();
  }
};

/// Clip-level pooled statistics of a log-mel spectrogram: per-mel mean then per-mel std.
template <typename Derived>
VectorXd pooled_statistics(const Eigen::MatrixBase<Derived>& spectrogram) {
  const MatrixXd s = spectrogram.template cast<double>();
  const Eigen::Index m = s.rows();
  VectorXd out(2 * m);
  const VectorXd mean = s.rowwise().mean();
  out.head(m) = mean;
  out.tail(m) = ((s.colwise() - mean).array().square().rowwise().mean()).sqrt();
  return out;
}

}  // namespace asd
