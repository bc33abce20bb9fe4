// SPDX-License-Identifier: Apache-2.0
#pragma once

// Delimited tables passed between pipeline stages: per-clip scores and the
// spectrogram index written by preprocessing.

#include <optional>
#include <string>
#include <vector>

#include "asd/csv.hpp"
#include "asd/embedding.hpp"
#include "asd/error.hpp"
#include "asd/eval.hpp"

namespace asd {

/// clip_id,label,score[,vote]; vote is 1 for anomalous, 0 for normal.
struct ScoreTable {
  std::vector<std::string> clip_ids;
  std::vector<Label> labels;
  std::vector<double> scores;
  std::optional<std::vector<bool>> votes;

  std::size_t size() const noexcept { return scores.size(); }

  std::vector<bool> anomalous_mask() const {
    std::vector<bool> out;
    for (auto l : labels) out.push_back(l == Label::anomalous);
    return out;
  }
};

inline std::string encode_scores(const ScoreTable& t) {
  std::vector<std::string> header{"clip_id", "label", "score"};
  if (t.votes) header.push_back("vote");
  std::string out = csv_row(header);
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::vector<std::string> row{t.clip_ids[i], std::string(embedding_label_name(t.labels[i])), format_double(t.scores[i])};
    if (t.votes) row.push_back((*t.votes)[i] ? "1" : "0");
    out += csv_row(row);
  }
  return out;
}

inline ScoreTable decode_scores(std::string_view text) {
  const CsvTable csv = parse_csv(text);
  const auto c_id = csv.column("clip_id"), c_label = csv.column("label"), c_score = csv.column("score");
  ScoreTable t;
  if (csv.has_column("vote")) t.votes.emplace();
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    const auto& row = csv.rows[i];
    t.clip_ids.push_back(row[c_id]);
    t.labels.push_back(parse_label(row[c_label]));
    try {
      std::size_t used = 0;
      t.scores.push_back(std::stod(row[c_score], &used));
      if (used != row[c_score].size()) throw std::invalid_argument(row[c_score]);
    } catch (const std::exception&) {
      fail(ErrorCode::format, "scores row " + std::to_string(i + 1) + ": '" + row[c_score] + "' is not a number");
    }
    if (t.votes) t.votes->push_back(row[csv.column("vote")] == "1");
  }
  return t;
}

struct IndexEntry {
  std::string clip_id;
  std::string machine_type;
  std::string machine_id;
  Label label = Label::normal;
  std::string artifact;  // kind:digest in the store
};

/// clip_id,machine_type,machine_id,label,artifact
struct SpectrogramIndex {
  std::vector<IndexEntry> entries;

  const IndexEntry* find(const std::string& clip_id) const {
    for (const auto& e : entries)
      if (e.clip_id == clip_id) return &e;
    return nullptr;
  }
};

inline std::string encode_index(const SpectrogramIndex& idx) {
  std::string out = csv_row({"clip_id", "machine_type", "machine_id", "label", "artifact"});
  for (const auto& e : idx.entries)
    out += csv_row({e.clip_id, e.machine_type, e.machine_id, std::string(embedding_label_name(e.label)), e.artifact});
  return out;
}

inline SpectrogramIndex decode_index(std::string_view text) {
  const CsvTable csv = parse_csv(text);
  const auto c_id = csv.column("clip_id"), c_type = csv.column("machine_type"), c_mid = csv.column("machine_id"),
             c_label = csv.column("label"), c_art = csv.column("artifact");
  SpectrogramIndex idx;
  for (const auto& row : csv.rows)
    idx.entries.push_back({row[c_id], row[c_type], row[c_mid], parse_label(row[c_label]), row[c_art]});
  return idx;
}

}  // namespace asd
