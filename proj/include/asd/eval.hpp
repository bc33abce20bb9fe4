// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dataset manifest, train/validation/test splitting and ROC/AUC.
// Positive class is "anomalous" throughout; higher scores mean more anomalous.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "asd/csv.hpp"
#include "asd/embedding.hpp"
#include "asd/error.hpp"
#include "asd/rng.hpp"
#include "asd/svg.hpp"

namespace asd {

// ---------------------------------------------------------------- manifest

struct ManifestRecord {
  std::string clip_id;
  std::string path;
  std::string machine_type;  // fan | pump | valve | slide
  std::string machine_id;
  Label label = Label::normal;
};

struct Manifest {
  std::vector<ManifestRecord> records;

  void validate() const {
    std::set<std::string> seen;
    for (const auto& r : records) {
      if (!seen.insert(r.clip_id).second) fail(ErrorCode::format, "manifest: duplicate clip_id '" + r.clip_id + "'");
      if (r.label == Label::unlabeled) fail(ErrorCode::format, "manifest: clip '" + r.clip_id + "' has no label");
    }
  }
};

inline std::string_view manifest_label_name(Label l) { return l == Label::anomalous ? "anomalous" : "normal"; }

/// Manifest CSV: clip_id,path,machine_type,machine_id,label. Relative paths resolve against `base_dir`.
inline Manifest decode_manifest(std::string_view text, const std::filesystem::path& base_dir = {}) {
  const CsvTable t = parse_csv(text);
  const auto c_id = t.column("clip_id"), c_path = t.column("path"), c_type = t.column("machine_type"),
             c_mid = t.column("machine_id"), c_label = t.column("label");
  Manifest m;
  for (const auto& row : t.rows) {
    ManifestRecord r;
    r.clip_id = row[c_id];
    std::filesystem::path p = row[c_path];
    r.path = (p.is_relative() && !base_dir.empty() ? base_dir / p : p).string();
    r.machine_type = row[c_type];
    r.machine_id = row[c_mid];
    r.label = parse_label(row[c_label]);
    m.records.push_back(std::move(r));
  }
  m.validate();
  return m;
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  return decode_manifest(read_file(path), path.parent_path());
}

inline std::string encode_manifest(const Manifest& m) {
  std::string out = csv_row({"clip_id", "path", "machine_type", "machine_id", "label"});
  for (const auto& r : m.records)
    out += csv_row({r.clip_id, r.path, r.machine_type, r.machine_id, std::string(manifest_label_name(r.label))});
  return out;
}

// ---------------------------------------------------------------- split

enum class SplitMode { supervised, unsupervised };

inline SplitMode parse_split_mode(std::string_view s) {
  if (s == "supervised") return SplitMode::supervised;
  if (s == "unsupervised") return SplitMode::unsupervised;
  fail(ErrorCode::config, "unknown split mode '" + std::string(s) + "'");
}

struct SplitOptions {
  std::uint64_t seed = 0;
  SplitMode mode = SplitMode::unsupervised;
  bool stratify = true;           // by (label, machine_id); false draws uniformly from the whole manifest
  double test_fraction = 0.25;
  double validation_fraction = 0.10;  // of the non-test remainder
};

/// Anomalous ids removed from train/validation in unsupervised mode land in `discarded`,
/// so train + validation + test + discarded always partitions the manifest.
struct Split {
  std::vector<std::string> train, validation, test, discarded;
  SplitMode mode = SplitMode::unsupervised;
};

inline Split split(const Manifest& manifest, const SplitOptions& opt = {}) {
  manifest.validate();
  if (manifest.records.size() < 4)
    fail(ErrorCode::insufficient_data, "split: need at least 4 clips, manifest has " +
                                           std::to_string(manifest.records.size()));

  std::map<std::pair<int, std::string>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& r = manifest.records[i];
    auto key = opt.stratify ? std::make_pair(static_cast<int>(r.label), r.machine_id) : std::make_pair(0, std::string{});
    strata[key].push_back(i);
  }

  Rng rng(opt.seed);
  Split s;
  s.mode = opt.mode;
  std::vector<std::size_t> train_idx, val_idx, test_idx;
  for (auto& [key, members] : strata) {
    rng.shuffle(std::span<std::size_t>(members));
    const auto n = members.size();
    const auto n_test = static_cast<std::size_t>(std::llround(opt.test_fraction * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(opt.validation_fraction * static_cast<double>(n - n_test)));
    test_idx.insert(test_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
    val_idx.insert(val_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test),
                   members.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
    train_idx.insert(train_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), members.end());
  }
  for (auto* v : {&train_idx, &val_idx, &test_idx}) std::sort(v->begin(), v->end());

  auto emit = [&](const std::vector<std::size_t>& idx, std::vector<std::string>& out, bool filter) {
    for (auto i : idx) {
      const auto& r = manifest.records[i];
      if (filter && r.label == Label::anomalous)
        s.discarded.push_back(r.clip_id);
      else
        out.push_back(r.clip_id);
    }
  };
  const bool filter = opt.mode == SplitMode::unsupervised;
  emit(train_idx, s.train, filter);
  emit(val_idx, s.validation, filter);
  emit(test_idx, s.test, false);
  return s;
}

/// Split file: clip_id,subset with subset in train | validation | test | discarded.
inline std::string encode_split(const Split& s) {
  std::string out = "# mode=" + std::string(s.mode == SplitMode::supervised ? "supervised" : "unsupervised") + "\n";
  out += csv_row({"clip_id", "subset"});
  for (const auto& id : s.train) out += csv_row({id, "train"});
  for (const auto& id : s.validation) out += csv_row({id, "validation"});
  for (const auto& id : s.test) out += csv_row({id, "test"});
  for (const auto& id : s.discarded) out += csv_row({id, "discarded"});
  return out;
}

inline Split decode_split(std::string_view text) {
  const CsvTable t = parse_csv(text);
  Split s;
  for (const auto& c : t.comments)
    if (c.find("mode=supervised") != std::string::npos) s.mode = SplitMode::supervised;
  const auto c_id = t.column("clip_id"), c_sub = t.column("subset");
  for (const auto& row : t.rows) {
    const auto& sub = row[c_sub];
    if (sub == "train") s.train.push_back(row[c_id]);
    else if (sub == "validation") s.validation.push_back(row[c_id]);
    else if (sub == "test") s.test.push_back(row[c_id]);
    else if (sub == "discarded") s.discarded.push_back(row[c_id]);
    else fail(ErrorCode::format, "split: unknown subset '" + sub + "'");
  }
  return s;
}

// ---------------------------------------------------------------- ROC / AUC

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // score at or above which clips are called anomalous
};

struct RocResult {
  std::vector<RocPoint> points;  // from (0,0) to (1,1)
  double auc = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

/// ROC by sweeping every distinct score; tied scores form one step, which makes the
/// trapezoidal area equal to the Mann-Whitney statistic with half credit for ties.
inline RocResult roc_auc(std::span<const double> scores, const std::vector<bool>& anomalous) {
  if (scores.size() != anomalous.size()) fail(ErrorCode::shape, "roc_auc: scores and labels differ in length");
  RocResult r;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) fail(ErrorCode::domain, "roc_auc: non-finite score");
    anomalous[i] ? ++r.positives : ++r.negatives;
  }
  if (r.positives == 0 || r.negatives == 0)
    fail(ErrorCode::undefined_auc, "roc_auc: AUC undefined with a single class (" + std::to_string(r.positives) +
                                       " anomalous, " + std::to_string(r.negatives) + " normal)");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const double P = static_cast<double>(r.positives), N = static_cast<double>(r.negatives);
  r.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  double area = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    const std::size_t tp0 = tp, fp0 = fp;
    for (; i < order.size() && scores[order[i]] == s; ++i) anomalous[order[i]] ? ++tp : ++fp;
    // trapezoid in count units: width dfp, mean height (tp0 + tp) / 2
    area += static_cast<double>(fp - fp0) * static_cast<double>(tp0 + tp) / 2.0;
    r.points.push_back({static_cast<double>(fp) / N, static_cast<double>(tp) / P, s});
  }
  r.auc = area / (P * N);
  return r;
}

inline RocResult roc_auc(std::span<const double> scores, std::span<const Label> labels) {
  std::vector<bool> anomalous;
  for (auto l : labels) anomalous.push_back(l == Label::anomalous);
  return roc_auc(scores, anomalous);
}

/// `fpr,tpr` rows followed by an `# auc=` summary comment.
inline std::string encode_roc(const RocResult& roc) {
  std::string out = csv_row({"fpr", "tpr"});
  for (const auto& p : roc.points) out += csv_row({format_double(p.fpr), format_double(p.tpr)});
  out += "# auc=" + format_double(roc.auc) + "\n";
  return out;
}

inline std::string roc_svg(const RocResult& roc, const std::string& title) {
  svg::Series curve{"ROC", {}, true, "#1f77b4"};
  for (const auto& p : roc.points) curve.points.emplace_back(p.fpr, p.tpr);
  svg::Series chance{"chance", {{0.0, 0.0}, {1.0, 1.0}}, true, "#999999"};
  char auc[32];
  std::snprintf(auc, sizeof auc, "%.4f", roc.auc);
  return svg::render({curve, chance}, {.title = title + " (AUC " + auc + ")",
                                       .x_label = "false positive rate",
                                       .y_label = "true positive rate",
                                       .x_range = std::pair{0.0, 1.0},
                                       .y_range = std::pair{0.0, 1.0}});
}

}  // namespace asd
