// SPDX-License-Identifier: Apache-2.0
#pragma once

// Content-addressed artifact store and append-only run ledger.
//
//   <root>/<kind>/<digest[0:2]>/<digest>        payload bytes
//   <root>/<kind>/<digest[0:2]>/<digest>.meta   key=value sidecar
//   <root>/ledger.csv                            one row per recorded run

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "asd/bytes.hpp"
#include "asd/csv.hpp"
#include "asd/error.hpp"
#include "asd/kv.hpp"

namespace asd {

inline std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorCode::io, "sha256 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

inline const std::vector<std::string>& artifact_kinds() {
  static const std::vector<std::string> kinds = {"spectrogram", "model",  "embeddings", "scores",
                                                 "roc",         "split",  "manifest",   "attention",
                                                 "coords",      "report", "lof"};
  return kinds;
}

inline void require_kind(std::string_view kind) {
  const auto& k = artifact_kinds();
  if (std::find(k.begin(), k.end(), kind) == k.end())
    fail(ErrorCode::unknown_kind, "unknown artifact kind '" + std::string(kind) + "'");
}

struct ArtifactId {
  std::string kind;
  std::string digest;

  std::string str() const { return kind + ":" + digest; }

  static ArtifactId parse(std::string_view s) {
    const auto colon = s.find(':');
    if (colon == std::string_view::npos) fail(ErrorCode::format, "artifact id must look like kind:digest");
    ArtifactId id{std::string(s.substr(0, colon)), std::string(s.substr(colon + 1))};
    require_kind(id.kind);
    if (id.digest.size() != 64) fail(ErrorCode::format, "artifact digest must be 64 hex characters");
    return id;
  }

  bool operator==(const ArtifactId&) const = default;
};

struct Artifact {
  std::string payload;
  Metadata metadata;
};

struct ArtifactRef {
  std::string path;
  std::string digest;
};

struct RunRecord {
  std::string run_id;
  std::string stage;
  std::uint64_t seed = 0;
  Metadata config;  // every resolved parameter
  std::vector<ArtifactRef> inputs;
  std::vector<ArtifactRef> outputs;
  std::string started_at;
  std::string finished_at;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace detail {

inline std::string join_refs(const std::vector<ArtifactRef>& refs) {
  std::string out;
  for (std::size_t i = 0; i < refs.size(); ++i) out += (i ? ";" : "") + refs[i].path + "@" + refs[i].digest;
  return out;
}

inline std::vector<ArtifactRef> split_refs(const std::string& s) {
  std::vector<ArtifactRef> out;
  std::size_t start = 0;
  while (start < s.size()) {
    auto end = s.find(';', start);
    if (end == std::string::npos) end = s.size();
    const auto item = s.substr(start, end - start);
    const auto at = item.rfind('@');
    out.push_back({item.substr(0, at), at == std::string::npos ? "" : item.substr(at + 1)});
    start = end + 1;
  }
  return out;
}

inline std::string encode_config(const Metadata& m) {
  std::string out;
  for (const auto& [k, v] : m.entries()) out += (out.empty() ? "" : ";") + k + "=" + v;
  return out;
}

inline Metadata decode_config(const std::string& s) {
  std::string text = s;
  std::replace(text.begin(), text.end(), ';', '\n');
  return Metadata::parse(text);
}

}  // namespace detail

inline const std::vector<std::string>& ledger_columns() {
  static const std::vector<std::string> cols = {"run_id", "stage",  "started_at", "finished_at",
                                                "seed",   "config", "inputs",     "outputs"};
  return cols;
}

class ArtifactStore {
 public:
  explicit ArtifactStore(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const noexcept { return root_; }

  std::filesystem::path payload_path(const ArtifactId& id) const {
    return root_ / id.kind / id.digest.substr(0, 2) / id.digest;
  }

  ArtifactId put_artifact(std::string_view kind, std::string_view payload, const Metadata& metadata = {}) {
    require_kind(kind);
    ArtifactId id{std::string(kind), sha256_hex(payload)};
    const auto path = payload_path(id);
    if (!std::filesystem::exists(path)) write_file(path, payload);
    write_file(path.string() + ".meta", metadata.serialize());
    return id;
  }

  Artifact get_artifact(const ArtifactId& id) const {
    require_kind(id.kind);
    const auto path = payload_path(id);
    if (!std::filesystem::exists(path)) fail(ErrorCode::io, "artifact " + id.str() + " not found in " + root_.string());
    Artifact a;
    a.payload = read_file(path);
    if (sha256_hex(a.payload) != id.digest)
      fail(ErrorCode::corruption, "artifact " + id.str() + " content does not match its digest");
    const auto meta = std::filesystem::path(path.string() + ".meta");
    if (std::filesystem::exists(meta)) a.metadata = Metadata::parse(read_file(meta));
    return a;
  }

  std::filesystem::path ledger_path() const { return root_ / "ledger.csv"; }

  /// Appends one row; existing rows are never rewritten. Returns the assigned run id.
  std::string record_run(RunRecord record) {
    std::filesystem::create_directories(root_);
    const auto path = ledger_path();
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    const auto n = fresh ? 0 : list_runs().size();
    if (record.run_id.empty()) {
      const auto digest = sha256_hex(record.stage + "\n" + detail::encode_config(record.config) + "\n" +
                                     detail::join_refs(record.inputs));
      record.run_id = std::to_string(n + 1) + "-" + digest.substr(0, 12);
    }
    if (record.started_at.empty()) record.started_at = utc_timestamp();
    if (record.finished_at.empty()) record.finished_at = utc_timestamp();

    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) fail(ErrorCode::io, "cannot append to " + path.string());
    if (fresh) out << csv_row(ledger_columns());
    out << csv_row({record.run_id, record.stage, record.started_at, record.finished_at, std::to_string(record.seed),
                    detail::encode_config(record.config), detail::join_refs(record.inputs),
                    detail::join_refs(record.outputs)});
    return record.run_id;
  }

  std::vector<RunRecord> list_runs() const {
    const auto path = ledger_path();
    if (!std::filesystem::exists(path)) return {};
    const CsvTable t = read_csv(path);
    std::vector<RunRecord> runs;
    for (const auto& row : t.rows) {
      RunRecord r;
      r.run_id = row[t.column("run_id")];
      r.stage = row[t.column("stage")];
      r.started_at = row[t.column("started_at")];
      r.finished_at = row[t.column("finished_at")];
      r.seed = std::stoull(row[t.column("seed")]);
      r.config = detail::decode_config(row[t.column("config")]);
      r.inputs = detail::split_refs(row[t.column("inputs")]);
      r.outputs = detail::split_refs(row[t.column("outputs")]);
      runs.push_back(std::move(r));
    }
    return runs;
  }

 private:
  std::filesystem::path root_;
};

/// Digest of a file on disk, for RunRecord inputs/outputs.
inline ArtifactRef file_ref(const std::filesystem::path& path) { return {path.string(), sha256_hex(read_file(path))}; }

}  // namespace asd
