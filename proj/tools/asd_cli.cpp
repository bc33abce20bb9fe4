// SPDX-License-Identifier: Apache-2.0
// asd: command-line driver for the anomalous-sound-detection pipeline.
//
// Every stage reads its inputs from disk, writes its outputs both to the
// requested path and to the content-addressed store, appends a run record to
// the store ledger, and prints one summary line on stdout.

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "asd/asd.hpp"

namespace fs = std::filesystem;
using namespace asd;

namespace {

// ---------------------------------------------------------------- shared plumbing

struct Common {
  std::string config_path;
  std::string store_root;
  bool strict_paper = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "YAML configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--store", c.store_root, "artifact store root (overrides the config file)");
  cmd->add_flag("--strict-paper", c.strict_paper, "disable input standardization and stratified splitting");
}

PipelineConfig resolve(const Common& c) {
  PipelineConfig cfg = c.config_path.empty() ? PipelineConfig{} : load_config(c.config_path);
  if (!c.store_root.empty()) cfg.store_root = c.store_root;
  if (c.strict_paper) cfg.apply_strict_paper();
  return cfg;
}

/// Collects inputs and outputs of one stage and appends the run record at the end.
class Run {
 public:
  Run(std::string stage, const PipelineConfig& cfg, std::uint64_t seed)
      : store_(cfg.store_root), started_(utc_timestamp()) {
    record_.stage = std::move(stage);
    record_.seed = seed;
    record_.config = cfg.snapshot();
  }

  ArtifactStore& store() { return store_; }
  void param(const std::string& key, const std::string& value) { record_.config.set(key, value); }

  void input(const fs::path& path) { record_.inputs.push_back(file_ref(path)); }
  void input_artifact(const ArtifactId& id) { record_.inputs.push_back({id.str(), id.digest}); }

  /// Writes `bytes` to `path` (when given) and to the store; returns the artifact id.
  ArtifactId output(std::string_view kind, const std::string& bytes, const std::string& path, Metadata meta = {}) {
    meta.set("stage", record_.stage);
    const auto id = store_.put_artifact(kind, bytes, meta);
    if (!path.empty()) {
      write_file(path, bytes);
      record_.outputs.push_back({path, id.digest});
    } else {
      record_.outputs.push_back({id.str(), id.digest});
    }
    return id;
  }

  std::string finish() {
    record_.started_at = started_;
    record_.finished_at = utc_timestamp();
    return store_.record_run(record_);
  }

 private:
  ArtifactStore store_;
  RunRecord record_;
  std::string started_;
};

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Clip ids kept by `--split`/`--subset`; std::nullopt keeps everything.
std::optional<std::set<std::string>> subset_filter(const std::string& split_path, const std::string& subset,
                                                   Run& run) {
  if (split_path.empty() || subset == "all") return std::nullopt;
  run.input(split_path);
  const Split s = decode_split(read_file(split_path));
  const std::vector<std::string>* ids = nullptr;
  if (subset == "train") ids = &s.train;
  else if (subset == "validation") ids = &s.validation;
  else if (subset == "test") ids = &s.test;
  else fail(ErrorCode::config, "unknown subset '" + subset + "' (expected train|validation|test|all)");
  run.param("subset", subset);
  return std::set<std::string>(ids->begin(), ids->end());
}

void add_subset_options(CLI::App* cmd, std::string& split_path, std::string& subset, const std::string& fallback) {
  subset = fallback;
  cmd->add_option("--split", split_path, "split file restricting the clips used");
  cmd->add_option("--subset", subset, "subset of the split to use")
      ->check(CLI::IsMember({"train", "validation", "test", "all"}))
      ->capture_default_str();
}

struct LoadedSpectrograms {
  std::vector<IndexEntry> entries;
  std::vector<Spectrogram> specs;
};

LoadedSpectrograms load_spectrograms(const std::string& index_path, const std::optional<std::set<std::string>>& keep,
                                     Run& run) {
  run.input(index_path);
  const auto index = decode_index(read_file(index_path));
  LoadedSpectrograms out;
  for (const auto& e : index.entries) {
    if (keep && !keep->count(e.clip_id)) continue;
    const auto id = ArtifactId::parse(e.artifact);
    const auto art = run.store().get_artifact(id);
    out.entries.push_back(e);
    out.specs.push_back(decode_spectrogram(art.payload, art.metadata));
  }
  if (out.entries.empty()) fail(ErrorCode::insufficient_data, "no spectrograms selected from " + index_path);
  return out;
}

EmbeddingSet load_embeddings(const std::string& path, const std::optional<std::set<std::string>>& keep, Run& run) {
  run.input(path);
  const auto set = read_embeddings(path);
  if (!keep) return set;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < set.clip_ids.size(); ++i)
    if (keep->count(set.clip_ids[i])) rows.push_back(i);
  if (rows.empty()) fail(ErrorCode::insufficient_data, "no embeddings selected from " + path);
  return set.select(rows);
}

// ---------------------------------------------------------------- make-synthetic

struct SyntheticArgs {
  Common common;
  std::string out;
  std::size_t normal = 200;
  std::size_t anomalous = 50;
  std::uint64_t seed = 0;
  double duration = 10.0;
  int channels = 1;
};

void cmd_make_synthetic(const SyntheticArgs& a) {
  const auto cfg = resolve(a.common);
  Run run("make-synthetic", cfg, a.seed);
  SyntheticParams prm;
  prm.duration_s = a.duration;
  prm.channels = a.channels;
  const auto m = write_synthetic_dataset(a.out, a.normal, a.anomalous, a.seed, prm);
  run.param("normal", std::to_string(a.normal));
  run.param("anomalous", std::to_string(a.anomalous));
  run.param("duration_s", fixed6(a.duration));
  run.param("channels", std::to_string(a.channels));
  const auto manifest_path = (fs::path(a.out) / "manifest.csv").string();
  run.output("manifest", read_file(manifest_path), manifest_path);
  run.finish();
  std::cout << "make-synthetic: clips=" << m.records.size() << " normal=" << a.normal << " anomalous=" << a.anomalous
            << " manifest=" << manifest_path << "\n";
}

// ---------------------------------------------------------------- preprocess

struct PreprocessArgs {
  Common common;
  std::string manifest;
  std::vector<std::string> inputs;
  std::string profile;
  std::string out;
  unsigned jobs = 1;
};

void cmd_preprocess(const PreprocessArgs& a) {
  auto cfg = resolve(a.common);
  if (!a.profile.empty()) cfg.profile = parse_profile(a.profile);
  const auto profile = cfg.preprocess();
  Run run("preprocess", cfg, 0);

  Manifest manifest;
  if (!a.manifest.empty()) {
    run.input(a.manifest);
    manifest = read_manifest(a.manifest);
  }
  for (const auto& in : a.inputs)
    manifest.records.push_back({fs::path(in).stem().string(), in, "", "", Label::unlabeled});
  if (manifest.records.empty()) fail(ErrorCode::config, "preprocess: give --manifest or --input");

  // Clips are independent; workers fill their own slots and the store is written afterwards.
  std::vector<Spectrogram> specs(manifest.records.size());
  std::vector<std::string> errors(manifest.records.size());
  std::vector<std::optional<ErrorCode>> codes(manifest.records.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < manifest.records.size();) {
      try {
        const auto clip = read_wav(manifest.records[i].path);
        require_sample_rate(clip, profile.sample_rate_hz);
        specs[i] = compute_log_mel(downmix(clip), profile);
      } catch (const Error& e) {
        codes[i] = e.code();
        errors[i] = e.what();
      }
    }
  };
  const unsigned n_jobs = std::max(1u, std::min<unsigned>(a.jobs, static_cast<unsigned>(manifest.records.size())));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < n_jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < codes.size(); ++i)
    if (codes[i]) fail(*codes[i], manifest.records[i].path + ": " + errors[i]);

  SpectrogramIndex index;
  std::set<std::string> dims;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& r = manifest.records[i];
    Metadata meta = spectrogram_metadata(specs[i]);
    meta.set("clip_id", r.clip_id);
    meta.set("profile", std::string(to_string(profile.id)));
    const auto id = run.store().put_artifact("spectrogram", encode_spectrogram(specs[i]), meta);
    index.entries.push_back({r.clip_id, r.machine_type, r.machine_id, r.label, id.str()});
    dims.insert(std::to_string(specs[i].n_mels()) + "x" + std::to_string(specs[i].n_frames()));
  }
  run.output("manifest", encode_index(index), a.out);
  run.finish();
  std::string dim_text;
  for (const auto& d : dims) dim_text += (dim_text.empty() ? "" : ",") + d;
  std::cout << "preprocess: clips=" << specs.size() << " profile=" << to_string(profile.id) << " dims=" << dim_text
            << " index=" << a.out << "\n";
}

// ---------------------------------------------------------------- split

struct SplitArgs {
  Common common;
  std::string manifest;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string mode;
  bool no_stratify = false;
};

void cmd_split(const SplitArgs& a) {
  auto cfg = resolve(a.common);
  if (a.seed) cfg.split.seed = *a.seed;
  if (!a.mode.empty()) cfg.split.mode = parse_split_mode(a.mode);
  if (a.no_stratify) cfg.split.stratify = false;
  Run run("split", cfg, cfg.split.seed);
  run.input(a.manifest);
  const auto s = split(read_manifest(a.manifest), cfg.split);
  run.output("split", encode_split(s), a.out);
  run.finish();
  std::cout << "split: train=" << s.train.size() << " validation=" << s.validation.size() << " test=" << s.test.size()
            << " discarded=" << s.discarded.size() << " out=" << a.out << "\n";
}

// ---------------------------------------------------------------- autoencoder

struct TrainAeArgs {
  Common common;
  std::string spectrograms, split_path, subset, out;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<double> learning_rate;
  std::optional<std::uint64_t> seed;
  bool no_standardize = false;
};

void cmd_train_ae(const TrainAeArgs& a) {
  auto cfg = resolve(a.common);
  if (a.epochs) cfg.autoencoder.epochs = *a.epochs;
  if (a.batch_size) cfg.autoencoder.batch_size = *a.batch_size;
  if (a.learning_rate) cfg.autoencoder.learning_rate = *a.learning_rate;
  if (a.seed) cfg.autoencoder.seed = *a.seed;
  if (a.no_standardize) cfg.autoencoder.standardize = false;
  Run run("train-ae", cfg, cfg.autoencoder.seed);
  const auto data = load_spectrograms(a.spectrograms, subset_filter(a.split_path, a.subset, run), run);

  const auto context = cfg.preprocess().context;
  std::vector<WindowBatch> batches;
  for (std::size_t i = 0; i < data.specs.size(); ++i)
    if (data.entries[i].label != Label::anomalous) batches.push_back(frame_windows(data.specs[i], context));
  if (batches.empty()) fail(ErrorCode::insufficient_data, "train-ae: no normal clips in the training selection");
  const auto width = batches.front().width();
  const auto trained = train_autoencoder(std::span<const WindowBatch>(batches), width, cfg.autoencoder);

  Metadata meta;
  meta.set("input_dim", static_cast<std::int64_t>(width));
  meta.set("context", static_cast<std::int64_t>(context));
  run.output("model", encode_model(to_model_file(trained.model)), a.out, meta);
  run.finish();
  std::size_t windows = 0;
  for (const auto& b : batches) windows += static_cast<std::size_t>(b.size());
  const double final_loss = trained.loss_history.empty() ? 0.0 : trained.loss_history.back();
  std::cout << "train-ae: clips=" << batches.size() << " windows=" << windows << " width=" << width
            << " epochs=" << cfg.autoencoder.epochs << " final_loss=" << fixed6(final_loss) << " model=" << a.out
            << "\n";
}

struct ScoreArgs {
  Common common;
  std::string model, inputs, split_path, subset, out;
};

void cmd_score_ae(const ScoreArgs& a) {
  const auto cfg = resolve(a.common);
  Run run("score-ae", cfg, 0);
  run.input(a.model);
  const auto model = autoencoder_from_model_file(decode_model(read_file(a.model)));
  const auto data = load_spectrograms(a.inputs, subset_filter(a.split_path, a.subset, run), run);
  const auto context = cfg.preprocess().context;

  ScoreTable t;
  for (std::size_t i = 0; i < data.specs.size(); ++i) {
    t.clip_ids.push_back(data.entries[i].clip_id);
    t.labels.push_back(data.entries[i].label);
    t.scores.push_back(score_clip(model, frame_windows(data.specs[i], context)));
  }
  run.output("scores", encode_scores(t), a.out);
  run.finish();
  std::cout << "score-ae: clips=" << t.size() << " scores=" << a.out << "\n";
}

// ---------------------------------------------------------------- embeddings

struct EmbedArgs {
  Common common;
  std::string spectrograms, split_path, subset, out;
};

void cmd_embed(const EmbedArgs& a) {
  const auto cfg = resolve(a.common);
  Run run("embed", cfg, 0);
  const auto data = load_spectrograms(a.spectrograms, subset_filter(a.split_path, a.subset, run), run);
  EmbeddingSet set;
  set.source_tag = "logmel-mean-std";
  const auto dim = 2 * data.specs.front().n_mels();
  set.vectors.resize(static_cast<Eigen::Index>(data.specs.size()), dim);
  for (std::size_t i = 0; i < data.specs.size(); ++i) {
    if (2 * data.specs[i].n_mels() != dim) fail(ErrorCode::shape, "embed: spectrograms have differing mel counts");
    set.vectors.row(static_cast<Eigen::Index>(i)) = pooled_statistics(data.specs[i].data).transpose();
    set.clip_ids.push_back(data.entries[i].clip_id);
    set.labels.push_back(data.entries[i].label);
  }
  run.output("embeddings", encode_embeddings(set), a.out);
  run.finish();
  std::cout << "embed: clips=" << set.size() << " dim=" << set.dim() << " out=" << a.out << "\n";
}

// ---------------------------------------------------------------- classifier head

struct TrainHeadArgs {
  Common common;
  std::string embeddings, split_path, subset, out;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<double> learning_rate, dropout, hidden_lr_multiplier;
  std::optional<std::uint64_t> seed;
  bool standardize = false;
};

void cmd_train_head(const TrainHeadArgs& a) {
  auto cfg = resolve(a.common);
  if (a.epochs) cfg.head.epochs = *a.epochs;
  if (a.batch_size) cfg.head.batch_size = *a.batch_size;
  if (a.learning_rate) cfg.head.learning_rate = *a.learning_rate;
  if (a.dropout) cfg.head.dropout = *a.dropout;
  if (a.hidden_lr_multiplier) cfg.head.hidden_lr_multiplier = *a.hidden_lr_multiplier;
  if (a.seed) cfg.head.seed = *a.seed;
  if (a.standardize) cfg.head.standardize = true;
  Run run("train-head", cfg, cfg.head.seed);
  const auto set = load_embeddings(a.embeddings, subset_filter(a.split_path, a.subset, run), run);
  const auto head = train_head(set, cfg.head);
  run.output("model", encode_model(to_model_file(head)), a.out);
  run.finish();
  std::cout << "train-head: rows=" << set.size() << " dim=" << set.dim() << " epochs=" << cfg.head.epochs
            << " model=" << a.out << "\n";
}

void cmd_score_head(const ScoreArgs& a) {
  const auto cfg = resolve(a.common);
  Run run("score-head", cfg, 0);
  run.input(a.model);
  const auto head = head_from_model_file(decode_model(read_file(a.model)));
  const auto set = load_embeddings(a.inputs, subset_filter(a.split_path, a.subset, run), run);
  const VectorXd s = score(head, set);
  ScoreTable t{set.clip_ids, set.labels, std::vector<double>(s.data(), s.data() + s.size()), std::nullopt};
  run.output("scores", encode_scores(t), a.out);
  run.finish();
  std::cout << "score-head: clips=" << t.size() << " scores=" << a.out << "\n";
}

// ---------------------------------------------------------------- LOF

struct LofFitArgs {
  Common common;
  std::string embeddings, split_path, subset, out;
  std::optional<std::size_t> k;
  std::optional<double> p;
};

void cmd_lof_fit(const LofFitArgs& a) {
  auto cfg = resolve(a.common);
  if (a.k) cfg.lof.k = *a.k;
  if (a.p) cfg.lof.p = *a.p;
  Run run("lof-fit", cfg, 0);
  const auto set = load_embeddings(a.embeddings, subset_filter(a.split_path, a.subset, run), run);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < set.labels.size(); ++i)
    if (set.labels[i] != Label::anomalous) rows.push_back(i);
  const auto model = fit_lof(set.select(rows).vectors, cfg.lof.k, cfg.lof.p);
  run.output("lof", encode_lof(model), a.out);
  run.finish();
  std::cout << "lof-fit: points=" << model.size() << " dim=" << model.dim() << " k=" << model.k
            << " p=" << fixed6(model.p) << " model=" << a.out << "\n";
}

struct LofScoreArgs {
  ScoreArgs base;
  std::vector<double> contamination;
  std::string tie;
};

void cmd_lof_score(const LofScoreArgs& a) {
  auto cfg = resolve(a.base.common);
  if (!a.contamination.empty()) cfg.lof.vote.contamination = a.contamination;
  if (!a.tie.empty()) cfg.lof.vote.tie = a.tie == "normal" ? VoteTie::normal : VoteTie::anomalous;
  cfg.lof.vote.validate();
  Run run("lof-score", cfg, 0);
  run.input(a.base.model);
  const auto model = decode_lof(read_file(a.base.model));
  const auto set = load_embeddings(a.base.inputs, subset_filter(a.base.split_path, a.base.subset, run), run);
  ScoreTable t{set.clip_ids, set.labels, score_lof(model, set.vectors), std::nullopt};
  t.votes = predict_vote(training_scores(model), t.scores, cfg.lof.vote);
  run.output("scores", encode_scores(t), a.base.out);
  run.finish();
  const auto flagged = std::count(t.votes->begin(), t.votes->end(), true);
  std::cout << "lof-score: clips=" << t.size() << " flagged=" << flagged << " scores=" << a.base.out << "\n";
}

// ---------------------------------------------------------------- eval-auc

struct EvalArgs {
  Common common;
  std::string scores, roc_path, svg_path, title = "ROC";
};

void cmd_eval_auc(const EvalArgs& a) {
  const auto cfg = resolve(a.common);
  Run run("eval-auc", cfg, 0);
  run.input(a.scores);
  const auto t = decode_scores(read_file(a.scores));
  const auto roc = roc_auc(t.scores, t.anomalous_mask());
  Metadata meta;
  meta.set("auc", roc.auc);
  meta.set("positives", static_cast<std::int64_t>(roc.positives));
  meta.set("negatives", static_cast<std::int64_t>(roc.negatives));
  run.output("roc", encode_roc(roc), a.roc_path, meta);
  if (!a.svg_path.empty()) run.output("report", roc_svg(roc, a.title), a.svg_path);
  run.finish();
  std::cout << "auc=" << fixed4(roc.auc) << "\n";
}

// ---------------------------------------------------------------- tsne

struct TsneArgs {
  Common common;
  std::string embeddings, split_path, subset, out, svg_path, manifest, color_by = "label";
  std::optional<double> perplexity, learning_rate;
  std::optional<std::size_t> iterations;
  std::optional<std::uint64_t> seed;
};

void cmd_tsne(const TsneArgs& a) {
  auto cfg = resolve(a.common);
  if (a.perplexity) cfg.tsne.perplexity = *a.perplexity;
  if (a.learning_rate) cfg.tsne.learning_rate = *a.learning_rate;
  if (a.iterations) cfg.tsne.iterations = *a.iterations;
  if (a.seed) cfg.tsne.seed = *a.seed;
  Run run("tsne", cfg, cfg.tsne.seed);
  const auto set = load_embeddings(a.embeddings, subset_filter(a.split_path, a.subset, run), run);
  const auto r = tsne(set.vectors, cfg.tsne);

  std::map<std::string, std::string> machine_type;
  if (!a.manifest.empty()) {
    run.input(a.manifest);
    for (const auto& rec : read_manifest(a.manifest).records) machine_type[rec.clip_id] = rec.machine_type;
  }
  std::vector<std::string> groups;
  std::string csv = csv_row({"clip_id", "label", "group", "x", "y"});
  for (Eigen::Index i = 0; i < set.size(); ++i) {
    const auto& id = set.clip_ids[static_cast<std::size_t>(i)];
    const std::string label(embedding_label_name(set.labels[static_cast<std::size_t>(i)]));
    std::string group = label;
    if (a.color_by == "machine_type") {
      auto it = machine_type.find(id);
      if (it == machine_type.end()) fail(ErrorCode::format, "tsne: clip '" + id + "' missing from --manifest");
      group = it->second;
    }
    groups.push_back(group);
    csv += csv_row({id, label, group, format_double(r.embedding(i, 0)), format_double(r.embedding(i, 1))});
  }
  Metadata meta;
  meta.set("kl_after_exaggeration", r.kl_after_exaggeration);
  meta.set("kl_final", r.kl_final);
  run.output("coords", csv, a.out, meta);
  if (!a.svg_path.empty()) run.output("report", tsne_svg(r.embedding, groups, "t-SNE of " + a.embeddings), a.svg_path);
  run.finish();
  double worst = 0.0;
  for (double e : r.affinities.entropy_error) worst = std::max(worst, e);
  std::cout << "tsne: points=" << set.size() << " kl_after_exaggeration=" << fixed6(r.kl_after_exaggeration)
            << " kl_final=" << fixed6(r.kl_final) << " max_entropy_error=" << fixed6(worst) << " out=" << a.out
            << "\n";
}

// ---------------------------------------------------------------- attn-distance

struct AttnArgs {
  Common common;
  std::string attention, out, svg_path;
};

void cmd_attn_distance(const AttnArgs& a) {
  const auto cfg = resolve(a.common);
  Run run("attn-distance", cfg, 0);
  run.input(a.attention);
  if (fs::exists(a.attention + ".meta")) run.input(a.attention + ".meta");
  const auto file = read_attention(a.attention);
  std::vector<std::vector<double>> per_layer;
  std::string csv = csv_row({"layer", "head", "mean_distance_px"});
  for (std::size_t l = 0; l < file.layers.size(); ++l) {
    per_layer.push_back(mean_attention_distance(file.layers[l]));
    for (std::size_t h = 0; h < per_layer.back().size(); ++h) {
      const auto layer = l < file.layer_labels.size() ? file.layer_labels[l] : std::to_string(l);
      const auto head = h < file.head_labels.size() ? file.head_labels[h] : std::to_string(h);
      csv += csv_row({layer, head, format_double(per_layer.back()[h])});
    }
  }
  run.output("report", csv, a.out);
  if (!a.svg_path.empty()) run.output("report", attention_distance_svg(per_layer), a.svg_path);
  run.finish();
  std::cout << "attn-distance: layers=" << per_layer.size()
            << " heads=" << (per_layer.empty() ? 0 : per_layer.front().size()) << " out=" << a.out << "\n";
}

// ---------------------------------------------------------------- runs list

void cmd_runs_list(const Common& c) {
  const auto cfg = resolve(c);
  const ArtifactStore store(cfg.store_root);
  for (const auto& r : store.list_runs()) {
    std::cout << r.run_id << " " << r.stage << " " << r.finished_at << " seed=" << r.seed << " outputs=";
    for (std::size_t i = 0; i < r.outputs.size(); ++i) std::cout << (i ? ";" : "") << r.outputs[i].path;
    std::cout << "\n";
  }
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch == '\n' ? ' ' : ch;
  }
  return out + "\"";
}

int report(std::string_view code, const std::string& message, int status) {
  std::cerr << "error: code=" << code << " message=" << quote(message) << "\n";
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anomalous machine-sound detection pipeline", "asd"};
  app.require_subcommand(1);

  SyntheticArgs synth;
  auto* c_synth = app.add_subcommand("make-synthetic", "write a synthetic tone dataset with a manifest");
  add_common(c_synth, synth.common);
  c_synth->add_option("--out", synth.out, "output directory")->required();
  c_synth->add_option("--normal", synth.normal, "number of normal clips")->capture_default_str();
  c_synth->add_option("--anomalous", synth.anomalous, "number of anomalous clips")->capture_default_str();
  c_synth->add_option("--seed", synth.seed, "generator seed")->capture_default_str();
  c_synth->add_option("--duration", synth.duration, "clip length in seconds")->capture_default_str();
  c_synth->add_option("--channels", synth.channels, "channels per clip")->check(CLI::Range(1, 8))->capture_default_str();

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "compute log-mel spectrograms into the store");
  add_common(c_pre, pre.common);
  c_pre->add_option("--manifest", pre.manifest, "manifest CSV");
  c_pre->add_option("--input", pre.inputs, "WAV file(s) outside a manifest");
  c_pre->add_option("--profile", pre.profile, "preprocessing profile")->check(CLI::IsMember({"ae", "cnn", "ast"}));
  c_pre->add_option("--out", pre.out, "spectrogram index CSV to write")->required();
  c_pre->add_option("--jobs", pre.jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  SplitArgs sp;
  auto* c_split = app.add_subcommand("split", "partition a manifest into train/validation/test");
  add_common(c_split, sp.common);
  c_split->add_option("--manifest", sp.manifest, "manifest CSV")->required();
  c_split->add_option("--out", sp.out, "split CSV to write")->required();
  c_split->add_option("--seed", sp.seed, "shuffle seed");
  c_split->add_option("--mode", sp.mode, "split mode")->check(CLI::IsMember({"supervised", "unsupervised"}));
  c_split->add_flag("--no-stratify", sp.no_stratify, "draw uniformly instead of per (label, machine_id) stratum");

  TrainAeArgs tae;
  auto* c_tae = app.add_subcommand("train-ae", "train the dense autoencoder on normal clips");
  add_common(c_tae, tae.common);
  c_tae->add_option("--spectrograms", tae.spectrograms, "spectrogram index CSV")->required();
  add_subset_options(c_tae, tae.split_path, tae.subset, "train");
  c_tae->add_option("--out", tae.out, "model file to write")->required();
  c_tae->add_option("--epochs", tae.epochs, "training epochs");
  c_tae->add_option("--batch-size", tae.batch_size, "windows per batch");
  c_tae->add_option("--lr", tae.learning_rate, "Adam learning rate");
  c_tae->add_option("--seed", tae.seed, "initialization and shuffle seed");
  c_tae->add_flag("--no-standardize", tae.no_standardize, "train on raw dB windows");

  ScoreArgs sae;
  auto* c_sae = app.add_subcommand("score-ae", "score clips by mean window reconstruction error");
  add_common(c_sae, sae.common);
  c_sae->add_option("--model", sae.model, "autoencoder model file")->required();
  c_sae->add_option("--spectrograms", sae.inputs, "spectrogram index CSV")->required();
  add_subset_options(c_sae, sae.split_path, sae.subset, "test");
  c_sae->add_option("--out", sae.out, "scores CSV to write")->required();

  EmbedArgs emb;
  auto* c_emb = app.add_subcommand("embed", "pool spectrograms into per-mel mean and std embeddings");
  add_common(c_emb, emb.common);
  c_emb->add_option("--spectrograms", emb.spectrograms, "spectrogram index CSV")->required();
  add_subset_options(c_emb, emb.split_path, emb.subset, "all");
  c_emb->add_option("--out", emb.out, "embedding CSV to write")->required();

  TrainHeadArgs th;
  auto* c_th = app.add_subcommand("train-head", "train the supervised classifier head on embeddings");
  add_common(c_th, th.common);
  c_th->add_option("--embeddings", th.embeddings, "embedding CSV")->required();
  add_subset_options(c_th, th.split_path, th.subset, "train");
  c_th->add_option("--out", th.out, "model file to write")->required();
  c_th->add_option("--epochs", th.epochs, "training epochs");
  c_th->add_option("--batch-size", th.batch_size, "rows per batch");
  c_th->add_option("--lr", th.learning_rate, "Adam learning rate");
  c_th->add_option("--dropout", th.dropout, "dropout probability");
  c_th->add_option("--hidden-lr-multiplier", th.hidden_lr_multiplier, "learning-rate multiplier of the hidden layer");
  c_th->add_option("--seed", th.seed, "initialization, shuffle and dropout seed");
  c_th->add_flag("--standardize", th.standardize, "standardize embeddings per dimension");

  ScoreArgs sh;
  auto* c_sh = app.add_subcommand("score-head", "score embeddings with a trained head");
  add_common(c_sh, sh.common);
  c_sh->add_option("--model", sh.model, "head model file")->required();
  c_sh->add_option("--embeddings", sh.inputs, "embedding CSV")->required();
  add_subset_options(c_sh, sh.split_path, sh.subset, "test");
  c_sh->add_option("--out", sh.out, "scores CSV to write")->required();

  LofFitArgs lf;
  auto* c_lf = app.add_subcommand("lof-fit", "fit a local outlier factor model on normal embeddings");
  add_common(c_lf, lf.common);
  c_lf->add_option("--embeddings", lf.embeddings, "embedding CSV")->required();
  add_subset_options(c_lf, lf.split_path, lf.subset, "train");
  c_lf->add_option("--out", lf.out, "LOF model file to write")->required();
  c_lf->add_option("--k", lf.k, "neighbourhood size");
  c_lf->add_option("--p", lf.p, "Minkowski order");

  LofScoreArgs ls;
  auto* c_ls = app.add_subcommand("lof-score", "LOF scores and contamination vote for embeddings");
  add_common(c_ls, ls.base.common);
  c_ls->add_option("--model", ls.base.model, "LOF model file")->required();
  c_ls->add_option("--embeddings", ls.base.inputs, "embedding CSV")->required();
  add_subset_options(c_ls, ls.base.split_path, ls.base.subset, "test");
  c_ls->add_option("--out", ls.base.out, "scores CSV to write")->required();
  c_ls->add_option("--contamination", ls.contamination, "contamination levels for the vote")->delimiter(',');
  c_ls->add_option("--tie", ls.tie, "resolution of tied votes")->check(CLI::IsMember({"anomalous", "normal"}));

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval-auc", "ROC curve and AUC of a scores file");
  add_common(c_ev, ev.common);
  c_ev->add_option("--scores", ev.scores, "scores CSV")->required();
  c_ev->add_option("--roc", ev.roc_path, "ROC CSV to write");
  c_ev->add_option("--svg", ev.svg_path, "ROC plot to write");
  c_ev->add_option("--title", ev.title, "plot title")->capture_default_str();

  TsneArgs ts;
  auto* c_ts = app.add_subcommand("tsne", "two-dimensional t-SNE map of embeddings");
  add_common(c_ts, ts.common);
  c_ts->add_option("--embeddings", ts.embeddings, "embedding CSV")->required();
  add_subset_options(c_ts, ts.split_path, ts.subset, "all");
  c_ts->add_option("--out", ts.out, "coordinates CSV to write")->required();
  c_ts->add_option("--svg", ts.svg_path, "scatter plot to write");
  c_ts->add_option("--manifest", ts.manifest, "manifest supplying machine types");
  c_ts->add_option("--color-by", ts.color_by, "point grouping")
      ->check(CLI::IsMember({"label", "machine_type"}))
      ->capture_default_str();
  c_ts->add_option("--perplexity", ts.perplexity, "target perplexity");
  c_ts->add_option("--iterations", ts.iterations, "gradient iterations");
  c_ts->add_option("--learning-rate", ts.learning_rate, "gradient step size");
  c_ts->add_option("--seed", ts.seed, "initialization seed");

  AttnArgs at;
  auto* c_at = app.add_subcommand("attn-distance", "mean attention distance per layer and head");
  add_common(c_at, at.common);
  c_at->add_option("--attention", at.attention, "attention tensor file")->required();
  c_at->add_option("--out", at.out, "CSV to write")->required();
  c_at->add_option("--svg", at.svg_path, "distance-vs-layer plot to write");

  Common runs_common;
  auto* c_runs = app.add_subcommand("runs", "inspect the run ledger");
  c_runs->require_subcommand(1);
  auto* c_runs_list = c_runs->add_subcommand("list", "print recorded runs in insertion order");
  add_common(c_runs_list, runs_common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("usage", e.what(), 1);
  }

  try {
    if (*c_synth) cmd_make_synthetic(synth);
    else if (*c_pre) cmd_preprocess(pre);
    else if (*c_split) cmd_split(sp);
    else if (*c_tae) cmd_train_ae(tae);
    else if (*c_sae) cmd_score_ae(sae);
    else if (*c_emb) cmd_embed(emb);
    else if (*c_th) cmd_train_head(th);
    else if (*c_sh) cmd_score_head(sh);
    else if (*c_lf) cmd_lof_fit(lf);
    else if (*c_ls) cmd_lof_score(ls);
    else if (*c_ev) cmd_eval_auc(ev);
    else if (*c_ts) cmd_tsne(ts);
    else if (*c_at) cmd_attn_distance(at);
    else if (*c_runs_list) cmd_runs_list(runs_common);
  } catch (const Error& e) {
    return report(to_string(e.code()), e.what(), exit_status(e.code()));
  } catch (const fs::filesystem_error& e) {
    return report("io", e.what(), 2);
  } catch (const std::exception& e) {
    return report("internal", e.what(), 3);
  }
  return 0;
}
