// SPDX-License-Identifier: Apache-2.0
#pragma once

// Resolved parameters for every pipeline stage, loadable from a YAML file:
//
//   profile: ae
//   store: store
//   strict_paper: false
//   split:       {seed: 0, mode: unsupervised, stratify: true}
//   autoencoder: {epochs: 50, learning_rate: 0.001, batch_size: 512, seed: 0, standardize: true}
//   head:        {epochs: 1, learning_rate: 0.001, batch_size: 64, seed: 0, standardize: false}
//   lof:         {k: 4, p: 2, contamination: [0.1, 0.2, 0.3, 0.4], tie: anomalous}
//   tsne:        {perplexity: 30, iterations: 1000, learning_rate: 200, seed: 0}

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <set>
#include <string>

#include "asd/autoencoder.hpp"
#include "asd/analysis.hpp"
#include "asd/classifier_head.hpp"
#include "asd/dsp.hpp"
#include "asd/error.hpp"
#include "asd/eval.hpp"
#include "asd/kv.hpp"
#include "asd/lof.hpp"

namespace asd {

struct LofSettings {
  std::size_t k = 4;
  double p = 2.0;
  VoteConfig vote;
};

struct PipelineConfig {
  Profile profile = Profile::ae;
  std::filesystem::path store_root = "store";
  bool strict_paper = false;
  SplitOptions split;
  AutoencoderConfig autoencoder;
  HeadConfig head;
  LofSettings lof;
  TsneConfig tsne;

  /// Turns off every default that departs from the baseline recipe.
  void apply_strict_paper() {
    strict_paper = true;
    autoencoder.standardize = false;
    split.stratify = false;
  }

  PreprocessProfile preprocess() const { return profile_defaults(profile); }

  Metadata snapshot() const {
    Metadata m;
    m.set("profile", std::string(to_string(profile)));
    m.set("strict_paper", strict_paper);
    m.set("split.seed", split.seed);
    m.set("split.mode", split.mode == SplitMode::supervised ? "supervised" : "unsupervised");
    m.set("split.stratify", split.stratify);
    m.set("autoencoder.epochs", autoencoder.epochs);
    m.set("autoencoder.learning_rate", autoencoder.learning_rate);
    m.set("autoencoder.batch_size", autoencoder.batch_size);
    m.set("autoencoder.seed", autoencoder.seed);
    m.set("autoencoder.standardize", autoencoder.standardize);
    m.set("head.epochs", head.epochs);
    m.set("head.learning_rate", head.learning_rate);
    m.set("head.batch_size", head.batch_size);
    m.set("head.seed", head.seed);
    m.set("head.standardize", head.standardize);
    m.set("head.hidden_lr_multiplier", head.hidden_lr_multiplier);
    m.set("lof.k", lof.k);
    m.set("lof.p", lof.p);
    std::string levels;
    for (double c : lof.vote.contamination) levels += (levels.empty() ? "" : ",") + format_double(c);
    m.set("lof.contamination", levels);
    m.set("lof.tie", lof.vote.tie == VoteTie::anomalous ? "anomalous" : "normal");
    m.set("tsne.perplexity", tsne.perplexity);
    m.set("tsne.iterations", tsne.iterations);
    m.set("tsne.learning_rate", tsne.learning_rate);
    m.set("tsne.seed", tsne.seed);
    return m;
  }
};

namespace detail {

inline void reject_unknown(const YAML::Node& node, const std::set<std::string>& allowed, const std::string& where) {
  if (!node.IsMap()) fail(ErrorCode::config, "config: '" + where + "' must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail(ErrorCode::config, "config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

template <typename T>
void read_into(const YAML::Node& node, const char* key, T& out) {
  if (node[key]) {
    try {
      out = node[key].as<T>();
    } catch (const YAML::Exception& e) {
      fail(ErrorCode::config, std::string("config: bad value for '") + key + "': " + e.what());
    }
  }
}

}  // namespace detail

inline PipelineConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    fail(ErrorCode::config, std::string("config: ") + e.what());
  }
  PipelineConfig cfg;
  if (!root || root.IsNull()) return cfg;
  detail::reject_unknown(root, {"profile", "store", "strict_paper", "split", "autoencoder", "head", "lof", "tsne"}, "");

  if (root["profile"]) cfg.profile = parse_profile(root["profile"].as<std::string>());
  if (root["store"]) cfg.store_root = root["store"].as<std::string>();
  bool strict = false;
  detail::read_into(root, "strict_paper", strict);
  if (strict) cfg.apply_strict_paper();

  if (auto n = root["split"]) {
    detail::reject_unknown(n, {"seed", "mode", "stratify"}, "split");
    detail::read_into(n, "seed", cfg.split.seed);
    if (n["mode"]) cfg.split.mode = parse_split_mode(n["mode"].as<std::string>());
    detail::read_into(n, "stratify", cfg.split.stratify);
  }
  if (auto n = root["autoencoder"]) {
    detail::reject_unknown(n, {"epochs", "learning_rate", "batch_size", "seed", "standardize"}, "autoencoder");
    detail::read_into(n, "epochs", cfg.autoencoder.epochs);
    detail::read_into(n, "learning_rate", cfg.autoencoder.learning_rate);
    detail::read_into(n, "batch_size", cfg.autoencoder.batch_size);
    detail::read_into(n, "seed", cfg.autoencoder.seed);
    detail::read_into(n, "standardize", cfg.autoencoder.standardize);
  }
  if (auto n = root["head"]) {
    detail::reject_unknown(n, {"epochs", "learning_rate", "batch_size", "seed", "standardize", "dropout",
                               "hidden_lr_multiplier", "output_lr_multiplier"},
                           "head");
    detail::read_into(n, "epochs", cfg.head.epochs);
    detail::read_into(n, "learning_rate", cfg.head.learning_rate);
    detail::read_into(n, "batch_size", cfg.head.batch_size);
    detail::read_into(n, "seed", cfg.head.seed);
    detail::read_into(n, "standardize", cfg.head.standardize);
    detail::read_into(n, "dropout", cfg.head.dropout);
    detail::read_into(n, "hidden_lr_multiplier", cfg.head.hidden_lr_multiplier);
    detail::read_into(n, "output_lr_multiplier", cfg.head.output_lr_multiplier);
  }
  if (auto n = root["lof"]) {
    detail::reject_unknown(n, {"k", "p", "contamination", "tie"}, "lof");
    detail::read_into(n, "k", cfg.lof.k);
    detail::read_into(n, "p", cfg.lof.p);
    detail::read_into(n, "contamination", cfg.lof.vote.contamination);
    if (n["tie"]) {
      const auto tie = n["tie"].as<std::string>();
      if (tie == "anomalous") cfg.lof.vote.tie = VoteTie::anomalous;
      else if (tie == "normal") cfg.lof.vote.tie = VoteTie::normal;
      else fail(ErrorCode::config, "config: lof.tie must be anomalous or normal");
    }
    cfg.lof.vote.validate();
  }
  if (auto n = root["tsne"]) {
    detail::reject_unknown(n, {"perplexity", "iterations", "learning_rate", "seed"}, "tsne");
    detail::read_into(n, "perplexity", cfg.tsne.perplexity);
    detail::read_into(n, "iterations", cfg.tsne.iterations);
    detail::read_into(n, "learning_rate", cfg.tsne.learning_rate);
    detail::read_into(n, "seed", cfg.tsne.seed);
  }
  return cfg;
}

inline PipelineConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

}  // namespace asd
