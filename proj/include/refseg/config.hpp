// Copyright 2026 The refseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// INI-style configuration:
//
//   [model]   word_dim hidden_dim feature_dim kernel embed_dim text_dim mlp_layers use_prm use_tsrm tau
//   [train]   epochs batch_size lr flip_prob patience factor threshold
//   [tracker] gamma beta alpha_iou
//   [eval]    use_trm track_score (mean|max)
//   [gen]     every GenConfig field; family weights as weight_<family>
//
// Unknown sections or keys are errors.

#ifndef REFSEG_CONFIG_HPP_
#define REFSEG_CONFIG_HPP_

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <sstream>
#include <string>

#include "refseg/dataset.hpp"
#include "refseg/model.hpp"
#include "refseg/tracker.hpp"
#include "refseg/training.hpp"

namespace refseg {

struct EvalConfig {
  bool use_trm = true;
  TrackScoreMode track_score = TrackScoreMode::kMean;
};

struct AppConfig {
  ModelConfig model;
  TrainConfig train;
  TrackerConfig tracker;
  EvalConfig eval;
  GenConfig gen;
};

namespace detail {

using Ptree = boost::property_tree::ptree;

template <class T>
void read_key(const Ptree& section, const std::string& name, const std::string& key, T& value) {
  if (auto v = section.get_optional<std::string>(key)) {
    std::istringstream in(*v);
    T parsed{};
    if constexpr (std::is_same_v<T, bool>) {
      if (*v == "true" || *v == "1") parsed = true;
      else if (*v == "false" || *v == "0") parsed = false;
      else throw Error("config [" + name + "] " + key + ": expected a boolean, got '" + *v + "'");
    } else {
      in >> parsed;
      if (in.fail() || !(in >> std::ws).eof()) {
        throw Error("config [" + name + "] " + key + ": cannot parse '" + *v + "'");
      }
    }
    value = parsed;
  }
}

inline void check_keys(const Ptree& section, const std::string& name, std::initializer_list<const char*> known) {
  for (const auto& [key, _] : section) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw Error("config [" + name + "]: unknown key '" + key + "'");
  }
}

}  // namespace detail

inline AppConfig parse_config(std::istream& in, const std::string& source = "config") {
  detail::Ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(source + ": " + e.what());
  }
  AppConfig c;
  for (const auto& [name, section] : tree) {
    if (name == "model") {
      detail::check_keys(section, name, {"word_dim", "hidden_dim", "feature_dim", "kernel", "embed_dim", "text_dim",
                                         "mlp_layers", "use_prm", "use_tsrm", "tau"});
      detail::read_key(section, name, "word_dim", c.model.word_dim);
      detail::read_key(section, name, "hidden_dim", c.model.hidden_dim);
      detail::read_key(section, name, "feature_dim", c.model.feature_dim);
      detail::read_key(section, name, "kernel", c.model.kernel);
      detail::read_key(section, name, "embed_dim", c.model.embed_dim);
      detail::read_key(section, name, "text_dim", c.model.text_dim);
      detail::read_key(section, name, "mlp_layers", c.model.mlp_layers);
      detail::read_key(section, name, "use_prm", c.model.use_prm);
      detail::read_key(section, name, "use_tsrm", c.model.use_tsrm);
      detail::read_key(section, name, "tau", c.model.tau);
    } else if (name == "train") {
      detail::check_keys(section, name,
                         {"epochs", "batch_size", "lr", "flip_prob", "patience", "factor", "threshold"});
      detail::read_key(section, name, "epochs", c.train.epochs);
      detail::read_key(section, name, "batch_size", c.train.batch_size);
      detail::read_key(section, name, "lr", c.train.lr);
      detail::read_key(section, name, "flip_prob", c.train.flip_prob);
      detail::read_key(section, name, "patience", c.train.patience);
      detail::read_key(section, name, "factor", c.train.factor);
      detail::read_key(section, name, "threshold", c.train.threshold);
    } else if (name == "tracker") {
      detail::check_keys(section, name, {"gamma", "beta", "alpha_iou"});
      detail::read_key(section, name, "gamma", c.tracker.gamma);
      detail::read_key(section, name, "beta", c.tracker.beta);
      detail::read_key(section, name, "alpha_iou", c.tracker.alpha_iou);
    } else if (name == "eval") {
      detail::check_keys(section, name, {"use_trm", "track_score"});
      detail::read_key(section, name, "use_trm", c.eval.use_trm);
      std::string mode = "mean";
      detail::read_key(section, name, "track_score", mode);
      if (mode == "mean") c.eval.track_score = TrackScoreMode::kMean;
      else if (mode == "max") c.eval.track_score = TrackScoreMode::kMax;
      else throw Error("config [eval] track_score: expected mean or max, got '" + mode + "'");
    } else if (name == "gen") {
      detail::check_keys(section, name,
                         {"width", "height", "frames", "scenes", "test_fraction", "min_objects", "max_objects",
                          "queries_per_scene", "min_radius", "max_radius", "min_speed", "max_speed", "static_prob",
                          "homogeneous_prob", "ghost_intensity", "weight_attribute", "weight_relative_position", "weight_relation",
                          "weight_motion", "noise_prob", "noise_radius", "occlusion", "max_attempts"});
      auto& g = c.gen;
      detail::read_key(section, name, "width", g.width);
      detail::read_key(section, name, "height", g.height);
      detail::read_key(section, name, "frames", g.frames);
      detail::read_key(section, name, "scenes", g.scenes);
      detail::read_key(section, name, "test_fraction", g.test_fraction);
      detail::read_key(section, name, "min_objects", g.min_objects);
      detail::read_key(section, name, "max_objects", g.max_objects);
      detail::read_key(section, name, "queries_per_scene", g.queries_per_scene);
      detail::read_key(section, name, "min_radius", g.min_radius);
      detail::read_key(section, name, "max_radius", g.max_radius);
      detail::read_key(section, name, "min_speed", g.min_speed);
      detail::read_key(section, name, "max_speed", g.max_speed);
      detail::read_key(section, name, "static_prob", g.static_prob);
      detail::read_key(section, name, "homogeneous_prob", g.homogeneous_prob);
      detail::read_key(section, name, "ghost_intensity", g.ghost_intensity);
      for (int f = 0; f < 4; ++f) {
        detail::read_key(section, name, std::string("weight_") + kFamilyNames[static_cast<std::size_t>(f)],
                         g.family_weights[static_cast<std::size_t>(f)]);
      }
      detail::read_key(section, name, "noise_prob", g.noise_prob);
      detail::read_key(section, name, "noise_radius", g.noise_radius);
      detail::read_key(section, name, "occlusion", g.occlusion);
      detail::read_key(section, name, "max_attempts", g.max_attempts);
    } else {
      throw Error(source + ": unknown section [" + name + "]");
    }
  }
  c.train.validate();
  c.tracker.validate();
  return c;
}

inline AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  return parse_config(in, path.string());
}

}  // namespace refseg

#endif  // REFSEG_CONFIG_HPP_
