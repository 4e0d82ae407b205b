#pragma once

// JSON payloads shared by the HTTP service and the CLI.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gradecast/cart.hpp"
#include "gradecast/eval.hpp"
#include "gradecast/ingest.hpp"
#include "gradecast/whatif.hpp"

namespace gradecast::json {

using nlohmann::ordered_json;

inline ordered_json to_json(const CleaningReport& r) {
  return {{"dropped_columns", r.dropped_columns},
          {"input_rows", r.input_rows},
          {"output_rows", r.output_rows},
          {"dropped_missing", r.dropped_missing},
          {"dropped_duplicate", r.dropped_duplicate},
          {"label_mapping", r.label_mapping}};
}

inline CleaningReport cleaning_report_from_json(const ordered_json& j) {
  CleaningReport r;
  r.dropped_columns = j.at("dropped_columns").get<std::vector<std::string>>();
  r.input_rows = j.at("input_rows").get<std::size_t>();
  r.output_rows = j.at("output_rows").get<std::size_t>();
  r.dropped_missing = j.at("dropped_missing").get<std::size_t>();
  r.dropped_duplicate = j.at("dropped_duplicate").get<std::size_t>();
  r.label_mapping = j.at("label_mapping").get<std::string>();
  return r;
}

inline ordered_json to_json(const eval::ConfusionMatrix& cm) {
  return {{"tn", cm.tn}, {"fp", cm.fp}, {"fn", cm.fn}, {"tp", cm.tp}};
}

inline ordered_json to_json(const eval::EvaluationReport& r) {
  ordered_json flags = ordered_json::array();
  for (const auto d : r.degenerate) flags.push_back(eval::to_string(d));
  return {{"matrix", to_json(r.matrix)}, {"accuracy", r.accuracy}, {"precision", r.precision},
          {"recall", r.recall},          {"f1", r.f1},              {"degenerate", flags},
          {"train_size", r.train_size},  {"test_size", r.test_size}};
}

inline eval::EvaluationReport evaluation_from_json(const ordered_json& j) {
  eval::EvaluationReport r;
  const auto& m = j.at("matrix");
  r.matrix = {m.at("tn").get<std::size_t>(), m.at("fp").get<std::size_t>(), m.at("fn").get<std::size_t>(),
              m.at("tp").get<std::size_t>()};
  r.accuracy = j.at("accuracy").get<double>();
  r.precision = j.at("precision").get<double>();
  r.recall = j.at("recall").get<double>();
  r.f1 = j.at("f1").get<double>();
  for (const auto& f : j.at("degenerate")) {
    const auto s = f.get<std::string>();
    for (const auto d : {eval::Degenerate::precision_undefined, eval::Degenerate::recall_undefined,
                         eval::Degenerate::f1_undefined}) {
      if (s == eval::to_string(d)) r.degenerate.insert(d);
    }
  }
  r.train_size = j.at("train_size").get<std::size_t>();
  r.test_size = j.at("test_size").get<std::size_t>();
  return r;
}

inline ordered_json to_json(const eval::SplitConfig& c) {
  return {{"test_fraction", c.test_fraction}, {"seed", c.seed}, {"shuffle", c.shuffle}};
}

inline ordered_json to_json(const cart::Prediction& p, const std::vector<std::string>& feature_names) {
  ordered_json path = ordered_json::array();
  for (const auto& s : p.path) {
    path.push_back({{"node", s.node_id},
                    {"feature", s.feature},
                    {"name", feature_names.at(s.feature)},
                    {"threshold", s.threshold},
                    {"went_left", s.went_left}});
  }
  return {{"label", to_int(p.label)}, {"probability", p.pass_probability}, {"leaf", p.leaf_id}, {"path", path}};
}

inline ordered_json to_json(const whatif::WhatIfResult& r, std::span<const double> x,
                            const std::vector<std::string>& feature_names) {
  ordered_json suggestions = ordered_json::array();
  for (const auto& cf : r.suggestions) {
    ordered_json changes = ordered_json::array();
    for (const auto f : cf.features) {
      changes.push_back({{"feature", f},
                         {"name", feature_names.at(f)},
                         {"current", x[f]},
                         {"required", x[f] + cf.deltas[f]},
                         {"delta", cf.deltas[f]}});
    }
    suggestions.push_back({{"deltas", cf.deltas},
                           {"changes", changes},
                           {"total_magnitude", cf.total_magnitude},
                           {"prediction", to_json(cf.prediction, feature_names)}});
  }
  return {{"already_pass", r.already_pass},
          {"reachable", r.reachable},
          {"base", to_json(r.base, feature_names)},
          {"suggestions", suggestions},
          {"table", whatif::render_table(r, x, feature_names)}};
}

}  // namespace gradecast::json
