#pragma once

// Model-file persistence and Graphviz export for cart::Tree.
//
// Model file (JSON, format_version 1):
//
//   {
//     "format_version": 1,
//     "criterion": "gini",
//     "hyperparameters": {"max_depth": null, "min_samples_split": 2, "min_samples_leaf": 1},
//     "feature_names": ["att_prelim", ...],
//     "root": 0,
//     "nodes": [
//       {"id": 0, "depth": 0, "counts": [19, 42],
//        "split": {"feature": 5, "threshold": 59.5}, "left": 1, "right": 2},
//       {"id": 1, "depth": 1, "counts": [1, 30], "split": null, "left": null, "right": null},
//       ...
//     ]
//   }
//
// Thresholds are written in shortest round-trip form, so a reloaded tree
// routes every input exactly like the original. Node impurity is not stored;
// it is recomputed from the counts.

#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gradecast/cart.hpp"
#include "gradecast/error.hpp"

namespace gradecast::cart {

inline nlohmann::ordered_json to_json(const Tree& tree) {
  using nlohmann::ordered_json;
  const auto& p = tree.params();
  ordered_json j;
  j["format_version"] = Tree::kFormatVersion;
  j["criterion"] = std::string(to_string(p.criterion));
  ordered_json hp;
  hp["max_depth"] = p.max_depth ? ordered_json(*p.max_depth) : ordered_json(nullptr);
  hp["min_samples_split"] = p.min_samples_split;
  hp["min_samples_leaf"] = p.min_samples_leaf;
  j["hyperparameters"] = hp;
  j["feature_names"] = tree.feature_names();
  j["root"] = tree.root_id();
  ordered_json nodes = ordered_json::array();
  for (const auto& n : tree.nodes()) {
    ordered_json jn;
    jn["id"] = n.id;
    jn["depth"] = n.depth;
    jn["counts"] = {n.counts.fail, n.counts.pass};
    if (n.split) {
      jn["split"] = {{"feature", n.split->feature}, {"threshold", n.split->threshold}};
      jn["left"] = *n.left;
      jn["right"] = *n.right;
    } else {
      jn["split"] = nullptr;
      jn["left"] = nullptr;
      jn["right"] = nullptr;
    }
    nodes.push_back(std::move(jn));
  }
  j["nodes"] = std::move(nodes);
  return j;
}

/// Canonical text: the same tree always serializes to the same bytes.
inline std::string serialize(const Tree& tree) { return to_json(tree).dump(2) + "\n"; }

namespace detail {

template <class Json>
const Json& field(const Json& obj, std::string_view key, std::string_view where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw FormatError("missing field '" + std::string(key) + "' in " + std::string(where));
  return *it;
}

template <class Json>
std::size_t unsigned_field(const Json& v, std::string_view what) {
  if (!v.is_number_unsigned()) throw FormatError(std::string(what) + " must be a non-negative integer");
  return v.template get<std::size_t>();
}

template <class Json>
std::optional<std::size_t> optional_id(const Json& v, std::string_view what) {
  if (v.is_null()) return std::nullopt;
  return unsigned_field(v, what);
}

}  // namespace detail

template <class Json>
Tree from_json(const Json& j) {
  using detail::field;
  using detail::unsigned_field;
  if (!j.is_object()) throw FormatError("model document must be an object");

  const auto& version = field(j, "format_version", "model");
  if (!version.is_number_integer()) throw FormatError("format_version must be an integer");
  if (version.template get<long long>() != Tree::kFormatVersion) {
    throw FormatError("unknown format_version " + version.dump());
  }

  const auto& crit = field(j, "criterion", "model");
  if (!crit.is_string()) throw FormatError("criterion must be a string");
  HyperParams params;
  try {
    params.criterion = parse_criterion(crit.template get<std::string>());
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }

  const auto& hp = field(j, "hyperparameters", "model");
  if (!hp.is_object()) throw FormatError("hyperparameters must be an object");
  const auto& md = field(hp, "max_depth", "hyperparameters");
  if (!md.is_null()) params.max_depth = unsigned_field(md, "max_depth");
  params.min_samples_split = unsigned_field(field(hp, "min_samples_split", "hyperparameters"), "min_samples_split");
  params.min_samples_leaf = unsigned_field(field(hp, "min_samples_leaf", "hyperparameters"), "min_samples_leaf");
  try {
    params.validate();
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }

  const auto& names_j = field(j, "feature_names", "model");
  if (!names_j.is_array()) throw FormatError("feature_names must be an array");
  std::vector<std::string> names;
  for (const auto& n : names_j) {
    if (!n.is_string()) throw FormatError("feature_names entries must be strings");
    names.push_back(n.template get<std::string>());
  }

  const std::size_t root = unsigned_field(field(j, "root", "model"), "root");

  const auto& nodes_j = field(j, "nodes", "model");
  if (!nodes_j.is_array()) throw FormatError("nodes must be an array");
  std::vector<std::optional<TreeNode>> slots(nodes_j.size());
  for (const auto& jn : nodes_j) {
    if (!jn.is_object()) throw FormatError("node entries must be objects");
    TreeNode n;
    n.id = unsigned_field(field(jn, "id", "node"), "node id");
    const std::string where = "node " + std::to_string(n.id);
    if (n.id >= slots.size()) throw FormatError("node id " + std::to_string(n.id) + " out of range");
    if (slots[n.id]) throw FormatError("duplicate node id " + std::to_string(n.id));
    n.depth = unsigned_field(field(jn, "depth", where), "depth");
    const auto& counts = field(jn, "counts", where);
    if (!counts.is_array() || counts.size() != 2) throw FormatError("counts must be [fail, pass] in " + where);
    n.counts.fail = unsigned_field(counts[0], "fail count");
    n.counts.pass = unsigned_field(counts[1], "pass count");
    if (n.counts.total() == 0) throw FormatError("empty counts in " + where);
    n.impurity = impurity(params.criterion, n.counts);

    const auto& split = field(jn, "split", where);
    if (!split.is_null()) {
      if (!split.is_object()) throw FormatError("split must be an object or null in " + where);
      const auto& thr = field(split, "threshold", where);
      if (!thr.is_number()) throw FormatError("threshold must be a number in " + where);
      n.split = Split{unsigned_field(field(split, "feature", where), "split feature"), thr.template get<double>()};
    }
    n.left = detail::optional_id(field(jn, "left", where), "left child id");
    n.right = detail::optional_id(field(jn, "right", where), "right child id");
    slots[n.id] = n;
  }

  std::vector<TreeNode> nodes;
  nodes.reserve(slots.size());
  for (auto& s : slots) nodes.push_back(*s);  // ids were range- and duplicate-checked above
  return Tree(std::move(nodes), root, params, std::move(names));
}

/// Parses and validates a model file; FormatError names the first violation.
inline Tree deserialize(std::string_view text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed model file: ") + e.what());
  }
  try {
    return from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed model file: ") + e.what());
  }
}

namespace detail {

/// Rounds to `digits` decimals and trims trailing zeros, keeping one.
inline std::string format_rounded(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s(buf);
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.push_back('0');
  }
  if (s == "-0.0") s = "0.0";
  return s;
}

inline std::string dot_label(const Tree& tree, const TreeNode& n) {
  std::string label;
  if (n.split) {
    label += "X_" + std::to_string(n.split->feature) + " <= " + format_rounded(n.split->threshold, 4) + "\\n";
  }
  label += std::string(to_string(tree.params().criterion)) + " = " + format_rounded(n.impurity, 4) + "\\n";
  label += "samples = " + std::to_string(n.counts.total()) + "\\n";
  label += "value = [" + std::to_string(n.counts.fail) + ", " + std::to_string(n.counts.pass) + "]";
  return label;
}

inline void emit_dot(const Tree& tree, std::size_t id, std::string& out) {
  const auto& n = tree.node(id);
  out += std::to_string(id) + " [label=\"" + dot_label(tree, n) + "\"] ;\n";
  if (n.is_leaf()) return;
  const bool at_root = id == tree.root_id();
  out += std::to_string(id) + " -> " + std::to_string(*n.left);
  out += at_root ? " [labeldistance=2.5, labelangle=45, headlabel=\"True\"] ;\n" : " ;\n";
  emit_dot(tree, *n.left, out);
  out += std::to_string(id) + " -> " + std::to_string(*n.right);
  out += at_root ? " [labeldistance=2.5, labelangle=-45, headlabel=\"False\"] ;\n" : " ;\n";
  emit_dot(tree, *n.right, out);
}

}  // namespace detail

/// Graphviz rendering. Internal nodes read "X_k <= t"; the left edge is the
/// condition-true branch.
inline std::string to_dot(const Tree& tree) {
  std::string out = "digraph Tree {\nnode [shape=box, fontname=\"helvetica\"] ;\nedge [fontname=\"helvetica\"] ;\n";
  detail::emit_dot(tree, tree.root_id(), out);
  out += "}\n";
  return out;
}

}  // namespace gradecast::cart
