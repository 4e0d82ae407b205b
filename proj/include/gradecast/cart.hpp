#pragma once

// CART classification trees for the binary pass/fail target.
//
// Growth is greedy recursive binary splitting: at every node all
// (feature, threshold) pairs are scored by the size-weighted impurity of the
// two children and the cheapest one is taken. Thresholds are midpoints of
// consecutive distinct feature values and rows with value <= threshold go
// left. Equal-cost candidates resolve to the lowest feature index, then the
// lowest threshold.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gradecast/error.hpp"
#include "gradecast/ingest.hpp"

namespace gradecast::cart {

/// Costs closer than this are treated as equal.
inline constexpr double kCostTolerance = 1e-12;

enum class Criterion { gini, entropy };

inline std::string_view to_string(Criterion c) { return c == Criterion::gini ? "gini" : "entropy"; }

inline Criterion parse_criterion(std::string_view s) {
  if (s == "gini") return Criterion::gini;
  if (s == "entropy") return Criterion::entropy;
  throw ConfigError("unknown criterion '" + std::string(s) + "' (expected gini or entropy)");
}

struct ClassCounts {
  std::size_t fail = 0;
  std::size_t pass = 0;

  std::size_t total() const noexcept { return fail + pass; }
  bool pure() const noexcept { return fail == 0 || pass == 0; }

  void add(PassLabel label) noexcept { label == PassLabel::passed ? ++pass : ++fail; }

  friend ClassCounts operator+(ClassCounts a, ClassCounts b) noexcept {
    return {a.fail + b.fail, a.pass + b.pass};
  }
  friend ClassCounts operator-(ClassCounts a, ClassCounts b) noexcept {
    return {a.fail - b.fail, a.pass - b.pass};
  }
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

/// 1 - p_fail^2 - p_pass^2.
inline double gini(ClassCounts c) {
  if (c.total() == 0) throw DomainError("gini of an empty node");
  const double t = static_cast<double>(c.total());
  // 1 - pf^2 - pp^2 rewritten without the cancellation.
  return 2.0 * static_cast<double>(c.fail) * static_cast<double>(c.pass) / (t * t);
}

/// Shannon entropy in bits, with 0 log 0 = 0.
inline double entropy(ClassCounts c) {
  if (c.total() == 0) throw DomainError("entropy of an empty node");
  const double t = static_cast<double>(c.total());
  double h = 0.0;
  for (const std::size_t k : {c.fail, c.pass}) {
    if (k == 0) continue;
    const double p = static_cast<double>(k) / t;
    h -= p * std::log2(p);
  }
  return h;
}

inline double impurity(Criterion criterion, ClassCounts c) {
  return criterion == Criterion::gini ? gini(c) : entropy(c);
}

struct HyperParams {
  Criterion criterion = Criterion::gini;
  std::optional<std::size_t> max_depth;  // unbounded when empty
  std::size_t min_samples_split = 2;
  std::size_t min_samples_leaf = 1;

  void validate() const {
    if (max_depth && *max_depth < 1) throw ConfigError("max_depth must be a positive integer");
    if (min_samples_split < 2) throw ConfigError("min_samples_split must be at least 2");
    if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be at least 1");
  }

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

/// Midpoints between consecutive distinct values, ascending.
inline std::vector<double> candidate_thresholds(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<double> out;
  if (values.size() < 2) return out;
  out.reserve(values.size() - 1);
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    const double lo = values[i];
    const double hi = values[i + 1];
    double mid = lo + (hi - lo) / 2.0;
    // Adjacent doubles: keep hi on the right-hand side.
    if (!(mid < hi)) mid = lo;
    out.push_back(mid);
  }
  return out;
}

/// Row-major feature matrix with binary labels. The learner is agnostic to
/// the number of features; the student model uses six.
class Samples {
 public:
  explicit Samples(std::size_t n_features) : n_features_(n_features) {
    if (n_features == 0) throw DomainError("samples need at least one feature");
  }

  static Samples from_dataset(const Dataset& ds) {
    Samples s(kFeatureCount);
    for (const auto& r : ds.records) s.add(r.scores, r.label);
    return s;
  }

  void add(std::span<const double> row, PassLabel label) {
    if (row.size() != n_features_) throw DomainError("row arity does not match feature count");
    values_.insert(values_.end(), row.begin(), row.end());
    labels_.push_back(label);
  }

  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  std::size_t n_features() const noexcept { return n_features_; }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * n_features_, n_features_};
  }
  double value(std::size_t i, std::size_t feature) const { return values_[i * n_features_ + feature]; }
  PassLabel label(std::size_t i) const { return labels_[i]; }

  ClassCounts counts(std::span<const std::size_t> rows) const {
    ClassCounts c;
    for (const auto i : rows) c.add(labels_[i]);
    return c;
  }

 private:
  std::size_t n_features_;
  std::vector<double> values_;
  std::vector<PassLabel> labels_;
};

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;

  friend bool operator==(const Split&, const Split&) = default;
};

struct SplitCandidate {
  std::size_t feature = 0;
  double threshold = 0.0;
  double weighted_impurity = 0.0;
  double gain = 0.0;
  ClassCounts left;
  ClassCounts right;
};

/// Cheapest split of `rows`, or nothing when the node is pure, too small,
/// or has no threshold that satisfies the leaf-size constraint.
inline std::optional<SplitCandidate> best_split(const Samples& samples, std::span<const std::size_t> rows,
                                                const HyperParams& params) {
  if (rows.empty() || rows.size() < params.min_samples_split) return std::nullopt;
  const ClassCounts parent = samples.counts(rows);
  if (parent.pure()) return std::nullopt;

  const double n = static_cast<double>(rows.size());
  const double parent_impurity = impurity(params.criterion, parent);

  std::optional<SplitCandidate> best;
  std::vector<std::pair<double, PassLabel>> column(rows.size());

  for (std::size_t f = 0; f < samples.n_features(); ++f) {
    for (std::size_t k = 0; k < rows.size(); ++k) {
      column[k] = {samples.value(rows[k], f), samples.label(rows[k])};
    }
    std::sort(column.begin(), column.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    ClassCounts left;
    for (std::size_t k = 0; k + 1 < column.size(); ++k) {
      left.add(column[k].second);
      const double lo = column[k].first;
      const double hi = column[k + 1].first;
      if (!(lo < hi)) continue;

      const ClassCounts right = parent - left;
      if (left.total() < params.min_samples_leaf || right.total() < params.min_samples_leaf) continue;

      const double cost = (static_cast<double>(left.total()) * impurity(params.criterion, left) +
                           static_cast<double>(right.total()) * impurity(params.criterion, right)) /
                          n;
      // Weighted child impurity never exceeds the parent's, so every
      // candidate qualifies. Zero-gain splits are kept: layouts such as XOR
      // only separate one level further down.
      const double gain = std::max(0.0, parent_impurity - cost);
      if (best && !(cost < best->weighted_impurity - kCostTolerance)) continue;

      double threshold = lo + (hi - lo) / 2.0;
      if (!(threshold < hi)) threshold = lo;
      best = SplitCandidate{f, threshold, cost, gain, left, right};
    }
  }
  return best;
}

inline std::optional<SplitCandidate> best_split(const Samples& samples, const HyperParams& params) {
  std::vector<std::size_t> rows(samples.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return best_split(samples, rows, params);
}

struct TreeNode {
  std::size_t id = 0;
  ClassCounts counts;
  double impurity = 0.0;
  std::optional<Split> split;
  std::optional<std::size_t> left;
  std::optional<std::size_t> right;
  std::size_t depth = 0;

  bool is_leaf() const noexcept { return !split.has_value(); }

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct PathStep {
  std::size_t node_id = 0;
  std::size_t feature = 0;
  double threshold = 0.0;
  bool went_left = false;

  friend bool operator==(const PathStep&, const PathStep&) = default;
};

struct Prediction {
  PassLabel label = PassLabel::failed;
  double pass_probability = 0.0;
  std::size_t leaf_id = 0;
  std::vector<PathStep> path;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Leaf verdict: pass only on a strict pass majority. An even leaf predicts
/// fail, which flags the student for follow-up.
inline PassLabel majority_label(ClassCounts c) noexcept {
  return c.pass > c.fail ? PassLabel::passed : PassLabel::failed;
}

/// Immutable fitted tree. Nodes are stored by id; construction validates the
/// whole structure and throws FormatError on the first violation found.
class Tree {
 public:
  static constexpr int kFormatVersion = 1;

  Tree(std::vector<TreeNode> nodes, std::size_t root, HyperParams params,
       std::vector<std::string> feature_names)
      : nodes_(std::move(nodes)),
        root_(root),
        params_(std::move(params)),
        feature_names_(std::move(feature_names)) {
    validate();
  }

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  const TreeNode& node(std::size_t id) const { return nodes_.at(id); }
  const TreeNode& root() const { return nodes_.at(root_); }
  std::size_t root_id() const noexcept { return root_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const HyperParams& params() const noexcept { return params_; }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
  std::size_t n_features() const noexcept { return feature_names_.size(); }

  std::size_t depth() const {
    std::size_t d = 0;
    for (const auto& n : nodes_) d = std::max(d, n.depth);
    return d;
  }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
  }

  /// Routes `x` to its leaf. Throws DomainError on wrong arity or a
  /// non-finite value.
  Prediction predict(std::span<const double> x) const {
    if (x.size() != n_features()) {
      throw DomainError("expected " + std::to_string(n_features()) + " features, got " +
                        std::to_string(x.size()));
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!std::isfinite(x[i])) throw DomainError("feature " + std::to_string(i) + " is not finite");
    }
    Prediction p;
    const TreeNode* n = &nodes_[root_];
    while (!n->is_leaf()) {
      const bool left = x[n->split->feature] <= n->split->threshold;
      p.path.push_back({n->id, n->split->feature, n->split->threshold, left});
      n = &nodes_[left ? *n->left : *n->right];
    }
    p.leaf_id = n->id;
    p.pass_probability = static_cast<double>(n->counts.pass) / static_cast<double>(n->counts.total());
    p.label = majority_label(n->counts);
    return p;
  }

  friend bool operator==(const Tree&, const Tree&) = default;

 private:
  void validate() const {
    const auto fail = [](const std::string& m) { throw FormatError(m); };
    params_.validate();
    if (nodes_.empty()) fail("tree has no nodes");
    if (feature_names_.empty()) fail("tree has no feature names");
    if (root_ >= nodes_.size()) fail("root id out of range");

    std::vector<std::size_t> parents(nodes_.size(), 0);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      const std::string where = " at node " + std::to_string(i);
      if (n.id != i) fail("node id mismatch" + where);
      if (n.counts.total() == 0) fail("empty counts" + where);
      if (n.split.has_value() != (n.left.has_value() && n.right.has_value()) ||
          n.left.has_value() != n.right.has_value()) {
        fail("split and children must be present together" + where);
      }
      if (n.split) {
        if (n.split->feature >= feature_names_.size()) fail("split feature out of range" + where);
        if (!std::isfinite(n.split->threshold)) fail("non-finite threshold" + where);
        for (const auto c : {*n.left, *n.right}) {
          if (c >= nodes_.size()) fail("child id out of range" + where);
          if (c == i) fail("node is its own child" + where);
          ++parents[c];
        }
      }
    }
    if (parents[root_] != 0) fail("root has a parent");
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (i != root_ && parents[i] != 1) {
        fail("node " + std::to_string(i) + " has " + std::to_string(parents[i]) + " parents");
      }
    }

    // Single parent everywhere still admits detached cycles; require every
    // node to be reachable from the root.
    std::vector<bool> seen(nodes_.size(), false);
    std::vector<std::size_t> stack{root_};
    std::size_t visited = 0;
    if (nodes_[root_].depth != 0) fail("root depth must be 0");
    while (!stack.empty()) {
      const auto id = stack.back();
      stack.pop_back();
      if (seen[id]) fail("cycle through node " + std::to_string(id));
      seen[id] = true;
      ++visited;
      const auto& n = nodes_[id];
      if (n.is_leaf()) continue;
      const auto& l = nodes_[*n.left];
      const auto& r = nodes_[*n.right];
      if (l.depth != n.depth + 1 || r.depth != n.depth + 1) {
        fail("depth mismatch below node " + std::to_string(id));
      }
      if (l.counts + r.counts != n.counts) {
        fail("count conservation violated at node " + std::to_string(id));
      }
      stack.push_back(*n.right);
      stack.push_back(*n.left);
    }
    if (visited != nodes_.size()) fail("nodes unreachable from root");
    if (params_.max_depth && depth() > *params_.max_depth) fail("tree deeper than max_depth");
  }

  std::vector<TreeNode> nodes_;
  std::size_t root_ = 0;
  HyperParams params_;
  std::vector<std::string> feature_names_;
};

namespace detail {

struct Grower {
  const Samples& samples;
  const HyperParams& params;
  std::vector<TreeNode> nodes;

  std::size_t grow(std::vector<std::size_t> rows, std::size_t depth) {
    const std::size_t id = nodes.size();
    TreeNode node;
    node.id = id;
    node.depth = depth;
    node.counts = samples.counts(rows);
    node.impurity = impurity(params.criterion, node.counts);
    nodes.push_back(node);

    const bool depth_reached = params.max_depth && depth >= *params.max_depth;
    if (node.counts.pure() || rows.size() < params.min_samples_split || depth_reached) return id;

    const auto split = best_split(samples, rows, params);
    if (!split) return id;

    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    for (const auto r : rows) {
      (samples.value(r, split->feature) <= split->threshold ? left_rows : right_rows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    nodes[id].split = Split{split->feature, split->threshold};
    const auto l = grow(std::move(left_rows), depth + 1);
    const auto r = grow(std::move(right_rows), depth + 1);
    nodes[id].left = l;
    nodes[id].right = r;
    return id;
  }
};

}  // namespace detail

/// Grows a tree top-down. Node ids follow pre-order with the root at 0.
inline Tree fit(const Samples& samples, const HyperParams& params = {},
                std::vector<std::string> feature_names = {}) {
  params.validate();
  if (samples.empty()) throw DomainError("cannot fit a tree on an empty dataset");
  if (feature_names.empty()) {
    for (std::size_t f = 0; f < samples.n_features(); ++f) feature_names.push_back("X_" + std::to_string(f));
  }
  if (feature_names.size() != samples.n_features()) {
    throw DomainError("feature name count does not match sample width");
  }
  detail::Grower g{samples, params, {}};
  std::vector<std::size_t> rows(samples.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  g.grow(std::move(rows), 0);
  return Tree(std::move(g.nodes), 0, params, std::move(feature_names));
}

inline Tree fit(const Dataset& data, const HyperParams& params = {}) {
  if (data.empty()) throw DomainError("cannot fit a tree on an empty dataset");
  std::vector<std::string> names = data.feature_names;
  if (names.empty()) names.assign(kFeatureNames.begin(), kFeatureNames.end());
  return fit(Samples::from_dataset(data), params, std::move(names));
}

inline Prediction predict(const Tree& tree, std::span<const double> x) { return tree.predict(x); }

}  // namespace gradecast::cart
