#pragma once

#include <random>
#include <string>
#include <vector>

#include "gradecast/cart.hpp"
#include "gradecast/ingest.hpp"

namespace fixtures {

inline std::vector<std::string> student_names() {
  return {gradecast::kFeatureNames.begin(), gradecast::kFeatureNames.end()};
}

/// exam_midterm <= 59.5 -> (10 fail, 2 pass) leaf, else (0, 18) pure pass.
inline gradecast::cart::Tree exam_threshold_tree() {
  using gradecast::cart::TreeNode;
  std::vector<TreeNode> nodes(3);
  nodes[0] = {0, {10, 20}, 0.0, gradecast::cart::Split{5, 59.5}, 1, 2, 0};
  nodes[1] = {1, {10, 2}, 0.0, std::nullopt, std::nullopt, std::nullopt, 1};
  nodes[2] = {2, {0, 18}, 0.0, std::nullopt, std::nullopt, std::nullopt, 1};
  for (auto& n : nodes) n.impurity = gradecast::cart::gini(n.counts);
  return gradecast::cart::Tree(nodes, 0, {}, student_names());
}

/// Single leaf holding `pass` passing students.
inline gradecast::cart::Tree all_pass_tree(std::size_t pass = 5) {
  gradecast::cart::TreeNode n{0, {0, pass}, 0.0, std::nullopt, std::nullopt, std::nullopt, 0};
  return gradecast::cart::Tree({n}, 0, {}, student_names());
}

/// Root on exam_midterm; the right side holds a (1, 30) leaf.
inline gradecast::cart::Tree reference_leaf_tree() {
  using gradecast::cart::TreeNode;
  std::vector<TreeNode> nodes(3);
  nodes[0] = {0, {14, 32}, 0.0, gradecast::cart::Split{5, 70.5}, 1, 2, 0};
  nodes[1] = {1, {13, 2}, 0.0, std::nullopt, std::nullopt, std::nullopt, 1};
  nodes[2] = {2, {1, 30}, 0.0, std::nullopt, std::nullopt, std::nullopt, 1};
  for (auto& n : nodes) n.impurity = gradecast::cart::gini(n.counts);
  return gradecast::cart::Tree(nodes, 0, {}, student_names());
}

/// Label-noisy six-feature dataset with scores in [0, 100].
inline gradecast::Dataset random_students(std::mt19937_64& rng, std::size_t n) {
  gradecast::Dataset d;
  d.feature_names = student_names();
  for (std::size_t i = 0; i < n; ++i) {
    gradecast::StudentRecord r;
    double sum = 0;
    for (auto& v : r.scores) {
      v = static_cast<double>(40 + rng() % 61);
      sum += v;
    }
    const bool pass = sum / 6.0 + static_cast<double>(rng() % 21) - 10.0 > 70.0;
    r.label = pass ? gradecast::PassLabel::passed : gradecast::PassLabel::failed;
    d.records.push_back(r);
  }
  return d;
}

}  // namespace fixtures
