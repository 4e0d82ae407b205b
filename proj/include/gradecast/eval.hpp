#pragma once

// Holdout splitting and binary classification metrics (pass = positive).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gradecast/cart.hpp"
#include "gradecast/error.hpp"
#include "gradecast/ingest.hpp"

namespace gradecast::eval {

struct SplitConfig {
  double test_fraction = 0.25;
  std::uint64_t seed = 0;
  bool shuffle = true;

  void validate() const {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
      throw ConfigError("test fraction must lie strictly between 0 and 1");
    }
  }
};

/// Uniform integer in [0, bound) from a 64-bit Mersenne Twister, by
/// rejection of the biased tail. Only the engine's output sequence is used
/// (std::mt19937_64 is fully specified), so shuffles do not depend on the
/// standard library's distribution implementations.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % bound;
}

/// Record positions in shuffled order: Fisher-Yates from the back, swapping
/// position i with uniform_below(rng, i + 1), rng = mt19937_64(seed).
inline std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

/// floor((1 - test_fraction) * n), kept within [1, n - 1] so both sides are
/// non-empty.
inline std::size_t train_size(std::size_t n, double test_fraction) {
  const double raw = (1.0 - test_fraction) * static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::floor(raw + 1e-9));
  if (k < 1) k = 1;
  if (k > n - 1) k = n - 1;
  return k;
}

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

inline SplitIndices split_indices(std::size_t n, const SplitConfig& config) {
  config.validate();
  if (n < 2) throw DomainError("need at least 2 records to split");
  std::vector<std::size_t> order(n);
  if (config.shuffle) {
    order = shuffled_order(n, config.seed);
  } else {
    std::iota(order.begin(), order.end(), std::size_t{0});
  }
  const auto k = train_size(n, config.test_fraction);
  return {{order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k)},
          {order.begin() + static_cast<std::ptrdiff_t>(k), order.end()}};
}

struct TrainTest {
  Dataset train;
  Dataset test;
};

inline TrainTest train_test_split(const Dataset& data, const SplitConfig& config = {}) {
  const auto idx = split_indices(data.size(), config);
  TrainTest out;
  for (auto* d : {&out.train, &out.test}) {
    d->feature_names = data.feature_names;
    d->source = data.source;
  }
  for (const auto i : idx.train) out.train.records.push_back(data.records[i]);
  for (const auto i : idx.test) out.test.records.push_back(data.records[i]);
  return out;
}

struct ConfusionMatrix {
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tp = 0;

  std::size_t total() const noexcept { return tn + fp + fn + tp; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion_matrix(std::span<const PassLabel> y_true, std::span<const PassLabel> y_pred) {
  if (y_true.size() != y_pred.size()) throw DomainError("label lists differ in length");
  if (y_true.empty()) throw DomainError("label lists are empty");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const bool t = y_true[i] == PassLabel::passed;
    const bool p = y_pred[i] == PassLabel::passed;
    if (t) {
      p ? ++cm.tp : ++cm.fn;
    } else {
      p ? ++cm.fp : ++cm.tn;
    }
  }
  return cm;
}

enum class Degenerate : unsigned { precision_undefined, recall_undefined, f1_undefined };

inline const char* to_string(Degenerate d) {
  switch (d) {
    case Degenerate::precision_undefined:
      return "precision-undefined";
    case Degenerate::recall_undefined:
      return "recall-undefined";
    case Degenerate::f1_undefined:
      return "f1-undefined";
  }
  return "?";
}

struct EvaluationReport {
  ConfusionMatrix matrix;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::set<Degenerate> degenerate;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

/// Accuracy, precision, recall and F1. A zero denominator yields 0.0 and
/// the matching degenerate flag.
inline EvaluationReport metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw DomainError("confusion matrix is empty");
  EvaluationReport r;
  r.matrix = cm;
  r.test_size = cm.total();
  const auto ratio = [&](std::size_t num, std::size_t den, Degenerate flag) {
    if (den == 0) {
      r.degenerate.insert(flag);
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  r.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  r.precision = ratio(cm.tp, cm.tp + cm.fp, Degenerate::precision_undefined);
  r.recall = ratio(cm.tp, cm.tp + cm.fn, Degenerate::recall_undefined);
  r.f1 = ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn, Degenerate::f1_undefined);
  return r;
}

/// Predicts every record of `test` and scores the result.
inline EvaluationReport evaluate(const cart::Tree& tree, const Dataset& test) {
  std::vector<PassLabel> y_true;
  std::vector<PassLabel> y_pred;
  for (const auto& r : test.records) {
    y_true.push_back(r.label);
    y_pred.push_back(tree.predict(r.scores).label);
  }
  return metrics(confusion_matrix(y_true, y_pred));
}

/// Four lines, "Accuracy: %f" style.
inline std::string render_metrics(const EvaluationReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "Accuracy: %f\nPrecision: %f\nRecall: %f\nF1 score: %f\n", r.accuracy,
                r.precision, r.recall, r.f1);
  std::string out(buf);
  for (const auto d : r.degenerate) out += std::string("Note: ") + to_string(d) + "\n";
  return out;
}

/// "[[tn fp]\n [fn tp]]", columns right-aligned to the widest entry.
inline std::string render_confusion_matrix(const ConfusionMatrix& cm) {
  const auto cells = {cm.tn, cm.fp, cm.fn, cm.tp};
  std::size_t width = 1;
  for (const auto c : cells) width = std::max(width, std::to_string(c).size());
  const auto pad = [width](std::size_t v) {
    auto s = std::to_string(v);
    return std::string(width - s.size(), ' ') + s;
  };
  return "Confusion Matrix : \n[[" + pad(cm.tn) + " " + pad(cm.fp) + "]\n [" + pad(cm.fn) + " " + pad(cm.tp) +
         "]]\n";
}

}  // namespace gradecast::eval
