#pragma once

// What-if advice: the smallest score increases that turn a predicted fail
// into a predicted pass.
//
// Deltas live on a grid of `step` score points and never push a score past
// its cap. Depth 1 changes one criterion at a time; depth 2 also tries
// pairs, and a pair is only reported when it beats the best single change of
// both of its members.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gradecast/cart.hpp"
#include "gradecast/error.hpp"

namespace gradecast::whatif {

struct WhatIfConfig {
  double step = 1.0;
  std::vector<double> caps;                    // empty: 100 for every feature
  std::vector<std::size_t> mutable_features;   // empty: every feature
  int depth = 1;                               // 1 or 2

  void validate(std::size_t n_features) const {
    if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError("grid step must be a positive number");
    if (depth != 1 && depth != 2) throw ConfigError("combination depth must be 1 or 2");
    if (!caps.empty() && caps.size() != n_features) {
      throw ConfigError("expected " + std::to_string(n_features) + " caps, got " + std::to_string(caps.size()));
    }
    for (const double c : caps) {
      if (!std::isfinite(c)) throw ConfigError("caps must be finite");
    }
    for (const auto f : mutable_features) {
      if (f >= n_features) throw ConfigError("mutable feature index " + std::to_string(f) + " out of range");
    }
  }

  double cap(std::size_t feature) const { return caps.empty() ? 100.0 : caps[feature]; }

  bool is_mutable(std::size_t feature) const {
    return mutable_features.empty() ||
           std::find(mutable_features.begin(), mutable_features.end(), feature) != mutable_features.end();
  }
};

/// Largest k with current + k * step <= cap (0 when the score already sits
/// at or above its cap).
inline std::size_t max_steps(double current, double cap, double step) {
  if (!(cap > current)) return 0;
  const double k = std::floor((cap - current) / step + 1e-9);
  return k < 0 ? 0 : static_cast<std::size_t>(k);
}

struct Counterfactual {
  std::vector<double> deltas;         // one per feature, zero when untouched
  std::vector<std::size_t> features;  // changed features, ascending
  std::size_t steps = 0;              // total grid steps
  double total_magnitude = 0.0;
  cart::Prediction prediction;
};

struct WhatIfResult {
  bool already_pass = false;
  bool reachable = false;
  cart::Prediction base;
  std::vector<Counterfactual> suggestions;
};

namespace detail {

inline Counterfactual make_counterfactual(const cart::Tree& tree, std::span<const double> x,
                                          const std::vector<std::pair<std::size_t, std::size_t>>& moves,
                                          double step) {
  Counterfactual cf;
  cf.deltas.assign(x.size(), 0.0);
  std::vector<double> y(x.begin(), x.end());
  for (const auto& [f, k] : moves) {
    cf.deltas[f] = static_cast<double>(k) * step;
    y[f] = x[f] + cf.deltas[f];
    cf.features.push_back(f);
    cf.steps += k;
    cf.total_magnitude += cf.deltas[f];
  }
  cf.prediction = tree.predict(y);
  return cf;
}

inline bool passes_with(const cart::Tree& tree, std::vector<double>& y) {
  return tree.predict(y).label == PassLabel::passed;
}

}  // namespace detail

/// Minimal single-criterion grid steps (depth-1 search); nullopt where no
/// cap-respecting increase flips the prediction.
inline std::vector<std::optional<std::size_t>> single_feature_steps(const cart::Tree& tree,
                                                                    std::span<const double> x,
                                                                    const WhatIfConfig& config) {
  std::vector<std::optional<std::size_t>> out(x.size());
  std::vector<double> y(x.begin(), x.end());
  for (std::size_t f = 0; f < x.size(); ++f) {
    if (!config.is_mutable(f)) continue;
    const auto kmax = max_steps(x[f], config.cap(f), config.step);
    for (std::size_t k = 1; k <= kmax; ++k) {
      y[f] = x[f] + static_cast<double>(k) * config.step;
      if (detail::passes_with(tree, y)) {
        out[f] = k;
        break;
      }
    }
    y[f] = x[f];
  }
  return out;
}

/// Counterfactuals ordered by total magnitude, ties by lowest feature index.
/// An already-passing input yields one all-zero counterfactual.
inline WhatIfResult suggest(const cart::Tree& tree, std::span<const double> x, const WhatIfConfig& config = {}) {
  config.validate(tree.n_features());
  WhatIfResult result;
  result.base = tree.predict(x);

  if (result.base.label == PassLabel::passed) {
    result.already_pass = true;
    result.reachable = true;
    Counterfactual cf;
    cf.deltas.assign(x.size(), 0.0);
    cf.prediction = result.base;
    result.suggestions.push_back(std::move(cf));
    return result;
  }

  const auto singles = single_feature_steps(tree, x, config);
  for (std::size_t f = 0; f < x.size(); ++f) {
    if (singles[f]) result.suggestions.push_back(detail::make_counterfactual(tree, x, {{f, *singles[f]}}, config.step));
  }

  if (config.depth == 2) {
    constexpr auto kNone = std::numeric_limits<std::size_t>::max();
    std::vector<double> y(x.begin(), x.end());
    for (std::size_t f = 0; f < x.size(); ++f) {
      if (!config.is_mutable(f)) continue;
      const auto fmax = max_steps(x[f], config.cap(f), config.step);
      for (std::size_t g = f + 1; g < x.size(); ++g) {
        if (!config.is_mutable(g)) continue;
        const auto gmax = max_steps(x[g], config.cap(g), config.step);
        if (fmax == 0 || gmax == 0) continue;
        // Only totals strictly below both singles are worth reporting.
        const std::size_t bound = std::min(singles[f].value_or(kNone), singles[g].value_or(kNone));
        const std::size_t s_max = std::min(fmax + gmax, bound == kNone ? kNone : bound - 1);
        bool found = false;
        for (std::size_t s = 2; s <= s_max && !found; ++s) {
          const std::size_t a_lo = s > gmax ? s - gmax : 1;
          const std::size_t a_hi = std::min(fmax, s - 1);
          for (std::size_t a = a_lo; a <= a_hi; ++a) {
            const std::size_t b = s - a;
            y[f] = x[f] + static_cast<double>(a) * config.step;
            y[g] = x[g] + static_cast<double>(b) * config.step;
            if (detail::passes_with(tree, y)) {
              result.suggestions.push_back(detail::make_counterfactual(tree, x, {{f, a}, {g, b}}, config.step));
              found = true;
              break;
            }
          }
        }
        y[f] = x[f];
        y[g] = x[g];
      }
    }
  }

  std::stable_sort(result.suggestions.begin(), result.suggestions.end(),
                   [](const Counterfactual& a, const Counterfactual& b) {
                     if (a.steps != b.steps) return a.steps < b.steps;
                     return a.features < b.features;
                   });
  result.reachable = !result.suggestions.empty();
  return result;
}

struct CriterionRank {
  std::size_t feature = 0;
  std::optional<double> delta;  // nullopt: cannot flip the prediction alone
};

/// Per-criterion minimal flipping delta, ascending; unreachable criteria
/// last in index order.
inline std::vector<CriterionRank> rank_criteria(const cart::Tree& tree, std::span<const double> x,
                                                const WhatIfConfig& config = {}) {
  config.validate(tree.n_features());
  std::vector<CriterionRank> out;
  if (tree.predict(x).label == PassLabel::passed) {
    for (std::size_t f = 0; f < x.size(); ++f) out.push_back({f, 0.0});
    return out;
  }
  const auto singles = single_feature_steps(tree, x, config);
  for (std::size_t f = 0; f < x.size(); ++f) {
    if (singles[f]) out.push_back({f, static_cast<double>(*singles[f]) * config.step});
  }
  std::stable_sort(out.begin(), out.end(), [&](const CriterionRank& a, const CriterionRank& b) {
    return singles[a.feature] < singles[b.feature];
  });
  for (std::size_t f = 0; f < x.size(); ++f) {
    if (!singles[f]) out.push_back({f, std::nullopt});
  }
  return out;
}

namespace detail {

inline std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string render_rows(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    width.resize(std::max(width.size(), r.size()), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      line += r[c];
      if (c + 1 < r.size()) line += std::string(width[c] - r[c].size() + 2, ' ');
    }
    out += line + "\n";
  }
  return out;
}

}  // namespace detail

/// Text table: rank, feature, current value, required value, delta and the
/// resulting pass probability. A pair suggestion spans two rows sharing a
/// rank.
inline std::string render_table(const WhatIfResult& result, std::span<const double> x,
                                const std::vector<std::string>& feature_names) {
  std::vector<std::vector<std::string>> rows{{"rank", "feature", "current", "required", "delta", "p_pass"}};
  std::size_t rank = 0;
  for (const auto& cf : result.suggestions) {
    ++rank;
    const auto p = detail::fixed(cf.prediction.pass_probability, 6);
    if (cf.features.empty()) {
      rows.push_back({std::to_string(rank), "(already passing)", "-", "-", detail::fixed(0.0), p});
      continue;
    }
    for (const auto f : cf.features) {
      rows.push_back({std::to_string(rank), feature_names.at(f), detail::fixed(x[f]),
                      detail::fixed(x[f] + cf.deltas[f]), "+" + detail::fixed(cf.deltas[f]), p});
    }
  }
  std::string out = detail::render_rows(rows);
  if (!result.reachable) out += "no cap-respecting improvement flips the prediction\n";
  return out;
}

}  // namespace gradecast::whatif
