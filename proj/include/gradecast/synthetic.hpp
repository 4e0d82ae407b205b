#pragma once

// Synthetic stand-in for an academic-record export. Scores are drawn from
// label-conditional normals, clamped to [0, 100] and rounded to whole points.
// Only mt19937_64 output is consumed (uniforms from the top 53 bits, normals
// by Box-Muller), so the text is reproducible across standard libraries.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "gradecast/eval.hpp"
#include "gradecast/ingest.hpp"

namespace gradecast::synthetic {

struct GeneratorConfig {
  std::size_t rows = 82;
  std::size_t failed = 23;  // 19:42 train / 4:17 test in the reference run
  std::uint64_t seed = 2022;
  std::size_t class_record = 101;
};

namespace detail {

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double normal(std::mt19937_64& rng, double mean, double sd) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

struct Profile {
  std::array<double, kFeatureCount> mean;
  std::array<double, kFeatureCount> sd;
};

// att_prelim, cp_prelim, exam_prelim, att_midterm, cp_midterm, exam_midterm
inline constexpr Profile kPassing{{91, 84, 76, 90, 85, 79}, {6, 9, 11, 7, 9, 10}};
inline constexpr Profile kFailing{{80, 72, 63, 76, 70, 58}, {11, 11, 12, 12, 12, 12}};

}  // namespace detail

/// CSV text with the canonical nine-column header.
inline std::string generate_csv(const GeneratorConfig& config = {}) {
  std::mt19937_64 rng(config.seed);
  std::vector<bool> passed(config.rows, true);
  std::fill(passed.begin(), passed.begin() + static_cast<std::ptrdiff_t>(std::min(config.failed, config.rows)),
            false);
  for (std::size_t i = config.rows; i > 1; --i) {
    const auto j = static_cast<std::size_t>(eval::uniform_below(rng, i));
    std::swap(passed[i - 1], passed[j]);
  }

  std::string out =
      "student_id,class_record_id,att_prelim,cp_prelim,exam_prelim,att_midterm,cp_midterm,exam_midterm,remark\n";
  for (std::size_t i = 0; i < config.rows; ++i) {
    const auto& prof = passed[i] ? detail::kPassing : detail::kFailing;
    char id[32];
    std::snprintf(id, sizeof id, "2022-%04zu,CR-%zu", i + 1, config.class_record);
    out += id;
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      const double v = std::clamp(std::round(detail::normal(rng, prof.mean[f], prof.sd[f])), 0.0, 100.0);
      out += ',' + std::to_string(static_cast<int>(v));
    }
    out += passed[i] ? ",PASSED\n" : ",FAILED\n";
  }
  return out;
}

}  // namespace gradecast::synthetic
