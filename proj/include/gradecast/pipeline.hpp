#pragma once

#include "gradecast/cart.hpp"
#include "gradecast/eval.hpp"
#include "gradecast/ingest.hpp"

namespace gradecast {

struct TrainOutcome {
  cart::Tree tree;
  eval::EvaluationReport report;
};

/// split -> fit on train -> predict test -> metrics.
inline TrainOutcome train_and_evaluate(const Dataset& data, const cart::HyperParams& params,
                                       const eval::SplitConfig& split) {
  params.validate();
  const auto folds = eval::train_test_split(data, split);
  auto tree = cart::fit(folds.train, params);
  auto report = eval::evaluate(tree, folds.test);
  report.train_size = folds.train.size();
  report.test_size = folds.test.size();
  return {std::move(tree), std::move(report)};
}

}  // namespace gradecast
