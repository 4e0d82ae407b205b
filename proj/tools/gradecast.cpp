// gradecast: offline pass/fail prediction pipeline and service launcher.
//
// Exit codes: 0 success, 2 file/data/model errors, 64 usage errors.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gradecast/gradecast.hpp"
#include "gradecast/service.hpp"

namespace {

constexpr int kExitData = 2;
constexpr int kExitUsage = 64;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Six criteria, given individually, as a comma list, or as a one-row CSV.
struct FeatureInput {
  std::vector<std::optional<double>> named = std::vector<std::optional<double>>(gradecast::kFeatureCount);
  std::vector<double> list;
  std::string row_csv;

  void attach(CLI::App& cmd) {
    for (std::size_t i = 0; i < gradecast::kFeatureCount; ++i) {
      std::string flag = "--" + std::string(gradecast::kFeatureNames[i]);
      std::replace(flag.begin(), flag.end(), '_', '-');
      cmd.add_option(flag, named[i], "X_" + std::to_string(i) + " score");
    }
    cmd.add_option("--features", list, "All six scores, comma separated, in X_0..X_5 order")->delimiter(',');
    cmd.add_option("--row", row_csv, "CSV file with a header and exactly one data row");
  }

  gradecast::FeatureVector resolve() const {
    const bool any_named = std::any_of(named.begin(), named.end(), [](const auto& v) { return v.has_value(); });
    const int sources = int(any_named) + int(!list.empty()) + int(!row_csv.empty());
    if (sources != 1) throw UsageError("give the scores with the six per-criterion flags, --features, or --row");

    gradecast::FeatureVector x{};
    if (any_named) {
      for (std::size_t i = 0; i < named.size(); ++i) {
        if (!named[i]) throw UsageError("missing --" + std::string(gradecast::kFeatureNames[i]));
        x[i] = *named[i];
      }
    } else if (!list.empty()) {
      if (list.size() != gradecast::kFeatureCount) {
        throw UsageError("expected 6 features, got " + std::to_string(list.size()));
      }
      std::copy(list.begin(), list.end(), x.begin());
    } else {
      auto schema = gradecast::ColumnSchema::canonical();
      for (auto& c : schema.columns) {
        if (c.role == gradecast::ColumnRole::label) c.required = false;
      }
      const auto raw = gradecast::parse_csv(gradecast::read_text_file(row_csv), schema, row_csv);
      if (raw.rows.size() != 1) throw UsageError("--row file must contain exactly one data row");
      for (std::size_t i = 0; i < gradecast::kFeatureCount; ++i) {
        const auto v = gradecast::detail::parse_score(raw.rows[0][*raw.column_index(gradecast::kFeatureNames[i])]);
        if (!v) throw UsageError("--row: " + std::string(gradecast::kFeatureNames[i]) + " is not a number");
        x[i] = *v;
      }
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!std::isfinite(x[i])) throw UsageError(std::string(gradecast::kFeatureNames[i]) + " is not finite");
    }
    return x;
  }
};

gradecast::cart::Tree load_model(const std::string& path) {
  return gradecast::cart::deserialize(gradecast::read_text_file(path));
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw gradecast::Error("io_error", "cannot write '" + path + "'");
}

void print_report(const gradecast::eval::EvaluationReport& r) {
  std::cout << gradecast::eval::render_metrics(r) << gradecast::eval::render_confusion_matrix(r.matrix);
}

std::string render_prediction(const gradecast::cart::Prediction& p, const gradecast::cart::Tree& tree,
                              const gradecast::FeatureVector& x) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "label=%d probability=%f\n", gradecast::to_int(p.label), p.pass_probability);
  std::string out = buf;
  for (const auto& s : p.path) {
    out += "  node " + std::to_string(s.node_id) + ": " + tree.feature_names().at(s.feature) + " = " +
           gradecast::format_exact(x[s.feature]) + (s.went_left ? " <= " : " > ") +
           gradecast::format_exact(s.threshold) + "\n";
  }
  out += "  leaf " + std::to_string(p.leaf_id) + "\n";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradecast - student pass/fail prediction with decision trees"};
  app.require_subcommand(1);

  // clean
  std::string clean_input, clean_out;
  bool clean_range = false;
  auto* clean_cmd = app.add_subcommand("clean", "Clean a raw CSV export and report what was dropped");
  clean_cmd->add_option("--input", clean_input, "Raw CSV export")->required();
  clean_cmd->add_option("--out", clean_out, "Write the cleaned CSV here");
  clean_cmd->add_flag("--validate-range", clean_range, "Reject scores outside [0, 100]");

  // train
  std::string train_input, train_out = "model.json", criterion = "gini";
  double test_fraction = 0.25;
  std::uint64_t seed = 0;
  std::optional<std::size_t> max_depth;
  std::size_t min_split = 2, min_leaf = 1;
  bool train_range = false;
  auto* train_cmd = app.add_subcommand("train", "Split, fit a tree, evaluate on the holdout and save the model");
  train_cmd->add_option("--input", train_input, "Raw CSV export")->required();
  train_cmd->add_option("--test-fraction", test_fraction, "Holdout fraction, in (0, 1)")->capture_default_str();
  train_cmd->add_option("--seed", seed, "Shuffle seed")->capture_default_str();
  train_cmd->add_option("--criterion", criterion, "gini or entropy")->capture_default_str();
  train_cmd->add_option("--max-depth", max_depth, "Maximum tree depth (unbounded by default)");
  train_cmd->add_option("--min-samples-split", min_split, "Minimum records to split a node")->capture_default_str();
  train_cmd->add_option("--min-samples-leaf", min_leaf, "Minimum records per leaf")->capture_default_str();
  train_cmd->add_option("--out", train_out, "Model file to write")->capture_default_str();
  train_cmd->add_flag("--validate-range", train_range, "Reject scores outside [0, 100]");

  // evaluate
  std::string eval_model, eval_input;
  std::optional<double> eval_fraction;
  std::uint64_t eval_seed = 0;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a saved model on a CSV export");
  eval_cmd->add_option("--model", eval_model, "Model file")->required();
  eval_cmd->add_option("--input", eval_input, "Raw CSV export")->required();
  eval_cmd->add_option("--test-fraction", eval_fraction, "Score only the holdout fold of this split");
  eval_cmd->add_option("--seed", eval_seed, "Shuffle seed for --test-fraction")->capture_default_str();

  // predict
  std::string predict_model;
  FeatureInput predict_x;
  auto* predict_cmd = app.add_subcommand("predict", "Predict one student's outcome");
  predict_cmd->add_option("--model", predict_model, "Model file")->required();
  predict_x.attach(*predict_cmd);

  // whatif
  std::string whatif_model;
  FeatureInput whatif_x;
  double step = 1.0;
  std::vector<double> caps;
  std::vector<std::string> mutable_names;
  int depth = 1;
  auto* whatif_cmd = app.add_subcommand("whatif", "Smallest score increases that flip a fail to a pass");
  whatif_cmd->add_option("--model", whatif_model, "Model file")->required();
  whatif_x.attach(*whatif_cmd);
  whatif_cmd->add_option("--step", step, "Grid step in score points")->capture_default_str();
  whatif_cmd->add_option("--caps", caps, "Six upper caps, comma separated (default 100 each)")->delimiter(',');
  whatif_cmd->add_option("--mutable", mutable_names, "Criteria allowed to change (default all)")->delimiter(',');
  whatif_cmd->add_option("--depth", depth, "1: single criteria, 2: also pairs")->capture_default_str();

  // export-dot
  std::string dot_model, dot_out;
  auto* dot_cmd = app.add_subcommand("export-dot", "Render a model as Graphviz DOT");
  dot_cmd->add_option("--model", dot_model, "Model file")->required();
  dot_cmd->add_option("--out", dot_out, "Write DOT here instead of standard output");

  // serve
  std::string data_dir, addr;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--data-dir", data_dir, "Store directory")->envname("GRADECAST_DATA_DIR");
  serve_cmd->add_option("--addr", addr, "Listen address host:port")->envname("GRADECAST_ADDR");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*clean_cmd) {
      const auto result = gradecast::load_csv(clean_input, {clean_range});
      const auto& r = result.report;
      std::cout << "input rows: " << r.input_rows << "\n"
                << "output rows: " << r.output_rows << "\n"
                << "dropped for missing values: " << r.dropped_missing << "\n"
                << "dropped as duplicates: " << r.dropped_duplicate << "\n"
                << "dropped columns:";
      for (const auto& c : r.dropped_columns) std::cout << ' ' << c;
      std::cout << "\nlabel mapping: " << r.label_mapping << "\n";
      if (!clean_out.empty()) write_file(clean_out, gradecast::to_csv(result.dataset));
    } else if (*train_cmd) {
      gradecast::cart::HyperParams params;
      gradecast::eval::SplitConfig split;
      try {
        params.criterion = gradecast::cart::parse_criterion(criterion);
        params.max_depth = max_depth;
        params.min_samples_split = min_split;
        params.min_samples_leaf = min_leaf;
        split.test_fraction = test_fraction;
        split.seed = seed;
        params.validate();
        split.validate();
      } catch (const gradecast::ConfigError& e) {
        throw UsageError(e.what());
      }
      const auto data = gradecast::load_csv(train_input, {train_range}).dataset;
      const auto outcome = gradecast::train_and_evaluate(data, params, split);
      std::cout << "seed: " << seed << "\n"
                << "train size: " << outcome.report.train_size << "\n"
                << "test size: " << outcome.report.test_size << "\n";
      print_report(outcome.report);
      write_file(train_out, gradecast::cart::serialize(outcome.tree));
      std::cout << "model written to " << train_out << "\n";
    } else if (*eval_cmd) {
      const auto tree = load_model(eval_model);
      auto data = gradecast::load_csv(eval_input).dataset;
      if (eval_fraction) {
        gradecast::eval::SplitConfig split{*eval_fraction, eval_seed, true};
        try {
          split.validate();
        } catch (const gradecast::ConfigError& e) {
          throw UsageError(e.what());
        }
        data = gradecast::eval::train_test_split(data, split).test;
      }
      auto report = gradecast::eval::evaluate(tree, data);
      print_report(report);
    } else if (*predict_cmd) {
      const auto x = predict_x.resolve();
      const auto tree = load_model(predict_model);
      std::cout << render_prediction(tree.predict(x), tree, x);
    } else if (*whatif_cmd) {
      const auto x = whatif_x.resolve();
      const auto tree = load_model(whatif_model);
      gradecast::whatif::WhatIfConfig config;
      config.step = step;
      config.caps = caps;
      config.depth = depth;
      for (const auto& name : mutable_names) {
        const auto& names = tree.feature_names();
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw UsageError("unknown criterion '" + name + "'");
        config.mutable_features.push_back(static_cast<std::size_t>(it - names.begin()));
      }
      try {
        config.validate(tree.n_features());
      } catch (const gradecast::ConfigError& e) {
        throw UsageError(e.what());
      }
      const auto result = gradecast::whatif::suggest(tree, x, config);
      std::cout << gradecast::whatif::render_table(result, x, tree.feature_names());
    } else if (*dot_cmd) {
      const auto dot = gradecast::cart::to_dot(load_model(dot_model));
      if (dot_out.empty()) {
        std::cout << dot;
      } else {
        write_file(dot_out, dot);
      }
    } else if (*serve_cmd) {
      if (data_dir.empty()) data_dir = "gradecast-data";
      if (addr.empty()) addr = "127.0.0.1:8080";
      std::pair<std::string, int> listen;
      try {
        listen = gradecast::service::parse_address(addr);
      } catch (const gradecast::ConfigError& e) {
        throw UsageError(e.what());
      }
      gradecast::service::Service service(data_dir);
      httplib::Server server;
      service.mount(server);
      std::cerr << "serving " << data_dir << " on " << listen.first << ":" << listen.second << "\n";
      if (!server.listen(listen.first, listen.second)) {
        std::cerr << "error: cannot listen on " << addr << "\n";
        return kExitData;
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const gradecast::Error& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
