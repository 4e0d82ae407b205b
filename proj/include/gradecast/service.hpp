#pragma once

// HTTP service over a file-backed model store.
//
//   POST /datasets                      CSV body -> {dataset_id, records, report}
//   POST /models                        {dataset_id, hyperparameters, split} -> {model_id, evaluation}
//   GET  /models                        -> {models: [{model_id, dataset_id, created_at, accuracy}]}
//   GET  /models/{id}                   -> stored metadata and evaluation
//   POST /models/{id}/predict           {features: [6]} -> prediction
//   POST /models/{id}/whatif            {features: [6], config?} -> suggestions + table
//   GET  /models/{id}/export?format=    dot | model
//
// Errors are {code, message, detail?}. Store layout under the data
// directory: datasets/<id>.json and models/<id>.json, each written to a
// temporary file and renamed into place. The in-memory index is rebuilt
// from the directory on startup.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <system_error>
#include <tuple>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "gradecast/cart.hpp"
#include "gradecast/error.hpp"
#include "gradecast/eval.hpp"
#include "gradecast/ingest.hpp"
#include "gradecast/json_io.hpp"
#include "gradecast/pipeline.hpp"
#include "gradecast/tree_io.hpp"
#include "gradecast/whatif.hpp"

namespace gradecast::service {

using nlohmann::ordered_json;

struct StoredDataset {
  std::string id;
  std::string source;
  std::string created_at;
  CleaningReport report;
  std::string csv;  // cleaned records, ingest::to_csv form
};

struct StoredModel {
  std::string id;
  std::string dataset_id;
  std::string created_at;
  eval::SplitConfig split;
  eval::EvaluationReport evaluation;
  std::string tree;  // serialized model file, verbatim
};

inline std::string utc_timestamp() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const auto t = system_clock::to_time_t(now);
  const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

inline ordered_json to_json(const StoredDataset& d) {
  return {{"dataset_id", d.id},
          {"source", d.source},
          {"created_at", d.created_at},
          {"report", json::to_json(d.report)},
          {"csv", d.csv}};
}

inline ordered_json to_json(const StoredModel& m) {
  return {{"model_id", m.id},
          {"dataset_id", m.dataset_id},
          {"created_at", m.created_at},
          {"split", json::to_json(m.split)},
          {"evaluation", json::to_json(m.evaluation)},
          {"tree", m.tree}};
}

inline StoredDataset dataset_from_json(const ordered_json& j) {
  StoredDataset d;
  d.id = j.at("dataset_id").get<std::string>();
  d.source = j.at("source").get<std::string>();
  d.created_at = j.at("created_at").get<std::string>();
  d.report = json::cleaning_report_from_json(j.at("report"));
  d.csv = j.at("csv").get<std::string>();
  return d;
}

inline StoredModel model_from_json(const ordered_json& j) {
  StoredModel m;
  m.id = j.at("model_id").get<std::string>();
  m.dataset_id = j.at("dataset_id").get<std::string>();
  m.created_at = j.at("created_at").get<std::string>();
  const auto& s = j.at("split");
  m.split.test_fraction = s.at("test_fraction").get<double>();
  m.split.seed = s.at("seed").get<std::uint64_t>();
  m.split.shuffle = s.at("shuffle").get<bool>();
  m.evaluation = json::evaluation_from_json(j.at("evaluation"));
  m.tree = j.at("tree").get<std::string>();
  return m;
}

/// One JSON file per dataset/model; files are immutable once renamed into
/// place. Only the index is shared mutable state.
class ModelStore {
 public:
  explicit ModelStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(datasets_dir());
    std::filesystem::create_directories(models_dir());
    rebuild_index();
  }

  const std::filesystem::path& root() const noexcept { return root_; }

  /// Scans the directory; stale temporaries are removed and files that fail
  /// to load are left out of the index.
  void rebuild_index() {
    std::map<std::string, std::filesystem::path> datasets;
    std::map<std::string, std::filesystem::path> models;
    for (const auto& [dir, index, is_model] :
         {std::tuple{datasets_dir(), &datasets, false}, std::tuple{models_dir(), &models, true}}) {
      for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto& p = entry.path();
        if (p.filename().string().find(".tmp") != std::string::npos) {
          std::error_code ec;
          std::filesystem::remove(p, ec);
          continue;
        }
        if (p.extension() != ".json") continue;
        try {
          const auto j = ordered_json::parse(read_text_file(p));
          if (is_model) {
            const auto m = model_from_json(j);
            cart::deserialize(m.tree);
            if (m.id != p.stem().string()) continue;
          } else if (dataset_from_json(j).id != p.stem().string()) {
            continue;
          }
          (*index)[p.stem().string()] = p;
        } catch (const std::exception&) {
          continue;
        }
      }
    }
    std::lock_guard lock(mutex_);
    datasets_ = std::move(datasets);
    models_ = std::move(models);
  }

  std::string put_dataset(StoredDataset d) {
    d.id = reserve_id();
    const auto path = datasets_dir() / (d.id + ".json");
    write_atomic(path, to_json(d).dump(2) + "\n");
    std::lock_guard lock(mutex_);
    datasets_[d.id] = path;
    return d.id;
  }

  std::string put_model(StoredModel m) {
    m.id = reserve_id();
    const auto path = models_dir() / (m.id + ".json");
    write_atomic(path, to_json(m).dump(2) + "\n");
    std::lock_guard lock(mutex_);
    models_[m.id] = path;
    return m.id;
  }

  std::optional<StoredDataset> get_dataset(const std::string& id) const {
    const auto path = lookup(datasets_, id);
    if (!path) return std::nullopt;
    return dataset_from_json(ordered_json::parse(read_text_file(*path)));
  }

  std::optional<StoredModel> get_model(const std::string& id) const {
    const auto path = lookup(models_, id);
    if (!path) return std::nullopt;
    return model_from_json(ordered_json::parse(read_text_file(*path)));
  }

  std::vector<std::string> model_ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> ids;
    for (const auto& [id, _] : models_) ids.push_back(id);
    return ids;
  }

  std::vector<std::string> dataset_ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> ids;
    for (const auto& [id, _] : datasets_) ids.push_back(id);
    return ids;
  }

 private:
  std::filesystem::path datasets_dir() const { return root_ / "datasets"; }
  std::filesystem::path models_dir() const { return root_ / "models"; }

  std::optional<std::filesystem::path> lookup(const std::map<std::string, std::filesystem::path>& index,
                                              const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = index.find(id);
    if (it == index.end()) return std::nullopt;
    return it->second;
  }

  std::string random_token() {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string s(16, '0');
    for (auto& c : s) c = kHex[rng_() & 0xF];
    return s;
  }

  std::string reserve_id() {
    std::lock_guard lock(mutex_);
    for (;;) {
      auto id = random_token();
      if (!datasets_.contains(id) && !models_.contains(id)) return id;
    }
  }

  void write_atomic(const std::filesystem::path& path, const std::string& text) {
    std::string suffix;
    {
      std::lock_guard lock(mutex_);
      suffix = random_token();
    }
    const auto tmp = std::filesystem::path(path.string() + ".tmp-" + suffix);
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << text;
      out.flush();
      if (!out) throw Error("store_error", "failed to write '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
      std::filesystem::remove(tmp, ec);
      throw Error("store_error", "failed to move '" + tmp.string() + "' into place");
    }
  }

  std::filesystem::path root_;
  mutable std::mutex mutex_;
  std::map<std::string, std::filesystem::path> datasets_;
  std::map<std::string, std::filesystem::path> models_;
  std::mt19937_64 rng_{std::random_device{}()};
};

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// Error raised by request handlers; rendered as {code, message, detail?}.
struct ApiError : std::runtime_error {
  ApiError(int status, std::string code, const std::string& message, ordered_json detail = nullptr)
      : std::runtime_error(message), status(status), code(std::move(code)), detail(std::move(detail)) {}
  int status;
  std::string code;
  ordered_json detail;
};

inline Response error_response(int status, const std::string& code, const std::string& message,
                               const ordered_json& detail = nullptr) {
  ordered_json j{{"code", code}, {"message", message}};
  if (!detail.is_null()) j["detail"] = detail;
  return {status, j.dump() + "\n"};
}

inline Response json_response(const ordered_json& j, int status = 200) { return {status, j.dump() + "\n"}; }

namespace detail {

inline std::vector<double> parse_features(const ordered_json& body, std::size_t arity) {
  if (!body.is_object() || !body.contains("features")) {
    throw ApiError(400, "validation_error", "body must be an object with a 'features' array");
  }
  const auto& f = body["features"];
  if (!f.is_array()) throw ApiError(400, "validation_error", "'features' must be an array");
  if (f.size() != arity) {
    throw ApiError(400, "validation_error",
                   "expected " + std::to_string(arity) + " features, got " + std::to_string(f.size()),
                   {{"field", "features"}});
  }
  std::vector<double> x;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!f[i].is_number() || !std::isfinite(f[i].get<double>())) {
      throw ApiError(400, "validation_error", "feature " + std::to_string(i) + " is not a finite number",
                     {{"field", "features"}, {"index", i}});
    }
    x.push_back(f[i].get<double>());
  }
  return x;
}

inline ordered_json parse_body(std::string_view body) {
  if (body.empty()) return ordered_json::object();
  try {
    return ordered_json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ApiError(400, "validation_error", std::string("malformed JSON body: ") + e.what());
  }
}

inline std::size_t feature_index(const ordered_json& v, const std::vector<std::string>& names) {
  if (v.is_number_unsigned() && v.get<std::size_t>() < names.size()) return v.get<std::size_t>();
  if (v.is_string()) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == v.get<std::string>()) return i;
    }
  }
  throw ApiError(400, "validation_error", "unknown feature " + v.dump(), {{"field", "mutable"}});
}

}  // namespace detail

/// Parses a what-if config object; missing fields keep their defaults.
inline whatif::WhatIfConfig whatif_config_from_json(const ordered_json& j, const std::vector<std::string>& names) {
  whatif::WhatIfConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw ApiError(400, "validation_error", "'config' must be an object");
  try {
    if (j.contains("step")) c.step = j.at("step").get<double>();
    if (j.contains("caps")) c.caps = j.at("caps").get<std::vector<double>>();
    if (j.contains("mutable")) {
      for (const auto& v : j.at("mutable")) c.mutable_features.push_back(detail::feature_index(v, names));
    }
    if (j.contains("depth")) c.depth = j.at("depth").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ApiError(400, "validation_error", std::string("invalid what-if config: ") + e.what());
  }
  return c;
}

/// Request handlers, independent of the HTTP transport so they can be
/// exercised directly.
class Service {
 public:
  explicit Service(std::filesystem::path data_dir) : store_(std::move(data_dir)) {}

  ModelStore& store() noexcept { return store_; }

  Response upload_dataset(std::string_view csv, bool validate_range = false, std::string source = "upload") {
    return guard([&] {
      const auto schema = ColumnSchema::canonical();
      auto cleaned = clean(parse_csv(csv, schema, source), schema, CleanOptions{validate_range});
      StoredDataset d;
      d.source = source;
      d.created_at = utc_timestamp();
      d.report = cleaned.report;
      d.csv = to_csv(cleaned.dataset);
      const auto id = store_.put_dataset(d);
      return json_response({{"dataset_id", id},
                            {"records", cleaned.dataset.size()},
                            {"report", json::to_json(cleaned.report)}},
                           201);
    });
  }

  Response train_model(std::string_view body) {
    return guard([&] {
      const auto j = detail::parse_body(body);
      if (!j.is_object() || !j.contains("dataset_id") || !j["dataset_id"].is_string()) {
        throw ApiError(400, "validation_error", "'dataset_id' is required", {{"field", "dataset_id"}});
      }
      const auto dataset_id = j["dataset_id"].get<std::string>();

      cart::HyperParams params;
      eval::SplitConfig split;
      try {
        if (j.contains("hyperparameters")) {
          const auto& hp = j["hyperparameters"];
          if (hp.contains("criterion")) params.criterion = cart::parse_criterion(hp["criterion"].get<std::string>());
          if (hp.contains("max_depth") && !hp["max_depth"].is_null()) {
            params.max_depth = positive(hp["max_depth"], "max_depth");
          }
          if (hp.contains("min_samples_split")) {
            params.min_samples_split = positive(hp["min_samples_split"], "min_samples_split");
          }
          if (hp.contains("min_samples_leaf")) {
            params.min_samples_leaf = positive(hp["min_samples_leaf"], "min_samples_leaf");
          }
        }
        if (j.contains("split")) {
          const auto& s = j["split"];
          if (s.contains("test_fraction")) split.test_fraction = s["test_fraction"].get<double>();
          if (s.contains("seed")) split.seed = s["seed"].get<std::uint64_t>();
          if (s.contains("shuffle")) split.shuffle = s["shuffle"].get<bool>();
        }
        params.validate();
        split.validate();
      } catch (const ConfigError& e) {
        throw ApiError(400, "validation_error", e.what());
      } catch (const nlohmann::json::exception& e) {
        throw ApiError(400, "validation_error", std::string("invalid parameters: ") + e.what());
      }

      const auto stored = store_.get_dataset(dataset_id);
      if (!stored) throw ApiError(404, "not_found", "unknown dataset '" + dataset_id + "'");
      const auto schema = ColumnSchema::canonical();
      const auto data = clean(parse_csv(stored->csv, schema, stored->source), schema).dataset;

      auto outcome = train_and_evaluate(data, params, split);
      StoredModel m;
      m.dataset_id = dataset_id;
      m.created_at = utc_timestamp();
      m.split = split;
      m.evaluation = outcome.report;
      m.tree = cart::serialize(outcome.tree);
      const auto id = store_.put_model(m);
      return json_response({{"model_id", id}, {"evaluation", json::to_json(outcome.report)}}, 201);
    });
  }

  Response list_models() {
    return guard([&] {
      std::vector<StoredModel> models;
      for (const auto& id : store_.model_ids()) {
        if (auto m = store_.get_model(id)) models.push_back(std::move(*m));
      }
      std::sort(models.begin(), models.end(), [](const StoredModel& a, const StoredModel& b) {
        return std::tie(a.created_at, a.id) < std::tie(b.created_at, b.id);
      });
      ordered_json list = ordered_json::array();
      for (const auto& m : models) {
        list.push_back({{"model_id", m.id},
                        {"dataset_id", m.dataset_id},
                        {"created_at", m.created_at},
                        {"accuracy", m.evaluation.accuracy}});
      }
      return json_response({{"models", list}});
    });
  }

  Response get_model(const std::string& id) {
    return guard([&] {
      const auto m = load_model(id);
      const auto tree = cart::deserialize(m.tree);
      const auto& p = tree.params();
      return json_response({{"model_id", m.id},
                            {"dataset_id", m.dataset_id},
                            {"created_at", m.created_at},
                            {"split", json::to_json(m.split)},
                            {"hyperparameters",
                             {{"criterion", cart::to_string(p.criterion)},
                              {"max_depth", p.max_depth ? ordered_json(*p.max_depth) : ordered_json(nullptr)},
                              {"min_samples_split", p.min_samples_split},
                              {"min_samples_leaf", p.min_samples_leaf}}},
                            {"feature_names", tree.feature_names()},
                            {"node_count", tree.size()},
                            {"depth", tree.depth()},
                            {"evaluation", json::to_json(m.evaluation)}});
    });
  }

  Response predict(const std::string& id, std::string_view body) {
    return guard([&] {
      const auto tree = load_tree(id);
      const auto x = detail::parse_features(detail::parse_body(body), tree.n_features());
      return json_response(json::to_json(tree.predict(x), tree.feature_names()));
    });
  }

  Response whatif(const std::string& id, std::string_view body) {
    return guard([&] {
      const auto tree = load_tree(id);
      const auto j = detail::parse_body(body);
      const auto x = detail::parse_features(j, tree.n_features());
      const auto config = whatif_config_from_json(j.contains("config") ? j["config"] : ordered_json(),
                                                  tree.feature_names());
      try {
        const auto result = whatif::suggest(tree, x, config);
        return json_response(json::to_json(result, x, tree.feature_names()));
      } catch (const ConfigError& e) {
        throw ApiError(400, "validation_error", e.what(), {{"field", "config"}});
      }
    });
  }

  Response export_tree(const std::string& id, const std::string& format) {
    return guard([&] {
      if (format != "dot" && format != "model") {
        throw ApiError(400, "unsupported_format", "unsupported export format '" + format + "' (dot or model)",
                       {{"field", "format"}});
      }
      const auto m = load_model(id);
      if (format == "model") return Response{200, m.tree, "application/json"};
      return Response{200, cart::to_dot(cart::deserialize(m.tree)), "text/vnd.graphviz"};
    });
  }

  /// Registers every route on `server`.
  void mount(httplib::Server& server) {
    const auto send = [](httplib::Response& res, const Response& r) {
      res.status = r.status;
      res.set_content(r.body, r.content_type);
    };
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Post("/datasets", [this, send](const httplib::Request& req, httplib::Response& res) {
      const bool range = req.has_param("validate_range") &&
                         (req.get_param_value("validate_range") == "true" || req.get_param_value("validate_range") == "1");
      const auto source = req.has_param("source") ? req.get_param_value("source") : std::string("upload");
      send(res, upload_dataset(req.body, range, source));
    });
    server.Post("/models", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, train_model(req.body));
    });
    server.Get("/models", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, list_models());
    });
    server.Get(R"(/models/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, get_model(req.matches[1]));
    });
    server.Post(R"(/models/([^/]+)/predict)", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, predict(req.matches[1], req.body));
    });
    server.Post(R"(/models/([^/]+)/whatif)", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, whatif(req.matches[1], req.body));
    });
    server.Get(R"(/models/([^/]+)/export)", [this, send](const httplib::Request& req, httplib::Response& res) {
      const auto format = req.has_param("format") ? req.get_param_value("format") : std::string("dot");
      send(res, export_tree(req.matches[1], format));
    });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty() && res.status == 404) {
        const auto r = error_response(404, "not_found", "no such endpoint");
        res.set_content(r.body, r.content_type);
      }
    });
  }

 private:
  static std::size_t positive(const ordered_json& v, const char* name) {
    if (!v.is_number_unsigned()) throw ConfigError(std::string(name) + " must be a non-negative integer");
    return v.get<std::size_t>();
  }

  StoredModel load_model(const std::string& id) {
    auto m = store_.get_model(id);
    if (!m) throw ApiError(404, "not_found", "unknown model '" + id + "'");
    return std::move(*m);
  }

  cart::Tree load_tree(const std::string& id) { return cart::deserialize(load_model(id).tree); }

  template <class F>
  Response guard(F&& f) {
    try {
      return f();
    } catch (const ApiError& e) {
      return error_response(e.status, e.code, e.what(), e.detail);
    } catch (const Error& e) {
      const bool server_side = e.code() == "store_error" || e.code() == "io_error" || e.code() == "format_error";
      ordered_json detail = nullptr;
      if (e.row()) detail = {{"row", *e.row()}};
      return error_response(server_side ? 500 : 400, e.code(), e.what(), detail);
    } catch (const std::exception& e) {
      return error_response(500, "internal_error", e.what());
    }
  }

  ModelStore store_;
};

/// "host:port"; a bare port binds 127.0.0.1.
inline std::pair<std::string, int> parse_address(const std::string& addr) {
  const auto colon = addr.rfind(':');
  std::string host = colon == std::string::npos ? "127.0.0.1" : addr.substr(0, colon);
  const std::string port = colon == std::string::npos ? addr : addr.substr(colon + 1);
  if (host.empty()) host = "0.0.0.0";
  int p = 0;
  const auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), p);
  if (ec != std::errc() || ptr != port.data() + port.size() || p < 0 || p > 65535) {
    throw ConfigError("invalid listen address '" + addr + "'");
  }
  return {host, p};
}

}  // namespace gradecast::service
