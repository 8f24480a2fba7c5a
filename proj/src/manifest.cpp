#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include <json.hpp>

#include "joinaug/error.hpp"
#include "joinaug/pipeline.hpp"

namespace joinaug {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::config, what); }

json parse_json(std::string_view text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    config_error(what + " is not valid JSON: " + e.what());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void check_fields(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) config_error(where + " must be an object");
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) config_error("unknown field '" + k + "' in " + where);
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    config_error("field '" + std::string(key) + "' in " + where + ": " + e.what());
  }
}

template <typename T>
std::optional<T> get_opt(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  return get<T>(obj, key, where);
}

fs::path resolve_path(const fs::path& base_dir, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

KeyPair parse_key_pair(const json& j, const std::string& where) {
  check_fields(j, {"base", "foreign", "kind", "tolerance", "granularity"}, where);
  KeyPair k;
  k.base = get<std::string>(j, "base", where);
  k.foreign = get_opt<std::string>(j, "foreign", where).value_or(k.base);
  std::string kind = get_opt<std::string>(j, "kind", where).value_or("hard");
  if (kind == "hard")
    k.kind = KeyKind::hard;
  else if (kind == "soft")
    k.kind = KeyKind::soft;
  else
    config_error("key kind must be 'hard' or 'soft' in " + where);
  k.tolerance = get_opt<double>(j, "tolerance", where);
  if (k.tolerance && *k.tolerance < 0) config_error("tolerance must be non-negative in " + where);
  if (auto g = get_opt<std::string>(j, "granularity", where)) {
    k.granularity = parse_granularity(*g);
    if (!k.granularity) config_error("unknown granularity '" + *g + "' in " + where);
  }
  return k;
}

std::vector<KeyPair> parse_key_list(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) config_error(where + " must be a non-empty array");
  std::vector<KeyPair> keys;
  for (std::size_t i = 0; i < j.size(); ++i) keys.push_back(parse_key_pair(j[i], where + "[" + std::to_string(i) + "]"));
  return keys;
}

}  // namespace

std::vector<JoinCandidate> parse_manifest(std::string_view json_text, const fs::path& base_dir) {
  json root = parse_json(json_text, "manifest");
  if (root.is_object()) {
    check_fields(root, {"candidates"}, "manifest");
    root = root.value("candidates", json::array());
  }
  if (!root.is_array()) config_error("manifest must be an array of candidates");

  std::vector<JoinCandidate> out;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < root.size(); ++i) {
    const json& e = root[i];
    const std::string where = "manifest entry " + std::to_string(i);
    check_fields(e, {"id", "table_path", "key_pairs", "key_options", "score"}, where);
    const std::string rel = get<std::string>(e, "table_path", where);
    const fs::path path = resolve_path(base_dir, rel);
    auto table = std::make_shared<const Table>(load_csv(path));
    const std::string id = get_opt<std::string>(e, "id", where).value_or(path.stem().string());
    const auto score = get_opt<double>(e, "score", where);

    std::vector<std::vector<KeyPair>> options;
    if (e.contains("key_pairs") == e.contains("key_options"))
      config_error(where + " needs exactly one of key_pairs or key_options");
    if (e.contains("key_pairs")) {
      options.push_back(parse_key_list(e.at("key_pairs"), where + ".key_pairs"));
    } else {
      const json& opts = e.at("key_options");
      if (!opts.is_array() || opts.empty()) config_error(where + ".key_options must be a non-empty array");
      for (std::size_t o = 0; o < opts.size(); ++o)
        options.push_back(parse_key_list(opts[o], where + ".key_options[" + std::to_string(o) + "]"));
    }

    for (std::size_t o = 0; o < options.size(); ++o) {
      JoinCandidate c;
      c.id = e.contains("key_options") ? id + "#" + std::to_string(o) : id;
      if (!ids.insert(c.id).second) config_error("duplicate candidate id '" + c.id + "'");
      c.foreign = table;
      c.keys = options[o];
      c.score = score;
      c.table_path = rel;
      for (const auto& k : c.keys)
        if (!table->has_column(k.foreign))
          throw Error(ErrorKind::missing_column, "candidate '" + c.id + "' has no column '" + k.foreign + "'");
      out.push_back(std::move(c));
    }
  }
  return out;
}

std::vector<JoinCandidate> load_manifest(const fs::path& path) {
  return parse_manifest(read_file(path), path.parent_path());
}

std::string_view to_string(SelectorKind kind) {
  switch (kind) {
    case SelectorKind::rifs: return "rifs";
    case SelectorKind::ftest: return "ftest";
    case SelectorKind::mi: return "mi";
    case SelectorKind::forward: return "forward";
  }
  return "rifs";
}

std::optional<SelectorKind> parse_selector(std::string_view text) {
  for (auto k : {SelectorKind::rifs, SelectorKind::ftest, SelectorKind::mi, SelectorKind::forward})
    if (text == to_string(k)) return k;
  return std::nullopt;
}

PipelineConfig parse_pipeline_config(std::string_view json_text, const fs::path& base_dir) {
  const json j = parse_json(json_text, "config");
  const std::string top = "config";
  check_fields(j, {"base_table", "target", "task", "manifest", "exclude_columns", "coreset", "join", "selector",
                   "prefilter", "estimator", "test_fraction", "seed", "stop_at_score", "out_dir"},
               top);
  PipelineConfig cfg;
  cfg.base_table = resolve_path(base_dir, get<std::string>(j, "base_table", top));
  cfg.target = get<std::string>(j, "target", top);
  const std::string task = get<std::string>(j, "task", top);
  auto t = parse_task(task);
  if (!t) config_error("task must be 'regression' or 'classification'");
  cfg.task = *t;
  if (auto m = get_opt<std::string>(j, "manifest", top)) cfg.manifest = resolve_path(base_dir, *m);
  cfg.exclude_columns = get_opt<std::vector<std::string>>(j, "exclude_columns", top).value_or(std::vector<std::string>{});

  if (j.contains("coreset")) {
    const json& c = j.at("coreset");
    check_fields(c, {"method", "size"}, "coreset");
    if (auto m = get_opt<std::string>(c, "method", "coreset")) {
      auto method = parse_coreset_method(*m);
      if (!method) config_error("unknown coreset method '" + *m + "'");
      cfg.coreset_method = *method;
    }
    cfg.coreset_size = get_opt<std::size_t>(c, "size", "coreset");
    if (cfg.coreset_size && *cfg.coreset_size < 1) config_error("coreset size must be >= 1");
  }
  if (j.contains("join")) {
    const json& c = j.at("join");
    check_fields(c, {"strategy", "budget", "soft_method", "max_cardinality"}, "join");
    if (auto s = get_opt<std::string>(c, "strategy", "join")) {
      auto strategy = parse_join_strategy(*s);
      if (!strategy) config_error("unknown join strategy '" + *s + "'");
      cfg.join_strategy = *strategy;
    }
    cfg.budget = get_opt<std::size_t>(c, "budget", "join");
    if (cfg.budget && *cfg.budget < 1) config_error("budget must be >= 1");
    if (auto s = get_opt<std::string>(c, "soft_method", "join")) {
      auto method = parse_soft_join_method(*s);
      if (!method) config_error("unknown soft join method '" + *s + "'");
      cfg.soft_method = *method;
    }
    cfg.max_cardinality = get_opt<std::size_t>(c, "max_cardinality", "join").value_or(cfg.max_cardinality);
  }
  if (j.contains("selector")) {
    const json& c = j.at("selector");
    const std::string w = "selector";
    check_fields(c, {"name", "eta", "k", "thresholds", "nu", "noise", "ranking_trees", "wrapper_trees", "max_rounds",
                     "bins", "gamma"},
                 w);
    auto& s = cfg.selector;
    if (auto n = get_opt<std::string>(c, "name", w)) {
      auto kind = parse_selector(*n);
      if (!kind) config_error("unknown selector '" + *n + "'");
      s.kind = *kind;
    }
    s.rifs.eta = get_opt<double>(c, "eta", w).value_or(s.rifs.eta);
    s.rifs.k = get_opt<std::size_t>(c, "k", w).value_or(s.rifs.k);
    s.rifs.thresholds = get_opt<std::vector<double>>(c, "thresholds", w).value_or(s.rifs.thresholds);
    s.rifs.nu = get_opt<double>(c, "nu", w).value_or(s.rifs.nu);
    s.rifs.sparse.gamma = get_opt<double>(c, "gamma", w).value_or(s.rifs.sparse.gamma);
    if (auto n = get_opt<std::string>(c, "noise", w)) {
      auto mode = parse_noise_mode(*n);
      if (!mode) config_error("unknown noise mode '" + *n + "'");
      s.rifs.noise = *mode;
    }
    s.rifs.forest.n_trees = get_opt<std::size_t>(c, "ranking_trees", w).value_or(s.rifs.forest.n_trees);
    s.wrapper_trees = get_opt<std::size_t>(c, "wrapper_trees", w).value_or(s.wrapper_trees);
    s.max_rounds = get_opt<std::size_t>(c, "max_rounds", w).value_or(s.max_rounds);
    s.bins = get_opt<std::size_t>(c, "bins", w).value_or(s.bins);
    if (!(s.rifs.eta > 0 && s.rifs.eta <= 1)) config_error("eta must lie in (0,1]");
    if (s.rifs.k < 1) config_error("k must be >= 1");
    if (!(s.rifs.nu >= 0 && s.rifs.nu <= 1)) config_error("nu must lie in [0,1]");
    if (s.rifs.thresholds.empty()) config_error("thresholds must be non-empty");
    for (std::size_t i = 0; i < s.rifs.thresholds.size(); ++i) {
      double v = s.rifs.thresholds[i];
      if (!(v >= 0 && v <= 1) || (i && v < s.rifs.thresholds[i - 1]))
        config_error("thresholds must be ascending values in [0,1]");
    }
    if (s.rifs.forest.n_trees < 1 || s.wrapper_trees < 1) config_error("tree counts must be >= 1");
    if (s.bins < 1) config_error("bins must be >= 1");
  }
  if (j.contains("prefilter")) {
    const json& c = j.at("prefilter");
    check_fields(c, {"enabled", "tau_tr"}, "prefilter");
    cfg.tuple_ratio_filter = get_opt<bool>(c, "enabled", "prefilter").value_or(true);
    cfg.tuple_ratio_threshold = get_opt<double>(c, "tau_tr", "prefilter").value_or(cfg.tuple_ratio_threshold);
    if (!(cfg.tuple_ratio_threshold > 0)) config_error("tau_tr must be positive");
  }
  if (j.contains("estimator")) {
    const json& c = j.at("estimator");
    check_fields(c, {"n_trees", "max_depth", "min_samples_split", "tuned"}, "estimator");
    cfg.estimator.n_trees = get_opt<std::size_t>(c, "n_trees", "estimator").value_or(cfg.estimator.n_trees);
    cfg.estimator.max_depth = get_opt<std::size_t>(c, "max_depth", "estimator");
    cfg.estimator.min_samples_split =
        get_opt<std::size_t>(c, "min_samples_split", "estimator").value_or(cfg.estimator.min_samples_split);
    cfg.tune_estimator = get_opt<bool>(c, "tuned", "estimator").value_or(cfg.tune_estimator);
    if (cfg.estimator.n_trees < 1) config_error("n_trees must be >= 1");
    if (cfg.estimator.max_depth && *cfg.estimator.max_depth < 1) config_error("max_depth must be >= 1");
  }
  cfg.test_fraction = get_opt<double>(j, "test_fraction", top).value_or(cfg.test_fraction);
  if (!(cfg.test_fraction > 0 && cfg.test_fraction < 1)) config_error("test_fraction must lie in (0,1)");
  cfg.seed = get_opt<std::uint64_t>(j, "seed", top).value_or(cfg.seed);
  cfg.stop_at_score = get_opt<double>(j, "stop_at_score", top);
  if (auto o = get_opt<std::string>(j, "out_dir", top)) cfg.out_dir = resolve_path(base_dir, *o);
  return cfg;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  return parse_pipeline_config(read_file(path), path.parent_path());
}

std::string config_echo(const PipelineConfig& cfg) {
  json j;
  j["base_table"] = cfg.base_table.filename().string();
  j["target"] = cfg.target;
  j["task"] = std::string(to_string(cfg.task));
  j["manifest"] = cfg.manifest ? json(cfg.manifest->filename().string()) : json(nullptr);
  j["exclude_columns"] = cfg.exclude_columns;
  j["coreset"] = {{"method", std::string(to_string(cfg.coreset_method))},
                  {"size", cfg.coreset_size ? json(*cfg.coreset_size) : json(nullptr)}};
  j["join"] = {{"strategy", std::string(to_string(cfg.join_strategy))},
               {"budget", cfg.budget ? json(*cfg.budget) : json(nullptr)},
               {"soft_method", std::string(to_string(cfg.soft_method))},
               {"max_cardinality", cfg.max_cardinality}};
  const auto& s = cfg.selector;
  j["selector"] = {{"name", std::string(to_string(s.kind))},
                   {"eta", s.rifs.eta},
                   {"k", s.rifs.k},
                   {"thresholds", s.rifs.thresholds},
                   {"nu", s.rifs.nu},
                   {"gamma", s.rifs.sparse.gamma},
                   {"noise", std::string(to_string(s.rifs.noise))},
                   {"ranking_trees", s.rifs.forest.n_trees},
                   {"wrapper_trees", s.wrapper_trees},
                   {"max_rounds", s.max_rounds},
                   {"bins", s.bins}};
  j["prefilter"] = {{"enabled", cfg.tuple_ratio_filter}, {"tau_tr", cfg.tuple_ratio_threshold}};
  j["estimator"] = {{"n_trees", cfg.estimator.n_trees},
                    {"max_depth", cfg.estimator.max_depth ? json(*cfg.estimator.max_depth) : json(nullptr)},
                    {"min_samples_split", cfg.estimator.min_samples_split},
                    {"tuned", cfg.tune_estimator}};
  j["test_fraction"] = cfg.test_fraction;
  j["seed"] = cfg.seed;
  j["stop_at_score"] = cfg.stop_at_score ? json(*cfg.stop_at_score) : json(nullptr);
  return j.dump();
}

}  // namespace joinaug
