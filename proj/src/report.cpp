#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "joinaug/error.hpp"
#include "joinaug/pipeline.hpp"

namespace joinaug {

using nlohmann::json;

namespace {

double round6(double v) {
  if (!std::isfinite(v)) throw Error(ErrorKind::non_finite, "report value is not finite");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  double r = std::strtod(buf, nullptr);
  return r == 0.0 ? 0.0 : r;  // no negative zero in output
}

json opt_number(const std::optional<double>& v) { return v ? json(round6(*v)) : json(nullptr); }

std::optional<double> read_opt_number(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

std::optional<double> improvement_percent(double baseline, double augmented) {
  if (baseline == 0.0) return std::nullopt;
  return 100.0 * (augmented - baseline) / std::abs(baseline);
}

std::string report_to_json(const RunReport& r) {
  json j;
  j["seed"] = r.seed;
  j["task"] = std::string(to_string(r.task));
  j["metric"] = r.metric;
  j["baseline_score"] = round6(r.baseline_score);
  j["augmented_score"] = round6(r.augmented_score);
  j["baseline_metric"] = round6(r.baseline_metric);
  j["augmented_metric"] = round6(r.augmented_metric);
  j["improvement_percent"] = r.improvement_percent ? json(round6(*r.improvement_percent)) : json("undefined");
  j["base_rows"] = r.base_rows;
  j["coreset_rows"] = r.coreset_rows;
  j["stopped_early"] = r.stopped_early;

  json features = json::array();
  for (const auto& f : r.selected_features)
    features.push_back({{"name", f.name},
                        {"table", f.table},
                        {"table_path", f.table_path},
                        {"key", f.key},
                        {"survival", opt_number(f.survival)}});
  j["selected_features"] = std::move(features);

  json cands = json::array();
  for (const auto& c : r.candidates)
    cands.push_back({{"id", c.id},
                     {"table_path", c.table_path},
                     {"status", c.status},
                     {"tuple_ratio", opt_number(c.tuple_ratio)},
                     {"score", round6(c.score)},
                     {"batch", c.batch ? json(*c.batch) : json(nullptr)},
                     {"retained", c.retained}});
  j["candidates"] = std::move(cands);

  json batches = json::array();
  for (const auto& b : r.batches)
    batches.push_back({{"candidates", b.candidates},
                       {"features_considered", b.features_considered},
                       {"features_selected", b.features_selected}});
  j["batches"] = std::move(batches);

  j["config"] = r.config.empty() ? json::object() : json::parse(r.config);

  json timing;
  timing["total_seconds"] = round6(r.total_seconds);
  json bs = json::array();
  for (double s : r.batch_seconds) bs.push_back(round6(s));
  timing["batch_seconds"] = std::move(bs);
  j["timing"] = std::move(timing);
  return j.dump(2) + "\n";
}

RunReport report_from_json(std::string_view text) {
  RunReport r;
  try {
    const json j = json::parse(text);
    r.seed = j.at("seed").get<std::uint64_t>();
    auto task = parse_task(j.at("task").get<std::string>());
    if (!task) throw Error(ErrorKind::format, "report has an unknown task");
    r.task = *task;
    r.metric = j.at("metric").get<std::string>();
    r.baseline_score = j.at("baseline_score").get<double>();
    r.augmented_score = j.at("augmented_score").get<double>();
    r.baseline_metric = j.at("baseline_metric").get<double>();
    r.augmented_metric = j.at("augmented_metric").get<double>();
    const json& imp = j.at("improvement_percent");
    if (imp.is_number()) r.improvement_percent = imp.get<double>();
    r.base_rows = j.at("base_rows").get<std::size_t>();
    r.coreset_rows = j.at("coreset_rows").get<std::size_t>();
    r.stopped_early = j.at("stopped_early").get<bool>();
    for (const auto& f : j.at("selected_features"))
      r.selected_features.push_back({f.at("name").get<std::string>(), f.at("table").get<std::string>(),
                                     f.at("table_path").get<std::string>(), f.at("key").get<std::string>(),
                                     read_opt_number(f, "survival")});
    for (const auto& c : j.at("candidates")) {
      CandidateStatus s;
      s.id = c.at("id").get<std::string>();
      s.table_path = c.at("table_path").get<std::string>();
      s.status = c.at("status").get<std::string>();
      s.tuple_ratio = read_opt_number(c, "tuple_ratio");
      s.score = c.at("score").get<double>();
      if (!c.at("batch").is_null()) s.batch = c.at("batch").get<std::size_t>();
      s.retained = c.at("retained").get<std::size_t>();
      r.candidates.push_back(std::move(s));
    }
    for (const auto& b : j.at("batches"))
      r.batches.push_back({b.at("candidates").get<std::vector<std::string>>(),
                           b.at("features_considered").get<std::size_t>(), b.at("features_selected").get<std::size_t>()});
    r.config = j.at("config").dump();
    if (j.contains("timing")) {
      r.total_seconds = j.at("timing").at("total_seconds").get<double>();
      r.batch_seconds = j.at("timing").at("batch_seconds").get<std::vector<double>>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, std::string("malformed report: ") + e.what());
  }
  return r;
}

void emit_report(const RunReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
  out << report_to_json(report);
  if (!out) throw Error(ErrorKind::io, "failed writing '" + path.string() + "'");
}

std::string report_without_timing(std::string_view json_text) {
  json j = json::parse(json_text);
  j.erase("timing");
  return j.dump(2);
}

}  // namespace joinaug
