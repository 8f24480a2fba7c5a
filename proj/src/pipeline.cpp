#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "joinaug/error.hpp"
#include "joinaug/pipeline.hpp"
#include "joinaug/random.hpp"

namespace joinaug {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Seed streams; every random draw in a run derives from cfg.seed through one of these.
enum Stream : std::uint64_t {
  kSplit = 1,
  kImpute = 2,
  kCoreset = 3,
  kJoin = 4,
  kSelect = 5,
  kEstimator = 6,
  kSketch = 7,
};

template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), "stage '" + name + "': " + e.what());
  }
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// Imputed, binarized features of `t` without the target and excluded columns.
// A table with nothing usable yields a zero-width matrix.
FeatureMatrix featurize(const Table& t, const PipelineConfig& cfg) {
  std::vector<std::string> drop = cfg.exclude_columns;
  drop.push_back(cfg.target);
  FeatureMatrix empty;
  empty.values.resize(static_cast<Eigen::Index>(t.row_count()), 0);
  Table f = t.drop_columns(drop);
  if (f.column_count() == 0) return empty;
  ImputeResult imp = impute(f, derive_seed(cfg.seed, {kImpute}));
  if (imp.table.column_count() == 0) return empty;
  try {
    return binarize(imp.table, cfg.max_cardinality).matrix;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::no_features) return empty;
    throw;
  }
}

ForestParams estimator_params(const PipelineConfig& cfg) {
  ForestParams p = cfg.estimator;
  p.seed = derive_seed(cfg.seed, {kEstimator});
  return p;
}

double fit_and_score(const FeatureMatrix& x, const LabelVector& y, const SplitRows& split, const PipelineConfig& cfg) {
  LabelVector train_y = y.select(split.train);
  LabelVector test_y = y.select(split.test);
  if (x.cols() == 0) return constant_score(train_y, test_y);
  FeatureMatrix train_x = x.select_rows(split.train);
  FeatureMatrix test_x = x.select_rows(split.test);
  ForestParams p = estimator_params(cfg);
  Model m = cfg.tune_estimator ? fit_tuned_forest(train_x, train_y, p, derive_seed(cfg.seed, {kEstimator, 1})).model
                               : fit_forest(train_x, train_y, p);
  return score(m, test_x, test_y);
}

// Foreign payload columns are renamed "<candidate id>.<column>" so features
// from different candidates never collide and carry their origin.
JoinCandidate with_prefixed_payload(const JoinCandidate& cand) {
  const auto keys = cand.foreign_key_columns();
  Table renamed(cand.foreign->name());
  for (Column c : cand.foreign->columns()) {
    if (std::find(keys.begin(), keys.end(), c.name) == keys.end()) c.name = cand.id + "." + c.name;
    c.source = cand.id;
    renamed.add_column(std::move(c));
  }
  JoinCandidate out = cand;
  out.foreign = std::make_shared<const Table>(std::move(renamed));
  return out;
}

std::string key_description(const JoinCandidate& cand) {
  std::string out;
  for (const auto& k : cand.keys) {
    if (!out.empty()) out += ",";
    out += k.base + "->" + k.foreign;
    if (k.kind == KeyKind::soft) out += "(soft)";
    if (k.granularity) out += "@" + std::string(granularity_tag(*k.granularity));
  }
  return out;
}

struct SelectorOutcome {
  std::vector<std::size_t> selected;
  std::optional<std::vector<double>> survival;
};

SelectorOutcome run_selector(const SelectorSettings& s, const FeatureMatrix& x, const LabelVector& y,
                             std::uint64_t seed) {
  ForestParams wrapper;
  wrapper.n_trees = s.wrapper_trees;
  wrapper.seed = derive_seed(seed, {1});
  SubsetScorer scorer = holdout_scorer(x, y, wrapper, 0.2, derive_seed(seed, {2}));
  SelectorOutcome out;
  switch (s.kind) {
    case SelectorKind::rifs: {
      RifsConfig cfg = s.rifs;
      cfg.seed = derive_seed(seed, {3});
      SelectionResult r = wrapper_select(x, y, cfg, scorer);
      out.selected = r.selected;
      out.survival = r.survival;
      break;
    }
    case SelectorKind::ftest: out.selected = exponential_search(rank_f_test(x, y), scorer).selected; break;
    case SelectorKind::mi: out.selected = exponential_search(rank_mutual_info(x, y, s.bins), scorer).selected; break;
    case SelectorKind::forward: {
      ForestParams rp = s.rifs.forest;
      rp.seed = derive_seed(seed, {4});
      out.selected = forward_selection(rank_forest(x, y, rp), scorer, s.max_rounds);
      break;
    }
  }
  std::sort(out.selected.begin(), out.selected.end());
  return out;
}

struct Retained {
  std::string candidate;
  std::optional<double> survival;
};

}  // namespace

PipelineOutput run_pipeline(const PipelineConfig& cfg) {
  const auto t_start = Clock::now();
  RunReport report;
  report.seed = cfg.seed;
  report.task = cfg.task;
  report.metric = cfg.task == Task::classification ? "accuracy" : "mae";
  report.config = config_echo(cfg);

  // ---- load
  Table base = stage("load", [&] { return load_csv(cfg.base_table); });
  if (!base.has_column(cfg.target)) throw Error(ErrorKind::config, "target column '" + cfg.target + "' not in base table");
  for (const auto& c : cfg.exclude_columns)
    if (!base.has_column(c)) throw Error(ErrorKind::config, "excluded column '" + c + "' not in base table");
  std::vector<JoinCandidate> candidates =
      cfg.manifest ? stage("manifest", [&] { return load_manifest(*cfg.manifest); }) : std::vector<JoinCandidate>{};
  stage("manifest", [&] {
    for (auto& c : candidates) {
      for (const auto& k : c.keys)
        if (!base.has_column(k.base))
          throw Error(ErrorKind::missing_column, "candidate '" + c.id + "' joins on missing base column '" + k.base + "'");
      c = with_prefixed_payload(c);
    }
    return 0;
  });

  const Column& target = base.column(cfg.target);
  std::vector<std::size_t> labeled;
  for (std::size_t r = 0; r < base.row_count(); ++r)
    if (!target.is_missing(r)) labeled.push_back(r);
  report.base_rows = base.row_count();

  // ---- baseline
  LabelVector y;
  SplitRows split;
  FeatureMatrix base_x;
  stage("baseline", [&] {
    y = make_labels(target.take(labeled), cfg.task);
    split = holdout_rows(y, cfg.test_fraction, derive_seed(cfg.seed, {kSplit}));
    base_x = featurize(base, cfg).select_rows(labeled);
    report.baseline_score = fit_and_score(base_x, y, split, cfg);
    return 0;
  });

  // ---- coreset, drawn from the training rows only
  std::vector<std::size_t> core;  // positions in the labeled row space
  stage("coreset", [&] {
    const std::size_t n_train = split.train.size();
    const std::size_t m = std::min(cfg.coreset_size.value_or(std::min(n_train, kDefaultCoresetCap)), n_train);
    const std::uint64_t seed = derive_seed(cfg.seed, {kCoreset});
    switch (cfg.coreset_method) {
      case CoresetMethod::uniform: {
        Coreset c = sample_uniform(n_train, m, seed);
        for (auto i : c.source_row_indices) core.push_back(split.train[i]);
        break;
      }
      case CoresetMethod::stratified: {
        if (cfg.task != Task::classification)
          throw Error(ErrorKind::config, "stratified coreset needs a classification task");
        std::vector<std::size_t> train_base_rows;
        for (auto i : split.train) train_base_rows.push_back(labeled[i]);
        Coreset c = sample_stratified(base.take_rows(train_base_rows), cfg.target, m, seed);
        for (auto i : c.source_row_indices) core.push_back(split.train[i]);
        break;
      }
      case CoresetMethod::sketch: core = split.train; break;  // sketched per batch after the join
    }
    std::sort(core.begin(), core.end());
    return 0;
  });
  report.coreset_rows = core.size();
  std::vector<std::size_t> core_base_rows;
  for (auto i : core) core_base_rows.push_back(labeled[i]);
  const Table core_table = base.take_rows(core_base_rows);
  const LabelVector core_y = y.select(core);

  // ---- tuple-ratio prefilter
  std::map<std::string, CandidateStatus> status;
  std::vector<JoinCandidate> kept;
  stage("prefilter", [&] {
    for (const auto& c : candidates) {
      CandidateStatus s{c.id, c.table_path, "not_reached", std::nullopt, 0.0, std::nullopt, 0};
      if (cfg.tuple_ratio_filter) {
        std::size_t domain = foreign_key_domain(c);
        s.tuple_ratio = domain ? tuple_ratio(base.row_count(), domain) : std::numeric_limits<double>::infinity();
        if (*s.tuple_ratio > cfg.tuple_ratio_threshold) {
          s.status = "pruned_tuple_ratio";
          if (!std::isfinite(*s.tuple_ratio)) s.tuple_ratio.reset();
          status[c.id] = s;
          continue;
        }
      }
      status[c.id] = s;
      kept.push_back(c);
    }
    return 0;
  });

  // ---- plan
  JoinPlan plan = stage("plan", [&] {
    return make_join_plan(core_table, kept, cfg.join_strategy, cfg.budget.value_or(std::max<std::size_t>(core.size(), 1)),
                          cfg.max_cardinality);
  });

  // ---- batch loop
  std::map<std::string, Retained> retained;  // feature name -> origin
  std::map<std::string, const JoinCandidate*> by_id;
  for (const auto& batch : plan.batches)
    for (const auto& c : batch) by_id[c.id] = &c;
  std::map<std::string, std::size_t> join_index;
  for (std::size_t i = 0; i < candidates.size(); ++i) join_index[candidates[i].id] = i;
  auto join_seed = [&](const std::string& id) { return derive_seed(cfg.seed, {kJoin, join_index.at(id)}); };

  // Joins the candidates that kept features onto `rows` of the base table.
  auto join_retained = [&](const Table& onto) {
    Table t = onto;
    std::set<std::string> used;
    for (const auto& [name, origin] : retained) used.insert(origin.candidate);
    for (const auto& batch : plan.batches)
      for (const auto& c : batch)
        if (used.count(c.id)) t = execute_join(t, c, cfg.soft_method, join_seed(c.id));
    return t;
  };
  auto retained_columns = [&](const FeatureMatrix& full, const FeatureMatrix& base_only) {
    // Base features first, in baseline order, then retained ones.
    std::vector<std::size_t> cols;
    for (const auto& name : base_only.names)
      if (auto j = full.find(name)) cols.push_back(*j);
    for (std::size_t j = 0; j < full.cols(); ++j)
      if (retained.count(full.names[j])) cols.push_back(j);
    return cols;
  };

  for (std::size_t b = 0; b < plan.batches.size(); ++b) {
    const auto t_batch = Clock::now();
    const auto& batch = plan.batches[b];
    BatchSummary summary;
    stage("batch " + std::to_string(b), [&] {
      Table work = core_table;
      for (const auto& c : batch) {
        summary.candidates.push_back(c.id);
        status[c.id].status = "joined";
        status[c.id].batch = b;
        status[c.id].score = c.score.value_or(0.0);
        work = execute_join(work, c, cfg.soft_method, join_seed(c.id));
      }
      FeatureMatrix x = featurize(work, cfg);
      summary.features_considered = x.cols();
      if (x.cols() == 0) return 0;

      FeatureMatrix sel_x = x;
      LabelVector sel_y = core_y;
      if (cfg.coreset_method == CoresetMethod::sketch) {
        SketchConfig sc = SketchConfig::for_shape(x.rows(), x.cols(), 0.5);
        if (sc.target_rows < x.rows()) {
          SketchedData sd = sketch_labeled(x, core_y, sc, derive_seed(cfg.seed, {kSketch, b}));
          sel_x = std::move(sd.x);
          sel_y = std::move(sd.y);
        }
      }
      SelectorOutcome outcome = run_selector(cfg.selector, sel_x, sel_y, derive_seed(cfg.seed, {kSelect, b}));
      summary.features_selected = outcome.selected.size();
      for (std::size_t j : outcome.selected) {
        const std::string& prov = x.provenance[j];
        if (!by_id.count(prov)) continue;  // base feature
        Retained r{prov, std::nullopt};
        if (outcome.survival) r.survival = (*outcome.survival)[j];
        retained[x.names[j]] = r;
        ++status[prov].retained;
      }
      return 0;
    });
    report.batches.push_back(std::move(summary));
    report.batch_seconds.push_back(seconds_since(t_batch));

    if (cfg.stop_at_score && b + 1 < plan.batches.size() && !retained.empty()) {
      double reached = stage("stop check", [&] {
        FeatureMatrix full = featurize(join_retained(base), cfg).select_rows(labeled);
        return fit_and_score(full.select_columns(retained_columns(full, base_x)), y, split, cfg);
      });
      bool done = cfg.task == Task::classification ? reached >= *cfg.stop_at_score : -reached <= *cfg.stop_at_score;
      if (done) {
        report.stopped_early = true;
        break;
      }
    }
  }

  // ---- final fit on all base rows
  PipelineOutput out;
  stage("final", [&] {
    Table joined = join_retained(base);
    FeatureMatrix all_rows = featurize(joined, cfg);
    std::vector<std::size_t> cols = retained_columns(all_rows, base_x);
    FeatureMatrix chosen = all_rows.select_columns(cols);
    report.augmented_score =
        retained.empty() ? report.baseline_score : fit_and_score(chosen.select_rows(labeled), y, split, cfg);

    out.augmented = base;
    for (std::size_t j = 0; j < chosen.cols(); ++j) {
      const std::string& name = chosen.names[j];
      if (!retained.count(name)) continue;
      const Retained& origin = retained.at(name);
      const JoinCandidate& cand = *by_id.at(origin.candidate);
      report.selected_features.push_back({name, cand.id, cand.table_path, key_description(cand), origin.survival});
      std::vector<double> values(chosen.values.col(static_cast<Eigen::Index>(j)).data(),
                                 chosen.values.col(static_cast<Eigen::Index>(j)).data() + chosen.rows());
      std::string col_name = name;
      for (int suffix = 2; out.augmented.has_column(col_name); ++suffix) col_name = name + "#" + std::to_string(suffix);
      out.augmented.add_column(Column::numeric(col_name, std::move(values), cand.id));
    }
    return 0;
  });

  for (const auto& c : candidates) report.candidates.push_back(status.at(c.id));
  const bool cls = cfg.task == Task::classification;
  report.baseline_metric = cls ? report.baseline_score : -report.baseline_score;
  report.augmented_metric = cls ? report.augmented_score : -report.augmented_score;
  report.improvement_percent = improvement_percent(report.baseline_score, report.augmented_score);
  report.total_seconds = seconds_since(t_start);
  out.report = std::move(report);
  return out;
}

RunReport run_and_write(const PipelineConfig& cfg) {
  if (cfg.out_dir.empty()) throw Error(ErrorKind::config, "no output directory given");
  PipelineOutput out = run_pipeline(cfg);
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create '" + cfg.out_dir.string() + "': " + ec.message());
  write_csv(out.augmented, cfg.out_dir / "augmented.csv");
  emit_report(out.report, cfg.out_dir / "report.json");
  return out.report;
}

}  // namespace joinaug
