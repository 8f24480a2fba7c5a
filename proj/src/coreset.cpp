#include "joinaug/coreset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "joinaug/error.hpp"
#include "joinaug/random.hpp"

namespace joinaug {

std::string_view to_string(CoresetMethod method) {
  switch (method) {
    case CoresetMethod::uniform: return "uniform";
    case CoresetMethod::stratified: return "stratified";
    case CoresetMethod::sketch: return "sketch";
  }
  return "uniform";
}

std::optional<CoresetMethod> parse_coreset_method(std::string_view text) {
  if (text == "uniform") return CoresetMethod::uniform;
  if (text == "stratified") return CoresetMethod::stratified;
  if (text == "sketch") return CoresetMethod::sketch;
  return std::nullopt;
}

Coreset sample_uniform(std::size_t row_count, std::size_t m, std::uint64_t seed) {
  if (m < 1 || m > row_count)
    throw Error(ErrorKind::bad_size, "coreset size " + std::to_string(m) + " outside [1, " +
                                         std::to_string(row_count) + "]");
  Coreset c;
  c.method = CoresetMethod::uniform;
  std::vector<std::size_t> all(row_count);
  std::iota(all.begin(), all.end(), 0);
  auto rng = make_rng(seed, {0xc0de});
  c.source_row_indices.reserve(m);
  std::sample(all.begin(), all.end(), std::back_inserter(c.source_row_indices), m, rng);
  c.weights.assign(m, static_cast<double>(row_count) / static_cast<double>(m));
  return c;
}

Coreset sample_uniform(const Table& table, std::size_t m, std::uint64_t seed) {
  return sample_uniform(table.row_count(), m, seed);
}

std::vector<std::size_t> allocate_strata(const std::vector<std::size_t>& sizes, std::size_t m) {
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  std::vector<std::size_t> alloc(sizes.size(), 0);
  if (total == 0 || m == 0) return alloc;

  std::vector<double> remainder(sizes.size(), 0.0);
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    double exact = static_cast<double>(m) * static_cast<double>(sizes[k]) / static_cast<double>(total);
    alloc[k] = std::min(sizes[k], static_cast<std::size_t>(std::floor(exact)));
    remainder[k] = exact - static_cast<double>(alloc[k]);
    assigned += alloc[k];
  }
  std::vector<std::size_t> order(sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  while (assigned < m) {
    bool progressed = false;
    for (auto k : order) {
      if (assigned == m) break;
      if (alloc[k] < sizes[k]) {
        ++alloc[k];
        ++assigned;
        progressed = true;
      }
    }
    if (!progressed) break;
  }

  // Every non-empty stratum gets a row when the budget covers all strata:
  // take from the stratum with the largest allocation.
  std::size_t non_empty = static_cast<std::size_t>(std::count_if(sizes.begin(), sizes.end(), [](auto s) { return s > 0; }));
  if (m >= non_empty) {
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (sizes[k] == 0 || alloc[k] > 0) continue;
      auto donor = std::max_element(alloc.begin(), alloc.end()) - alloc.begin();
      --alloc[static_cast<std::size_t>(donor)];
      ++alloc[k];
    }
  }
  return alloc;
}

Coreset sample_stratified(const Table& table, const std::string& label_column, std::size_t m, std::uint64_t seed) {
  const Column& labels = table.column(label_column);
  const std::size_t n = table.row_count();
  if (m < 1 || m > n)
    throw Error(ErrorKind::bad_size, "coreset size " + std::to_string(m) + " outside [1, " + std::to_string(n) + "]");

  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t r = 0; r < n; ++r) {
    if (labels.dtype == DType::numeric && !labels.missing[r] &&
        labels.numbers[r] != std::floor(labels.numbers[r]))
      throw Error(ErrorKind::config, "stratification column '" + label_column + "' is not integer-valued");
    strata[labels.cell_text(r)].push_back(r);
  }
  std::vector<std::size_t> sizes;
  for (const auto& [key, rows] : strata) sizes.push_back(rows.size());
  auto alloc = allocate_strata(sizes, m);

  Coreset c;
  c.method = CoresetMethod::stratified;
  std::vector<std::pair<std::size_t, double>> picked;
  std::size_t k = 0;
  for (const auto& [key, rows] : strata) {
    if (alloc[k] > 0) {
      auto rng = make_rng(seed, {0x57a7, k});
      std::vector<std::size_t> chosen;
      std::sample(rows.begin(), rows.end(), std::back_inserter(chosen), alloc[k], rng);
      double w = static_cast<double>(rows.size()) / static_cast<double>(alloc[k]);
      for (auto r : chosen) picked.emplace_back(r, w);
    }
    ++k;
  }
  std::sort(picked.begin(), picked.end());
  for (auto& [r, w] : picked) {
    c.source_row_indices.push_back(r);
    c.weights.push_back(w);
  }
  return c;
}

SketchConfig SketchConfig::for_shape(std::size_t n, std::size_t d, double epsilon, double delta) {
  if (n < 2 || d < 1) throw Error(ErrorKind::bad_size, "sketch needs n >= 2 and d >= 1");
  if (!(epsilon > 0 && epsilon < 1) || !(delta > 0 && delta < 1))
    throw Error(ErrorKind::config, "epsilon and delta must lie in (0,1)");
  SketchConfig cfg;
  cfg.epsilon = epsilon;
  cfg.delta = delta;
  cfg.repetitions = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(n)))));
  cfg.target_rows = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(static_cast<double>(d) * std::log(static_cast<double>(n)) / (epsilon * epsilon))));
  return cfg;
}

SketchPlan make_sketch_plan(std::size_t n, const SketchConfig& cfg, std::uint64_t seed) {
  if (cfg.target_rows < 1 || cfg.repetitions < 1) throw Error(ErrorKind::bad_size, "sketch needs rows and rounds >= 1");
  SketchPlan plan;
  plan.target_rows = cfg.target_rows;
  plan.repetitions = cfg.repetitions;
  plan.rounds.resize(cfg.repetitions);
  for (std::size_t round = 0; round < cfg.repetitions; ++round) {
    auto rng = make_rng(seed, {0x05a9, round});
    std::uniform_int_distribution<std::uint32_t> bucket(0, static_cast<std::uint32_t>(cfg.target_rows - 1));
    std::bernoulli_distribution coin(0.5);
    auto& entries = plan.rounds[round];
    entries.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t j = bucket(rng);
      entries[i] = {j, static_cast<std::int8_t>(coin(rng) ? 1 : -1)};
    }
  }
  return plan;
}

Eigen::MatrixXd apply_sketch(const SketchPlan& plan, const Eigen::MatrixXd& a) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(plan.target_rows), a.cols());
  for (const auto& round : plan.rounds) {
    if (round.size() != static_cast<std::size_t>(a.rows()))
      throw Error(ErrorKind::length_mismatch, "sketch plan built for a different row count");
    for (std::size_t i = 0; i < round.size(); ++i) {
      auto [bucket, sign] = round[i];
      out.row(bucket) += static_cast<double>(sign) * a.row(static_cast<Eigen::Index>(i));
    }
  }
  out /= std::sqrt(static_cast<double>(plan.repetitions));
  return out;
}

FeatureMatrix sketch_osnap(const FeatureMatrix& a, const SketchConfig& cfg, std::uint64_t seed) {
  if (cfg.target_rows >= a.rows())
    throw Error(ErrorKind::bad_size, "sketch target rows " + std::to_string(cfg.target_rows) +
                                         " must be below input rows " + std::to_string(a.rows()));
  FeatureMatrix out;
  out.names = a.names;
  out.provenance = a.provenance;
  out.values = apply_sketch(make_sketch_plan(a.rows(), cfg, seed), a.values);
  return out;
}

SketchedData sketch_labeled(const FeatureMatrix& a, const LabelVector& y, const SketchConfig& cfg,
                            std::uint64_t seed) {
  if (a.rows() != y.size()) throw Error(ErrorKind::length_mismatch, "feature rows differ from label length");
  if (cfg.target_rows >= a.rows())
    throw Error(ErrorKind::bad_size, "sketch target rows must be below input rows");

  SketchedData out;
  out.x.names = a.names;
  out.x.provenance = a.provenance;
  out.y.task = y.task;
  out.y.num_classes = y.num_classes;
  out.y.class_names = y.class_names;

  if (y.task == Task::regression) {
    Eigen::MatrixXd joint(a.values.rows(), a.values.cols() + 1);
    joint << a.values, y.values;
    Eigen::MatrixXd s = apply_sketch(make_sketch_plan(a.rows(), cfg, seed), joint);
    out.x.values = s.leftCols(a.values.cols());
    out.y.values = s.col(a.values.cols());
    return out;
  }

  std::vector<std::vector<std::size_t>> blocks(static_cast<std::size_t>(y.num_classes));
  for (std::size_t i = 0; i < y.size(); ++i) blocks[static_cast<std::size_t>(y.class_of(i))].push_back(i);
  std::vector<std::size_t> sizes;
  for (const auto& b : blocks) sizes.push_back(b.size());
  auto alloc = allocate_strata(sizes, cfg.target_rows);

  std::vector<Eigen::MatrixXd> parts;
  std::vector<int> part_labels;
  Eigen::Index total_rows = 0;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    if (alloc[k] == 0) continue;
    FeatureMatrix block = a.select_rows(blocks[k]);
    Eigen::MatrixXd rows;
    if (alloc[k] >= blocks[k].size()) {
      rows = block.values;  // nothing to compress
    } else {
      SketchConfig block_cfg = cfg;
      block_cfg.target_rows = alloc[k];
      rows = apply_sketch(make_sketch_plan(blocks[k].size(), block_cfg, derive_seed(seed, {k})), block.values);
    }
    total_rows += rows.rows();
    parts.push_back(std::move(rows));
    part_labels.push_back(static_cast<int>(k));
  }
  out.x.values.resize(total_rows, a.values.cols());
  out.y.values.resize(total_rows);
  Eigen::Index at = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    out.x.values.middleRows(at, parts[p].rows()) = parts[p];
    out.y.values.segment(at, parts[p].rows()).setConstant(part_labels[p]);
    at += parts[p].rows();
  }
  return out;
}

}  // namespace joinaug
