#include "joinaug/join.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "joinaug/error.hpp"
#include "joinaug/random.hpp"

namespace joinaug {

namespace {

constexpr char kKeySep = '\x1f';

// Key text that matches across numeric, datetime and categorical columns:
// numbers print in shortest round-trip form, datetimes as epoch seconds.
std::optional<std::string> key_text(const Column& col, std::size_t row) {
  if (col.missing[row]) return std::nullopt;
  if (col.dtype == DType::categorical) return col.labels[row];
  return format_number(col.numbers[row]);
}

std::optional<std::string> tuple_text(const std::vector<const Column*>& cols, std::size_t row) {
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    auto t = key_text(*cols[i], row);
    if (!t) return std::nullopt;
    if (i) out.push_back(kKeySep);
    out += *t;
  }
  return out;
}

std::vector<const Column*> resolve(const Table& t, const std::vector<std::string>& names) {
  std::vector<const Column*> cols;
  for (const auto& n : names) cols.push_back(&t.column(n));
  return cols;
}

struct SplitKeys {
  std::vector<std::string> base_hard, foreign_hard;
  std::optional<KeyPair> soft;
};

SplitKeys split_keys(const JoinCandidate& cand) {
  if (cand.keys.empty()) throw Error(ErrorKind::invalid_key, "candidate '" + cand.id + "' has no key pairs");
  SplitKeys s;
  for (const auto& k : cand.keys) {
    if (k.kind == KeyKind::hard) {
      s.base_hard.push_back(k.base);
      s.foreign_hard.push_back(k.foreign);
    } else {
      if (s.soft) throw Error(ErrorKind::invalid_key, "candidate '" + cand.id + "' has more than one soft key");
      s.soft = k;
    }
  }
  return s;
}

// Appends the foreign payload (non-key) columns, each filled by `fill`.
// fill(out_column, foreign_column) must push exactly base.row_count() cells.
template <typename Fill>
Table append_payload(const Table& base, const JoinCandidate& cand, Fill&& fill) {
  Table out = base;
  const Table& foreign = *cand.foreign;
  auto key_cols = cand.foreign_key_columns();
  for (const auto& fc : foreign.columns()) {
    if (std::find(key_cols.begin(), key_cols.end(), fc.name) != key_cols.end()) continue;
    Column col = Column::empty_like(fc, 0);
    col.source = cand.id;
    if (out.has_column(col.name)) col.name = foreign.name() + "." + fc.name;
    for (int suffix = 2; out.has_column(col.name); ++suffix)
      col.name = foreign.name() + "." + fc.name + "#" + std::to_string(suffix);
    fill(col, fc);
    out.add_column(std::move(col));
  }
  return out;
}

void require_soft_numeric(const Table& base, const Table& foreign, const KeyPair& soft) {
  if (!base.column(soft.base).is_numeric_like() || !foreign.column(soft.foreign).is_numeric_like())
    throw Error(ErrorKind::non_numeric_soft_key, "soft key '" + soft.base + "'/'" + soft.foreign +
                                                     "' must be numeric or datetime on both sides");
}

// Foreign rows bucketed by hard key tuple, each bucket sorted by soft key.
using SoftIndex = std::unordered_map<std::string, std::vector<std::pair<double, std::size_t>>>;

SoftIndex build_soft_index(const Table& foreign, const SplitKeys& keys) {
  SoftIndex index;
  auto hard = resolve(foreign, keys.foreign_hard);
  const Column& soft = foreign.column(keys.soft->foreign);
  for (std::size_t r = 0; r < foreign.row_count(); ++r) {
    if (soft.missing[r]) continue;
    auto group = tuple_text(hard, r);
    if (!group) continue;
    index[*group].emplace_back(soft.numbers[r], r);
  }
  for (auto& [g, rows] : index) std::sort(rows.begin(), rows.end());
  return index;
}

double mean_or_nan(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::vector<std::string> JoinCandidate::foreign_key_columns() const {
  std::vector<std::string> out;
  for (const auto& k : keys) out.push_back(k.foreign);
  return out;
}

bool JoinCandidate::has_soft_key() const {
  return std::any_of(keys.begin(), keys.end(), [](const KeyPair& k) { return k.kind == KeyKind::soft; });
}

std::string_view to_string(SoftJoinMethod method) { return method == SoftJoinMethod::nearest ? "nn" : "two_way"; }

std::optional<SoftJoinMethod> parse_soft_join_method(std::string_view text) {
  if (text == "nn" || text == "nearest") return SoftJoinMethod::nearest;
  if (text == "two_way") return SoftJoinMethod::two_way;
  return std::nullopt;
}

std::string_view to_string(JoinStrategy strategy) {
  switch (strategy) {
    case JoinStrategy::table: return "table";
    case JoinStrategy::budget: return "budget";
    case JoinStrategy::full_materialization: return "fullmat";
  }
  return "budget";
}

std::optional<JoinStrategy> parse_join_strategy(std::string_view text) {
  if (text == "table") return JoinStrategy::table;
  if (text == "budget") return JoinStrategy::budget;
  if (text == "fullmat" || text == "full_materialization") return JoinStrategy::full_materialization;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

Table pre_aggregate(const Table& foreign, std::span<const std::string> keys) {
  std::vector<std::string> key_names(keys.begin(), keys.end());
  auto key_cols = resolve(foreign, key_names);

  // Group ids in first-appearance order; rows with a missing key stay alone.
  std::unordered_map<std::string, std::size_t> group_of;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t r = 0; r < foreign.row_count(); ++r) {
    auto t = tuple_text(key_cols, r);
    if (!t) {
      groups.push_back({r});
      continue;
    }
    auto [it, inserted] = group_of.try_emplace(*t, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(r);
  }
  if (groups.size() == foreign.row_count()) return foreign;

  Table out(foreign.name());
  for (const auto& src : foreign.columns()) {
    Column col = Column::empty_like(src, 0);
    bool is_key = std::find(key_names.begin(), key_names.end(), src.name) != key_names.end();
    for (const auto& rows : groups) {
      if (is_key) {
        col.push_from(src, rows.front());
        continue;
      }
      if (src.dtype == DType::categorical) {
        std::map<std::string, std::size_t> counts;
        for (auto r : rows)
          if (!src.missing[r]) ++counts[src.labels[r]];
        if (counts.empty()) {
          col.push_missing();
          continue;
        }
        // std::map iterates in lexicographic order, so strict '>' keeps the smallest on ties.
        auto best = counts.begin();
        for (auto it = counts.begin(); it != counts.end(); ++it)
          if (it->second > best->second) best = it;
        col.labels.push_back(best->first);
        col.missing.push_back(false);
      } else {
        std::vector<double> vals;
        for (auto r : rows)
          if (!src.missing[r]) vals.push_back(src.numbers[r]);
        double m = mean_or_nan(vals);
        if (std::isnan(m)) {
          col.push_missing();
          continue;
        }
        if (src.dtype == DType::datetime) m = std::round(m);
        col.numbers.push_back(m);
        col.missing.push_back(false);
      }
    }
    out.add_column(std::move(col));
  }
  return out;
}

Table left_join_hard(const Table& base, const JoinCandidate& cand) {
  auto keys = split_keys(cand);
  if (keys.soft) throw Error(ErrorKind::invalid_key, "left_join_hard given a soft key for '" + cand.id + "'");
  const Table& foreign = *cand.foreign;
  auto base_cols = resolve(base, keys.base_hard);
  auto foreign_cols = resolve(foreign, keys.foreign_hard);

  std::unordered_map<std::string, std::size_t> lookup;
  for (std::size_t r = 0; r < foreign.row_count(); ++r) {
    auto t = tuple_text(foreign_cols, r);
    if (!t) continue;
    if (!lookup.emplace(*t, r).second)
      throw Error(ErrorKind::invalid_key, "foreign table '" + foreign.name() + "' is not unique on its join keys");
  }
  std::vector<std::optional<std::size_t>> match(base.row_count());
  for (std::size_t r = 0; r < base.row_count(); ++r) {
    if (auto t = tuple_text(base_cols, r)) {
      if (auto it = lookup.find(*t); it != lookup.end()) match[r] = it->second;
    }
  }
  return append_payload(base, cand, [&](Column& out, const Column& src) {
    for (const auto& m : match) {
      if (m)
        out.push_from(src, *m);
      else
        out.push_missing();
    }
  });
}

Table soft_join_nn(const Table& base, const JoinCandidate& cand) {
  auto keys = split_keys(cand);
  if (!keys.soft) return left_join_hard(base, cand);
  const Table& foreign = *cand.foreign;
  require_soft_numeric(base, foreign, *keys.soft);
  auto index = build_soft_index(foreign, keys);
  auto base_hard = resolve(base, keys.base_hard);
  const Column& base_soft = base.column(keys.soft->base);

  std::vector<std::optional<std::size_t>> match(base.row_count());
  for (std::size_t r = 0; r < base.row_count(); ++r) {
    if (base_soft.missing[r]) continue;
    auto group = tuple_text(base_hard, r);
    if (!group) continue;
    auto it = index.find(*group);
    if (it == index.end() || it->second.empty()) continue;
    const auto& rows = it->second;
    double x = base_soft.numbers[r];
    auto hi = std::lower_bound(rows.begin(), rows.end(), std::make_pair(x, std::size_t{0}));
    const std::pair<double, std::size_t>* best = nullptr;
    if (hi != rows.begin()) best = &*std::prev(hi);
    if (hi != rows.end() && (!best || hi->first - x < x - best->first)) best = &*hi;
    double distance = std::abs(best->first - x);
    if (keys.soft->tolerance && distance > *keys.soft->tolerance) continue;
    match[r] = best->second;
  }
  return append_payload(base, cand, [&](Column& out, const Column& src) {
    for (const auto& m : match) {
      if (m)
        out.push_from(src, *m);
      else
        out.push_missing();
    }
  });
}

double interpolation_weight(double x, double y_low, double y_high) {
  if (y_high <= y_low) return 1.0;
  return std::clamp((y_high - x) / (y_high - y_low), 0.0, 1.0);
}

Table soft_join_two_way(const Table& base, const JoinCandidate& cand, std::uint64_t seed) {
  auto keys = split_keys(cand);
  if (!keys.soft) return left_join_hard(base, cand);
  const Table& foreign = *cand.foreign;
  require_soft_numeric(base, foreign, *keys.soft);
  if (foreign.row_count() == 0) throw Error(ErrorKind::empty_foreign, "foreign table '" + foreign.name() + "' is empty");
  auto index = build_soft_index(foreign, keys);
  if (index.empty()) throw Error(ErrorKind::empty_foreign, "foreign table '" + foreign.name() + "' has no usable keys");
  auto base_hard = resolve(base, keys.base_hard);
  const Column& base_soft = base.column(keys.soft->base);

  struct Bracket {
    std::size_t low, high;
    double lambda;  // weight on the low row
  };
  std::vector<std::optional<Bracket>> match(base.row_count());
  for (std::size_t r = 0; r < base.row_count(); ++r) {
    if (base_soft.missing[r]) continue;
    auto group = tuple_text(base_hard, r);
    if (!group) continue;
    auto it = index.find(*group);
    if (it == index.end() || it->second.empty()) continue;
    const auto& rows = it->second;
    double x = base_soft.numbers[r];
    auto hi = std::lower_bound(rows.begin(), rows.end(), std::make_pair(x, std::size_t{0}));
    Bracket b{};
    double distance = 0.0;
    if (hi != rows.end() && hi->first == x) {
      b = {hi->second, hi->second, 1.0};
    } else if (hi == rows.begin()) {
      b = {hi->second, hi->second, 0.0};
      distance = hi->first - x;
    } else if (hi == rows.end()) {
      auto lo = std::prev(hi);
      b = {lo->second, lo->second, 1.0};
      distance = x - lo->first;
    } else {
      auto lo = std::prev(hi);
      b = {lo->second, hi->second, interpolation_weight(x, lo->first, hi->first)};
      distance = std::min(x - lo->first, hi->first - x);
    }
    if (keys.soft->tolerance && distance > *keys.soft->tolerance) continue;
    match[r] = b;
  }

  std::size_t column_index = 0;
  return append_payload(base, cand, [&](Column& out, const Column& src) {
    auto rng = make_rng(seed, {0x2a7, column_index++});
    std::bernoulli_distribution coin(0.5);
    for (const auto& m : match) {
      if (!m) {
        out.push_missing();
        continue;
      }
      bool lo_ok = !src.missing[m->low], hi_ok = !src.missing[m->high];
      if (m->low == m->high || !hi_ok) {
        out.push_from(src, lo_ok ? m->low : m->high);
      } else if (!lo_ok) {
        out.push_from(src, m->high);
      } else if (src.dtype == DType::categorical) {
        out.push_from(src, coin(rng) ? m->low : m->high);
      } else {
        double v = m->lambda * src.numbers[m->low] + (1.0 - m->lambda) * src.numbers[m->high];
        if (src.dtype == DType::datetime) v = std::round(v);
        out.numbers.push_back(v);
        out.missing.push_back(false);
      }
    }
  });
}

Table join_candidate(const Table& base, const JoinCandidate& cand, SoftJoinMethod soft, std::uint64_t seed) {
  if (!cand.has_soft_key()) return left_join_hard(base, cand);
  return soft == SoftJoinMethod::nearest ? soft_join_nn(base, cand) : soft_join_two_way(base, cand, seed);
}

Table execute_join(const Table& base, const JoinCandidate& cand, SoftJoinMethod soft, std::uint64_t seed) {
  split_keys(cand);  // validates the key layout
  JoinCandidate prepared = cand;
  Table probe = base;
  std::vector<std::string> temp_columns;
  auto foreign = std::make_shared<Table>(*cand.foreign);
  const auto foreign_keys = cand.foreign_key_columns();

  for (std::size_t i = 0; i < prepared.keys.size(); ++i) {
    KeyPair& k = prepared.keys[i];
    if (!k.granularity) continue;
    std::vector<std::string> others;
    for (const auto& f : foreign_keys)
      if (f != k.foreign) others.push_back(f);
    *foreign = time_resample(*foreign, k.foreign, *k.granularity, others);

    const Column& bc = base.column(k.base);
    if (bc.dtype != DType::datetime) throw Error(ErrorKind::not_datetime, "column '" + k.base + "' is not a datetime");
    if (bc.granularity > *k.granularity)
      throw Error(ErrorKind::coarser_than_target, "column '" + k.base + "' is coarser than the join granularity");
    Column t = bc;
    t.name = "__joinkey_" + std::to_string(i);
    for (std::size_t r = 0; r < t.size(); ++r)
      if (!t.missing[r])
        t.numbers[r] = static_cast<double>(truncate_epoch(static_cast<std::int64_t>(t.numbers[r]), *k.granularity));
    t.granularity = *k.granularity;
    k.base = t.name;
    temp_columns.push_back(t.name);
    probe.add_column(std::move(t));
  }
  *foreign = pre_aggregate(*foreign, foreign_keys);
  prepared.foreign = foreign;

  Table joined = join_candidate(probe, prepared, soft, seed);
  return temp_columns.empty() ? joined : joined.drop_columns(temp_columns);
}

Table time_resample(const Table& foreign, const std::string& key, Granularity target,
                    std::span<const std::string> extra_keys) {
  const Column& col = foreign.column(key);
  if (col.dtype != DType::datetime) throw Error(ErrorKind::not_datetime, "column '" + key + "' is not a datetime");
  if (col.granularity > target)
    throw Error(ErrorKind::coarser_than_target,
                "column '" + key + "' is at '" + std::string(granularity_tag(col.granularity)) +
                    "', coarser than target '" + std::string(granularity_tag(target)) + "'");
  if (col.granularity == target) return foreign;

  Table truncated(foreign.name());
  for (const auto& c : foreign.columns()) {
    if (c.name != key) {
      truncated.add_column(c);
      continue;
    }
    Column t = c;
    for (std::size_t r = 0; r < t.size(); ++r)
      if (!t.missing[r]) t.numbers[r] = static_cast<double>(truncate_epoch(static_cast<std::int64_t>(t.numbers[r]), target));
    t.granularity = target;
    truncated.add_column(std::move(t));
  }
  std::vector<std::string> group_keys{key};
  group_keys.insert(group_keys.end(), extra_keys.begin(), extra_keys.end());
  return pre_aggregate(truncated, group_keys);
}

double intersection_score(const Table& base, const JoinCandidate& cand) {
  auto keys = split_keys(cand);
  if (keys.base_hard.empty())
    throw Error(ErrorKind::invalid_key, "intersection score needs hard keys ('" + cand.id + "')");
  auto base_cols = resolve(base, keys.base_hard);
  auto foreign_cols = resolve(*cand.foreign, keys.foreign_hard);
  std::unordered_set<std::string> base_set, foreign_set;
  for (std::size_t r = 0; r < base.row_count(); ++r)
    if (auto t = tuple_text(base_cols, r)) base_set.insert(*t);
  for (std::size_t r = 0; r < cand.foreign->row_count(); ++r)
    if (auto t = tuple_text(foreign_cols, r)) foreign_set.insert(*t);
  if (base_set.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& t : base_set) hits += foreign_set.count(t);
  return static_cast<double>(hits) / static_cast<double>(base_set.size());
}

double tuple_ratio(std::size_t base_rows, std::size_t foreign_key_domain) {
  if (foreign_key_domain == 0) throw Error(ErrorKind::div_zero, "foreign key domain is empty");
  return static_cast<double>(base_rows) / static_cast<double>(foreign_key_domain);
}

std::size_t foreign_key_domain(const JoinCandidate& cand) {
  auto cols = resolve(*cand.foreign, cand.foreign_key_columns());
  std::unordered_set<std::string> distinct;
  for (std::size_t r = 0; r < cand.foreign->row_count(); ++r)
    if (auto t = tuple_text(cols, r)) distinct.insert(*t);
  return distinct.size();
}

std::size_t estimate_feature_width(const JoinCandidate& cand, std::size_t max_cardinality) {
  auto key_cols = cand.foreign_key_columns();
  std::size_t width = 0;
  for (const auto& c : cand.foreign->columns()) {
    if (std::find(key_cols.begin(), key_cols.end(), c.name) != key_cols.end()) continue;
    if (c.dtype != DType::categorical) {
      ++width;
      continue;
    }
    std::set<std::string> distinct;
    for (std::size_t r = 0; r < c.size(); ++r)
      if (!c.missing[r]) distinct.insert(c.labels[r]);
    width += std::min(distinct.size(), max_cardinality);
  }
  return width;
}

std::vector<std::vector<std::size_t>> first_fit_batches(std::span<const std::size_t> widths, std::size_t budget) {
  std::vector<std::vector<std::size_t>> batches;
  std::vector<std::size_t> used;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (widths[i] > budget) {
      batches.push_back({i});
      used.push_back(std::numeric_limits<std::size_t>::max() / 2);  // closed
      continue;
    }
    bool placed = false;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      if (used[b] + widths[i] <= budget) {
        batches[b].push_back(i);
        used[b] += widths[i];
        placed = true;
        break;
      }
    }
    if (!placed) {
      batches.push_back({i});
      used.push_back(widths[i]);
    }
  }
  return batches;
}

JoinPlan make_join_plan(const Table& base, std::vector<JoinCandidate> cands, JoinStrategy strategy,
                        std::size_t budget, std::size_t max_cardinality) {
  if (strategy == JoinStrategy::budget && budget < 1) throw Error(ErrorKind::config, "budget must be >= 1");
  for (auto& c : cands) {
    if (c.score) continue;
    auto keys = split_keys(c);
    if (!keys.base_hard.empty()) {
      c.score = intersection_score(base, c);
    } else {
      // Soft-only candidate: share of base soft keys inside the foreign key range.
      const Column& b = base.column(keys.soft->base);
      const Column& f = c.foreign->column(keys.soft->foreign);
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t r = 0; r < f.size(); ++r)
        if (!f.missing[r] && f.dtype != DType::categorical) lo = std::min(lo, f.numbers[r]), hi = std::max(hi, f.numbers[r]);
      std::size_t inside = 0, total = 0;
      for (std::size_t r = 0; r < b.size(); ++r) {
        if (b.missing[r] || b.dtype == DType::categorical) continue;
        ++total;
        inside += (b.numbers[r] >= lo && b.numbers[r] <= hi) ? 1 : 0;
      }
      c.score = total ? static_cast<double>(inside) / static_cast<double>(total) : 0.0;
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const JoinCandidate& a, const JoinCandidate& b) {
    if (*a.score != *b.score) return *a.score > *b.score;
    return a.id < b.id;
  });

  JoinPlan plan;
  plan.strategy = strategy;
  plan.budget = budget;
  if (cands.empty()) return plan;
  switch (strategy) {
    case JoinStrategy::table:
      for (auto& c : cands) plan.batches.push_back({std::move(c)});
      break;
    case JoinStrategy::full_materialization:
      plan.batches.push_back(std::move(cands));
      break;
    case JoinStrategy::budget: {
      std::vector<std::size_t> widths;
      for (const auto& c : cands) widths.push_back(estimate_feature_width(c, max_cardinality));
      for (const auto& group : first_fit_batches(widths, budget)) {
        std::vector<JoinCandidate> batch;
        for (auto i : group) batch.push_back(cands[i]);
        plan.batches.push_back(std::move(batch));
      }
      break;
    }
  }
  return plan;
}

}  // namespace joinaug
