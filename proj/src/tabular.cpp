#include "joinaug/tabular.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "joinaug/csv.hpp"
#include "joinaug/error.hpp"
#include "joinaug/random.hpp"

namespace joinaug {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

std::optional<double> parse_number(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

// Reads exactly `width` digits (or 1..width when width_is_max) from s at pos.
std::optional<int> read_int(std::string_view s, std::size_t& pos, std::size_t min_width, std::size_t max_width) {
  std::size_t start = pos;
  int value = 0;
  while (pos < s.size() && pos - start < max_width && s[pos] >= '0' && s[pos] <= '9') {
    value = value * 10 + (s[pos] - '0');
    ++pos;
  }
  if (pos - start < min_width) return std::nullopt;
  return value;
}

bool expect(std::string_view s, std::size_t& pos, char c) {
  if (pos < s.size() && s[pos] == c) {
    ++pos;
    return true;
  }
  return false;
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string_view to_string(DType dtype) {
  switch (dtype) {
    case DType::numeric: return "numeric";
    case DType::categorical: return "categorical";
    case DType::datetime: return "datetime";
  }
  return "numeric";
}

std::string_view to_string(Task task) { return task == Task::regression ? "regression" : "classification"; }

std::optional<Task> parse_task(std::string_view text) {
  if (text == "regression") return Task::regression;
  if (text == "classification") return Task::classification;
  return std::nullopt;
}

std::string_view granularity_tag(Granularity g) {
  switch (g) {
    case Granularity::seconds: return "s";
    case Granularity::minutes: return "min";
    case Granularity::hours: return "h";
    case Granularity::days: return "d";
  }
  return "s";
}

std::optional<Granularity> parse_granularity(std::string_view tag) {
  if (tag == "s") return Granularity::seconds;
  if (tag == "min") return Granularity::minutes;
  if (tag == "h") return Granularity::hours;
  if (tag == "d") return Granularity::days;
  return std::nullopt;
}

std::int64_t granularity_seconds(Granularity g) {
  switch (g) {
    case Granularity::seconds: return 1;
    case Granularity::minutes: return 60;
    case Granularity::hours: return 3600;
    case Granularity::days: return 86400;
  }
  return 1;
}

std::int64_t truncate_epoch(std::int64_t epoch_seconds, Granularity g) {
  std::int64_t unit = granularity_seconds(g);
  std::int64_t q = epoch_seconds / unit;
  if (epoch_seconds % unit != 0 && epoch_seconds < 0) --q;
  return q * unit;
}

std::optional<ParsedTime> parse_datetime(std::string_view text) {
  using namespace std::chrono;
  text = trim(text);
  std::size_t pos = 0;
  int y = 0, mo = 0, d = 0;

  bool iso = text.size() >= 10 && text[4] == '-';
  if (iso) {
    auto yy = read_int(text, pos, 4, 4);
    if (!yy || !expect(text, pos, '-')) return std::nullopt;
    auto mm = read_int(text, pos, 2, 2);
    if (!mm || !expect(text, pos, '-')) return std::nullopt;
    auto dd = read_int(text, pos, 2, 2);
    if (!dd) return std::nullopt;
    y = *yy, mo = *mm, d = *dd;
  } else {
    auto mm = read_int(text, pos, 1, 2);
    if (!mm || !expect(text, pos, '/')) return std::nullopt;
    auto dd = read_int(text, pos, 1, 2);
    if (!dd || !expect(text, pos, '/')) return std::nullopt;
    auto yy = read_int(text, pos, 4, 4);
    if (!yy) return std::nullopt;
    y = *yy, mo = *mm, d = *dd;
  }
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  std::int64_t epoch = static_cast<std::int64_t>(sys_days{ymd}.time_since_epoch().count()) * 86400;
  Granularity g = Granularity::days;

  if (pos < text.size()) {
    if (!(text[pos] == 'T' || text[pos] == ' ')) return std::nullopt;
    ++pos;
    auto hh = read_int(text, pos, 1, 2);
    if (!hh || !expect(text, pos, ':')) return std::nullopt;
    auto mi = read_int(text, pos, 2, 2);
    if (!mi) return std::nullopt;
    int sec = 0;
    g = Granularity::minutes;
    if (expect(text, pos, ':')) {
      auto ss = read_int(text, pos, 2, 2);
      if (!ss) return std::nullopt;
      sec = *ss;
      g = Granularity::seconds;
    }
    if (pos < text.size() && text[pos] == 'Z') ++pos;
    if (pos != text.size() || *hh > 23 || *mi > 59 || sec > 60) return std::nullopt;
    epoch += *hh * 3600LL + *mi * 60LL + sec;
  }
  return ParsedTime{epoch, g};
}

std::string format_datetime(std::int64_t epoch_seconds, Granularity g) {
  using namespace std::chrono;
  std::int64_t day_index = truncate_epoch(epoch_seconds, Granularity::days) / 86400;
  std::int64_t rem = epoch_seconds - day_index * 86400;
  year_month_day ymd{sys_days{days{day_index}}};
  char buf[48];
  int n = std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                        static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  std::string out(buf, static_cast<std::size_t>(n));
  if (g == Granularity::days) return out;
  int hh = static_cast<int>(rem / 3600), mi = static_cast<int>(rem % 3600 / 60), ss = static_cast<int>(rem % 60);
  if (g == Granularity::seconds)
    n = std::snprintf(buf, sizeof(buf), " %02d:%02d:%02d", hh, mi, ss);
  else
    n = std::snprintf(buf, sizeof(buf), " %02d:%02d", hh, mi);
  return out + std::string(buf, static_cast<std::size_t>(n));
}

bool is_missing_token(std::string_view cell) {
  cell = trim(cell);
  return cell.empty() || iequals(cell, "na") || iequals(cell, "nan") || iequals(cell, "null");
}

// ---------------------------------------------------------------------------
// Column

Column Column::numeric(std::string name, std::vector<double> values, std::string source) {
  Column c;
  c.name = std::move(name);
  c.dtype = DType::numeric;
  c.missing.assign(values.size(), false);
  for (std::size_t i = 0; i < values.size(); ++i) c.missing[i] = !std::isfinite(values[i]);
  c.numbers = std::move(values);
  c.source = std::move(source);
  return c;
}

Column Column::categorical(std::string name, std::vector<std::string> values, std::string source) {
  Column c;
  c.name = std::move(name);
  c.dtype = DType::categorical;
  c.missing.assign(values.size(), false);
  c.labels = std::move(values);
  c.source = std::move(source);
  return c;
}

Column Column::datetime(std::string name, std::vector<std::int64_t> epoch_seconds, Granularity g,
                        std::string source) {
  Column c;
  c.name = std::move(name);
  c.dtype = DType::datetime;
  c.granularity = g;
  c.numbers.assign(epoch_seconds.begin(), epoch_seconds.end());
  c.missing.assign(epoch_seconds.size(), false);
  c.source = std::move(source);
  return c;
}

Column Column::empty_like(const Column& proto, std::size_t rows) {
  Column c;
  c.name = proto.name;
  c.dtype = proto.dtype;
  c.granularity = proto.granularity;
  c.source = proto.source;
  if (c.dtype == DType::categorical)
    c.labels.assign(rows, {});
  else
    c.numbers.assign(rows, 0.0);
  c.missing.assign(rows, true);
  return c;
}

std::size_t Column::missing_count() const {
  return static_cast<std::size_t>(std::count(missing.begin(), missing.end(), true));
}

std::string Column::cell_text(std::size_t row) const {
  if (missing[row]) return {};
  switch (dtype) {
    case DType::categorical: return labels[row];
    case DType::datetime: return format_datetime(static_cast<std::int64_t>(numbers[row]), granularity);
    case DType::numeric: return format_number(numbers[row]);
  }
  return {};
}

Column Column::take(std::span<const std::size_t> rows) const {
  Column c;
  c.name = name;
  c.dtype = dtype;
  c.granularity = granularity;
  c.source = source;
  c.missing.reserve(rows.size());
  if (dtype == DType::categorical) {
    c.labels.reserve(rows.size());
    for (auto r : rows) c.labels.push_back(labels.at(r));
  } else {
    c.numbers.reserve(rows.size());
    for (auto r : rows) c.numbers.push_back(numbers.at(r));
  }
  for (auto r : rows) c.missing.push_back(missing[r]);
  return c;
}

void Column::push_missing() {
  if (dtype == DType::categorical)
    labels.emplace_back();
  else
    numbers.push_back(0.0);
  missing.push_back(true);
}

void Column::push_from(const Column& other, std::size_t row) {
  if (dtype == DType::categorical)
    labels.push_back(other.labels[row]);
  else
    numbers.push_back(other.numbers[row]);
  missing.push_back(other.missing[row]);
}

// ---------------------------------------------------------------------------
// Table

void Table::add_column(Column column) {
  std::size_t n = column.size();
  std::size_t payload = column.dtype == DType::categorical ? column.labels.size() : column.numbers.size();
  if (payload != n) throw Error(ErrorKind::format, "column '" + column.name + "' has inconsistent storage");
  if (columns_.empty()) {
    row_count_ = n;
  } else if (n != row_count_) {
    throw Error(ErrorKind::format, "column '" + column.name + "' has " + std::to_string(n) + " rows, expected " +
                                       std::to_string(row_count_));
  }
  if (has_column(column.name)) throw Error(ErrorKind::format, "duplicate column name '" + column.name + "'");
  columns_.push_back(std::move(column));
}

void Table::replace_column(std::size_t index, Column column) {
  if (column.size() != row_count_) throw Error(ErrorKind::format, "replacement column has wrong length");
  columns_.at(index) = std::move(column);
}

std::optional<std::size_t> Table::find(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].name == name) return i;
  return std::nullopt;
}

const Column& Table::column(std::string_view name) const {
  auto idx = find(name);
  if (!idx) throw Error(ErrorKind::missing_column, "no column '" + std::string(name) + "' in table '" + name_ + "'");
  return columns_[*idx];
}

Table Table::take_rows(std::span<const std::size_t> rows) const {
  Table out(name_);
  for (const auto& c : columns_) out.add_column(c.take(rows));
  if (columns_.empty()) out.row_count_ = rows.size();
  return out;
}

Table Table::select_columns(std::span<const std::string> names) const {
  Table out(name_);
  for (const auto& n : names) out.add_column(column(n));
  return out;
}

Table Table::drop_columns(std::span<const std::string> names) const {
  Table out(name_);
  for (const auto& c : columns_)
    if (std::find(names.begin(), names.end(), c.name) == names.end()) out.add_column(c);
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

Column infer_column(const std::string& name, const std::vector<std::string_view>& cells,
                    std::optional<DType> hint, const std::string& source) {
  std::size_t non_empty = 0, numeric_ok = 0, datetime_ok = 0;
  Granularity finest = Granularity::days;
  for (auto cell : cells) {
    if (is_missing_token(cell)) continue;
    ++non_empty;
    if (parse_number(cell)) ++numeric_ok;
    if (auto t = parse_datetime(cell)) {
      ++datetime_ok;
      finest = std::min(finest, t->granularity);
    }
  }

  DType dtype;
  if (hint) {
    dtype = *hint;
  } else if (non_empty == 0 || static_cast<double>(numeric_ok) >= 0.95 * static_cast<double>(non_empty)) {
    dtype = DType::numeric;
  } else if (static_cast<double>(datetime_ok) >= 0.95 * static_cast<double>(non_empty)) {
    dtype = DType::datetime;
  } else {
    dtype = DType::categorical;
  }

  Column col;
  col.name = name;
  col.dtype = dtype;
  col.source = source;
  col.missing.assign(cells.size(), false);
  if (dtype == DType::categorical) {
    col.labels.resize(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (is_missing_token(cells[i]))
        col.missing[i] = true;
      else
        col.labels[i] = std::string(trim(cells[i]));
    }
  } else if (dtype == DType::numeric) {
    col.numbers.assign(cells.size(), 0.0);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      auto v = is_missing_token(cells[i]) ? std::nullopt : parse_number(cells[i]);
      if (v)
        col.numbers[i] = *v;
      else
        col.missing[i] = true;
    }
  } else {
    col.granularity = finest;
    col.numbers.assign(cells.size(), 0.0);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      auto t = is_missing_token(cells[i]) ? std::nullopt : parse_datetime(cells[i]);
      if (t)
        col.numbers[i] = static_cast<double>(t->epoch_seconds);
      else
        col.missing[i] = true;
    }
  }
  return col;
}

}  // namespace

Table parse_csv(std::string_view text, std::string table_name, const SchemaHints& hints) {
  auto records = csv::parse(text);
  if (records.empty()) throw Error(ErrorKind::format, "missing header row");
  const auto& header = records.front();
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != header.size())
      throw Error(ErrorKind::format, "ragged row " + std::to_string(r) + ": " + std::to_string(records[r].size()) +
                                         " fields, header has " + std::to_string(header.size()));
  }
  if (records.size() < 2) throw Error(ErrorKind::empty_table, "table '" + table_name + "' has no data rows");

  Table table(table_name);
  std::vector<std::string_view> cells(records.size() - 1);
  for (std::size_t c = 0; c < header.size(); ++c) {
    for (std::size_t r = 1; r < records.size(); ++r) cells[r - 1] = records[r][c];
    std::string name(trim(header[c]));
    std::optional<DType> hint;
    if (auto it = hints.find(name); it != hints.end()) hint = it->second;
    table.add_column(infer_column(name, cells, hint, table_name));
  }
  return table;
}

Table load_csv(const std::filesystem::path& path, const SchemaHints& hints) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::io, "read failure on '" + path.string() + "'");
  return parse_csv(buffer.str(), path.stem().string(), hints);
}

std::string to_csv(const Table& table) {
  std::string out;
  for (std::size_t c = 0; c < table.column_count(); ++c) {
    if (c) out.push_back(',');
    out += csv::escape(table.column(c).name);
  }
  out.push_back('\n');
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    for (std::size_t c = 0; c < table.column_count(); ++c) {
      if (c) out.push_back(',');
      out += csv::escape(table.column(c).cell_text(r));
    }
    out.push_back('\n');
  }
  return out;
}

void write_csv(const Table& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
  out << to_csv(table);
  if (!out) throw Error(ErrorKind::io, "write failure on '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Imputation

namespace {

double median_of(std::vector<double> values) {
  auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  double upper = *mid;
  if (values.size() % 2 == 1) return upper;
  double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace

ImputeResult impute(const Table& table, std::uint64_t seed) {
  ImputeResult result{Table(table.name()), {}};
  for (std::size_t ci = 0; ci < table.column_count(); ++ci) {
    const Column& src = table.column(ci);
    std::size_t missing = src.missing_count();
    if (missing == 0) {
      result.table.add_column(src);
      continue;
    }
    if (missing == src.size()) {
      result.dropped.push_back(src.name);
      continue;
    }
    Column col = src;
    if (col.dtype == DType::categorical) {
      std::set<std::string> distinct;
      for (std::size_t r = 0; r < col.size(); ++r)
        if (!col.missing[r]) distinct.insert(col.labels[r]);
      std::vector<std::string> pool(distinct.begin(), distinct.end());
      auto rng = make_rng(seed, {0x1a7e, ci});
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      for (std::size_t r = 0; r < col.size(); ++r)
        if (col.missing[r]) col.labels[r] = pool[pick(rng)];
    } else {
      std::vector<double> observed;
      observed.reserve(col.size() - missing);
      for (std::size_t r = 0; r < col.size(); ++r)
        if (!col.missing[r]) observed.push_back(col.numbers[r]);
      double fill = median_of(std::move(observed));
      if (col.dtype == DType::datetime) fill = std::round(fill);
      for (std::size_t r = 0; r < col.size(); ++r)
        if (col.missing[r]) col.numbers[r] = fill;
    }
    col.missing.assign(col.size(), false);
    result.table.add_column(std::move(col));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Feature matrices and labels

std::optional<std::size_t> FeatureMatrix::find(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  return std::nullopt;
}

FeatureMatrix FeatureMatrix::select_columns(std::span<const std::size_t> cols) const {
  FeatureMatrix out;
  out.values.resize(values.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    out.values.col(static_cast<Eigen::Index>(j)) = values.col(static_cast<Eigen::Index>(cols[j]));
    out.names.push_back(names.at(cols[j]));
    out.provenance.push_back(provenance.at(cols[j]));
  }
  return out;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> rows) const {
  FeatureMatrix out;
  out.names = names;
  out.provenance = provenance;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.values.row(static_cast<Eigen::Index>(i)) = values.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

LabelVector LabelVector::select(std::span<const std::size_t> rows) const {
  LabelVector out;
  out.task = task;
  out.num_classes = num_classes;
  out.class_names = class_names;
  out.values.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.values[static_cast<Eigen::Index>(i)] = values[static_cast<Eigen::Index>(rows[i])];
  return out;
}

LabelVector make_labels(const Column& target, Task task) {
  if (target.missing_count() > 0)
    throw Error(ErrorKind::format, "target column '" + target.name + "' has missing values");
  LabelVector y;
  y.task = task;
  const auto n = static_cast<Eigen::Index>(target.size());
  y.values.resize(n);
  if (task == Task::regression) {
    if (target.dtype == DType::categorical)
      throw Error(ErrorKind::config, "regression target '" + target.name + "' is not numeric");
    for (Eigen::Index i = 0; i < n; ++i) y.values[i] = target.numbers[static_cast<std::size_t>(i)];
    return y;
  }
  if (target.dtype == DType::categorical) {
    std::set<std::string> distinct(target.labels.begin(), target.labels.end());
    y.class_names.assign(distinct.begin(), distinct.end());
    for (Eigen::Index i = 0; i < n; ++i) {
      auto it = std::lower_bound(y.class_names.begin(), y.class_names.end(), target.labels[static_cast<std::size_t>(i)]);
      y.values[i] = static_cast<double>(it - y.class_names.begin());
    }
  } else {
    std::set<double> distinct(target.numbers.begin(), target.numbers.end());
    std::vector<double> sorted(distinct.begin(), distinct.end());
    for (double v : sorted) y.class_names.push_back(format_number(v));
    for (Eigen::Index i = 0; i < n; ++i) {
      auto it = std::lower_bound(sorted.begin(), sorted.end(), target.numbers[static_cast<std::size_t>(i)]);
      y.values[i] = static_cast<double>(it - sorted.begin());
    }
  }
  y.num_classes = static_cast<int>(y.class_names.size());
  return y;
}

BinarizeResult binarize(const Table& table, std::size_t max_cardinality) {
  BinarizeResult result;
  std::vector<Eigen::VectorXd> cols;
  const auto n = static_cast<Eigen::Index>(table.row_count());
  auto& names = result.matrix.names;
  auto& provenance = result.matrix.provenance;

  for (const auto& col : table.columns()) {
    if (col.missing_count() > 0)
      throw Error(ErrorKind::format, "binarize requires an imputed table; column '" + col.name + "' has gaps");
    if (col.dtype != DType::categorical) {
      cols.emplace_back(Eigen::Map<const Eigen::VectorXd>(col.numbers.data(), n));
      names.push_back(col.name);
      provenance.push_back(col.source);
      continue;
    }
    std::set<std::string> distinct(col.labels.begin(), col.labels.end());
    if (distinct.size() > max_cardinality) {
      result.dropped.push_back(col.name);
      continue;
    }
    for (const auto& value : distinct) {
      Eigen::VectorXd indicator(n);
      for (Eigen::Index i = 0; i < n; ++i) indicator[i] = col.labels[static_cast<std::size_t>(i)] == value ? 1.0 : 0.0;
      cols.push_back(std::move(indicator));
      names.push_back(col.name + "=" + value);
      provenance.push_back(col.source);
    }
  }
  if (cols.empty()) throw Error(ErrorKind::no_features, "no usable feature columns in '" + table.name() + "'");
  result.matrix.values.resize(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) result.matrix.values.col(static_cast<Eigen::Index>(j)) = cols[j];
  return result;
}

// ---------------------------------------------------------------------------
// Holdout split

SplitRows holdout_rows(const LabelVector& y, double test_fraction, std::uint64_t seed) {
  const std::size_t n = y.size();
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw Error(ErrorKind::config, "test_fraction must lie in (0,1)");
  if (n < 4) throw Error(ErrorKind::degenerate_split, "need at least 4 rows, got " + std::to_string(n));
  auto rng = make_rng(seed, {0x5b1, n});
  const auto total_test = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction)), 1, n - 1);

  SplitRows split;
  if (y.task == Task::regression) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(total_test));
    split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(total_test), order.end());
  } else {
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(std::max(y.num_classes, 1)));
    for (std::size_t i = 0; i < n; ++i) members.at(static_cast<std::size_t>(y.class_of(i))).push_back(i);
    std::vector<long> quota(members.size());
    std::vector<double> remainder(members.size());
    long assigned = 0;
    for (std::size_t k = 0; k < members.size(); ++k) {
      auto count = members[k].size();
      if (count == 0) continue;
      if (count < 2)
        throw Error(ErrorKind::degenerate_split, "class " + std::to_string(k) + " has fewer than 2 members");
      double exact = static_cast<double>(count) * test_fraction;
      quota[k] = std::clamp<long>(std::lround(exact), 0, static_cast<long>(count) - 1);
      remainder[k] = exact - static_cast<double>(quota[k]);
      assigned += quota[k];
    }
    // Nudge classes by one, most under-served first, until the global total matches.
    std::vector<std::size_t> by_remainder(members.size());
    std::iota(by_remainder.begin(), by_remainder.end(), 0);
    std::stable_sort(by_remainder.begin(), by_remainder.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    long diff = static_cast<long>(total_test) - assigned;
    for (std::size_t pass = 0; diff != 0 && pass < members.size() * 2; ++pass) {
      for (std::size_t idx = 0; idx < by_remainder.size() && diff != 0; ++idx) {
        std::size_t k = diff > 0 ? by_remainder[idx] : by_remainder[by_remainder.size() - 1 - idx];
        long cap = static_cast<long>(members[k].size()) - 1;
        if (diff > 0 && quota[k] < cap) {
          ++quota[k];
          --diff;
        } else if (diff < 0 && quota[k] > 0) {
          --quota[k];
          ++diff;
        }
      }
    }
    for (std::size_t k = 0; k < members.size(); ++k) {
      auto& rows = members[k];
      std::shuffle(rows.begin(), rows.end(), rng);
      split.test.insert(split.test.end(), rows.begin(), rows.begin() + quota[k]);
      split.train.insert(split.train.end(), rows.begin() + quota[k], rows.end());
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

Split holdout_split(const FeatureMatrix& x, const LabelVector& y, double test_fraction, std::uint64_t seed) {
  if (x.rows() != y.size()) throw Error(ErrorKind::length_mismatch, "feature rows differ from label length");
  auto rows = holdout_rows(y, test_fraction, seed);
  Split split;
  split.train_x = x.select_rows(rows.train);
  split.test_x = x.select_rows(rows.test);
  split.train_y = y.select(rows.train);
  split.test_y = y.select(rows.test);
  split.train_rows = std::move(rows.train);
  split.test_rows = std::move(rows.test);
  return split;
}

}  // namespace joinaug
