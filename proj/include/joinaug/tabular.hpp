#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace joinaug {

enum class DType { numeric, categorical, datetime };

/// Time resolution of a datetime column, ordered finest to coarsest.
enum class Granularity { seconds = 0, minutes = 1, hours = 2, days = 3 };

std::string_view to_string(DType dtype);
std::string_view granularity_tag(Granularity g);  // "s", "min", "h", "d"
std::optional<Granularity> parse_granularity(std::string_view tag);
std::int64_t granularity_seconds(Granularity g);

/// Epoch seconds truncated down to a multiple of the granularity.
std::int64_t truncate_epoch(std::int64_t epoch_seconds, Granularity g);

struct ParsedTime {
  std::int64_t epoch_seconds;
  Granularity granularity;
};

/// Accepts ISO-8601 dates/datetimes ("2018-01-02", "2018-01-02T09:15[:30]")
/// and US style "01/02/2018[ 09:15[:30]]".
std::optional<ParsedTime> parse_datetime(std::string_view text);
std::string format_datetime(std::int64_t epoch_seconds, Granularity g);

/// Shortest text that parses back to the same double.
std::string format_number(double v);

/// Empty string, NA, NaN and null (any case) are missing cells.
bool is_missing_token(std::string_view cell);

/// A single typed column. Numeric and datetime data live in `numbers`
/// (datetimes as integral epoch seconds); categorical data in `labels`.
/// Only the vector matching `dtype` is populated.
struct Column {
  std::string name;
  DType dtype = DType::numeric;
  Granularity granularity = Granularity::seconds;
  std::vector<double> numbers;
  std::vector<std::string> labels;
  std::vector<bool> missing;
  std::string source;  // id of the table this column came from

  static Column numeric(std::string name, std::vector<double> values, std::string source = {});
  static Column categorical(std::string name, std::vector<std::string> values, std::string source = {});
  static Column datetime(std::string name, std::vector<std::int64_t> epoch_seconds, Granularity g,
                         std::string source = {});
  /// All-missing column of the given type.
  static Column empty_like(const Column& proto, std::size_t rows);

  std::size_t size() const { return missing.size(); }
  bool is_missing(std::size_t row) const { return missing[row]; }
  bool is_numeric_like() const { return dtype != DType::categorical; }
  std::size_t missing_count() const;

  /// Canonical text for a cell: used for CSV output and for key matching
  /// across differently typed key columns.
  std::string cell_text(std::size_t row) const;

  Column take(std::span<const std::size_t> rows) const;
  void push_missing();
  void push_from(const Column& other, std::size_t row);
};

class Table {
 public:
  Table() = default;
  explicit Table(std::string name) : name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }
  std::size_t row_count() const { return row_count_; }
  std::size_t column_count() const { return columns_.size(); }
  const std::vector<Column>& columns() const { return columns_; }

  /// The first column fixes the row count; later columns must match it and
  /// must not reuse a name.
  void add_column(Column column);
  void replace_column(std::size_t index, Column column);

  std::optional<std::size_t> find(std::string_view name) const;
  bool has_column(std::string_view name) const { return find(name).has_value(); }
  const Column& column(std::string_view name) const;
  const Column& column(std::size_t index) const { return columns_.at(index); }

  Table take_rows(std::span<const std::size_t> rows) const;
  Table select_columns(std::span<const std::string> names) const;
  Table drop_columns(std::span<const std::string> names) const;

 private:
  std::string name_;
  std::vector<Column> columns_;
  std::size_t row_count_ = 0;
};

using SchemaHints = std::map<std::string, DType, std::less<>>;

Table parse_csv(std::string_view text, std::string table_name, const SchemaHints& hints = {});
Table load_csv(const std::filesystem::path& path, const SchemaHints& hints = {});
std::string to_csv(const Table& table);
void write_csv(const Table& table, const std::filesystem::path& path);

struct ImputeResult {
  Table table;
  std::vector<std::string> dropped;  // entirely-missing columns
};

/// Median for numeric/datetime columns, seeded uniform draw over observed
/// distinct values for categorical columns.
ImputeResult impute(const Table& table, std::uint64_t seed);

struct FeatureMatrix {
  Eigen::MatrixXd values;  // n x d
  std::vector<std::string> names;
  std::vector<std::string> provenance;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
  std::optional<std::size_t> find(std::string_view name) const;
  FeatureMatrix select_columns(std::span<const std::size_t> cols) const;
  FeatureMatrix select_rows(std::span<const std::size_t> rows) const;
};

enum class Task { regression, classification };

std::string_view to_string(Task task);
std::optional<Task> parse_task(std::string_view text);

struct LabelVector {
  Eigen::VectorXd values;  // class ids stored as exact integers for classification
  Task task = Task::regression;
  int num_classes = 0;
  std::vector<std::string> class_names;

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
  int class_of(std::size_t i) const { return static_cast<int>(values[static_cast<Eigen::Index>(i)]); }
  LabelVector select(std::span<const std::size_t> rows) const;
};

/// Builds labels from a target column. Classification ids follow the sorted
/// order of the distinct observed values, so they are contiguous from 0.
LabelVector make_labels(const Column& target, Task task);

struct BinarizeResult {
  FeatureMatrix matrix;
  std::vector<std::string> dropped;  // high-cardinality categoricals
};

inline constexpr std::size_t kDefaultMaxCardinality = 50;

BinarizeResult binarize(const Table& table, std::size_t max_cardinality = kDefaultMaxCardinality);

struct Split {
  FeatureMatrix train_x, test_x;
  LabelVector train_y, test_y;
  std::vector<std::size_t> train_rows, test_rows;
};

/// Row partition only; usable when the matrix is built later.
struct SplitRows {
  std::vector<std::size_t> train, test;
};

SplitRows holdout_rows(const LabelVector& y, double test_fraction, std::uint64_t seed);
Split holdout_split(const FeatureMatrix& x, const LabelVector& y, double test_fraction, std::uint64_t seed);

}  // namespace joinaug
