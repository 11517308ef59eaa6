#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "erclaims/money.h"

namespace erclaims {

inline constexpr int kMinSeverity = 1;
inline constexpr int kMaxSeverity = 5;
inline constexpr int kNumSeverities = 5;

enum class ColumnKind { kNumeric, kCategorical };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;

  bool operator==(const ColumnSpec&) const = default;
};

// Feature columns only; the fixed claim columns are implied.
using Schema = std::vector<ColumnSpec>;

// Interned categorical values. Codes are assigned in first-appearance order.
class Levels {
 public:
  int intern(std::string_view name);
  std::optional<int> find(std::string_view name) const;
  const std::string& name(int code) const { return names_.at(static_cast<std::size_t>(code)); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  bool operator==(const Levels& o) const { return names_ == o.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

struct Claim {
  std::int64_t id = 0;
  int diagnosis = 0;  // code into Dataset::diagnosis_levels()
  int severity = kMinSeverity;
  int group = 0;  // code into Dataset::group_levels()
  Money billed;
  std::optional<Money> cost_avoidance;  // empty until reviewed
  // Numeric value (NaN when missing) or, for categorical columns, the level
  // code into Dataset::feature_levels(j) stored exactly as a double.
  std::vector<double> features;

  bool operator==(const Claim& o) const;
};

// Immutable collection of claims sharing one schema. Construction validates
// every claim invariant and throws erclaims::Error on the first violation.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Schema schema, Levels diagnosis_levels, Levels group_levels,
          std::vector<Levels> feature_levels, std::vector<Claim> claims);

  std::size_t size() const { return claims_.size(); }
  bool empty() const { return claims_.empty(); }
  const std::vector<Claim>& claims() const { return claims_; }
  const Claim& claim(std::size_t row) const { return claims_[row]; }

  const Schema& schema() const { return schema_; }
  const Levels& diagnosis_levels() const { return diagnosis_levels_; }
  const Levels& group_levels() const { return group_levels_; }
  const Levels& feature_levels(std::size_t column) const { return feature_levels_.at(column); }

  std::optional<std::size_t> feature_index(std::string_view name) const;

  // Row index of a claim id.
  std::optional<std::size_t> row_of(std::int64_t id) const;

  bool all_reviewed() const;

  // Rows in the given order; ids and level dictionaries are preserved.
  Dataset subset(std::span<const std::size_t> rows) const;

  bool operator==(const Dataset& o) const;

 private:
  Schema schema_;
  Levels diagnosis_levels_;
  Levels group_levels_;
  std::vector<Levels> feature_levels_;
  std::vector<Claim> claims_;
  std::unordered_map<std::int64_t, std::size_t> row_by_id_;
};

// Row positions (into Dataset::claims()) of each half of a two-fold split,
// each sorted ascending.
struct FoldSplit {
  std::vector<std::size_t> fold_a;
  std::vector<std::size_t> fold_b;
  std::uint64_t seed = 0;
};

FoldSplit two_fold_split(const Dataset& ds, std::uint64_t seed);

// A categorical column viewed as level names plus one code per claim. Accepts
// "diagnosis", "group", or a categorical feature column.
struct CategoricalColumn {
  std::vector<std::string> levels;
  std::vector<int> codes;
};
CategoricalColumn categorical_column(const Dataset& ds, std::string_view name);

// A numeric column, NaN where missing. Accepts "severity", "billed",
// "cost_avoidance", "car" (cost avoidance over billed), or a numeric feature.
std::vector<double> numeric_column(const Dataset& ds, std::string_view name);

bool is_categorical_column(const Dataset& ds, std::string_view name);

// Names of the fixed leading CSV columns, in order.
inline constexpr std::string_view kFixedColumns[] = {
    "id", "diagnosis", "severity", "group", "billed", "cost_avoidance"};

// Reads the claims CSV. With a schema, header feature names must match it;
// without one, a feature column is numeric when every non-empty cell parses
// as a number and categorical otherwise.
Dataset read_claims_csv(std::istream& in, const std::optional<Schema>& schema = std::nullopt);
Dataset parse_claims_csv(const std::string& path, const std::optional<Schema>& schema = std::nullopt);

void write_claims_csv(std::ostream& out, const Dataset& ds);

// Minimal RFC 4180 helpers shared by every CSV writer in the project.
std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_escape(std::string_view field);

// Shortest round-trip decimal text for a double; empty for NaN.
std::string format_double(double value);
std::optional<double> parse_double(std::string_view text);

}  // namespace erclaims
