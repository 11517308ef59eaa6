#include "erclaims/dataset.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <unordered_set>

#include "erclaims/error.h"
#include "erclaims/random.h"

namespace erclaims {

int Levels::intern(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it != index_.end()) return it->second;
  const int code = static_cast<int>(names_.size());
  names_.emplace_back(name);
  index_.emplace(names_.back(), code);
  return code;
}

std::optional<int> Levels::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

bool same_double(double a, double b) {
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

}  // namespace

bool Claim::operator==(const Claim& o) const {
  if (id != o.id || diagnosis != o.diagnosis || severity != o.severity ||
      group != o.group || billed != o.billed || cost_avoidance != o.cost_avoidance ||
      features.size() != o.features.size()) {
    return false;
  }
  for (std::size_t j = 0; j < features.size(); ++j) {
    if (!same_double(features[j], o.features[j])) return false;
  }
  return true;
}

Dataset::Dataset(Schema schema, Levels diagnosis_levels, Levels group_levels,
                 std::vector<Levels> feature_levels, std::vector<Claim> claims)
    : schema_(std::move(schema)),
      diagnosis_levels_(std::move(diagnosis_levels)),
      group_levels_(std::move(group_levels)),
      feature_levels_(std::move(feature_levels)),
      claims_(std::move(claims)) {
  if (feature_levels_.size() != schema_.size()) {
    throw Error(ErrorKind::kInvalidArgument, "feature level tables do not match schema width");
  }
  row_by_id_.reserve(claims_.size());
  for (std::size_t row = 0; row < claims_.size(); ++row) {
    const Claim& c = claims_[row];
    const std::string where = "claim id " + std::to_string(c.id);
    if (!row_by_id_.emplace(c.id, row).second) {
      throw Error(ErrorKind::kDuplicateId, where + ": duplicate id");
    }
    if (c.severity < kMinSeverity || c.severity > kMaxSeverity) {
      throw Error(ErrorKind::kBadSeverity, where + ": severity outside 1..5");
    }
    if (c.billed < Money()) {
      throw Error(ErrorKind::kNegativeBilled, where + ": billed amount is negative");
    }
    if (c.cost_avoidance && *c.cost_avoidance > c.billed) {
      throw Error(ErrorKind::kCostAboveBilled, where + ": cost avoidance exceeds billed amount");
    }
    if (c.features.size() != schema_.size()) {
      throw Error(ErrorKind::kBadRow, where + ": feature count does not match schema");
    }
    if (c.diagnosis < 0 || static_cast<std::size_t>(c.diagnosis) >= diagnosis_levels_.size() ||
        c.group < 0 || static_cast<std::size_t>(c.group) >= group_levels_.size()) {
      throw Error(ErrorKind::kBadRow, where + ": level code out of range");
    }
    for (std::size_t j = 0; j < schema_.size(); ++j) {
      if (schema_[j].kind != ColumnKind::kCategorical) continue;
      const double v = c.features[j];
      if (!(v >= 0) || v != std::floor(v) || v >= static_cast<double>(feature_levels_[j].size())) {
        throw Error(ErrorKind::kBadRow, where + ": bad level code in column " + schema_[j].name);
      }
    }
  }
}

std::optional<std::size_t> Dataset::feature_index(std::string_view name) const {
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    if (schema_[j].name == name) return j;
  }
  return std::nullopt;
}

std::optional<std::size_t> Dataset::row_of(std::int64_t id) const {
  auto it = row_by_id_.find(id);
  if (it == row_by_id_.end()) return std::nullopt;
  return it->second;
}

bool Dataset::all_reviewed() const {
  return std::all_of(claims_.begin(), claims_.end(),
                     [](const Claim& c) { return c.cost_avoidance.has_value(); });
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  std::vector<Claim> picked;
  picked.reserve(rows.size());
  for (std::size_t r : rows) picked.push_back(claims_.at(r));
  return Dataset(schema_, diagnosis_levels_, group_levels_, feature_levels_, std::move(picked));
}

bool Dataset::operator==(const Dataset& o) const {
  return schema_ == o.schema_ && diagnosis_levels_ == o.diagnosis_levels_ &&
         group_levels_ == o.group_levels_ && feature_levels_ == o.feature_levels_ &&
         claims_ == o.claims_;
}

FoldSplit two_fold_split(const Dataset& ds, std::uint64_t seed) {
  const std::size_t n = ds.size();
  if (n < 2) {
    throw Error(ErrorKind::kTooFewClaims, "two-fold split needs at least 2 claims, got " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  FoldSplit split;
  split.seed = seed;
  split.fold_a.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n / 2));
  split.fold_b.assign(order.begin() + static_cast<std::ptrdiff_t>(n / 2), order.end());
  std::sort(split.fold_a.begin(), split.fold_a.end());
  std::sort(split.fold_b.begin(), split.fold_b.end());
  return split;
}

bool is_categorical_column(const Dataset& ds, std::string_view name) {
  if (name == "diagnosis" || name == "group") return true;
  auto j = ds.feature_index(name);
  return j && ds.schema()[*j].kind == ColumnKind::kCategorical;
}

CategoricalColumn categorical_column(const Dataset& ds, std::string_view name) {
  CategoricalColumn col;
  col.codes.reserve(ds.size());
  if (name == "diagnosis" || name == "group") {
    const bool diag = name == "diagnosis";
    col.levels = diag ? ds.diagnosis_levels().names() : ds.group_levels().names();
    for (const Claim& c : ds.claims()) col.codes.push_back(diag ? c.diagnosis : c.group);
    return col;
  }
  auto j = ds.feature_index(name);
  if (!j || ds.schema()[*j].kind != ColumnKind::kCategorical) {
    throw Error(ErrorKind::kMissingColumn, "no categorical column named '" + std::string(name) + "'");
  }
  col.levels = ds.feature_levels(*j).names();
  for (const Claim& c : ds.claims()) col.codes.push_back(static_cast<int>(c.features[*j]));
  return col;
}

std::vector<double> numeric_column(const Dataset& ds, std::string_view name) {
  std::vector<double> out;
  out.reserve(ds.size());
  const double nan = std::nan("");
  if (name == "severity") {
    for (const Claim& c : ds.claims()) out.push_back(c.severity);
  } else if (name == "billed") {
    for (const Claim& c : ds.claims()) out.push_back(c.billed.to_units());
  } else if (name == "cost_avoidance") {
    for (const Claim& c : ds.claims()) out.push_back(c.cost_avoidance ? c.cost_avoidance->to_units() : nan);
  } else if (name == "car") {
    for (const Claim& c : ds.claims()) {
      const bool ok = c.cost_avoidance && c.billed > Money();
      out.push_back(ok ? static_cast<double>(c.cost_avoidance->cents()) / static_cast<double>(c.billed.cents())
                       : nan);
    }
  } else {
    auto j = ds.feature_index(name);
    if (!j || ds.schema()[*j].kind != ColumnKind::kNumeric) {
      throw Error(ErrorKind::kMissingColumn, "no numeric column named '" + std::string(name) + "'");
    }
    for (const Claim& c : ds.claims()) out.push_back(c.features[*j]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_double(std::string_view text) {
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

namespace {

std::string row_context(std::size_t row) {
  return "row " + std::to_string(row) + " (line " + std::to_string(row + 1) + ")";
}

}  // namespace

Dataset read_claims_csv(std::istream& in, const std::optional<Schema>& schema) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorKind::kMissingColumn, "missing header row");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv_line(line);
  const std::size_t n_fixed = std::size(kFixedColumns);
  for (std::size_t c = 0; c < n_fixed; ++c) {
    if (c >= header.size() || header[c] != kFixedColumns[c]) {
      throw Error(ErrorKind::kMissingColumn,
                  "header column " + std::to_string(c + 1) + " must be '" +
                      std::string(kFixedColumns[c]) + "'");
    }
  }
  std::vector<std::string> feature_names(header.begin() + static_cast<std::ptrdiff_t>(n_fixed), header.end());
  {
    std::unordered_set<std::string> seen(header.begin(), header.begin() + static_cast<std::ptrdiff_t>(n_fixed));
    for (const auto& name : feature_names) {
      if (name.empty() || !seen.insert(name).second) {
        throw Error(ErrorKind::kBadRow, "header: empty or duplicate column name '" + name + "'");
      }
    }
  }
  if (schema) {
    for (const auto& spec : *schema) {
      if (std::find(feature_names.begin(), feature_names.end(), spec.name) == feature_names.end()) {
        throw Error(ErrorKind::kMissingColumn, "header lacks schema column '" + spec.name + "'");
      }
    }
    if (schema->size() != feature_names.size()) {
      for (const auto& name : feature_names) {
        const bool known = std::any_of(schema->begin(), schema->end(),
                                       [&](const ColumnSpec& s) { return s.name == name; });
        if (!known) {
          throw Error(ErrorKind::kMissingColumn, "column '" + name + "' is not in the schema");
        }
      }
    }
  }

  // Raw cells first; feature kinds may need the whole column to infer.
  std::vector<std::vector<std::string>> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorKind::kBadRow, row_context(row) + ": expected " + std::to_string(header.size()) +
                                          " fields, found " + std::to_string(fields.size()));
    }
    rows.push_back(std::move(fields));
  }

  Schema resolved;
  resolved.reserve(feature_names.size());
  for (std::size_t j = 0; j < feature_names.size(); ++j) {
    ColumnSpec spec{feature_names[j], ColumnKind::kNumeric};
    if (schema) {
      spec = *std::find_if(schema->begin(), schema->end(),
                           [&](const ColumnSpec& s) { return s.name == feature_names[j]; });
    } else {
      for (const auto& r : rows) {
        const std::string& cell = r[n_fixed + j];
        if (!cell.empty() && !parse_double(cell)) {
          spec.kind = ColumnKind::kCategorical;
          break;
        }
      }
    }
    resolved.push_back(spec);
  }

  Levels diagnosis_levels;
  Levels group_levels;
  std::vector<Levels> feature_levels(resolved.size());
  std::vector<Claim> claims;
  claims.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& f = rows[r];
    const std::string ctx = row_context(r + 1);
    Claim c;
    auto id = parse_double(f[0]);
    if (!id || *id != std::floor(*id) || std::fabs(*id) > 9.0e15) {
      throw Error(ErrorKind::kBadNumber, ctx + ": id '" + f[0] + "' is not an integer");
    }
    c.id = static_cast<std::int64_t>(*id);
    c.diagnosis = diagnosis_levels.intern(f[1]);
    auto sev = parse_double(f[2]);
    if (!sev || *sev != std::floor(*sev)) {
      throw Error(ErrorKind::kBadNumber, ctx + ": severity '" + f[2] + "' is not an integer");
    }
    if (*sev < kMinSeverity || *sev > kMaxSeverity) {
      throw Error(ErrorKind::kBadSeverity, ctx + ": severity " + f[2] + " outside 1..5");
    }
    c.severity = static_cast<int>(*sev);
    c.group = group_levels.intern(f[3]);
    auto billed = Money::parse(f[4]);
    if (!billed) throw Error(ErrorKind::kBadNumber, ctx + ": billed '" + f[4] + "' is not a number");
    if (*billed < Money()) throw Error(ErrorKind::kNegativeBilled, ctx + ": billed " + f[4] + " is negative");
    c.billed = *billed;
    if (!f[5].empty()) {
      auto ca = Money::parse(f[5]);
      if (!ca) throw Error(ErrorKind::kBadNumber, ctx + ": cost_avoidance '" + f[5] + "' is not a number");
      if (*ca > c.billed) {
        throw Error(ErrorKind::kCostAboveBilled, ctx + ": cost_avoidance " + f[5] + " exceeds billed " + f[4]);
      }
      c.cost_avoidance = *ca;
    }
    c.features.resize(resolved.size());
    for (std::size_t j = 0; j < resolved.size(); ++j) {
      const std::string& cell = f[n_fixed + j];
      if (resolved[j].kind == ColumnKind::kCategorical) {
        c.features[j] = feature_levels[j].intern(cell);
      } else if (cell.empty()) {
        c.features[j] = std::nan("");
      } else {
        auto v = parse_double(cell);
        if (!v) {
          throw Error(ErrorKind::kBadNumber, ctx + ": column " + resolved[j].name + " value '" + cell +
                                                 "' is not a number");
        }
        c.features[j] = *v;
      }
    }
    claims.push_back(std::move(c));
  }
  return Dataset(std::move(resolved), std::move(diagnosis_levels), std::move(group_levels),
                 std::move(feature_levels), std::move(claims));
}

Dataset parse_claims_csv(const std::string& path, const std::optional<Schema>& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  try {
    return read_claims_csv(in, schema);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

void write_claims_csv(std::ostream& out, const Dataset& ds) {
  out << "id,diagnosis,severity,group,billed,cost_avoidance";
  for (const auto& spec : ds.schema()) out << ',' << csv_escape(spec.name);
  out << '\n';
  for (const Claim& c : ds.claims()) {
    out << c.id << ',' << csv_escape(ds.diagnosis_levels().name(c.diagnosis)) << ',' << c.severity << ','
        << csv_escape(ds.group_levels().name(c.group)) << ',' << c.billed.to_string() << ',';
    if (c.cost_avoidance) out << c.cost_avoidance->to_string();
    for (std::size_t j = 0; j < ds.schema().size(); ++j) {
      out << ',';
      if (ds.schema()[j].kind == ColumnKind::kCategorical) {
        out << csv_escape(ds.feature_levels(j).name(static_cast<int>(c.features[j])));
      } else {
        out << format_double(c.features[j]);
      }
    }
    out << '\n';
  }
}

}  // namespace erclaims
