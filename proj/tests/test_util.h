#pragma once

#include <optional>
#include <string>
#include <vector>

#include "erclaims/dataset.h"

namespace testutil {

struct Row {
  std::string diagnosis;
  int severity = 1;
  std::string group = "g";
  double billed = 100.0;
  std::optional<double> cost_avoidance = std::nullopt;
  std::vector<double> features = {};  // numeric features only
};

// Dataset with ids 1..n and numeric feature columns named x1, x2, ...
inline erclaims::Dataset make_dataset(const std::vector<Row>& rows, std::size_t n_features = 0) {
  using namespace erclaims;
  Schema schema;
  for (std::size_t j = 0; j < n_features; ++j) schema.push_back({"x" + std::to_string(j + 1), ColumnKind::kNumeric});
  Levels diag, group;
  std::vector<Claim> claims;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Claim c;
    c.id = static_cast<std::int64_t>(i + 1);
    c.diagnosis = diag.intern(rows[i].diagnosis);
    c.severity = rows[i].severity;
    c.group = group.intern(rows[i].group);
    c.billed = Money::from_units(rows[i].billed);
    if (rows[i].cost_avoidance) c.cost_avoidance = Money::from_units(*rows[i].cost_avoidance);
    c.features = rows[i].features;
    c.features.resize(n_features, 0.0);
    claims.push_back(c);
  }
  return Dataset(schema, diag, group, std::vector<Levels>(n_features), claims);
}

// Claims for diagnosis codes with the given severities.
inline erclaims::Dataset severities_dataset(const std::vector<std::pair<std::string, std::vector<int>>>& codes) {
  std::vector<Row> rows;
  for (const auto& [code, sevs] : codes) {
    for (int s : sevs) rows.push_back(Row{code, s});
  }
  return make_dataset(rows);
}

}  // namespace testutil
