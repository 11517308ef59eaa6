#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "erclaims/dataset.h"
#include "erclaims/forest.h"

namespace erclaims::importance {

struct PermutationScore {
  double increased_mse = 0.0;  // mean / sd of the per-tree differences
  double mean_diff = 0.0;
  double sd_diff = 0.0;
  std::size_t trees_used = 0;  // trees with at least one out-of-bag row
  bool raw_mean = false;       // sd was 0, increased_mse holds the raw mean
};

// For each tree and column, permutes the column among that tree's
// out-of-bag rows and records permuted minus original tree MSE. `train` must
// be the training data the model was fitted on. Throws NoOOBRows.
std::vector<PermutationScore> perm_importance(const forest::ForestModel& model, const Dataset& train,
                                              std::uint64_t seed, int threads = 1);

// Impurity decrease of every split on each column, summed within a tree and
// averaged over trees.
std::vector<double> node_purity_importance(const forest::ForestModel& model);

// Sum of impurity decreases over the splits of one tree.
double tree_purity_decrease(const forest::Tree& tree);

struct ImportanceRow {
  std::string column;
  PermutationScore perm;
  double node_purity = 0.0;
  int rank_mse = 0;  // 1 = most important; ties keep column order
  int rank_purity = 0;
};

std::vector<ImportanceRow> importance_report(const forest::ForestModel& model, const Dataset& train,
                                             std::uint64_t seed, int threads = 1);

void write_importance_csv(std::ostream& out, const std::vector<ImportanceRow>& rows);

}  // namespace erclaims::importance
