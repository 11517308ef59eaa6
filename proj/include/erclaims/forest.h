#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "erclaims/dataset.h"
#include "erclaims/hier_cluster.h"
#include "erclaims/random.h"

namespace erclaims::forest {

// Cost avoidance over billed. Throws Unreviewed or ZeroBilled.
double compute_car(const Claim& claim);

// Dense training matrix: row-major values, one kind per column. Categorical
// cells hold level codes 0..n_levels-1 (negative for a level never seen in
// training).
struct Table {
  std::size_t rows = 0;
  std::vector<std::string> names;
  std::vector<ColumnKind> kinds;
  std::vector<int> n_levels;  // categorical columns only, 0 otherwise
  std::vector<double> x;
  std::vector<double> y;  // target, may be empty at prediction time

  std::size_t cols() const { return names.size(); }
  double at(std::size_t row, std::size_t col) const { return x[row * names.size() + col]; }
  const double* row(std::size_t r) const { return x.data() + r * names.size(); }
};

enum class LeafKind { kMean, kLinear };

struct TreeConfig {
  std::size_t mtry = 1;      // columns eligible per node
  std::size_t min_leaf = 5;  // rows per child
  int max_depth = 0;         // 0 = unlimited
  LeafKind leaf = LeafKind::kMean;
};

struct Node {
  int column = -1;  // -1 for a leaf
  double threshold = 0.0;  // numeric: x < threshold goes left
  // Categorical: 1 when the level goes left. Codes outside the vector (and
  // negative codes) follow unseen_left.
  std::vector<char> left_levels;
  bool unseen_left = false;
  int left = -1, right = -1;
  double value = 0.0;  // mean target of the node's training rows
  std::size_t count = 0;
  double impurity = 0.0;  // sum of squared deviations from value
  // Linear leaf: intercept then one slope per numeric column in table order.
  std::vector<double> coef;
};

struct Tree {
  std::vector<Node> nodes;  // nodes[0] is the root

  double predict(const Table& t, const double* row) const;
  std::size_t leaf_index(const double* row) const;
};

// k distinct column indices out of p, sorted ascending. Uses the rng the same
// way fit_tree does at every node.
std::vector<std::size_t> sample_columns(Rng& rng, std::size_t p, std::size_t k);

// Greedy binary tree on the given rows (repeats allowed, as from a bootstrap).
// Throws EmptyTrain when rows is empty.
Tree fit_tree(const Table& t, std::span<const std::size_t> rows, const TreeConfig& cfg, Rng& rng);

struct ForestConfig {
  int n_trees = 200;
  std::size_t mtry = 0;  // 0 = ceil(p/3)
  std::size_t min_leaf = 5;
  int max_depth = 0;
  LeafKind leaf = LeafKind::kMean;
  bool bootstrap = true;
  std::uint64_t seed = 1;
  // Columns used; empty = billed, severity, diagnosis, group and every
  // feature column.
  std::vector<std::string> features;
  // Replace categorical levels by clusters of levels before fitting.
  bool reduce_categoricals = true;
  int cluster_k_max = 20;
  std::string cluster_target = "car";
};

// How one model column is derived from a Dataset.
struct EncodedColumn {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;
  double median = 0.0;  // numeric: stands in for missing values
  bool reduced = false;
  cluster::ClusterAssignment clusters;  // when reduced
  bool mean_distance_fallback = false;
  std::vector<std::string> levels;  // categorical, not reduced
};

struct ForestModel {
  ForestConfig config;
  std::uint64_t fingerprint = 0;
  Schema schema;
  std::vector<EncodedColumn> columns;
  std::vector<Tree> trees;
  std::vector<std::int64_t> train_ids;
  std::vector<std::vector<std::uint32_t>> inbag;  // per tree, per training row

  std::size_t oob_count(std::size_t tree) const;
};

// Hash of the claim columns and the feature schema.
std::uint64_t schema_fingerprint(const Schema& schema);

// Throws SchemaMismatch when ds does not have the model's schema.
Table encode(const ForestModel& model, const Dataset& ds, bool with_target);

// threads <= 0 uses the hardware concurrency. Results do not depend on it.
ForestModel fit_forest(const Dataset& train, const ForestConfig& cfg, int threads = 1);

struct CARPrediction {
  std::vector<std::int64_t> ids;
  std::vector<double> car;       // clamped to at most 1
  std::vector<Money> ca;         // car times billed, to the cent
};

CARPrediction predict_car(const ForestModel& model, const Dataset& ds, int threads = 1);

// Tree average without the clamp, for a single encoded row.
double predict_row(const ForestModel& model, const Table& t, std::size_t row);

struct OobResult {
  double mse = 0.0;
  std::size_t rows_used = 0;
  std::size_t rows_skipped = 0;  // rows in bag for every tree
};

// Mean squared error of out-of-bag averaged predictions. `train` must be the
// training data in its original row order. Throws NoOOBRows.
OobResult oob_mse(const ForestModel& model, const Dataset& train);

void save_forest(std::ostream& out, const ForestModel& model);
ForestModel load_forest(std::istream& in);  // throws BadModelFile
ForestModel load_forest_file(const std::string& path);

}  // namespace erclaims::forest
