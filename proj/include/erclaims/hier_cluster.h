#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "erclaims/dataset.h"

namespace erclaims::cluster {

// Symmetric matrix of level-to-level dissimilarities with a zero diagonal.
class DissimilarityMatrix {
 public:
  DissimilarityMatrix() = default;
  explicit DissimilarityMatrix(std::vector<std::string> levels);

  std::size_t size() const { return levels_.size(); }
  const std::vector<std::string>& levels() const { return levels_; }

  double operator()(std::size_t a, std::size_t b) const { return values_[a * levels_.size() + b]; }
  // Sets both (a, b) and (b, a).
  void set(std::size_t a, std::size_t b, double value);

 private:
  std::vector<std::string> levels_;
  std::vector<double> values_;
};

double mean_severity(const Dataset& ds, std::string_view diagnosis);

// |mean severity(d1) - mean severity(d2)| over the diagnosis levels.
DissimilarityMatrix mean_severity_dissimilarity(const Dataset& ds);

// |t| for equality of two level means in the one-way ANOVA of `target` on
// `column`, using the pooled residual variance of the full model.
DissimilarityMatrix anova_t_dissimilarity(const Dataset& ds, std::string_view column, std::string_view target);

// Same, over raw level codes and target values.
DissimilarityMatrix anova_t_dissimilarity(const std::vector<std::string>& levels, const std::vector<int>& codes,
                                          const std::vector<double>& values);

// |mean(target|d1) - mean(target|d2)|; the fallback when the pooled variance
// is zero.
DissimilarityMatrix mean_distance_dissimilarity(const std::vector<std::string>& levels,
                                                const std::vector<int>& codes, const std::vector<double>& values);

struct Merge {
  std::size_t left = 0;   // node id: leaves are 0..L-1, merge m creates node L+m
  std::size_t right = 0;
  double height = 0.0;
  std::size_t size = 0;  // leaves under the new node
};

struct Dendrogram {
  std::vector<std::string> leaves;
  std::vector<Merge> merges;
};

// Average-linkage (UPGMA) agglomeration. Equal-height candidates are resolved
// by the smallest (min leaf index, min leaf index) pair of the two clusters.
Dendrogram build_dendrogram(const DissimilarityMatrix& m);

void write_dendrogram_json(std::ostream& out, const Dendrogram& dg);

// Maps each level of one categorical column to a cluster id in 1..k.
class ClusterAssignment {
 public:
  ClusterAssignment() = default;
  ClusterAssignment(std::string column, int k, std::vector<std::string> levels, std::vector<int> cluster_of);

  const std::string& column() const { return column_; }
  int k() const { return k_; }
  const std::vector<std::string>& levels() const { return levels_; }
  const std::vector<int>& cluster_of() const { return cluster_of_; }

  // Throws UnassignedLevel for a level outside the assignment.
  int cluster(std::string_view level) const;
  bool contains(std::string_view level) const { return index_.count(std::string(level)) > 0; }

  // Per-cluster means of a target (index id-1) and the cluster used for
  // levels that never appeared in training: the one whose mean is nearest the
  // overall training mean.
  void set_target_means(std::vector<double> cluster_means, double overall_mean);
  const std::vector<double>& cluster_means() const { return cluster_means_; }
  int fallback_cluster() const { return fallback_cluster_; }
  int cluster_or_fallback(std::string_view level) const;

  // Cluster id per claim of ds, via its column. Throws UnassignedLevel.
  std::vector<int> clusters_for(const Dataset& ds) const;

 private:
  std::string column_;
  int k_ = 0;
  std::vector<std::string> levels_;
  std::vector<int> cluster_of_;
  std::unordered_map<std::string, int> index_;
  std::vector<double> cluster_means_;
  int fallback_cluster_ = 1;
};

// Undoes the last k-1 merges. Cluster ids follow each cluster's minimum leaf
// index. Throws BadK unless 1 <= k <= leaves.
ClusterAssignment cut_dendrogram(const Dendrogram& dg, int k, std::string column = "diagnosis");

void write_assignment_csv(std::ostream& out, const ClusterAssignment& ca);
ClusterAssignment read_assignment_csv(std::istream& in, std::string column = "diagnosis");

struct ClusterStats {
  int cluster_id = 0;
  std::size_t count = 0;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
};

// Box-plot statistics of a numeric `value_column` per cluster (quantiles by
// linear interpolation between order statistics). Empty clusters get count 0
// and NaN statistics.
std::vector<ClusterStats> cluster_summary(const Dataset& ds, const ClusterAssignment& ca,
                                          std::string_view value_column);

// Quantile of sorted data, linear interpolation (R type 7).
double quantile_sorted(const std::vector<double>& sorted, double q);

struct KScore {
  int k = 0;
  double score = 0.0;  // mean two-fold CV score
  std::size_t min_cluster_size = 0;  // smallest cluster over the full data
};

struct LevelClustering {
  ClusterAssignment assignment;
  Dendrogram dendrogram;
  std::vector<KScore> curve;
  bool mean_distance_fallback = false;
};

// Clusters the levels of a categorical column by the ANOVA t metric against a
// numeric target and picks k in [1, k_max] maximizing two-fold CV R^2 of the
// cluster-mean predictor (ties go to the smaller k).
LevelClustering cluster_levels_by_target(const Dataset& ds, std::string_view column, std::string_view target,
                                         std::uint64_t seed, int k_max);

}  // namespace erclaims::cluster
