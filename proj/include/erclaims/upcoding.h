#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "erclaims/dataset.h"
#include "erclaims/hier_cluster.h"
#include "erclaims/metrics.h"

namespace erclaims::upcoding {

using metrics::SeverityProbVector;

// Severity proportions among the training claims of one cluster.
// Throws EmptyCluster when no training claim falls in it.
SeverityProbVector severity_distribution(const Dataset& train, const cluster::ClusterAssignment& ca,
                                         int cluster_id);

// Where the cross-validated cut comes from: one dendrogram of the full data,
// or a dendrogram rebuilt from each training fold so the held-out fold never
// shapes the clusters it is scored on.
enum class CvDendrogram { kFullData, kTrainingFold };

struct ClusterCountCurve {
  std::vector<cluster::KScore> points;  // score = mean two-fold ordinal AUC
  int chosen_k = 0;
  std::size_t min_cluster_size = 1;
  CvDendrogram source = CvDendrogram::kTrainingFold;
  cluster::Dendrogram dendrogram;  // mean-severity dendrogram of the full data
};

// Scores every k in [k_min, k_max] by two-fold ordinal AUC of the cluster
// severity distributions and picks the best k whose smallest cluster has at
// least min_cluster_size claims. Ties go to the smaller k. Throws NoFeasibleK.
ClusterCountCurve optimize_cluster_count(const Dataset& ds, std::uint64_t seed, int k_min, int k_max,
                                         std::size_t min_cluster_size,
                                         CvDendrogram source = CvDendrogram::kTrainingFold);

enum class Background { kLeaveOneOut, kStratified };

enum class UasWarning { kNone, kLoneClaim, kEmptyBackground };
const char* uas_warning_name(UasWarning w);

// Per-claim scores in dataset row order. Low values are more anomalous.
struct UASResult {
  int k = 0;
  Background background = Background::kLeaveOneOut;
  std::string group_column;  // stratified mode only
  std::vector<std::int64_t> ids;
  std::vector<int> cluster_ids;
  std::vector<double> uas;
  std::vector<UasWarning> warnings;

  std::size_t warning_count() const;
};

// Share of the other claims in the same cluster whose severity is at least
// the claim's own. A claim alone in its cluster scores 1 with a warning.
UASResult compute_uas(const Dataset& ds, const cluster::ClusterAssignment& ca);

// As compute_uas, with the background restricted to same-cluster claims from
// a different group. Throws SingleGroup when the column has one level.
UASResult compute_uas_stratified(const Dataset& ds, const cluster::ClusterAssignment& ca,
                                 std::string_view group_column = "group");

inline constexpr double kHistogramBinWidth = 0.05;
inline constexpr std::size_t kHistogramBins = 20;

struct GroupComparison {
  std::string group_column;
  std::string g1, g2;
  std::size_t n1 = 0, n2 = 0;
  double mean1 = 0.0, mean2 = 0.0;
  metrics::WelchResult welch;
  std::vector<std::size_t> hist1, hist2;  // bins of width 0.05 over [0, 1]
};

// Throws EmptyGroup when either group has no claims (UnknownLevel if the
// level is not in the column at all).
GroupComparison compare_groups(const UASResult& r, const Dataset& ds, std::string_view group_column,
                               std::string_view g1, std::string_view g2);

std::size_t histogram_bin(double score);

void write_uas_csv(std::ostream& out, const UASResult& r);
void write_comparison_csv(std::ostream& out, const GroupComparison& c);
void write_comparison_summary(std::ostream& out, const GroupComparison& c);
void write_cluster_count_csv(std::ostream& out, const ClusterCountCurve& curve);

}  // namespace erclaims::upcoding
