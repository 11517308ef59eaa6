#include "erclaims/upcoding.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "erclaims/error.h"

namespace erclaims::upcoding {

using cluster::ClusterAssignment;

namespace {

using SeverityCounts = std::array<std::size_t, kNumSeverities>;

std::size_t sev_index(int severity) { return static_cast<std::size_t>(severity - kMinSeverity); }

SeverityProbVector to_probs(const SeverityCounts& counts) {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  SeverityProbVector out;
  for (std::size_t s = 0; s < counts.size(); ++s) {
    out.p[s] = static_cast<double>(counts[s]) / static_cast<double>(total);
  }
  return out;
}

// Mean ordinal AUC of fold `test` scored by distributions fitted on `train`.
double fold_auc(const std::vector<int>& cluster_of_row, int k, const Dataset& ds,
                const std::vector<std::size_t>& train, const std::vector<std::size_t>& test) {
  std::vector<SeverityCounts> counts(static_cast<std::size_t>(k), SeverityCounts{});
  SeverityCounts marginal{};
  for (auto row : train) {
    const std::size_t s = sev_index(ds.claim(row).severity);
    if (cluster_of_row[row] >= 1) ++counts[static_cast<std::size_t>(cluster_of_row[row] - 1)][s];
    ++marginal[s];
  }
  const SeverityProbVector fallback = to_probs(marginal);
  std::vector<SeverityProbVector> dist(counts.size());
  std::vector<bool> seen(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    std::size_t total = 0;
    for (auto v : counts[c]) total += v;
    seen[c] = total > 0;
    if (seen[c]) dist[c] = to_probs(counts[c]);
  }
  std::vector<SeverityProbVector> preds;
  std::vector<int> truth;
  preds.reserve(test.size());
  truth.reserve(test.size());
  for (auto row : test) {
    const int id = cluster_of_row[row];
    const bool known = id >= 1 && seen[static_cast<std::size_t>(id - 1)];
    preds.push_back(known ? dist[static_cast<std::size_t>(id - 1)] : fallback);
    truth.push_back(ds.claim(row).severity);
  }
  return metrics::ordinal_auc(preds, truth);
}

std::vector<int> group_codes(const Dataset& ds, std::string_view group_column, std::size_t* n_levels) {
  CategoricalColumn col = categorical_column(ds, group_column);
  *n_levels = col.levels.size();
  return std::move(col.codes);
}

}  // namespace

SeverityProbVector severity_distribution(const Dataset& train, const ClusterAssignment& ca, int cluster_id) {
  const std::vector<int> clusters = ca.clusters_for(train);
  SeverityCounts counts{};
  std::size_t total = 0;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    if (clusters[i] != cluster_id) continue;
    ++counts[sev_index(train.claim(i).severity)];
    ++total;
  }
  if (total == 0) {
    throw Error(ErrorKind::kEmptyCluster, "cluster " + std::to_string(cluster_id) + " has no training claims");
  }
  return to_probs(counts);
}

namespace {

// Mean-severity dendrogram over the diagnosis levels present in `rows`.
// level_of_code maps a diagnosis code to its leaf index (-1 when absent).
cluster::Dendrogram fold_dendrogram(const Dataset& ds, const std::vector<std::size_t>& rows,
                                    std::vector<int>* leaf_of_code) {
  const std::size_t n_codes = ds.diagnosis_levels().size();
  std::vector<double> sum(n_codes, 0.0);
  std::vector<std::size_t> count(n_codes, 0);
  for (auto row : rows) {
    const auto d = static_cast<std::size_t>(ds.claim(row).diagnosis);
    sum[d] += ds.claim(row).severity;
    ++count[d];
  }
  leaf_of_code->assign(n_codes, -1);
  std::vector<std::string> names;
  std::vector<double> mu;
  for (std::size_t d = 0; d < n_codes; ++d) {
    if (count[d] == 0) continue;
    (*leaf_of_code)[d] = static_cast<int>(names.size());
    names.push_back(ds.diagnosis_levels().name(static_cast<int>(d)));
    mu.push_back(sum[d] / static_cast<double>(count[d]));
  }
  cluster::DissimilarityMatrix m(names);
  for (std::size_t a = 0; a < mu.size(); ++a)
    for (std::size_t b = a + 1; b < mu.size(); ++b) m.set(a, b, std::fabs(mu[a] - mu[b]));
  return cluster::build_dendrogram(m);
}

// Cluster id per row under a fold dendrogram cut at k; 0 for codes the fold
// never saw (scored with the fold marginal).
std::vector<int> fold_clusters(const Dataset& ds, const cluster::Dendrogram& dg, const std::vector<int>& leaf_of_code,
                               int k) {
  const int k_fold = std::min<int>(k, static_cast<int>(dg.leaves.size()));
  const ClusterAssignment ca = cluster::cut_dendrogram(dg, k_fold);
  std::vector<int> out(ds.size(), 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int leaf = leaf_of_code[static_cast<std::size_t>(ds.claim(i).diagnosis)];
    if (leaf >= 0) out[i] = ca.cluster_of()[static_cast<std::size_t>(leaf)];
  }
  return out;
}

}  // namespace

ClusterCountCurve optimize_cluster_count(const Dataset& ds, std::uint64_t seed, int k_min, int k_max,
                                         std::size_t min_cluster_size, CvDendrogram source) {
  if (ds.empty()) throw Error(ErrorKind::kEmptyDataset, "no claims to cluster");
  ClusterCountCurve out;
  out.min_cluster_size = min_cluster_size;
  out.source = source;
  out.dendrogram = cluster::build_dendrogram(cluster::mean_severity_dissimilarity(ds));
  const int n_levels = static_cast<int>(out.dendrogram.leaves.size());
  if (k_min < 1 || k_max > n_levels || k_min > k_max) {
    throw Error(ErrorKind::kBadK, "k range [" + std::to_string(k_min) + ", " + std::to_string(k_max) +
                                      "] is outside 1.." + std::to_string(n_levels));
  }
  const FoldSplit split = two_fold_split(ds, seed);
  std::vector<int> leaves_a, leaves_b;
  cluster::Dendrogram dg_a, dg_b;
  if (source == CvDendrogram::kTrainingFold) {
    dg_a = fold_dendrogram(ds, split.fold_a, &leaves_a);
    dg_b = fold_dendrogram(ds, split.fold_b, &leaves_b);
  }

  double best = -std::numeric_limits<double>::infinity();
  for (int k = k_min; k <= k_max; ++k) {
    const ClusterAssignment ca = cluster::cut_dendrogram(out.dendrogram, k);
    const std::vector<int> cluster_of_row = ca.clusters_for(ds);
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (int c : cluster_of_row) ++sizes[static_cast<std::size_t>(c - 1)];
    double auc = 0.0;
    if (source == CvDendrogram::kFullData) {
      auc = 0.5 * (fold_auc(cluster_of_row, k, ds, split.fold_a, split.fold_b) +
                   fold_auc(cluster_of_row, k, ds, split.fold_b, split.fold_a));
    } else {
      auc = 0.5 * (fold_auc(fold_clusters(ds, dg_a, leaves_a, k), k, ds, split.fold_a, split.fold_b) +
                   fold_auc(fold_clusters(ds, dg_b, leaves_b, k), k, ds, split.fold_b, split.fold_a));
    }
    const std::size_t smallest = *std::min_element(sizes.begin(), sizes.end());
    out.points.push_back(cluster::KScore{k, auc, smallest});
    if (smallest >= min_cluster_size && auc > best) {
      best = auc;
      out.chosen_k = k;
    }
  }
  if (out.chosen_k == 0) {
    throw Error(ErrorKind::kNoFeasibleK,
                "no k in range keeps every cluster at >= " + std::to_string(min_cluster_size) + " claims");
  }
  return out;
}

const char* uas_warning_name(UasWarning w) {
  switch (w) {
    case UasWarning::kNone: return "";
    case UasWarning::kLoneClaim: return "LoneClaim";
    case UasWarning::kEmptyBackground: return "EmptyBackground";
  }
  return "";
}

std::size_t UASResult::warning_count() const {
  return static_cast<std::size_t>(
      std::count_if(warnings.begin(), warnings.end(), [](UasWarning w) { return w != UasWarning::kNone; }));
}

UASResult compute_uas(const Dataset& ds, const ClusterAssignment& ca) {
  UASResult r;
  r.k = ca.k();
  r.cluster_ids = ca.clusters_for(ds);
  // at_least[c][s]: claims in cluster c with severity >= s.
  std::vector<SeverityCounts> at_least(static_cast<std::size_t>(ca.k()), SeverityCounts{});
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto& counts = at_least[static_cast<std::size_t>(r.cluster_ids[i] - 1)];
    for (std::size_t s = 0; s <= sev_index(ds.claim(i).severity); ++s) ++counts[s];
  }
  r.ids.reserve(ds.size());
  r.uas.reserve(ds.size());
  r.warnings.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& counts = at_least[static_cast<std::size_t>(r.cluster_ids[i] - 1)];
    const std::size_t background = counts[0] - 1;
    const std::size_t numerator = counts[sev_index(ds.claim(i).severity)] - 1;
    r.ids.push_back(ds.claim(i).id);
    if (background == 0) {
      r.uas.push_back(1.0);
      r.warnings.push_back(UasWarning::kLoneClaim);
    } else {
      r.uas.push_back(static_cast<double>(numerator) / static_cast<double>(background));
      r.warnings.push_back(UasWarning::kNone);
    }
  }
  return r;
}

UASResult compute_uas_stratified(const Dataset& ds, const ClusterAssignment& ca, std::string_view group_column) {
  std::size_t n_groups = 0;
  const std::vector<int> groups = group_codes(ds, group_column, &n_groups);
  if (n_groups < 2) {
    throw Error(ErrorKind::kSingleGroup,
                "column '" + std::string(group_column) + "' needs at least 2 groups for a stratified background");
  }
  UASResult r;
  r.k = ca.k();
  r.background = Background::kStratified;
  r.group_column = std::string(group_column);
  r.cluster_ids = ca.clusters_for(ds);
  const std::size_t k = static_cast<std::size_t>(ca.k());
  std::vector<SeverityCounts> in_cluster(k, SeverityCounts{});
  std::vector<SeverityCounts> in_cell(k * n_groups, SeverityCounts{});
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto c = static_cast<std::size_t>(r.cluster_ids[i] - 1);
    const auto g = static_cast<std::size_t>(groups[i]);
    for (std::size_t s = 0; s <= sev_index(ds.claim(i).severity); ++s) {
      ++in_cluster[c][s];
      ++in_cell[c * n_groups + g][s];
    }
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto c = static_cast<std::size_t>(r.cluster_ids[i] - 1);
    const auto& all = in_cluster[c];
    const auto& own = in_cell[c * n_groups + static_cast<std::size_t>(groups[i])];
    const std::size_t s = sev_index(ds.claim(i).severity);
    const std::size_t background = all[0] - own[0];
    r.ids.push_back(ds.claim(i).id);
    if (background == 0) {
      r.uas.push_back(1.0);
      r.warnings.push_back(UasWarning::kEmptyBackground);
    } else {
      r.uas.push_back(static_cast<double>(all[s] - own[s]) / static_cast<double>(background));
      r.warnings.push_back(UasWarning::kNone);
    }
  }
  return r;
}

std::size_t histogram_bin(double score) {
  // The small offset keeps scores on a bin edge (e.g. 0.15) in the upper bin.
  const double scaled = std::floor(score / kHistogramBinWidth + 1e-9);
  if (!(scaled > 0.0)) return 0;
  return std::min(static_cast<std::size_t>(scaled), kHistogramBins - 1);
}

GroupComparison compare_groups(const UASResult& r, const Dataset& ds, std::string_view group_column,
                               std::string_view g1, std::string_view g2) {
  if (r.uas.size() != ds.size()) {
    throw Error(ErrorKind::kInvalidArgument, "score count does not match the dataset");
  }
  const CategoricalColumn col = categorical_column(ds, group_column);
  auto code_of = [&](std::string_view name) {
    const auto it = std::find(col.levels.begin(), col.levels.end(), name);
    if (it == col.levels.end()) {
      throw Error(ErrorKind::kEmptyGroup, "group '" + std::string(name) + "' has no claims");
    }
    return static_cast<int>(it - col.levels.begin());
  };
  const int c1 = code_of(g1);
  const int c2 = code_of(g2);
  GroupComparison out;
  out.group_column = std::string(group_column);
  out.g1 = std::string(g1);
  out.g2 = std::string(g2);
  out.hist1.assign(kHistogramBins, 0);
  out.hist2.assign(kHistogramBins, 0);
  std::vector<double> a, b;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (col.codes[i] == c1) {
      a.push_back(r.uas[i]);
      ++out.hist1[histogram_bin(r.uas[i])];
    } else if (col.codes[i] == c2) {
      b.push_back(r.uas[i]);
      ++out.hist2[histogram_bin(r.uas[i])];
    }
  }
  if (a.empty() || b.empty()) {
    throw Error(ErrorKind::kEmptyGroup, "group '" + std::string(a.empty() ? g1 : g2) + "' has no claims");
  }
  out.n1 = a.size();
  out.n2 = b.size();
  double sum = 0.0;
  for (double v : a) sum += v;
  out.mean1 = sum / static_cast<double>(a.size());
  sum = 0.0;
  for (double v : b) sum += v;
  out.mean2 = sum / static_cast<double>(b.size());
  if (a.size() >= 2 && b.size() >= 2) out.welch = metrics::welch_t_test(a, b);
  else out.welch = metrics::WelchResult{0.0, 0.0, std::numeric_limits<double>::quiet_NaN(), false};
  return out;
}

void write_uas_csv(std::ostream& out, const UASResult& r) {
  out << "id,cluster_id,uas,warning\n";
  for (std::size_t i = 0; i < r.ids.size(); ++i) {
    out << r.ids[i] << ',' << r.cluster_ids[i] << ',' << format_double(r.uas[i]) << ','
        << uas_warning_name(r.warnings[i]) << '\n';
  }
}

void write_comparison_csv(std::ostream& out, const GroupComparison& c) {
  out << "group,bin_lo,bin_hi,count\n";
  auto emit = [&](const std::string& group, const std::vector<std::size_t>& hist) {
    for (std::size_t b = 0; b < hist.size(); ++b) {
      out << csv_escape(group) << ',' << format_double(static_cast<double>(b) * kHistogramBinWidth) << ','
          << format_double(static_cast<double>(b + 1) * kHistogramBinWidth) << ',' << hist[b] << '\n';
    }
  };
  emit(c.g1, c.hist1);
  emit(c.g2, c.hist2);
}

void write_comparison_summary(std::ostream& out, const GroupComparison& c) {
  out << "group_column: " << c.group_column << '\n'
      << "group " << c.g1 << ": n=" << c.n1 << " mean_uas=" << format_double(c.mean1) << '\n'
      << "group " << c.g2 << ": n=" << c.n2 << " mean_uas=" << format_double(c.mean2) << '\n'
      << "welch t=" << format_double(c.welch.t) << " df=" << format_double(c.welch.df)
      << " p=" << format_double(c.welch.p) << (c.welch.zero_variance ? " (zero variance)" : "") << '\n';
}

void write_cluster_count_csv(std::ostream& out, const ClusterCountCurve& curve) {
  out << "k,ordinal_auc,min_cluster_size,feasible,chosen\n";
  for (const auto& pt : curve.points) {
    out << pt.k << ',' << format_double(pt.score) << ',' << pt.min_cluster_size << ','
        << (pt.min_cluster_size >= curve.min_cluster_size ? 1 : 0) << ',' << (pt.k == curve.chosen_k ? 1 : 0)
        << '\n';
  }
}

}  // namespace erclaims::upcoding
