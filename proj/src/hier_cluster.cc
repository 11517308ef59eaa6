#include "erclaims/hier_cluster.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

#include "json.hpp"

#include "erclaims/error.h"
#include "erclaims/metrics.h"

namespace erclaims::cluster {

DissimilarityMatrix::DissimilarityMatrix(std::vector<std::string> levels)
    : levels_(std::move(levels)), values_(levels_.size() * levels_.size(), 0.0) {}

void DissimilarityMatrix::set(std::size_t a, std::size_t b, double value) {
  const std::size_t n = levels_.size();
  values_[a * n + b] = value;
  values_[b * n + a] = value;
}

namespace {

struct LevelMoments {
  std::vector<double> sum;
  std::vector<std::size_t> count;
};

LevelMoments level_moments(std::size_t n_levels, const std::vector<int>& codes, const std::vector<double>& values) {
  LevelMoments m{std::vector<double>(n_levels, 0.0), std::vector<std::size_t>(n_levels, 0)};
  for (std::size_t i = 0; i < codes.size(); ++i) {
    m.sum[static_cast<std::size_t>(codes[i])] += values[i];
    ++m.count[static_cast<std::size_t>(codes[i])];
  }
  return m;
}

void require_all_levels_present(const std::vector<std::string>& levels, const LevelMoments& m) {
  for (std::size_t l = 0; l < levels.size(); ++l) {
    if (m.count[l] == 0) throw Error(ErrorKind::kUnknownLevel, "level '" + levels[l] + "' has no claims");
  }
}

void require_complete(const std::vector<double>& values, std::string_view target) {
  for (double v : values) {
    if (std::isnan(v)) {
      throw Error(ErrorKind::kMissingTruth, "target '" + std::string(target) + "' is missing for some claims");
    }
  }
}

}  // namespace

double mean_severity(const Dataset& ds, std::string_view diagnosis) {
  auto code = ds.diagnosis_levels().find(diagnosis);
  double total = 0.0;
  std::size_t count = 0;
  if (code) {
    for (const Claim& c : ds.claims()) {
      if (c.diagnosis == *code) {
        total += c.severity;
        ++count;
      }
    }
  }
  if (count == 0) throw Error(ErrorKind::kUnknownLevel, "no claim has diagnosis '" + std::string(diagnosis) + "'");
  return total / static_cast<double>(count);
}

DissimilarityMatrix mean_distance_dissimilarity(const std::vector<std::string>& levels,
                                                const std::vector<int>& codes, const std::vector<double>& values) {
  const LevelMoments m = level_moments(levels.size(), codes, values);
  require_all_levels_present(levels, m);
  std::vector<double> mean(levels.size());
  for (std::size_t l = 0; l < levels.size(); ++l) mean[l] = m.sum[l] / static_cast<double>(m.count[l]);
  DissimilarityMatrix out(levels);
  for (std::size_t a = 0; a < levels.size(); ++a) {
    for (std::size_t b = a + 1; b < levels.size(); ++b) out.set(a, b, std::fabs(mean[a] - mean[b]));
  }
  return out;
}

DissimilarityMatrix mean_severity_dissimilarity(const Dataset& ds) {
  const CategoricalColumn col = categorical_column(ds, "diagnosis");
  return mean_distance_dissimilarity(col.levels, col.codes, numeric_column(ds, "severity"));
}

DissimilarityMatrix anova_t_dissimilarity(const std::vector<std::string>& levels, const std::vector<int>& codes,
                                          const std::vector<double>& values) {
  const std::size_t n_levels = levels.size();
  const LevelMoments m = level_moments(n_levels, codes, values);
  require_all_levels_present(levels, m);
  if (codes.size() <= n_levels) {
    throw Error(ErrorKind::kInsufficientDF, "ANOVA needs more claims (" + std::to_string(codes.size()) +
                                                ") than levels (" + std::to_string(n_levels) + ")");
  }
  std::vector<double> mean(n_levels);
  for (std::size_t l = 0; l < n_levels; ++l) mean[l] = m.sum[l] / static_cast<double>(m.count[l]);
  double ssw = 0.0;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const double r = values[i] - mean[static_cast<std::size_t>(codes[i])];
    ssw += r * r;
  }
  const double mse = ssw / static_cast<double>(codes.size() - n_levels);
  if (!(mse > 0.0)) {
    throw Error(ErrorKind::kDegenerateVariance, "pooled residual variance is zero");
  }
  const double sp = std::sqrt(mse);
  DissimilarityMatrix out(levels);
  for (std::size_t a = 0; a < n_levels; ++a) {
    for (std::size_t b = a + 1; b < n_levels; ++b) {
      const double se = sp * std::sqrt(1.0 / static_cast<double>(m.count[a]) + 1.0 / static_cast<double>(m.count[b]));
      out.set(a, b, std::fabs(mean[a] - mean[b]) / se);
    }
  }
  return out;
}

DissimilarityMatrix anova_t_dissimilarity(const Dataset& ds, std::string_view column, std::string_view target) {
  const CategoricalColumn col = categorical_column(ds, column);
  const std::vector<double> values = numeric_column(ds, target);
  require_complete(values, target);
  return anova_t_dissimilarity(col.levels, col.codes, values);
}

Dendrogram build_dendrogram(const DissimilarityMatrix& m) {
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const std::size_t n = m.size();
  Dendrogram dg;
  dg.leaves = m.levels();
  if (n <= 1) return dg;

  // Slot i always holds the cluster whose minimum leaf index is i, so slot
  // order is the tie-break order.
  std::vector<double> dist(n * n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) dist[a * n + b] = m(a, b);
  }
  auto d = [&](std::size_t a, std::size_t b) -> double& { return dist[a * n + b]; };
  std::vector<char> active(n, 1);
  std::vector<std::size_t> size(n, 1);
  std::vector<std::size_t> node(n);
  std::iota(node.begin(), node.end(), std::size_t{0});

  // Nearest active neighbour of slot i among slots j > i.
  std::vector<std::size_t> nn(n, kNone);
  std::vector<double> nn_dist(n, kInf);
  auto rescan = [&](std::size_t i) {
    nn[i] = kNone;
    nn_dist[i] = kInf;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (active[j] && (nn[i] == kNone || d(i, j) < nn_dist[i])) {
        nn[i] = j;
        nn_dist[i] = d(i, j);
      }
    }
  };
  for (std::size_t i = 0; i < n; ++i) rescan(i);

  dg.merges.reserve(n - 1);
  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t a = kNone;
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i] && nn[i] != kNone && (a == kNone || nn_dist[i] < nn_dist[a])) a = i;
    }
    const std::size_t b = nn[a];
    const double height = nn_dist[a];
    dg.merges.push_back(Merge{node[a], node[b], height, size[a] + size[b]});

    const double wa = static_cast<double>(size[a]);
    const double wb = static_cast<double>(size[b]);
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == a || k == b) continue;
      const double merged = (wa * d(a, k) + wb * d(b, k)) / (wa + wb);
      d(a, k) = merged;
      d(k, a) = merged;
    }
    active[b] = 0;
    size[a] += size[b];
    node[a] = n + step;

    rescan(a);
    for (std::size_t i = 0; i < a; ++i) {
      if (!active[i]) continue;
      if (nn[i] == a || nn[i] == b) {
        rescan(i);
      } else if (d(i, a) < nn_dist[i] || (d(i, a) == nn_dist[i] && a < nn[i])) {
        nn[i] = a;
        nn_dist[i] = d(i, a);
      }
    }
    for (std::size_t i = a + 1; i < b; ++i) {
      if (active[i] && nn[i] == b) rescan(i);
    }
  }
  return dg;
}

void write_dendrogram_json(std::ostream& out, const Dendrogram& dg) {
  nlohmann::json j;
  j["leaves"] = dg.leaves;
  j["merges"] = nlohmann::json::array();
  for (const Merge& mg : dg.merges) {
    j["merges"].push_back(nlohmann::json::array({mg.left, mg.right, mg.height}));
  }
  out << j.dump(1) << '\n';
}

ClusterAssignment::ClusterAssignment(std::string column, int k, std::vector<std::string> levels,
                                     std::vector<int> cluster_of)
    : column_(std::move(column)), k_(k), levels_(std::move(levels)), cluster_of_(std::move(cluster_of)) {
  if (levels_.size() != cluster_of_.size()) {
    throw Error(ErrorKind::kInvalidArgument, "cluster assignment: levels and ids differ in length");
  }
  std::vector<char> used(static_cast<std::size_t>(std::max(k_, 0)), 0);
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    const int id = cluster_of_[l];
    if (id < 1 || id > k_) {
      throw Error(ErrorKind::kBadK, "cluster id " + std::to_string(id) + " outside 1.." + std::to_string(k_));
    }
    used[static_cast<std::size_t>(id - 1)] = 1;
    if (!index_.emplace(levels_[l], id).second) {
      throw Error(ErrorKind::kInvalidArgument, "level '" + levels_[l] + "' assigned twice");
    }
  }
  if (std::find(used.begin(), used.end(), 0) != used.end()) {
    throw Error(ErrorKind::kBadK, "cluster assignment leaves a cluster id empty");
  }
}

int ClusterAssignment::cluster(std::string_view level) const {
  auto it = index_.find(std::string(level));
  if (it == index_.end()) {
    throw Error(ErrorKind::kUnassignedLevel, "level '" + std::string(level) + "' of column '" + column_ +
                                                 "' has no cluster");
  }
  return it->second;
}

int ClusterAssignment::cluster_or_fallback(std::string_view level) const {
  auto it = index_.find(std::string(level));
  return it == index_.end() ? fallback_cluster_ : it->second;
}

void ClusterAssignment::set_target_means(std::vector<double> cluster_means, double overall_mean) {
  cluster_means_ = std::move(cluster_means);
  fallback_cluster_ = 1;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < cluster_means_.size(); ++c) {
    const double gap = std::fabs(cluster_means_[c] - overall_mean);
    if (gap < best) {
      best = gap;
      fallback_cluster_ = static_cast<int>(c) + 1;
    }
  }
}

std::vector<int> ClusterAssignment::clusters_for(const Dataset& ds) const {
  const CategoricalColumn col = categorical_column(ds, column_);
  std::vector<int> by_code(col.levels.size(), 0);
  for (std::size_t l = 0; l < col.levels.size(); ++l) {
    auto it = index_.find(col.levels[l]);
    if (it != index_.end()) by_code[l] = it->second;
  }
  std::vector<int> out(col.codes.size());
  for (std::size_t i = 0; i < col.codes.size(); ++i) {
    out[i] = by_code[static_cast<std::size_t>(col.codes[i])];
    if (out[i] == 0) cluster(col.levels[static_cast<std::size_t>(col.codes[i])]);  // throws
  }
  return out;
}

ClusterAssignment cut_dendrogram(const Dendrogram& dg, int k, std::string column) {
  const std::size_t n = dg.leaves.size();
  if (k < 1 || static_cast<std::size_t>(k) > n) {
    throw Error(ErrorKind::kBadK, "k=" + std::to_string(k) + " outside 1.." + std::to_string(n));
  }
  // Union-find over node ids; node L+m is the m-th merge.
  std::vector<std::size_t> parent(2 * n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  const std::size_t keep = n - static_cast<std::size_t>(k);
  for (std::size_t m = 0; m < keep; ++m) {
    const std::size_t made = n + m;
    parent[find(dg.merges[m].left)] = made;
    parent[find(dg.merges[m].right)] = made;
  }
  std::vector<int> id_of_root(2 * n, 0);
  std::vector<int> cluster_of(n);
  int next = 0;
  for (std::size_t leaf = 0; leaf < n; ++leaf) {
    const std::size_t root = find(leaf);
    if (id_of_root[root] == 0) id_of_root[root] = ++next;
    cluster_of[leaf] = id_of_root[root];
  }
  return ClusterAssignment(std::move(column), k, dg.leaves, std::move(cluster_of));
}

void write_assignment_csv(std::ostream& out, const ClusterAssignment& ca) {
  out << "level,cluster_id\n";
  for (std::size_t l = 0; l < ca.levels().size(); ++l) {
    out << csv_escape(ca.levels()[l]) << ',' << ca.cluster_of()[l] << '\n';
  }
}

ClusterAssignment read_assignment_csv(std::istream& in, std::string column) {
  std::string line;
  if (!std::getline(in, line) || (line != "level,cluster_id" && line != "level,cluster_id\r")) {
    throw Error(ErrorKind::kMissingColumn, "assignment CSV header must be 'level,cluster_id'");
  }
  std::vector<std::string> levels;
  std::vector<int> ids;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    auto fields = split_csv_line(line);
    auto id = fields.size() == 2 ? parse_double(fields[1]) : std::nullopt;
    if (!id || *id != std::floor(*id)) {
      throw Error(ErrorKind::kBadNumber, "assignment row " + std::to_string(row) + ": bad cluster id");
    }
    levels.push_back(fields[0]);
    ids.push_back(static_cast<int>(*id));
  }
  const int k = ids.empty() ? 0 : *std::max_element(ids.begin(), ids.end());
  return ClusterAssignment(std::move(column), k, std::move(levels), std::move(ids));
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::nan("");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<ClusterStats> cluster_summary(const Dataset& ds, const ClusterAssignment& ca,
                                          std::string_view value_column) {
  const std::vector<int> ids = ca.clusters_for(ds);
  const std::vector<double> values = numeric_column(ds, value_column);
  std::vector<std::vector<double>> per(static_cast<std::size_t>(ca.k()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!std::isnan(values[i])) per[static_cast<std::size_t>(ids[i] - 1)].push_back(values[i]);
  }
  std::vector<ClusterStats> out;
  out.reserve(per.size());
  for (std::size_t c = 0; c < per.size(); ++c) {
    auto& v = per[c];
    std::sort(v.begin(), v.end());
    ClusterStats s;
    s.cluster_id = static_cast<int>(c) + 1;
    s.count = v.size();
    if (v.empty()) {
      s.min = s.q1 = s.median = s.q3 = s.max = s.mean = std::nan("");
    } else {
      s.min = v.front();
      s.q1 = quantile_sorted(v, 0.25);
      s.median = quantile_sorted(v, 0.5);
      s.q3 = quantile_sorted(v, 0.75);
      s.max = v.back();
      s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    }
    out.push_back(s);
  }
  return out;
}

namespace {

// Two-fold CV R^2 of predicting the target by the training-fold cluster mean.
double cv_r_squared(const std::vector<int>& level_cluster, int k, const std::vector<int>& codes,
                    const std::vector<double>& values, const FoldSplit& split) {
  double total = 0.0;
  for (int fold = 0; fold < 2; ++fold) {
    const auto& train = fold == 0 ? split.fold_a : split.fold_b;
    const auto& test = fold == 0 ? split.fold_b : split.fold_a;
    std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
    std::vector<std::size_t> count(static_cast<std::size_t>(k), 0);
    double grand = 0.0;
    for (std::size_t r : train) {
      const auto c = static_cast<std::size_t>(level_cluster[static_cast<std::size_t>(codes[r])] - 1);
      sum[c] += values[r];
      ++count[c];
      grand += values[r];
    }
    grand /= static_cast<double>(train.size());
    std::vector<double> pred;
    std::vector<double> truth;
    pred.reserve(test.size());
    truth.reserve(test.size());
    for (std::size_t r : test) {
      const auto c = static_cast<std::size_t>(level_cluster[static_cast<std::size_t>(codes[r])] - 1);
      pred.push_back(count[c] > 0 ? sum[c] / static_cast<double>(count[c]) : grand);
      truth.push_back(values[r]);
    }
    total += metrics::r_squared(pred, truth);
  }
  return total / 2.0;
}

}  // namespace

LevelClustering cluster_levels_by_target(const Dataset& ds, std::string_view column, std::string_view target,
                                         std::uint64_t seed, int k_max) {
  const CategoricalColumn col = categorical_column(ds, column);
  const std::vector<double> values = numeric_column(ds, target);
  require_complete(values, target);

  // Only levels that occur in this data take part; codes are compacted.
  std::vector<int> remap(col.levels.size(), -1);
  std::vector<std::string> present;
  for (int code : col.codes) {
    auto& slot = remap[static_cast<std::size_t>(code)];
    if (slot < 0) {
      slot = static_cast<int>(present.size());
      present.push_back(col.levels[static_cast<std::size_t>(code)]);
    }
  }
  std::vector<int> codes(col.codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) codes[i] = remap[static_cast<std::size_t>(col.codes[i])];
  if (present.empty()) throw Error(ErrorKind::kEmptyDataset, "no claims to cluster");

  LevelClustering out;
  DissimilarityMatrix dm;
  try {
    dm = anova_t_dissimilarity(present, codes, values);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kDegenerateVariance && e.kind() != ErrorKind::kInsufficientDF) throw;
    dm = mean_distance_dissimilarity(present, codes, values);
    out.mean_distance_fallback = true;
  }
  out.dendrogram = build_dendrogram(dm);

  const int n_levels = static_cast<int>(present.size());
  const int k_hi = std::clamp(k_max, 1, n_levels);
  const FoldSplit split = two_fold_split(ds, seed);
  int best_k = 1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int k = 1; k <= k_hi; ++k) {
    const ClusterAssignment ca = cut_dendrogram(out.dendrogram, k, std::string(column));
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (int code : codes) ++sizes[static_cast<std::size_t>(ca.cluster_of()[static_cast<std::size_t>(code)] - 1)];
    const double score = cv_r_squared(ca.cluster_of(), k, codes, values, split);
    out.curve.push_back(KScore{k, score, *std::min_element(sizes.begin(), sizes.end())});
    if (score > best_score) {
      best_score = score;
      best_k = k;
    }
  }
  out.assignment = cut_dendrogram(out.dendrogram, best_k, std::string(column));

  std::vector<double> sum(static_cast<std::size_t>(best_k), 0.0);
  std::vector<std::size_t> count(static_cast<std::size_t>(best_k), 0);
  double grand = 0.0;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const auto c = static_cast<std::size_t>(out.assignment.cluster_of()[static_cast<std::size_t>(codes[i])] - 1);
    sum[c] += values[i];
    ++count[c];
    grand += values[i];
  }
  for (std::size_t c = 0; c < sum.size(); ++c) sum[c] /= static_cast<double>(count[c]);
  out.assignment.set_target_means(std::move(sum), grand / static_cast<double>(codes.size()));
  return out;
}

}  // namespace erclaims::cluster
