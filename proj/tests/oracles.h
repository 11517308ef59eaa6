#pragma once

// Independent reference computations used only by tests. Each one evaluates
// its quantity straight from the defining formula, by enumeration, or with
// an external library, never by calling the code it checks.

#include <boost/math/distributions/students_t.hpp>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "erclaims/forest.h"
#include "erclaims/metrics.h"

namespace oracle {

// Mean over non-degenerate thresholds of pairwise concordance, enumerated.
inline double ordinal_auc_pairs(std::span<const erclaims::metrics::SeverityProbVector> preds,
                                std::span<const int> truth) {
  double total = 0.0;
  int used = 0;
  for (int t = 2; t <= 5; ++t) {
    double concordant = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] < t) continue;
      for (std::size_t j = 0; j < truth.size(); ++j) {
        if (truth[j] >= t) continue;
        double si = 0.0, sj = 0.0;
        for (int s = t; s <= 5; ++s) {
          si += preds[i].p[static_cast<std::size_t>(s - 1)];
          sj += preds[j].p[static_cast<std::size_t>(s - 1)];
        }
        concordant += si > sj ? 1.0 : (si == sj ? 0.5 : 0.0);
        pairs += 1.0;
      }
    }
    if (pairs > 0) {
      total += concordant / pairs;
      ++used;
    }
  }
  return total / used;
}

struct WelchOracle {
  double t, df, p;
};

inline WelchOracle welch(const std::vector<double>& a, const std::vector<double>& b) {
  auto mean = [](const std::vector<double>& x) { return std::accumulate(x.begin(), x.end(), 0.0) / x.size(); };
  auto var = [&](const std::vector<double>& x) {
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / (x.size() - 1);
  };
  const double va = var(a), vb = var(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double t = (mean(a) - mean(b)) / std::sqrt(va / na + vb / nb);
  const double df = std::pow(va / na + vb / nb, 2) /
                    (std::pow(va / na, 2) / (na - 1) + std::pow(vb / nb, 2) / (nb - 1));
  boost::math::students_t dist(df);
  const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
  return {t, df, p};
}

}  // namespace oracle

namespace oracle {

struct NaiveMerge {
  std::vector<std::size_t> members_left, members_right;
  double height;
};

// Average linkage by recomputing every cluster-pair mean distance from the
// original matrix at every step. Ties: smallest (min member, min member).
template <typename Dist>
std::vector<NaiveMerge> naive_upgma(std::size_t n, Dist dist) {
  std::vector<std::vector<std::size_t>> clusters(n);
  for (std::size_t i = 0; i < n; ++i) clusters[i] = {i};
  std::vector<NaiveMerge> out;
  while (clusters.size() > 1) {
    double best = INFINITY;
    std::size_t ba = 0, bb = 0;
    std::pair<std::size_t, std::size_t> best_key{SIZE_MAX, SIZE_MAX};
    for (std::size_t a = 0; a < clusters.size(); ++a) {
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        double s = 0.0;
        for (auto i : clusters[a])
          for (auto j : clusters[b]) s += dist(i, j);
        s /= static_cast<double>(clusters[a].size() * clusters[b].size());
        std::size_t ka = *std::min_element(clusters[a].begin(), clusters[a].end());
        std::size_t kb = *std::min_element(clusters[b].begin(), clusters[b].end());
        std::pair<std::size_t, std::size_t> key{std::min(ka, kb), std::max(ka, kb)};
        if (s < best - 1e-12 || (std::fabs(s - best) <= 1e-12 && key < best_key)) {
          best = s;
          ba = a;
          bb = b;
          best_key = key;
        }
      }
    }
    out.push_back({clusters[ba], clusters[bb], best});
    clusters[ba].insert(clusters[ba].end(), clusters[bb].begin(), clusters[bb].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bb));
  }
  return out;
}

}  // namespace oracle

namespace oracle {

// Upcoding score by enumerating every (i, j) pair. With `groups` given, the
// background also requires a different group. Empty background scores 1.
inline std::vector<double> uas_pairs(const std::vector<int>& severity, const std::vector<int>& cluster,
                                     const std::vector<int>* groups = nullptr) {
  std::vector<double> out(severity.size());
  for (std::size_t i = 0; i < severity.size(); ++i) {
    std::size_t num = 0, den = 0;
    for (std::size_t j = 0; j < severity.size(); ++j) {
      if (j == i || cluster[j] != cluster[i]) continue;
      if (groups && (*groups)[j] == (*groups)[i]) continue;
      ++den;
      if (severity[j] >= severity[i]) ++num;
    }
    out[i] = den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
  }
  return out;
}

}  // namespace oracle

namespace oracle {

inline double sse(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s;
}

// Smallest summed child impurity over every binary split of all rows on the
// given columns: each numeric cut between distinct values and each subset of
// categorical levels. Children need at least min_leaf rows.
inline double best_split_impurity(const erclaims::forest::Table& t, const std::vector<std::size_t>& cols,
                                  std::size_t min_leaf) {
  double best = INFINITY;
  auto consider = [&](auto goes_left) {
    std::vector<double> l, r;
    for (std::size_t i = 0; i < t.rows; ++i) (goes_left(i) ? l : r).push_back(t.y[i]);
    if (l.size() < min_leaf || r.size() < min_leaf) return;
    best = std::min(best, sse(l) + sse(r));
  };
  for (std::size_t c : cols) {
    if (t.kinds[c] == erclaims::ColumnKind::kNumeric) {
      std::vector<double> values;
      for (std::size_t i = 0; i < t.rows; ++i) values.push_back(t.at(i, c));
      std::sort(values.begin(), values.end());
      values.erase(std::unique(values.begin(), values.end()), values.end());
      for (std::size_t k = 0; k + 1 < values.size(); ++k) {
        consider([&](std::size_t i) { return t.at(i, c) <= values[k]; });
      }
    } else {
      const auto levels = static_cast<unsigned>(t.n_levels[c]);
      for (unsigned mask = 1; mask + 1 < (1u << levels); ++mask) {
        consider([&](std::size_t i) { return ((mask >> static_cast<unsigned>(t.at(i, c))) & 1u) != 0; });
      }
    }
  }
  return best;
}

}  // namespace oracle
