#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "erclaims/error.h"
#include "erclaims/hier_cluster.h"
#include "erclaims/random.h"
#include "oracles.h"
#include "test_util.h"

using namespace erclaims;
using namespace erclaims::cluster;
using testutil::Row;

namespace {

// Matrix of |v_a - v_b| over named levels.
DissimilarityMatrix line_matrix(const std::vector<double>& values) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < values.size(); ++i) names.push_back("L" + std::to_string(i));
  DissimilarityMatrix m(names);
  for (std::size_t a = 0; a < values.size(); ++a)
    for (std::size_t b = a + 1; b < values.size(); ++b) m.set(a, b, std::fabs(values[a] - values[b]));
  return m;
}

std::vector<std::vector<std::size_t>> node_members(const Dendrogram& dg) {
  const std::size_t n = dg.leaves.size();
  std::vector<std::vector<std::size_t>> members(n + dg.merges.size());
  for (std::size_t i = 0; i < n; ++i) members[i] = {i};
  for (std::size_t m = 0; m < dg.merges.size(); ++m) {
    auto merged = members[dg.merges[m].left];
    merged.insert(merged.end(), members[dg.merges[m].right].begin(), members[dg.merges[m].right].end());
    std::sort(merged.begin(), merged.end());
    members[n + m] = merged;
  }
  return members;
}

void check_monotone(const Dendrogram& dg) {
  for (std::size_t m = 1; m < dg.merges.size(); ++m) {
    CHECK(dg.merges[m].height >= dg.merges[m - 1].height - 1e-12 * (1.0 + dg.merges[m - 1].height));
  }
}

}  // namespace

TEST_CASE("mean severity") {
  const Dataset ds = testutil::severities_dataset({{"A", {1, 3, 5}}, {"B", {4}}, {"C", {2, 2, 3}}});
  CHECK(mean_severity(ds, "A") == 3.0);
  CHECK(mean_severity(ds, "B") == 4.0);
  CHECK(mean_severity(ds, "C") == doctest::Approx(7.0 / 3.0));
  CHECK_THROWS_AS(mean_severity(ds, "Z"), Error);
}

TEST_CASE("mean severity dissimilarity") {
  const Dataset ds = testutil::severities_dataset({{"A", {1, 3, 5}}, {"B", {4}}});
  const DissimilarityMatrix m = mean_severity_dissimilarity(ds);
  CHECK(m(0, 1) == 1.0);
  CHECK(m(0, 0) == 0.0);

  Rng rng(3);
  std::vector<Row> rows;
  for (int i = 0; i < 60; ++i) rows.push_back(Row{"D" + std::to_string(i % 5), 1 + static_cast<int>(rng.uniform_index(5))});
  const DissimilarityMatrix r = mean_severity_dissimilarity(testutil::make_dataset(rows));
  for (std::size_t a = 0; a < 5; ++a) {
    CHECK(r(a, a) == 0.0);
    for (std::size_t b = 0; b < 5; ++b) {
      CHECK(r(a, b) == r(b, a));
      CHECK(r(a, b) >= 0.0);
    }
  }
}

TEST_CASE("ANOVA t dissimilarity against a direct pooled-variance computation") {
  std::vector<Row> rows;
  auto add = [&](const std::string& level, std::vector<double> ys) {
    for (double y : ys) rows.push_back(Row{level, 1, "g", 100.0, y});
  };
  add("A", {1, 2, 3});
  add("B", {4, 5, 6});
  add("C", {1, 3, 5});
  const Dataset ds = testutil::make_dataset(rows);
  const DissimilarityMatrix m = anova_t_dissimilarity(ds, "diagnosis", "cost_avoidance");

  // Oracle: means 2, 5, 3; within SS 2 + 2 + 8 = 12 on 9 - 3 = 6 df.
  const double sp2 = 12.0 / 6.0;
  const double t_ab = std::fabs(2.0 - 5.0) / std::sqrt(sp2 * (1.0 / 3 + 1.0 / 3));
  const double t_ac = std::fabs(2.0 - 3.0) / std::sqrt(sp2 * (1.0 / 3 + 1.0 / 3));
  CHECK(m(0, 1) == doctest::Approx(t_ab).epsilon(1e-13));
  CHECK(m(0, 2) == doctest::Approx(t_ac).epsilon(1e-13));
  CHECK(t_ab == doctest::Approx(1.5 * std::sqrt(3.0)));

  // Scale invariance.
  std::vector<Row> scaled = rows;
  for (auto& r : scaled) r.cost_avoidance = *r.cost_avoidance * 7.5;
  const DissimilarityMatrix ms = anova_t_dissimilarity(testutil::make_dataset(scaled), "diagnosis", "cost_avoidance");
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) CHECK(ms(a, b) == doctest::Approx(m(a, b)).epsilon(1e-12));
}

TEST_CASE("ANOVA t: equal means give zero, degenerate inputs error") {
  std::vector<Row> rows;
  for (double y : {1.0, 3.0}) rows.push_back(Row{"A", 1, "g", 100.0, y});
  for (double y : {0.0, 4.0}) rows.push_back(Row{"B", 1, "g", 100.0, y});
  CHECK(anova_t_dissimilarity(testutil::make_dataset(rows), "diagnosis", "cost_avoidance")(0, 1) == 0.0);

  std::vector<Row> flat;
  for (double y : {1.0, 1.0}) flat.push_back(Row{"A", 1, "g", 100.0, y});
  for (double y : {2.0, 2.0}) flat.push_back(Row{"B", 1, "g", 100.0, y});
  try {
    anova_t_dissimilarity(testutil::make_dataset(flat), "diagnosis", "cost_avoidance");
    FAIL("expected DegenerateVariance");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDegenerateVariance);
  }

  std::vector<Row> thin{Row{"A", 1, "g", 100.0, 1.0}, Row{"B", 1, "g", 100.0, 2.0}};
  try {
    anova_t_dissimilarity(testutil::make_dataset(thin), "diagnosis", "cost_avoidance");
    FAIL("expected InsufficientDF");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInsufficientDF);
  }
}

TEST_CASE("dendrogram small cases") {
  const Dendrogram three = build_dendrogram(line_matrix({1.0, 1.1, 5.0}));
  REQUIRE(three.merges.size() == 2);
  CHECK(three.merges[0].left == 0);
  CHECK(three.merges[0].right == 1);
  CHECK(three.merges[0].height == doctest::Approx(0.1));
  // Average of |5-1| and |5-1.1|.
  CHECK(three.merges[1].height == doctest::Approx(3.95));

  CHECK(build_dendrogram(line_matrix({2.0})).merges.empty());

  const Dendrogram two = build_dendrogram(line_matrix({0.0, 0.7}));
  REQUIRE(two.merges.size() == 1);
  CHECK(two.merges[0].height == doctest::Approx(0.7));
}

TEST_CASE("dendrogram matches naive average linkage on random matrices") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    const std::size_t n = 2 + rng.uniform_index(18);
    std::vector<std::string> names(n);
    DissimilarityMatrix m(names);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b)
        // Coarse grid values make exact ties common, exercising tie-breaks.
        m.set(a, b, seed % 2 == 0 ? rng.uniform01() : static_cast<double>(rng.uniform_index(4)));
    const Dendrogram dg = build_dendrogram(m);
    const auto expected = oracle::naive_upgma(n, [&](std::size_t i, std::size_t j) { return m(i, j); });
    const auto members = node_members(dg);
    REQUIRE(dg.merges.size() == n - 1);
    for (std::size_t s = 0; s + 1 < n; ++s) {
      auto l = expected[s].members_left, r = expected[s].members_right;
      std::sort(l.begin(), l.end());
      std::sort(r.begin(), r.end());
      CHECK(members[dg.merges[s].left] == l);
      CHECK(members[dg.merges[s].right] == r);
      CHECK(dg.merges[s].height == doctest::Approx(expected[s].height).epsilon(1e-12));
    }
  }
}

TEST_CASE("cut properties: k clusters, refinement, intervals, monotone heights") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed + 100);
    const std::size_t n = 1 + rng.uniform_index(20);
    std::vector<double> mu(n);
    for (auto& v : mu) v = 1.0 + 4.0 * rng.uniform01();
    const Dendrogram dg = build_dendrogram(line_matrix(mu));
    check_monotone(dg);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return mu[a] < mu[b]; });

    ClusterAssignment prev;
    for (int k = 1; k <= static_cast<int>(n); ++k) {
      const ClusterAssignment ca = cut_dendrogram(dg, k);
      std::set<int> ids(ca.cluster_of().begin(), ca.cluster_of().end());
      CHECK(static_cast<int>(ids.size()) == k);
      CHECK(*ids.begin() == 1);
      CHECK(*ids.rbegin() == k);
      // ids follow minimum level index
      int next = 0;
      for (std::size_t l = 0; l < n; ++l) {
        if (ca.cluster_of()[l] > next) {
          CHECK(ca.cluster_of()[l] == next + 1);
          next = ca.cluster_of()[l];
        }
      }
      // each cluster is contiguous in sorted-mu order
      std::set<int> closed;
      int current = -1;
      for (auto l : order) {
        const int id = ca.cluster_of()[l];
        if (id != current) {
          CHECK(closed.count(id) == 0);
          if (current >= 0) closed.insert(current);
          current = id;
        }
      }
      // refinement of the k-1 clustering
      if (k > 1) {
        for (std::size_t a = 0; a < n; ++a)
          for (std::size_t b = 0; b < n; ++b)
            if (ca.cluster_of()[a] == ca.cluster_of()[b]) CHECK(prev.cluster_of()[a] == prev.cluster_of()[b]);
      }
      prev = ca;
    }
  }
}

TEST_CASE("cut extremes and bad k") {
  const Dendrogram dg = build_dendrogram(line_matrix({1.0, 2.0, 2.5, 4.0}));
  const ClusterAssignment all = cut_dendrogram(dg, 4);
  CHECK(all.cluster_of() == std::vector<int>{1, 2, 3, 4});
  const ClusterAssignment one = cut_dendrogram(dg, 1);
  CHECK(one.cluster_of() == std::vector<int>{1, 1, 1, 1});
  CHECK_THROWS_AS(cut_dendrogram(dg, 0), Error);
  CHECK_THROWS_AS(cut_dendrogram(dg, 5), Error);
}

TEST_CASE("large dendrogram: 1951 levels cut to 2 and 5 clusters") {
  Rng rng(1951);
  std::vector<double> mu(1951);
  for (auto& v : mu) {
    const double centre = 1.0 + static_cast<double>(rng.uniform_index(5));
    v = centre + 0.2 * rng.normal();
  }
  const auto start = std::chrono::steady_clock::now();
  const Dendrogram dg = build_dendrogram(line_matrix(mu));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  MESSAGE("1951-level dendrogram built in " << secs << " s");
  CHECK(dg.merges.size() == 1950);
  check_monotone(dg);
  for (int k : {2, 5}) {
    const ClusterAssignment ca = cut_dendrogram(dg, k);
    CHECK(std::set<int>(ca.cluster_of().begin(), ca.cluster_of().end()).size() == static_cast<std::size_t>(k));
  }
}

TEST_CASE("cluster summary") {
  const Dataset ds = testutil::severities_dataset({{"A", {1, 1}}, {"B", {2}}, {"C", {4}}});
  const ClusterAssignment ca("diagnosis", 2, {"A", "B", "C"}, {1, 1, 2});
  const auto stats = cluster_summary(ds, ca, "severity");
  REQUIRE(stats.size() == 2);
  CHECK(stats[0].count == 3);
  CHECK(stats[0].median == 1.0);
  CHECK(stats[0].mean == doctest::Approx(4.0 / 3.0));
  CHECK(stats[1].min == 4.0);
  CHECK(stats[1].q1 == 4.0);
  CHECK(stats[1].median == 4.0);
  CHECK(stats[1].q3 == 4.0);
  CHECK(stats[1].max == 4.0);
  CHECK(stats[0].count + stats[1].count == ds.size());

  const ClusterAssignment partial("diagnosis", 1, {"A", "B"}, {1, 1});
  CHECK_THROWS_AS(cluster_summary(ds, partial, "severity"), Error);
}

TEST_CASE("assignment CSV round trip and unseen-level fallback") {
  ClusterAssignment ca("provider", 3, {"p,1", "p2", "p3", "p4"}, {1, 2, 2, 3});
  std::stringstream buf;
  write_assignment_csv(buf, ca);
  const ClusterAssignment back = read_assignment_csv(buf, "provider");
  CHECK(back.levels() == ca.levels());
  CHECK(back.cluster_of() == ca.cluster_of());
  CHECK(back.k() == 3);
  CHECK_THROWS_AS(back.cluster("nope"), Error);

  ca.set_target_means({-5.0, 0.4, 9.0}, 1.0);
  CHECK(ca.fallback_cluster() == 2);
  CHECK(ca.cluster_or_fallback("never seen") == 2);
  CHECK(ca.cluster_or_fallback("p4") == 3);
}

TEST_CASE("levels clustered by target recover planted tiers") {
  Rng rng(5);
  std::vector<Row> rows;
  const double tier_effect[3] = {-40.0, 10.0, 80.0};
  for (int i = 0; i < 3000; ++i) {
    const int provider = static_cast<int>(rng.uniform_index(24));
    const double ca = tier_effect[provider % 3] + 10.0 * rng.normal();
    rows.push_back(Row{"P" + std::to_string(provider), 1, "g", 1000.0, ca});
  }
  const Dataset ds = testutil::make_dataset(rows);
  const LevelClustering lc = cluster_levels_by_target(ds, "diagnosis", "cost_avoidance", 9, 20);
  CHECK_FALSE(lc.mean_distance_fallback);
  CHECK(lc.curve.size() == 20);
  CHECK(lc.assignment.k() >= 3);
  // Providers from different tiers never share a cluster.
  for (std::size_t a = 0; a < lc.assignment.levels().size(); ++a) {
    for (std::size_t b = 0; b < lc.assignment.levels().size(); ++b) {
      const int pa = std::stoi(lc.assignment.levels()[a].substr(1));
      const int pb = std::stoi(lc.assignment.levels()[b].substr(1));
      if (lc.assignment.cluster_of()[a] == lc.assignment.cluster_of()[b]) CHECK(pa % 3 == pb % 3);
    }
  }
  REQUIRE(lc.assignment.cluster_means().size() == static_cast<std::size_t>(lc.assignment.k()));
}
