#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "erclaims/datagen.h"
#include "erclaims/econ_eval.h"
#include "erclaims/error.h"
#include "erclaims/random.h"
#include "test_util.h"

using namespace erclaims;
using namespace erclaims::econ;
using forest::CARPrediction;
using testutil::Row;

namespace {

Dataset ca_dataset(const std::vector<double>& ca, const std::vector<double>& billed) {
  std::vector<Row> rows;
  for (std::size_t i = 0; i < ca.size(); ++i) rows.push_back(Row{"D", 1, "g", billed[i], ca[i]});
  return testutil::make_dataset(rows);
}

CARPrediction prediction(const Dataset& ds, const std::vector<double>& car) {
  CARPrediction p;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    p.ids.push_back(ds.claim(i).id);
    p.car.push_back(car[i]);
    p.ca.push_back(Money::from_units(car[i] * ds.claim(i).billed.to_units()));
  }
  return p;
}

std::vector<std::int64_t> ids(const Dataset& ds, const std::vector<std::size_t>& order) {
  std::vector<std::int64_t> out;
  for (auto r : order) out.push_back(ds.claim(r).id);
  return out;
}

// Random reviewed claims with some negative CAs and a noisy predictor.
struct Scenario {
  Dataset ds;
  CARPrediction pred;
};

Scenario random_scenario(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<double> ca, billed, car;
  for (std::size_t i = 0; i < n; ++i) {
    const double b = std::round(50 + 950 * rng.uniform01());
    const double r = rng.uniform01() < 0.15 ? -0.2 * rng.uniform01() : rng.uniform01();
    billed.push_back(b);
    ca.push_back(std::round(r * b * 100) / 100);
    car.push_back(std::min(1.0, r + 0.3 * rng.normal()));
  }
  Dataset ds = ca_dataset(ca, billed);
  CARPrediction p = prediction(ds, car);
  return {std::move(ds), std::move(p)};
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> o(v.size());
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = i;
    std::sort(o.begin(), o.end(), [&](auto x, auto y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < o.size();) {
      std::size_t j = i;
      while (j < o.size() && v[o[j]] == v[o[i]]) ++j;
      for (std::size_t k = i; k < j; ++k) r[o[k]] = 0.5 * static_cast<double>(i + j - 1);
      i = j;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = (n - 1) / 2;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - ma);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - ma) * (rb[i] - ma);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("model policy sorts by predicted CA") {
  Dataset ds = ca_dataset({1, 1, 1}, {100, 100, 100});
  CARPrediction p = prediction(ds, {0.05, -0.01, 0.02});
  CHECK(ids(ds, rank_queue(&p, ds, Policy::kModel)) == std::vector<std::int64_t>{1, 3, 2});
}

TEST_CASE("ties go to the lower id") {
  Dataset ds = ca_dataset({3, 3, 1}, {200, 100, 200});
  CARPrediction p = prediction(ds, {0.1, 0.2, 0.1});
  CHECK(ids(ds, rank_queue(&p, ds, Policy::kModel)) == std::vector<std::int64_t>{1, 2, 3});
  CHECK(ids(ds, rank_queue(nullptr, ds, Policy::kBaseline)) == std::vector<std::int64_t>{1, 3, 2});
  CHECK(ids(ds, rank_queue(nullptr, ds, Policy::kTheoreticalMax)) == std::vector<std::int64_t>{1, 2, 3});
  CHECK(ids(ds, rank_queue(nullptr, ds, Policy::kTheoreticalMin)) == std::vector<std::int64_t>{3, 1, 2});
}

TEST_CASE("max and min orders are reversed for distinct CAs") {
  Dataset ds = ca_dataset({4, -2, 7, 0, 3}, {10, 10, 10, 10, 10});
  auto mx = rank_queue(nullptr, ds, Policy::kTheoreticalMax);
  auto mn = rank_queue(nullptr, ds, Policy::kTheoreticalMin);
  std::reverse(mn.begin(), mn.end());
  CHECK(mx == mn);
}

TEST_CASE("rank errors") {
  Dataset ds = ca_dataset({1, 2}, {10, 10});
  CHECK_THROWS_AS(rank_queue(nullptr, ds, Policy::kModel), Error);
  CARPrediction partial;
  partial.ids = {1};
  partial.car = {0.1};
  partial.ca = {Money::from_cents(100)};
  try {
    rank_queue(&partial, ds, Policy::kModel);
    FAIL("expected MissingPredictions");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kMissingPredictions);
  }
  Dataset unreviewed = testutil::make_dataset({Row{"D"}, Row{"D"}});
  try {
    rank_queue(nullptr, unreviewed, Policy::kTheoreticalMax);
    FAIL("expected MissingTruth");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kMissingTruth);
  }
  try {
    cumulative_curve({0, 1}, unreviewed, Policy::kBaseline);
    FAIL("expected Unreviewed");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUnreviewed);
  }
}

TEST_CASE("cumulative curve is a prefix sum") {
  Dataset ds = ca_dataset({10, -5}, {20, 20});
  auto c = cumulative_curve({0, 1}, ds, Policy::kBaseline);
  REQUIRE(c.cumulative.size() == 3);
  CHECK(c.cumulative[0].cents() == 0);
  CHECK(c.cumulative[1].cents() == 1000);
  CHECK(c.cumulative[2].cents() == 500);
  CHECK(c.fraction(1) == doctest::Approx(0.5));
  CHECK(c.at(0.49) == c.cumulative[0]);
  CHECK(c.at(0.5) == c.cumulative[1]);
  CHECK(c.at(1.0) == c.cumulative[2]);
}

TEST_CASE("table rows reproduce the published arithmetic") {
  struct Published {
    double f, baseline, model, improvement;
    int percent;
  };
  const Published rows[] = {{0.1, 15.4, 21.6, 6.2, 40},
                            {0.2, 21.0, 26.2, 5.2, 25},
                            {0.3, 24.4, 29.3, 4.9, 20},
                            {0.4, 27.0, 31.5, 4.5, 17},
                            {0.5, 29.2, 32.8, 3.6, 12}};
  for (const auto& p : rows) {
    const auto r = improvement_row(p.f, Money::from_units(p.baseline), Money::from_units(p.model));
    CHECK(r.improvement == Money::from_units(p.improvement));
    CHECK(std::lround(r.percent) == p.percent);
  }
}

TEST_CASE("identical curves give zero improvement") {
  auto s = random_scenario(3, 100);
  auto c = cumulative_curve(rank_queue(&s.pred, s.ds, Policy::kModel), s.ds, Policy::kModel);
  for (const auto& r : improvement_table(c, c, kDefaultFractions)) {
    CHECK(r.improvement.cents() == 0);
    if (r.baseline.cents() != 0) CHECK(r.percent == 0.0);
  }
}

TEST_CASE("table interpolates with steps at claim boundaries") {
  Dataset ds = ca_dataset({1, 2, 3, 4, 5, 6, 7}, {10, 20, 30, 40, 50, 60, 70});
  auto base = cumulative_curve(rank_queue(nullptr, ds, Policy::kBaseline), ds, Policy::kBaseline);
  auto best = cumulative_curve(rank_queue(nullptr, ds, Policy::kTheoreticalMax), ds, Policy::kTheoreticalMax);
  // floor(0.3 * 7) = 2 claims reviewed
  auto t = improvement_table(best, base, {0.3});
  CHECK(t[0].baseline == Money::from_units(13));
  CHECK(t[0].model == Money::from_units(13));
}

TEST_CASE("curves are dominated by the theoretical bounds") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    auto s = random_scenario(seed, 200 + seed);
    auto rep = evaluate(s.ds, s.pred);
    const auto& model = rep.curves[0];
    const auto& mx = rep.curves[2];
    const auto& mn = rep.curves[3];
    for (const auto& c : rep.curves) {
      REQUIRE(c.cumulative.front().cents() == 0);
      REQUIRE(c.cumulative.back() == model.cumulative.back());
      for (std::size_t j = 0; j < c.cumulative.size(); ++j) {
        REQUIRE(mx.cumulative[j] >= c.cumulative[j]);
        REQUIRE(mn.cumulative[j] <= c.cumulative[j]);
      }
    }
    for (std::size_t j = 2; j < mx.cumulative.size(); ++j) {
      REQUIRE((mx.cumulative[j] - mx.cumulative[j - 1]) <= (mx.cumulative[j - 1] - mx.cumulative[j - 2]));
    }
    // the peak sits at the share of claims with positive CA
    std::size_t positive = 0;
    for (const auto& c : s.ds.claims()) positive += c.cost_avoidance->cents() > 0;
    const auto peak = std::max_element(mx.cumulative.begin(), mx.cumulative.end()) - mx.cumulative.begin();
    CHECK(static_cast<std::size_t>(peak) == positive);
    CHECK(mx.cumulative[positive] == rep.potential);
  }
}

TEST_CASE("percent of potential") {
  Dataset ds = ca_dataset({10, -5, 30}, {50, 50, 50});
  auto mx = cumulative_curve(rank_queue(nullptr, ds, Policy::kTheoreticalMax), ds, Policy::kTheoreticalMax);
  auto pct = percent_of_potential(mx, ds);
  CHECK(pct[2] == doctest::Approx(100.0));
  CHECK(pct[3] == doctest::Approx(87.5));

  Dataset all_positive = ca_dataset({1, 2}, {5, 5});
  auto c = cumulative_curve({1, 0}, all_positive, Policy::kBaseline);
  CHECK(percent_of_potential(c, all_positive).back() == doctest::Approx(100.0));

  Dataset none = ca_dataset({0, -1}, {5, 5});
  try {
    percent_of_potential(c, none);
    FAIL("expected NoPositiveCA");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNoPositiveCA);
  }
}

TEST_CASE("heat map corners and totals") {
  std::vector<Row> rows;
  const double xs[] = {0, 0, 1, 1};
  for (double x : xs) rows.push_back(Row{"D", 1, "g", 100.0, 0.0, {x}});
  Dataset ds = testutil::make_dataset(rows, 1);
  CARPrediction p = prediction(ds, {0.0, 1.0, 0.0, 1.0});
  Heatmap h = heatmap_bins(ds, p, "x1", 2);
  REQUIRE(h.x_bins == 2);
  REQUIRE(h.car_bins == 2);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b) CHECK(h.count(a, b) == 1);
  CHECK_FALSE(h.constant_x);

  auto s = random_scenario(9, 300);
  std::vector<Row> r2;
  Rng rng(9);
  for (std::size_t i = 0; i < 300; ++i) r2.push_back(Row{"D", 1, "g", 100.0, 0.0, {rng.uniform01()}});
  Dataset ds2 = testutil::make_dataset(r2, 1);
  CARPrediction p2 = prediction(ds2, s.pred.car);
  Heatmap h2 = heatmap_bins(ds2, p2, "x1", 7);
  std::size_t total = 0;
  for (auto c : h2.counts) total += c;
  CHECK(total == 300);

  std::ostringstream out;
  write_heatmap_csv(out, h);
  CHECK(out.str().rfind("x_bin,x_lo,x_hi,car_bin,car_lo,car_hi,count\n", 0) == 0);
}

TEST_CASE("constant heat map column yields one bin") {
  std::vector<Row> rows;
  for (int i = 0; i < 5; ++i) rows.push_back(Row{"D", 1, "g", 100.0, 0.0, {2.0}});
  Dataset ds = testutil::make_dataset(rows, 1);
  Heatmap h = heatmap_bins(ds, prediction(ds, {0.1, 0.2, 0.3, 0.4, 0.5}), "x1", 4);
  CHECK(h.constant_x);
  CHECK(h.x_bins == 1);
  std::size_t total = 0;
  for (auto c : h.counts) total += c;
  CHECK(total == 5);
}

TEST_CASE("planted association shows in bin means") {
  int positive = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    std::vector<Row> rows;
    std::vector<double> car;
    for (int i = 0; i < 500; ++i) {
      const double x = rng.uniform01();
      rows.push_back(Row{"D", 1, "g", 100.0, 0.0, {x}});
      car.push_back(0.4 * x + 0.1 * rng.normal());
    }
    Dataset ds = testutil::make_dataset(rows, 1);
    Heatmap h = heatmap_bins(ds, prediction(ds, car), "x1", 10);
    std::vector<double> idx, means;
    for (std::size_t b = 0; b < h.x_bins; ++b) {
      if (std::isnan(h.mean_car[b])) continue;
      idx.push_back(static_cast<double>(b));
      means.push_back(h.mean_car[b]);
    }
    positive += spearman(idx, means) > 0;
  }
  CHECK(positive == 20);
}

TEST_CASE("csv layouts") {
  Dataset ds = ca_dataset({10, -5}, {20, 20});
  CARPrediction p = prediction(ds, {0.1, 0.5});
  auto rep = evaluate(ds, p, {0.5});
  std::ostringstream curves, table, pot, queue;
  write_curves_csv(curves, rep.curves);
  CHECK(curves.str().rfind("fraction,cumulative_ca,scenario\n0,0.00,model\n0.5,-5.00,model\n1,5.00,model\n", 0) == 0);
  write_improvement_csv(table, rep.table);
  CHECK(table.str() == "percent_reviewed,baseline_ca,model_ca,improvement,percent_improvement\n50,10.00,-5.00,-15.00,-150\n");
  write_potential_csv(pot, rep.curves, ds);
  CHECK(pot.str().rfind("fraction,percent_of_potential,scenario\n", 0) == 0);
  write_queue_csv(queue, ds, rank_queue(&p, ds, Policy::kModel), &p);
  CHECK(queue.str() == "rank,id,billed,predicted_car,predicted_ca\n1,2,20.00,0.5,10.00\n2,1,20.00,0.1,2.00\n");
}

TEST_CASE("policy names roundtrip") {
  for (Policy p : kAllPolicies) CHECK(parse_policy(policy_name(p)) == p);
  CHECK_FALSE(parse_policy("oracle"));
}
