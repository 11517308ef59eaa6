#include "erclaims/econ_eval.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "erclaims/error.h"

namespace erclaims::econ {

const char* policy_name(Policy p) {
  switch (p) {
    case Policy::kModel: return "model";
    case Policy::kBaseline: return "baseline";
    case Policy::kTheoreticalMax: return "theoretical_max";
    case Policy::kTheoreticalMin: return "theoretical_min";
  }
  return "";
}

std::optional<Policy> parse_policy(std::string_view name) {
  for (Policy p : kAllPolicies)
    if (name == policy_name(p)) return p;
  return std::nullopt;
}

namespace {

std::vector<Money> true_ca(const Dataset& ds, ErrorKind missing) {
  std::vector<Money> out;
  out.reserve(ds.size());
  for (const auto& c : ds.claims()) {
    if (!c.cost_avoidance) {
      throw Error(missing, "claim " + std::to_string(c.id) + " has no reviewed cost avoidance");
    }
    out.push_back(*c.cost_avoidance);
  }
  return out;
}

}  // namespace

std::vector<std::size_t> rank_queue(const forest::CARPrediction* pred, const Dataset& ds, Policy policy) {
  std::vector<Money> key(ds.size());
  bool descending = true;
  switch (policy) {
    case Policy::kModel: {
      if (pred == nullptr) throw Error(ErrorKind::kMissingPredictions, "the model policy needs predictions");
      std::unordered_map<std::int64_t, std::size_t> at;
      for (std::size_t q = 0; q < pred->ids.size(); ++q) at.emplace(pred->ids[q], q);
      for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto it = at.find(ds.claim(i).id);
        if (it == at.end()) {
          throw Error(ErrorKind::kMissingPredictions, "no prediction for claim " + std::to_string(ds.claim(i).id));
        }
        key[i] = pred->ca[it->second];
      }
      break;
    }
    case Policy::kBaseline:
      for (std::size_t i = 0; i < ds.size(); ++i) key[i] = ds.claim(i).billed;
      break;
    case Policy::kTheoreticalMax:
      key = true_ca(ds, ErrorKind::kMissingTruth);
      break;
    case Policy::kTheoreticalMin:
      key = true_ca(ds, ErrorKind::kMissingTruth);
      descending = false;
      break;
  }
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (key[a] != key[b]) return descending ? key[a] > key[b] : key[a] < key[b];
    return ds.claim(a).id < ds.claim(b).id;
  });
  return order;
}

Money ScenarioCurve::at(double f) const {
  const double n = static_cast<double>(order.size());
  const auto j = static_cast<std::size_t>(std::floor(std::clamp(f, 0.0, 1.0) * n + 1e-9));
  return cumulative[std::min(j, order.size())];
}

ScenarioCurve cumulative_curve(const std::vector<std::size_t>& order, const Dataset& ds, Policy policy) {
  if (order.size() != ds.size()) {
    throw Error(ErrorKind::kInvalidArgument, "review order does not cover the claims");
  }
  const std::vector<Money> ca = true_ca(ds, ErrorKind::kUnreviewed);
  ScenarioCurve c;
  c.policy = policy;
  c.order = order;
  c.cumulative.reserve(order.size() + 1);
  Money running;
  c.cumulative.push_back(running);
  for (auto row : order) {
    running += ca[row];
    c.cumulative.push_back(running);
  }
  return c;
}

ImprovementRow improvement_row(double fraction, Money baseline, Money model) {
  ImprovementRow r;
  r.fraction = fraction;
  r.baseline = baseline;
  r.model = model;
  r.improvement = model - baseline;
  r.percent = baseline.cents() == 0 ? std::numeric_limits<double>::quiet_NaN()
                                    : 100.0 * static_cast<double>(r.improvement.cents()) /
                                          static_cast<double>(baseline.cents());
  return r;
}

std::vector<ImprovementRow> improvement_table(const ScenarioCurve& model, const ScenarioCurve& baseline,
                                              const std::vector<double>& fractions) {
  if (model.size() != baseline.size()) {
    throw Error(ErrorKind::kInvalidArgument, "curves cover different claim sets");
  }
  std::vector<ImprovementRow> out;
  for (double f : fractions) out.push_back(improvement_row(f, baseline.at(f), model.at(f)));
  return out;
}

Money potential_savings(const Dataset& ds) {
  Money total;
  for (const auto& c : ds.claims()) {
    if (c.cost_avoidance && c.cost_avoidance->cents() > 0) total += *c.cost_avoidance;
  }
  if (total.cents() <= 0) throw Error(ErrorKind::kNoPositiveCA, "no claim has positive cost avoidance");
  return total;
}

std::vector<double> percent_of_potential(const ScenarioCurve& curve, const Dataset& ds) {
  const auto p = static_cast<double>(potential_savings(ds).cents());
  std::vector<double> out;
  out.reserve(curve.cumulative.size());
  for (Money m : curve.cumulative) out.push_back(100.0 * static_cast<double>(m.cents()) / p);
  return out;
}

namespace {

std::size_t bin_of(double v, double lo, double hi, std::size_t bins) {
  if (bins == 1 || !(hi > lo)) return 0;
  const double b = std::floor((v - lo) / (hi - lo) * static_cast<double>(bins));
  if (b < 0) return 0;
  // the top edge belongs to the last bin
  return std::min(static_cast<std::size_t>(b), bins - 1);
}

}  // namespace

Heatmap heatmap_bins(const Dataset& ds, const forest::CARPrediction& pred, std::string_view x_column,
                     std::size_t n_bins) {
  if (n_bins == 0) throw Error(ErrorKind::kInvalidArgument, "heat map needs at least one bin");
  if (is_categorical_column(ds, x_column)) {
    throw Error(ErrorKind::kInvalidArgument, "heat map column '" + std::string(x_column) + "' is not numeric");
  }
  if (pred.car.size() != ds.size()) {
    throw Error(ErrorKind::kMissingPredictions, "predictions do not cover the claims");
  }
  const std::vector<double> x = numeric_column(ds, x_column);
  Heatmap h;
  h.x_column = std::string(x_column);
  h.x_lo = h.car_lo = std::numeric_limits<double>::infinity();
  h.x_hi = h.car_hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i])) {
      ++h.skipped;
      continue;
    }
    h.x_lo = std::min(h.x_lo, x[i]);
    h.x_hi = std::max(h.x_hi, x[i]);
    h.car_lo = std::min(h.car_lo, pred.car[i]);
    h.car_hi = std::max(h.car_hi, pred.car[i]);
  }
  if (h.skipped == x.size()) throw Error(ErrorKind::kEmptyDataset, "no rows with a value for the heat map column");
  h.constant_x = !(h.x_hi > h.x_lo);
  h.x_bins = h.constant_x ? 1 : n_bins;
  h.car_bins = h.car_hi > h.car_lo ? n_bins : 1;
  h.counts.assign(h.x_bins * h.car_bins, 0);
  std::vector<double> sums(h.x_bins, 0.0);
  std::vector<std::size_t> per_x(h.x_bins, 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i])) continue;
    const std::size_t xb = bin_of(x[i], h.x_lo, h.x_hi, h.x_bins);
    const std::size_t cb = bin_of(pred.car[i], h.car_lo, h.car_hi, h.car_bins);
    ++h.counts[xb * h.car_bins + cb];
    sums[xb] += pred.car[i];
    ++per_x[xb];
  }
  for (std::size_t b = 0; b < h.x_bins; ++b) {
    h.mean_car.push_back(per_x[b] ? sums[b] / static_cast<double>(per_x[b]) : std::numeric_limits<double>::quiet_NaN());
  }
  return h;
}

EvalReport evaluate(const Dataset& ds, const forest::CARPrediction& pred, const std::vector<double>& fractions) {
  EvalReport r;
  for (Policy p : kAllPolicies) r.curves.push_back(cumulative_curve(rank_queue(&pred, ds, p), ds, p));
  r.table = improvement_table(r.curves[0], r.curves[1], fractions);
  r.potential = potential_savings(ds);
  return r;
}

void write_curves_csv(std::ostream& out, const std::vector<ScenarioCurve>& curves) {
  out << "fraction,cumulative_ca,scenario\n";
  for (const auto& c : curves) {
    for (std::size_t j = 0; j < c.cumulative.size(); ++j) {
      out << format_double(c.fraction(j)) << ',' << c.cumulative[j].to_string() << ',' << policy_name(c.policy)
          << '\n';
    }
  }
}

void write_improvement_csv(std::ostream& out, const std::vector<ImprovementRow>& table) {
  out << "percent_reviewed,baseline_ca,model_ca,improvement,percent_improvement\n";
  for (const auto& r : table) {
    out << format_double(std::round(r.fraction * 1e6) / 1e4) << ',' << r.baseline.to_string() << ','
        << r.model.to_string() << ',' << r.improvement.to_string() << ',' << format_double(std::round(r.percent * 100) / 100)
        << '\n';
  }
}

void write_potential_csv(std::ostream& out, const std::vector<ScenarioCurve>& curves, const Dataset& ds) {
  out << "fraction,percent_of_potential,scenario\n";
  for (const auto& c : curves) {
    const auto pct = percent_of_potential(c, ds);
    for (std::size_t j = 0; j < pct.size(); ++j) {
      out << format_double(c.fraction(j)) << ',' << format_double(pct[j]) << ',' << policy_name(c.policy) << '\n';
    }
  }
}

void write_heatmap_csv(std::ostream& out, const Heatmap& h) {
  out << "x_bin,x_lo,x_hi,car_bin,car_lo,car_hi,count\n";
  auto edge = [](double lo, double hi, std::size_t bins, std::size_t b) {
    return bins == 1 ? (b == 0 ? lo : hi) : lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
  };
  for (std::size_t xb = 0; xb < h.x_bins; ++xb) {
    for (std::size_t cb = 0; cb < h.car_bins; ++cb) {
      out << xb << ',' << format_double(edge(h.x_lo, h.x_hi, h.x_bins, xb)) << ','
          << format_double(edge(h.x_lo, h.x_hi, h.x_bins, xb + 1)) << ',' << cb << ','
          << format_double(edge(h.car_lo, h.car_hi, h.car_bins, cb)) << ','
          << format_double(edge(h.car_lo, h.car_hi, h.car_bins, cb + 1)) << ',' << h.count(xb, cb) << '\n';
    }
  }
}

void write_queue_csv(std::ostream& out, const Dataset& ds, const std::vector<std::size_t>& order,
                     const forest::CARPrediction* pred) {
  std::unordered_map<std::int64_t, std::size_t> at;
  if (pred)
    for (std::size_t q = 0; q < pred->ids.size(); ++q) at.emplace(pred->ids[q], q);
  out << "rank,id,billed,predicted_car,predicted_ca\n";
  for (std::size_t r = 0; r < order.size(); ++r) {
    const Claim& c = ds.claim(order[r]);
    out << r + 1 << ',' << c.id << ',' << c.billed.to_string() << ',';
    const auto it = pred ? at.find(c.id) : at.end();
    if (it != at.end()) out << format_double(pred->car[it->second]) << ',' << pred->ca[it->second].to_string();
    else out << ',';
    out << '\n';
  }
}

}  // namespace erclaims::econ
