#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "erclaims/dataset.h"
#include "erclaims/forest.h"
#include "erclaims/money.h"

namespace erclaims::econ {

enum class Policy { kModel, kBaseline, kTheoreticalMax, kTheoreticalMin };

inline constexpr Policy kAllPolicies[] = {Policy::kModel, Policy::kBaseline, Policy::kTheoreticalMax,
                                          Policy::kTheoreticalMin};

const char* policy_name(Policy p);
std::optional<Policy> parse_policy(std::string_view name);

// Review order as row positions into ds. model: predicted CA descending;
// baseline: billed descending; theoretical_max / theoretical_min: true CA
// descending / ascending. Ties go to the lower claim id. `pred` is matched
// to claims by id and is only needed for the model policy.
// Throws MissingPredictions or MissingTruth.
std::vector<std::size_t> rank_queue(const forest::CARPrediction* pred, const Dataset& ds, Policy policy);

struct ScenarioCurve {
  Policy policy = Policy::kModel;
  std::vector<std::size_t> order;
  std::vector<Money> cumulative;  // cumulative[j]: true CA of the first j claims

  std::size_t size() const { return order.size(); }
  double fraction(std::size_t j) const { return static_cast<double>(j) / static_cast<double>(order.size()); }
  // Step interpolation: the total after floor(f * n) reviews.
  Money at(double f) const;
};

// Throws Unreviewed when a claim lacks its cost avoidance.
ScenarioCurve cumulative_curve(const std::vector<std::size_t>& order, const Dataset& ds, Policy policy);

struct ImprovementRow {
  double fraction = 0.0;
  Money baseline, model, improvement;
  double percent = 0.0;  // improvement / baseline * 100
};

ImprovementRow improvement_row(double fraction, Money baseline, Money model);
std::vector<ImprovementRow> improvement_table(const ScenarioCurve& model, const ScenarioCurve& baseline,
                                              const std::vector<double>& fractions);

// Sum of the positive true cost avoidances. Throws NoPositiveCA.
Money potential_savings(const Dataset& ds);

// Every curve value as a percentage of potential savings.
std::vector<double> percent_of_potential(const ScenarioCurve& curve, const Dataset& ds);

struct Heatmap {
  std::string x_column;
  double x_lo = 0, x_hi = 0, car_lo = 0, car_hi = 0;
  std::size_t x_bins = 0, car_bins = 0;
  std::vector<std::size_t> counts;  // x_bins * car_bins, x-major
  std::vector<double> mean_car;     // per x bin, NaN when empty
  std::size_t skipped = 0;          // rows with a missing x
  bool constant_x = false;

  std::size_t count(std::size_t xb, std::size_t cb) const { return counts[xb * car_bins + cb]; }
};

// Equal-width 2-D histogram of a numeric column against predicted CAR. A
// constant column yields one x bin and sets constant_x.
Heatmap heatmap_bins(const Dataset& ds, const forest::CARPrediction& pred, std::string_view x_column,
                     std::size_t n_bins);

inline const std::vector<double> kDefaultFractions = {0.1, 0.2, 0.3, 0.4, 0.5};

struct EvalReport {
  std::vector<ScenarioCurve> curves;  // in kAllPolicies order
  std::vector<ImprovementRow> table;
  Money potential;
};

EvalReport evaluate(const Dataset& ds, const forest::CARPrediction& pred,
                    const std::vector<double>& fractions = kDefaultFractions);

void write_curves_csv(std::ostream& out, const std::vector<ScenarioCurve>& curves);
void write_improvement_csv(std::ostream& out, const std::vector<ImprovementRow>& table);
void write_potential_csv(std::ostream& out, const std::vector<ScenarioCurve>& curves, const Dataset& ds);
void write_heatmap_csv(std::ostream& out, const Heatmap& h);
void write_queue_csv(std::ostream& out, const Dataset& ds, const std::vector<std::size_t>& order,
                     const forest::CARPrediction* pred);

}  // namespace erclaims::econ
