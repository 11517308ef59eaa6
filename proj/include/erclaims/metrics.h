#pragma once

#include <array>
#include <span>

namespace erclaims::metrics {

// Predicted probabilities for severities 1..5 (index 0 is severity 1).
struct SeverityProbVector {
  std::array<double, 5> p{};

  double at_least(int severity) const;  // sum of p(s) for s >= severity
};

// Binary AUC (Mann-Whitney), ties in score count 1/2. Labels are 0/1.
// Returns NaN when all labels are equal.
double binary_auc(std::span<const double> scores, std::span<const int> labels);

// Mean over thresholds t = 2..5 of the binary AUC of P(S >= t) against
// 1{truth >= t}. Thresholds whose labels are all equal are skipped.
// Throws DegenerateLabels when every threshold is skipped.
double ordinal_auc(std::span<const SeverityProbVector> preds, std::span<const int> truth);

// 1 - SSE/SST. Throws ConstantTruth when truth has zero spread.
double r_squared(std::span<const double> pred, std::span<const double> truth);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
  // Both samples have zero variance; t is 0 (equal means) or +-inf.
  bool zero_variance = false;
};

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

// Two-sided tail probability P(|T| >= |t|) for Student's t with df degrees of
// freedom.
double student_t_two_sided_p(double t, double df);

// Adjusted Rand index of two labelings of the same items.
double adjusted_rand_index(std::span<const int> labels_a, std::span<const int> labels_b);

}  // namespace erclaims::metrics
