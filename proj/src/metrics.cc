#include "erclaims/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

#include "erclaims/error.h"

namespace erclaims::metrics {

double SeverityProbVector::at_least(int severity) const {
  double total = 0.0;
  for (int s = std::max(severity, 1); s <= 5; ++s) total += p[static_cast<std::size_t>(s - 1)];
  return total;
}

double binary_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorKind::kInvalidArgument, "binary_auc: length mismatch");
  }
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks of the positives give the Mann-Whitney U statistic.
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] != 0) {
        positive_rank_sum += midrank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) return std::numeric_limits<double>::quiet_NaN();
  const double np = static_cast<double>(positives);
  const double u = positive_rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(negatives));
}

double ordinal_auc(std::span<const SeverityProbVector> preds, std::span<const int> truth) {
  if (preds.size() != truth.size() || preds.size() < 2) {
    throw Error(ErrorKind::kInvalidArgument, "ordinal_auc needs two equal-length lists of at least 2");
  }
  std::vector<double> scores(preds.size());
  std::vector<int> labels(preds.size());
  double total = 0.0;
  int used = 0;
  for (int t = 2; t <= 5; ++t) {
    for (std::size_t i = 0; i < preds.size(); ++i) {
      scores[i] = preds[i].at_least(t);
      labels[i] = truth[i] >= t ? 1 : 0;
    }
    const double auc = binary_auc(scores, labels);
    if (std::isnan(auc)) continue;
    total += auc;
    ++used;
  }
  if (used == 0) throw Error(ErrorKind::kDegenerateLabels, "ordinal_auc: every threshold has a single label");
  return total / used;
}

double r_squared(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || truth.size() < 2) {
    throw Error(ErrorKind::kInvalidArgument, "r_squared needs two equal-length lists of at least 2");
  }
  const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
  double sse = 0.0;
  double sst = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    sse += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    sst += (truth[i] - mean) * (truth[i] - mean);
  }
  if (sst == 0.0) throw Error(ErrorKind::kConstantTruth, "r_squared: truth is constant");
  return 1.0 - sse / sst;
}

namespace {

std::pair<double, double> mean_and_variance(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, ss / (n - 1.0)};
}

double beta_continued_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  // The continued fraction converges fast only below the mean a/(a+b).
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(log_front) * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - std::exp(log_front) * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  const double t2 = t * t;
  // P(|T| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2). Evaluating this form directly
  // keeps relative precision in the far tail; the complement is only taken
  // inside the beta function, where the result is close to 1.
  return regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t2));
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw Error(ErrorKind::kInvalidArgument, "welch_t_test needs at least 2 values per sample");
  }
  const auto [mean_a, var_a] = mean_and_variance(a);
  const auto [mean_b, var_b] = mean_and_variance(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  WelchResult out;
  if (var_a == 0.0 && var_b == 0.0) {
    out.zero_variance = true;
    out.df = na + nb - 2.0;
    if (mean_a == mean_b) {
      out.t = 0.0;
      out.p = 1.0;
    } else {
      out.t = mean_a > mean_b ? std::numeric_limits<double>::infinity()
                              : -std::numeric_limits<double>::infinity();
      out.p = 0.0;
    }
    return out;
  }
  const double ua = var_a / na;
  const double ub = var_b / nb;
  const double se2 = ua + ub;
  out.t = (mean_a - mean_b) / std::sqrt(se2);
  out.df = se2 * se2 / (ua * ua / (na - 1.0) + ub * ub / (nb - 1.0));
  out.p = std::clamp(student_t_two_sided_p(out.t, out.df), 0.0, 1.0);
  return out;
}

double adjusted_rand_index(std::span<const int> labels_a, std::span<const int> labels_b) {
  if (labels_a.size() != labels_b.size()) {
    throw Error(ErrorKind::kInvalidArgument, "adjusted_rand_index: length mismatch");
  }
  auto choose2 = [](double m) { return m * (m - 1.0) / 2.0; };
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> row;
  std::map<int, double> col;
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    joint[{labels_a[i], labels_b[i]}] += 1.0;
    row[labels_a[i]] += 1.0;
    col[labels_b[i]] += 1.0;
  }
  double index = 0.0;
  for (const auto& [key, count] : joint) index += choose2(count);
  double sum_a = 0.0;
  for (const auto& [key, count] : row) sum_a += choose2(count);
  double sum_b = 0.0;
  for (const auto& [key, count] : col) sum_b += choose2(count);
  const double total = choose2(static_cast<double>(labels_a.size()));
  const double expected = total > 0 ? sum_a * sum_b / total : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace erclaims::metrics
