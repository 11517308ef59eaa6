#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "erclaims/dataset.h"

namespace erclaims::datagen {

struct GroupLabel {
  std::string name;
  double weight = 1.0;         // relative share of claims
  double upcoding_rate = 0.0;  // probability a claim is upcoded
  int shift = 1;               // severity increase of an upcoded claim, 1..4
};

struct UpcodingConfig {
  std::size_t n = 2000;
  // Severity distribution of each diagnosis profile (index 0 is severity 1).
  std::vector<std::array<double, 5>> profiles = {
      {0.6, 0.3, 0.1, 0.0, 0.0},      // mean 1.5
      {0.05, 0.2, 0.5, 0.2, 0.05},    // mean 3.0
      {0.0, 0.0, 0.1, 0.3, 0.6},      // mean 4.5
  };
  int codes_per_profile = 20;
  std::vector<GroupLabel> groups = {
      {"acute_care", 0.7, 0.02, 1},
      {"freestanding_er", 0.3, 0.3, 1},
  };
  std::uint64_t seed = 1;
};

struct UpcodingTruth {
  std::vector<std::string> codes;
  std::vector<int> profile_of_code;  // 0-based profile per code
  // Per claim, in row order.
  std::vector<int> profile;
  std::vector<bool> upcoded;
  std::vector<int> original_severity;
};

struct UpcodingData {
  Dataset dataset;
  UpcodingTruth truth;
};

// Diagnosis code c (named D000, D001, ...) follows profile c % G. Throws
// BadConfig for an invalid config.
UpcodingData gen_upcoding_dataset(const UpcodingConfig& cfg);

// Coefficients of the cost-avoidance ratio signal for claims that are not
// understated.
struct CarCoefficients {
  double intercept = 0.05;
  double nline_pct = 0.35;
  double obs_units = 0.01;             // per observation unit, capped at 12
  double opioid_long_stay = 0.15;      // rx_opioid and obs_units > 8
  double provider_tier = 1.0;          // multiplies the planted provider tier effects
  double revenue_code = 1.0;           // multiplies the planted revenue code effects
};

struct CostConfig {
  std::size_t n = 5000;
  CarCoefficients coef;
  double noise_sd = 0.05;
  // Claims with underpay_risk below this rate get a negative ratio.
  double negative_rate = 0.1;
  int n_providers = 40;
  int n_diagnoses = 30;
  std::uint64_t seed = 1;
};

struct CostTruth {
  std::vector<double> car;  // planted ratio per claim, before cent rounding
  std::vector<bool> understated;
};

struct CostData {
  Dataset dataset;
  CostTruth truth;
};

// Feature columns: num_lines, nline_pct, obs_units, provider, revenue_code,
// rx_opioid, underpay_risk, noise_a. Billed scales with num_lines.
CostData gen_cost_avoidance_dataset(const CostConfig& cfg);

// Noise-free part of the ratio for one claim of a generated dataset.
double planted_car(const CostConfig& cfg, const Dataset& ds, std::size_t row);

void write_upcoding_truth_csv(std::ostream& out, const UpcodingData& data);
void write_cost_truth_csv(std::ostream& out, const CostData& data);

}  // namespace erclaims::datagen
