#include "erclaims/datagen.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "erclaims/error.h"
#include "erclaims/random.h"

namespace erclaims::datagen {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::kBadConfig, what);
}

std::string code_name(char prefix, int index, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%0*d", prefix, width, index);
  return buf;
}

// Index drawn with probability proportional to weights.
std::size_t draw_weighted(Rng& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform01() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

constexpr double kProviderTierEffect[4] = {-0.05, 0.0, 0.1, 0.25};
constexpr const char* kRevenueCodes[4] = {"R0450", "R0451", "R0456", "R0459"};
constexpr double kRevenueCodeEffect[4] = {0.0, 0.05, -0.03, 0.08};

// Provider p belongs to tier (p * 7) % 4 so tiers interleave across names.
int provider_tier(int provider) { return (provider * 7) % 4; }

}  // namespace

UpcodingData gen_upcoding_dataset(const UpcodingConfig& cfg) {
  require(cfg.n >= 1, "n must be at least 1");
  require(!cfg.profiles.empty(), "at least one severity profile is required");
  require(cfg.codes_per_profile >= 1, "codes_per_profile must be at least 1");
  require(!cfg.groups.empty(), "at least one group label is required");
  for (const auto& p : cfg.profiles) {
    double sum = 0.0;
    for (double v : p) {
      require(v >= 0.0 && v <= 1.0, "severity profile entries must lie in [0, 1]");
      sum += v;
    }
    require(std::fabs(sum - 1.0) <= 1e-9, "severity profile must sum to 1");
  }
  for (const auto& g : cfg.groups) {
    require(g.weight > 0.0, "group weight must be positive");
    require(g.upcoding_rate >= 0.0 && g.upcoding_rate <= 1.0, "upcoding rate must lie in [0, 1]");
    require(g.shift >= 1 && g.shift <= 4, "upcoding shift must be in 1..4");
  }

  Rng rng(cfg.seed);
  const int n_profiles = static_cast<int>(cfg.profiles.size());
  const int n_codes = n_profiles * cfg.codes_per_profile;
  const int width = n_codes > 1000 ? 4 : 3;
  UpcodingData out;
  Levels diagnoses, groups;
  // Codes are interned up front so level order matches code order.
  for (int c = 0; c < n_codes; ++c) {
    out.truth.codes.push_back(code_name('D', c, width));
    out.truth.profile_of_code.push_back(c % n_profiles);
    diagnoses.intern(out.truth.codes.back());
  }
  std::vector<double> group_weights;
  for (const auto& g : cfg.groups) {
    groups.intern(g.name);
    group_weights.push_back(g.weight);
  }
  std::vector<Claim> claims;
  claims.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    Claim c;
    c.id = static_cast<std::int64_t>(i + 1);
    c.diagnosis = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n_codes)));
    const int profile = c.diagnosis % n_profiles;
    const auto& probs = cfg.profiles[static_cast<std::size_t>(profile)];
    const int severity = 1 + static_cast<int>(draw_weighted(rng, std::vector<double>(probs.begin(), probs.end())));
    const std::size_t g = draw_weighted(rng, group_weights);
    c.group = static_cast<int>(g);
    const bool upcoded = rng.bernoulli(cfg.groups[g].upcoding_rate);
    c.severity = upcoded ? std::min(kMaxSeverity, severity + cfg.groups[g].shift) : severity;
    // Billed grows with the billed severity level.
    const double billed = std::exp(5.0 + 0.4 * c.severity + 0.3 * rng.normal());
    c.billed = Money::from_units(std::round(billed * 100.0) / 100.0);
    claims.push_back(c);
    out.truth.profile.push_back(profile);
    out.truth.upcoded.push_back(upcoded);
    out.truth.original_severity.push_back(severity);
  }
  out.dataset = Dataset({}, diagnoses, groups, {}, std::move(claims));
  return out;
}

double planted_car(const CostConfig& cfg, const Dataset& ds, std::size_t row) {
  const auto& f = ds.claim(row).features;
  const double nline_pct = f[1];
  const double obs_units = f[2];
  const int provider = static_cast<int>(f[3]);
  const int revenue = static_cast<int>(f[4]);
  const double rx_opioid = f[5];
  const double underpay_risk = f[6];
  if (underpay_risk < cfg.negative_rate) {
    // Understated claims: review raises the payment.
    return -(0.05 + 0.25 * (cfg.negative_rate - underpay_risk) / cfg.negative_rate);
  }
  // Level codes follow first appearance; map back through the names.
  const int p = std::stoi(ds.feature_levels(3).name(provider).substr(1));
  const std::string& rev = ds.feature_levels(4).name(revenue);
  int r = 0;
  while (kRevenueCodes[r] != rev) ++r;
  const auto& k = cfg.coef;
  return k.intercept + k.nline_pct * nline_pct + k.obs_units * std::min(obs_units, 12.0) +
         k.opioid_long_stay * (rx_opioid > 0.5 && obs_units > 8 ? 1.0 : 0.0) +
         k.provider_tier * kProviderTierEffect[provider_tier(p)] + k.revenue_code * kRevenueCodeEffect[r];
}

CostData gen_cost_avoidance_dataset(const CostConfig& cfg) {
  require(cfg.n >= 1, "n must be at least 1");
  require(cfg.noise_sd >= 0.0, "noise_sd must be non-negative");
  require(cfg.negative_rate >= 0.0 && cfg.negative_rate <= 1.0, "negative_rate must lie in [0, 1]");
  require(cfg.n_providers >= 1, "n_providers must be at least 1");
  require(cfg.n_diagnoses >= 1, "n_diagnoses must be at least 1");

  Rng rng(cfg.seed);
  const Schema schema = {
      {"num_lines", ColumnKind::kNumeric},     {"nline_pct", ColumnKind::kNumeric},
      {"obs_units", ColumnKind::kNumeric},     {"provider", ColumnKind::kCategorical},
      {"revenue_code", ColumnKind::kCategorical}, {"rx_opioid", ColumnKind::kNumeric},
      {"underpay_risk", ColumnKind::kNumeric}, {"noise_a", ColumnKind::kNumeric},
  };
  Levels diagnoses, groups;
  std::vector<Levels> feature_levels(schema.size());
  const int diag_width = cfg.n_diagnoses > 1000 ? 4 : 3;
  for (int d = 0; d < cfg.n_diagnoses; ++d) diagnoses.intern(code_name('D', d, diag_width));
  groups.intern("acute_care");
  groups.intern("freestanding_er");
  const int provider_width = cfg.n_providers > 100 ? 3 : 2;
  for (int p = 0; p < cfg.n_providers; ++p) feature_levels[3].intern(code_name('P', p, provider_width));
  for (const char* rev : kRevenueCodes) feature_levels[4].intern(rev);

  std::vector<Claim> claims;
  claims.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    Claim c;
    c.id = static_cast<std::int64_t>(i + 1);
    c.diagnosis = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(cfg.n_diagnoses)));
    c.severity = 1 + static_cast<int>(rng.uniform_index(5));
    c.group = rng.bernoulli(0.3) ? 1 : 0;
    const double num_lines = 1.0 + static_cast<double>(rng.uniform_index(20));
    const double per_line = std::exp(4.5 + 0.5 * rng.normal());
    c.billed = Money::from_units(std::max(50.0, std::round(num_lines * per_line * 100.0) / 100.0));
    c.features.resize(schema.size());
    c.features[0] = num_lines;
    c.features[1] = rng.uniform01();
    c.features[2] = static_cast<double>(rng.uniform_index(static_cast<std::size_t>(num_lines) + 1));
    c.features[3] = static_cast<double>(rng.uniform_index(static_cast<std::size_t>(cfg.n_providers)));
    c.features[4] = static_cast<double>(rng.uniform_index(4));
    c.features[5] = rng.bernoulli(0.25) ? 1.0 : 0.0;
    c.features[6] = rng.uniform01();
    c.features[7] = rng.normal();
    claims.push_back(std::move(c));
  }
  CostData out;
  out.dataset = Dataset(schema, diagnoses, groups, feature_levels, std::move(claims));

  // Second pass so the ratio can reuse planted_car on the finished dataset.
  std::vector<Claim> finished = out.dataset.claims();
  for (std::size_t i = 0; i < finished.size(); ++i) {
    const double signal = planted_car(cfg, out.dataset, i);
    const bool understated = finished[i].features[6] < cfg.negative_rate;
    double car = understated ? signal : std::clamp(signal + cfg.noise_sd * rng.normal(), 0.0, 1.0);
    car = std::min(car, 1.0);
    const auto billed = static_cast<double>(finished[i].billed.cents());
    finished[i].cost_avoidance = Money::from_cents(static_cast<std::int64_t>(std::llround(car * billed)));
    out.truth.car.push_back(car);
    out.truth.understated.push_back(understated);
  }
  out.dataset = Dataset(schema, out.dataset.diagnosis_levels(), out.dataset.group_levels(), feature_levels,
                        std::move(finished));
  return out;
}

void write_upcoding_truth_csv(std::ostream& out, const UpcodingData& data) {
  out << "id,diagnosis,profile,upcoded,original_severity\n";
  const Dataset& ds = data.dataset;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.claim(i).id << ',' << csv_escape(ds.diagnosis_levels().name(ds.claim(i).diagnosis)) << ','
        << data.truth.profile[i] + 1 << ',' << (data.truth.upcoded[i] ? 1 : 0) << ','
        << data.truth.original_severity[i] << '\n';
  }
}

void write_cost_truth_csv(std::ostream& out, const CostData& data) {
  out << "id,true_car,understated\n";
  const Dataset& ds = data.dataset;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.claim(i).id << ',' << format_double(data.truth.car[i]) << ','
        << (data.truth.understated[i] ? 1 : 0) << '\n';
  }
}

}  // namespace erclaims::datagen
