#include "erclaims/forest.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include <Eigen/Dense>

#include "erclaims/error.h"
#include "json.hpp"

namespace erclaims::forest {

double compute_car(const Claim& claim) {
  if (!claim.cost_avoidance) {
    throw Error(ErrorKind::kUnreviewed, "claim " + std::to_string(claim.id) + " has no cost avoidance");
  }
  if (claim.billed.cents() == 0) {
    throw Error(ErrorKind::kZeroBilled, "claim " + std::to_string(claim.id) + " has billed amount 0");
  }
  return static_cast<double>(claim.cost_avoidance->cents()) / static_cast<double>(claim.billed.cents());
}

// ---------------------------------------------------------------------------
// Trees

double Tree::predict(const Table& t, const double* row) const {
  const Node& leaf = nodes[leaf_index(row)];
  if (leaf.coef.empty()) return leaf.value;
  double v = leaf.coef[0];
  std::size_t k = 1;
  for (std::size_t j = 0; j < t.cols(); ++j) {
    if (t.kinds[j] == ColumnKind::kNumeric) v += leaf.coef[k++] * row[j];
  }
  return v;
}

std::size_t Tree::leaf_index(const double* row) const {
  std::size_t i = 0;
  while (nodes[i].column >= 0) {
    const Node& n = nodes[i];
    const double x = row[n.column];
    bool left;
    if (n.left_levels.empty()) {
      left = x < n.threshold;
    } else {
      const auto code = static_cast<long long>(x);
      left = code < 0 || code >= static_cast<long long>(n.left_levels.size())
                 ? n.unseen_left
                 : n.left_levels[static_cast<std::size_t>(code)] != 0;
    }
    i = static_cast<std::size_t>(left ? n.left : n.right);
  }
  return i;
}

std::vector<std::size_t> sample_columns(Rng& rng, std::size_t p, std::size_t k) {
  std::vector<std::size_t> all(p);
  std::iota(all.begin(), all.end(), std::size_t{0});
  k = std::min(k, p);
  // Partial Fisher-Yates: the first k slots become the sample.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_index(p - i);
    std::swap(all[i], all[j]);
  }
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

namespace {

struct Split {
  int column = -1;
  double score = 0.0;  // between-children sum of squares; larger is better
  double threshold = 0.0;
  std::vector<char> left_levels;
  bool unseen_left = false;
};

class TreeBuilder {
 public:
  TreeBuilder(const Table& t, const TreeConfig& cfg, Rng& rng) : t_(t), cfg_(cfg), rng_(rng) {
    for (std::size_t j = 0; j < t.cols(); ++j)
      if (t.kinds[j] == ColumnKind::kNumeric) numeric_.push_back(j);
  }

  Tree build(std::vector<std::size_t> rows) {
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const double n = static_cast<double>(rows.size());
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (auto r : rows) {
      sum += t_.y[r];
      lo = std::min(lo, t_.y[r]);
      hi = std::max(hi, t_.y[r]);
    }
    const double mean = sum / n;
    double impurity = 0.0;
    for (auto r : rows) impurity += (t_.y[r] - mean) * (t_.y[r] - mean);
    {
      Node& node = tree_.nodes[static_cast<std::size_t>(id)];
      node.value = mean;
      node.count = rows.size();
      node.impurity = impurity;
    }

    const bool stop = rows.size() < 2 * cfg_.min_leaf || (cfg_.max_depth > 0 && depth >= cfg_.max_depth) || lo == hi;
    Split best;
    if (!stop) {
      for (std::size_t c : sample_columns(rng_, t_.cols(), cfg_.mtry)) {
        if (t_.kinds[c] == ColumnKind::kNumeric) scan_numeric(rows, c, mean, best);
        else scan_categorical(rows, c, mean, best);
      }
    }
    if (best.column < 0) {
      make_leaf(rows, id);
      return id;
    }

    std::vector<std::size_t> left_rows, right_rows;
    for (auto r : rows) {
      const double x = t_.at(r, static_cast<std::size_t>(best.column));
      const bool left = best.left_levels.empty() ? x < best.threshold
                                                 : best.left_levels[static_cast<std::size_t>(x)] != 0;
      (left ? left_rows : right_rows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    {
      Node& node = tree_.nodes[static_cast<std::size_t>(id)];
      node.column = best.column;
      node.threshold = best.threshold;
      node.left_levels = std::move(best.left_levels);
      node.unseen_left = best.unseen_left;
    }
    const int l = grow(left_rows, depth + 1);
    const int r = grow(right_rows, depth + 1);
    tree_.nodes[static_cast<std::size_t>(id)].left = l;
    tree_.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  // Children sums are of targets centered on the node mean, which keeps the
  // score free of cancellation against the node total.
  static double score(double sl, double nl, double sr, double nr) { return sl * sl / nl + sr * sr / nr; }

  void scan_numeric(const std::vector<std::size_t>& rows, std::size_t c, double mean, Split& best) {
    xy_.clear();
    double total = 0.0;
    for (auto r : rows) {
      xy_.emplace_back(t_.at(r, c), t_.y[r] - mean);
      total += t_.y[r] - mean;
    }
    std::sort(xy_.begin(), xy_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    const std::size_t n = xy_.size();
    double sl = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      sl += xy_[i].second;
      const std::size_t nl = i + 1;
      if (nl < cfg_.min_leaf) continue;
      if (n - nl < cfg_.min_leaf) break;
      if (!(xy_[i].first < xy_[i + 1].first)) continue;
      const double s = score(sl, static_cast<double>(nl), total - sl, static_cast<double>(n - nl));
      if (s > best.score) {
        best.column = static_cast<int>(c);
        best.score = s;
        double thr = 0.5 * (xy_[i].first + xy_[i + 1].first);
        if (!(xy_[i].first < thr)) thr = xy_[i + 1].first;
        best.threshold = thr;
        best.left_levels.clear();
      }
    }
  }

  void scan_categorical(const std::vector<std::size_t>& rows, std::size_t c, double mean, Split& best) {
    const auto n_levels = static_cast<std::size_t>(t_.n_levels[c]);
    std::vector<double> sums(n_levels, 0.0);
    std::vector<std::size_t> counts(n_levels, 0);
    for (auto r : rows) {
      const auto code = static_cast<std::size_t>(t_.at(r, c));
      sums[code] += t_.y[r] - mean;
      ++counts[code];
    }
    std::vector<std::size_t> present;
    for (std::size_t l = 0; l < n_levels; ++l)
      if (counts[l] > 0) present.push_back(l);
    if (present.size() < 2) return;
    std::stable_sort(present.begin(), present.end(), [&](std::size_t a, std::size_t b) {
      return sums[a] / static_cast<double>(counts[a]) < sums[b] / static_cast<double>(counts[b]);
    });
    double total = 0.0;
    for (double s : sums) total += s;
    const std::size_t n = rows.size();
    double sl = 0.0;
    std::size_t nl = 0;
    for (std::size_t j = 0; j + 1 < present.size(); ++j) {
      sl += sums[present[j]];
      nl += counts[present[j]];
      if (nl < cfg_.min_leaf) continue;
      if (n - nl < cfg_.min_leaf) break;
      const double s = score(sl, static_cast<double>(nl), total - sl, static_cast<double>(n - nl));
      if (s > best.score) {
        best.column = static_cast<int>(c);
        best.score = s;
        best.unseen_left = nl >= n - nl;
        best.left_levels.assign(n_levels, best.unseen_left ? 1 : 0);
        for (std::size_t q = 0; q < present.size(); ++q) best.left_levels[present[q]] = q <= j ? 1 : 0;
      }
    }
  }

  void make_leaf(const std::vector<std::size_t>& rows, int id) {
    if (cfg_.leaf != LeafKind::kLinear || numeric_.empty()) return;
    const auto p = static_cast<Eigen::Index>(numeric_.size() + 1);
    const auto n = static_cast<Eigen::Index>(rows.size());
    if (n <= p) return;
    Eigen::MatrixXd a(n, p);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto r = rows[static_cast<std::size_t>(i)];
      a(i, 0) = 1.0;
      for (std::size_t k = 0; k < numeric_.size(); ++k) a(i, static_cast<Eigen::Index>(k + 1)) = t_.at(r, numeric_[k]);
      b(i) = t_.y[r];
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    // Rank-deficient leaves keep the mean.
    if (qr.rank() < p) return;
    const Eigen::VectorXd coef = qr.solve(b);
    if (!coef.allFinite()) return;
    tree_.nodes[static_cast<std::size_t>(id)].coef.assign(coef.data(), coef.data() + coef.size());
  }

  const Table& t_;
  const TreeConfig& cfg_;
  Rng& rng_;
  Tree tree_;
  std::vector<std::size_t> numeric_;
  std::vector<std::pair<double, double>> xy_;
};

}  // namespace

Tree fit_tree(const Table& t, std::span<const std::size_t> rows, const TreeConfig& cfg, Rng& rng) {
  if (rows.empty()) throw Error(ErrorKind::kEmptyTrain, "cannot fit a tree on zero rows");
  if (t.y.size() != t.rows) throw Error(ErrorKind::kInvalidArgument, "table has no target");
  if (cfg.mtry == 0 || cfg.min_leaf == 0) {
    throw Error(ErrorKind::kBadConfig, "mtry and min_leaf must be positive");
  }
  std::vector<std::size_t> sorted(rows.begin(), rows.end());
  // Row order never matters, only the multiset of rows.
  std::sort(sorted.begin(), sorted.end());
  TreeBuilder builder(t, cfg, rng);
  return builder.build(std::move(sorted));
}

// ---------------------------------------------------------------------------
// Encoding

std::uint64_t schema_fingerprint(const Schema& schema) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](std::string_view s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  for (auto name : kFixedColumns) feed(name);
  for (const auto& c : schema) {
    feed(c.name);
    feed(c.kind == ColumnKind::kNumeric ? "numeric" : "categorical");
  }
  return h;
}

std::size_t ForestModel::oob_count(std::size_t tree) const {
  return static_cast<std::size_t>(std::count(inbag[tree].begin(), inbag[tree].end(), 0u));
}

Table encode(const ForestModel& model, const Dataset& ds, bool with_target) {
  if (schema_fingerprint(ds.schema()) != model.fingerprint) {
    throw Error(ErrorKind::kSchemaMismatch, "claims do not have the columns the model was trained on");
  }
  Table t;
  t.rows = ds.size();
  const std::size_t p = model.columns.size();
  t.x.assign(t.rows * p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    const EncodedColumn& col = model.columns[j];
    t.names.push_back(col.name);
    t.kinds.push_back(col.kind);
    if (col.kind == ColumnKind::kNumeric) {
      t.n_levels.push_back(0);
      const std::vector<double> v = numeric_column(ds, col.name);
      for (std::size_t i = 0; i < t.rows; ++i) t.x[i * p + j] = std::isnan(v[i]) ? col.median : v[i];
      continue;
    }
    const CategoricalColumn cc = categorical_column(ds, col.name);
    std::vector<double> code_of(cc.levels.size(), -1.0);
    for (std::size_t l = 0; l < cc.levels.size(); ++l) {
      if (col.reduced) {
        code_of[l] = col.clusters.cluster_or_fallback(cc.levels[l]) - 1;
      } else {
        const auto it = std::find(col.levels.begin(), col.levels.end(), cc.levels[l]);
        if (it != col.levels.end()) code_of[l] = static_cast<double>(it - col.levels.begin());
      }
    }
    t.n_levels.push_back(col.reduced ? col.clusters.k() : static_cast<int>(col.levels.size()));
    for (std::size_t i = 0; i < t.rows; ++i) t.x[i * p + j] = code_of[static_cast<std::size_t>(cc.codes[i])];
  }
  if (with_target) {
    t.y.resize(t.rows);
    for (std::size_t i = 0; i < t.rows; ++i) t.y[i] = compute_car(ds.claim(i));
  }
  return t;
}

namespace {

std::vector<std::string> default_features(const Dataset& ds) {
  std::vector<std::string> out = {"billed", "severity", "diagnosis", "group"};
  for (const auto& c : ds.schema()) out.push_back(c.name);
  return out;
}

bool column_exists(const Dataset& ds, const std::string& name) {
  return name == "billed" || name == "severity" || name == "diagnosis" || name == "group" ||
         ds.feature_index(name).has_value();
}

// Runs body(i) for i in [0, n) on up to `threads` workers; i is handled by
// worker i % threads, so the work split never depends on timing.
template <typename Body>
void parallel_for(std::size_t n, int threads, Body body) {
  std::size_t workers = threads <= 0 ? std::max(1u, std::thread::hardware_concurrency())
                                     : static_cast<std::size_t>(threads);
  workers = std::min(workers, std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

ForestModel fit_forest(const Dataset& train, const ForestConfig& cfg, int threads) {
  if (train.empty()) throw Error(ErrorKind::kEmptyTrain, "training data has no claims");
  if (cfg.n_trees < 1) throw Error(ErrorKind::kBadConfig, "n_trees must be at least 1");
  if (cfg.min_leaf < 1) throw Error(ErrorKind::kBadConfig, "min_leaf must be at least 1");
  for (const auto& c : train.claims()) compute_car(c);

  ForestModel model;
  model.config = cfg;
  model.schema = train.schema();
  model.fingerprint = schema_fingerprint(train.schema());
  if (model.config.features.empty()) model.config.features = default_features(train);
  for (const auto& name : model.config.features) {
    if (!column_exists(train, name)) throw Error(ErrorKind::kMissingColumn, "no column named '" + name + "'");
    EncodedColumn col;
    col.name = name;
    if (is_categorical_column(train, name)) {
      col.kind = ColumnKind::kCategorical;
      if (cfg.reduce_categoricals) {
        const cluster::LevelClustering lc =
            cluster::cluster_levels_by_target(train, name, cfg.cluster_target, cfg.seed, cfg.cluster_k_max);
        col.reduced = true;
        col.clusters = lc.assignment;
        col.mean_distance_fallback = lc.mean_distance_fallback;
      } else {
        col.levels = categorical_column(train, name).levels;
      }
    } else {
      std::vector<double> v = numeric_column(train, name);
      v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
      std::sort(v.begin(), v.end());
      col.median = v.empty() ? 0.0 : cluster::quantile_sorted(v, 0.5);
    }
    model.columns.push_back(std::move(col));
  }
  const std::size_t p = model.columns.size();
  if (p == 0) throw Error(ErrorKind::kBadConfig, "no feature columns selected");
  if (model.config.mtry == 0) model.config.mtry = (p + 2) / 3;
  model.config.mtry = std::min(model.config.mtry, p);

  const Table table = encode(model, train, true);
  const std::size_t n = train.size();
  for (const auto& c : train.claims()) model.train_ids.push_back(c.id);
  const auto n_trees = static_cast<std::size_t>(cfg.n_trees);
  model.trees.resize(n_trees);
  model.inbag.assign(n_trees, std::vector<std::uint32_t>(n, 0));
  const TreeConfig tree_cfg{model.config.mtry, cfg.min_leaf, cfg.max_depth, cfg.leaf};

  parallel_for(n_trees, threads, [&](std::size_t t) {
    Rng rng = Rng::stream(cfg.seed, t);
    std::vector<std::size_t> rows(n);
    auto& counts = model.inbag[t];
    for (std::size_t i = 0; i < n; ++i) {
      rows[i] = cfg.bootstrap ? rng.uniform_index(n) : i;
      ++counts[rows[i]];
    }
    model.trees[t] = fit_tree(table, rows, tree_cfg, rng);
  });
  return model;
}

double predict_row(const ForestModel& model, const Table& t, std::size_t row) {
  double sum = 0.0;
  for (const auto& tree : model.trees) sum += tree.predict(t, t.row(row));
  return sum / static_cast<double>(model.trees.size());
}

CARPrediction predict_car(const ForestModel& model, const Dataset& ds, int threads) {
  const Table t = encode(model, ds, false);
  CARPrediction out;
  out.car.resize(ds.size());
  out.ca.resize(ds.size());
  parallel_for(ds.size(), threads, [&](std::size_t i) {
    const double car = std::min(predict_row(model, t, i), 1.0);
    out.car[i] = car;
    out.ca[i] = Money::from_cents(std::llround(car * static_cast<double>(ds.claim(i).billed.cents())));
  });
  for (const auto& c : ds.claims()) out.ids.push_back(c.id);
  return out;
}

OobResult oob_mse(const ForestModel& model, const Dataset& train) {
  if (train.size() != model.train_ids.size()) {
    throw Error(ErrorKind::kInvalidArgument, "out-of-bag error needs the training data the model was fitted on");
  }
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train.claim(i).id != model.train_ids[i]) {
      throw Error(ErrorKind::kInvalidArgument, "training data rows differ from the fitted model's rows");
    }
  }
  const Table t = encode(model, train, true);
  OobResult out;
  double sse = 0.0;
  for (std::size_t i = 0; i < t.rows; ++i) {
    double sum = 0.0;
    std::size_t k = 0;
    for (std::size_t tr = 0; tr < model.trees.size(); ++tr) {
      if (model.inbag[tr][i] != 0) continue;
      sum += model.trees[tr].predict(t, t.row(i));
      ++k;
    }
    if (k == 0) {
      ++out.rows_skipped;
      continue;
    }
    const double pred = std::min(sum / static_cast<double>(k), 1.0);
    sse += (pred - t.y[i]) * (pred - t.y[i]);
    ++out.rows_used;
  }
  if (out.rows_used == 0) throw Error(ErrorKind::kNoOOBRows, "no training row is out of bag for any tree");
  out.mse = sse / static_cast<double>(out.rows_used);
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

using nlohmann::json;

constexpr const char* kFormat = "erclaims-forest";
constexpr int kVersion = 1;

const char* kind_name(ColumnKind k) { return k == ColumnKind::kNumeric ? "numeric" : "categorical"; }

ColumnKind kind_from(const std::string& s) {
  if (s == "numeric") return ColumnKind::kNumeric;
  if (s == "categorical") return ColumnKind::kCategorical;
  throw Error(ErrorKind::kBadModelFile, "unknown column kind '" + s + "'");
}

std::string levels_mask(const std::vector<char>& left) {
  std::string s;
  for (char c : left) s.push_back(c ? '1' : '0');
  return s;
}

}  // namespace

void save_forest(std::ostream& out, const ForestModel& model) {
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["fingerprint"] = model.fingerprint;
  json schema = json::array();
  for (const auto& c : model.schema) schema.push_back({{"name", c.name}, {"kind", kind_name(c.kind)}});
  j["schema"] = schema;
  const ForestConfig& c = model.config;
  j["config"] = {{"n_trees", c.n_trees},
                 {"mtry", c.mtry},
                 {"min_leaf", c.min_leaf},
                 {"max_depth", c.max_depth},
                 {"leaf", c.leaf == LeafKind::kMean ? "mean" : "linear"},
                 {"bootstrap", c.bootstrap},
                 {"seed", c.seed},
                 {"features", c.features},
                 {"reduce_categoricals", c.reduce_categoricals},
                 {"cluster_k_max", c.cluster_k_max},
                 {"cluster_target", c.cluster_target}};
  json cols = json::array();
  for (const auto& col : model.columns) {
    json e = {{"name", col.name}, {"kind", kind_name(col.kind)}};
    if (col.kind == ColumnKind::kNumeric) {
      e["median"] = col.median;
    } else if (col.reduced) {
      e["reduced"] = true;
      e["k"] = col.clusters.k();
      e["levels"] = col.clusters.levels();
      e["cluster_of"] = col.clusters.cluster_of();
      e["cluster_means"] = col.clusters.cluster_means();
      e["fallback_cluster"] = col.clusters.fallback_cluster();
      e["mean_distance_fallback"] = col.mean_distance_fallback;
    } else {
      e["reduced"] = false;
      e["levels"] = col.levels;
    }
    cols.push_back(std::move(e));
  }
  j["columns"] = cols;
  j["train_ids"] = model.train_ids;
  json trees = json::array();
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    json nodes = json::array();
    for (const auto& n : model.trees[t].nodes) {
      // [column, threshold, left, right, value, count, impurity, unseen_left, left_levels, coef]
      nodes.push_back(json::array({n.column, n.threshold, n.left, n.right, n.value, n.count, n.impurity,
                                   n.unseen_left, levels_mask(n.left_levels), n.coef}));
    }
    trees.push_back({{"nodes", nodes}, {"inbag", model.inbag[t]}});
  }
  j["trees"] = trees;
  out << j.dump() << '\n';
}

ForestModel load_forest(std::istream& in) {
  ForestModel m;
  try {
    const json j = json::parse(in);
    if (j.at("format") != kFormat) throw Error(ErrorKind::kBadModelFile, "not a forest model file");
    if (j.at("version") != kVersion) {
      throw Error(ErrorKind::kBadModelFile, "unsupported model version " + j.at("version").dump());
    }
    m.fingerprint = j.at("fingerprint").get<std::uint64_t>();
    for (const auto& c : j.at("schema")) {
      m.schema.push_back({c.at("name").get<std::string>(), kind_from(c.at("kind").get<std::string>())});
    }
    if (schema_fingerprint(m.schema) != m.fingerprint) {
      throw Error(ErrorKind::kBadModelFile, "model fingerprint does not match its schema");
    }
    const json& c = j.at("config");
    m.config.n_trees = c.at("n_trees").get<int>();
    m.config.mtry = c.at("mtry").get<std::size_t>();
    m.config.min_leaf = c.at("min_leaf").get<std::size_t>();
    m.config.max_depth = c.at("max_depth").get<int>();
    m.config.leaf = c.at("leaf") == "linear" ? LeafKind::kLinear : LeafKind::kMean;
    m.config.bootstrap = c.at("bootstrap").get<bool>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.config.features = c.at("features").get<std::vector<std::string>>();
    m.config.reduce_categoricals = c.at("reduce_categoricals").get<bool>();
    m.config.cluster_k_max = c.at("cluster_k_max").get<int>();
    m.config.cluster_target = c.at("cluster_target").get<std::string>();
    for (const auto& e : j.at("columns")) {
      EncodedColumn col;
      col.name = e.at("name").get<std::string>();
      col.kind = kind_from(e.at("kind").get<std::string>());
      if (col.kind == ColumnKind::kNumeric) {
        col.median = e.at("median").get<double>();
      } else if (e.at("reduced").get<bool>()) {
        col.reduced = true;
        col.clusters = cluster::ClusterAssignment(col.name, e.at("k").get<int>(),
                                                  e.at("levels").get<std::vector<std::string>>(),
                                                  e.at("cluster_of").get<std::vector<int>>());
        auto means = e.at("cluster_means").get<std::vector<double>>();
        const int fallback = e.at("fallback_cluster").get<int>();
        if (fallback < 1 || fallback > static_cast<int>(means.size())) {
          throw Error(ErrorKind::kBadModelFile, "bad fallback cluster for column '" + col.name + "'");
        }
        const double anchor = means[static_cast<std::size_t>(fallback - 1)];
        col.clusters.set_target_means(std::move(means), anchor);
        col.mean_distance_fallback = e.at("mean_distance_fallback").get<bool>();
      } else {
        col.levels = e.at("levels").get<std::vector<std::string>>();
      }
      m.columns.push_back(std::move(col));
    }
    m.train_ids = j.at("train_ids").get<std::vector<std::int64_t>>();
    for (const auto& jt : j.at("trees")) {
      Tree tree;
      for (const auto& jn : jt.at("nodes")) {
        Node n;
        n.column = jn.at(0).get<int>();
        n.threshold = jn.at(1).get<double>();
        n.left = jn.at(2).get<int>();
        n.right = jn.at(3).get<int>();
        n.value = jn.at(4).get<double>();
        n.count = jn.at(5).get<std::size_t>();
        n.impurity = jn.at(6).get<double>();
        n.unseen_left = jn.at(7).get<bool>();
        for (char ch : jn.at(8).get<std::string>()) n.left_levels.push_back(ch == '1' ? 1 : 0);
        n.coef = jn.at(9).get<std::vector<double>>();
        tree.nodes.push_back(std::move(n));
      }
      // Children must point forward so traversal always terminates.
      const int size = static_cast<int>(tree.nodes.size());
      for (int i = 0; i < size; ++i) {
        const Node& n = tree.nodes[static_cast<std::size_t>(i)];
        if (n.column >= static_cast<int>(m.columns.size()) ||
            (n.column >= 0 && (n.left <= i || n.right <= i || n.left >= size || n.right >= size))) {
          throw Error(ErrorKind::kBadModelFile, "malformed tree node " + std::to_string(i));
        }
      }
      if (tree.nodes.empty()) throw Error(ErrorKind::kBadModelFile, "empty tree");
      m.trees.push_back(std::move(tree));
      m.inbag.push_back(jt.at("inbag").get<std::vector<std::uint32_t>>());
      if (m.inbag.back().size() != m.train_ids.size()) {
        throw Error(ErrorKind::kBadModelFile, "in-bag counts do not match the training rows");
      }
    }
    if (m.trees.empty()) throw Error(ErrorKind::kBadModelFile, "model has no trees");
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kBadModelFile, std::string("malformed model file: ") + e.what());
  }
  return m;
}

ForestModel load_forest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open model file '" + path + "'");
  try {
    return load_forest(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

}  // namespace erclaims::forest
