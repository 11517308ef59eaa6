#include "erclaims/cli.h"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "erclaims/datagen.h"
#include "erclaims/dataset.h"
#include "erclaims/econ_eval.h"
#include "erclaims/error.h"
#include "erclaims/forest.h"
#include "erclaims/hier_cluster.h"
#include "erclaims/importance.h"
#include "erclaims/metrics.h"
#include "erclaims/upcoding.h"

namespace fs = std::filesystem;

namespace erclaims::cli {

// ---------------------------------------------------------------------------
// Config file and staged outputs

std::vector<std::pair<std::string, std::string>> parse_config(std::istream& in) {
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  std::vector<std::pair<std::string, std::string>> out;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kBadConfig, "line " + std::to_string(line_no) + ": expected key=value");
    }
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw Error(ErrorKind::kBadConfig, "line " + std::to_string(line_no) + ": empty key");
    if (!seen.insert(key).second) {
      throw Error(ErrorKind::kBadConfig, "line " + std::to_string(line_no) + ": repeated key '" + key + "'");
    }
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

struct OutputSet::Entry {
  fs::path final_path;
  fs::path temp_path;
  std::ofstream stream;
};

OutputSet::OutputSet(fs::path dir) : dir_(std::move(dir)) {}

OutputSet::~OutputSet() {
  if (committed_) return;
  for (auto& e : entries_) {
    e->stream.close();
    std::error_code ec;
    fs::remove(e->temp_path, ec);
  }
}

std::ostream& OutputSet::open(const std::string& name) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create directory " + dir_.string() + ": " + ec.message());
  auto e = std::make_unique<Entry>();
  e->final_path = dir_ / name;
  e->temp_path = dir_ / ("." + name + ".tmp");
  e->stream.open(e->temp_path, std::ios::binary | std::ios::trunc);
  if (!e->stream) throw Error(ErrorKind::kIo, "cannot write " + e->temp_path.string());
  entries_.push_back(std::move(e));
  return entries_.back()->stream;
}

std::vector<fs::path> OutputSet::commit() {
  for (auto& e : entries_) {
    e->stream.flush();
    if (!e->stream) throw Error(ErrorKind::kIo, "failed writing " + e->final_path.string());
    e->stream.close();
  }
  std::vector<fs::path> written;
  for (auto& e : entries_) {
    std::error_code ec;
    fs::rename(e->temp_path, e->final_path, ec);
    if (ec) throw Error(ErrorKind::kIo, "cannot rename into " + e->final_path.string() + ": " + ec.message());
    written.push_back(e->final_path);
  }
  committed_ = true;
  return written;
}

namespace {

bool verbose() {
  const char* v = std::getenv("ERCLAIMS_VERBOSE");
  return v != nullptr && *v != '\0' && std::string_view(v) != "0";
}

// ---------------------------------------------------------------------------
// Options

struct Common {
  std::string out = "erclaims_out";
  std::string config;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct GenOpts {
  std::size_t n_upcoding = 2000;
  std::size_t n_cost = 5000;
  int codes_per_profile = 20;
  double noise_sd = 0.05;
  double negative_rate = 0.1;
  bool null_signal = false;
};

struct ClusterOpts {
  std::string input;
  int k = 0;
  int k_min = 1;
  int k_max = 60;
  std::size_t min_cluster_size = 100;
  std::string cv_dendrogram = "fold";
};

struct UasOpts {
  std::string input;
  std::string clusters;
  std::string background = "stratified";
  std::string group_column = "group";
  std::vector<std::string> groups;
};

struct TrainOpts {
  std::string input;
  int trees = 200;
  std::size_t mtry = 0;
  std::size_t min_leaf = 5;
  int max_depth = 0;
  std::string leaf = "mean";
  bool no_bootstrap = false;
  std::vector<std::string> features;
  bool no_reduce = false;
  int cluster_k_max = 20;
  bool skip_cv = false;
};

struct ScoreOpts {
  std::string input;
  std::string model;
};

struct RankOpts {
  std::string input;
  std::string predictions;
  std::string policy = "model";
};

struct EvalOpts {
  std::string input;
  std::string model;
  std::vector<double> fractions = econ::kDefaultFractions;
  std::string heatmap_column = "nline_pct";
  std::size_t heatmap_bins = 10;
};

struct ImportanceOpts {
  std::string input;
  std::string model;
};

struct Options {
  Common common;
  GenOpts gen;
  ClusterOpts cluster;
  UasOpts uas;
  TrainOpts train;
  ScoreOpts score;
  RankOpts rank;
  EvalOpts eval;
  ImportanceOpts importance;
};

void add_common(CLI::App* sub, Common& c, bool seeded, bool threaded) {
  sub->add_option("--out", c.out, "Working directory for inputs and outputs");
  sub->add_option("--config", c.config, "Flat key=value file of option defaults; flags on the command line win (default: none)");
  if (seeded) sub->add_option("--seed", c.seed, "Random seed");
  if (threaded) sub->add_option("--threads", c.threads, "Worker threads (0 = all cores); outputs do not depend on it");
}

void build_app(CLI::App& app, Options& o) {
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "Generate synthetic upcoding and cost-avoidance data");
  add_common(gen, o.common, true, false);
  gen->add_option("--n-upcoding", o.gen.n_upcoding, "Claims in the upcoding dataset");
  gen->add_option("--n-cost", o.gen.n_cost, "Claims in the cost-avoidance dataset before the train/test split");
  gen->add_option("--codes-per-profile", o.gen.codes_per_profile, "Diagnosis codes per planted severity profile");
  gen->add_option("--noise-sd", o.gen.noise_sd, "Noise sd of the cost-avoidance ratio");
  gen->add_option("--negative-rate", o.gen.negative_rate, "Share of claims with negative cost avoidance");
  gen->add_flag("--null-signal", o.gen.null_signal, "Make the cost-avoidance ratio independent of the features (default: off)");

  auto* cl = app.add_subcommand("cluster", "Cluster diagnosis codes by mean severity");
  add_common(cl, o.common, true, false);
  cl->add_option("--input", o.cluster.input, "Claims CSV (default <out>/upcoding_claims.csv)");
  cl->add_option("--k", o.cluster.k, "Number of clusters; 0 picks k by cross-validated ordinal AUC");
  cl->add_option("--k-min", o.cluster.k_min, "Smallest k considered");
  cl->add_option("--k-max", o.cluster.k_max, "Largest k considered (capped at the number of codes)");
  cl->add_option("--min-cluster-size", o.cluster.min_cluster_size, "Smallest allowed cluster, in claims");
  cl->add_option("--cv-dendrogram", o.cluster.cv_dendrogram,
                 "Dendrogram scored in cross-validation: fold (rebuilt per training fold) or full")
      ->check(CLI::IsMember({"fold", "full"}));

  auto* uas = app.add_subcommand("uas", "Score claims for upcoding and compare two groups");
  add_common(uas, o.common, false, false);
  uas->add_option("--input", o.uas.input, "Claims CSV (default <out>/upcoding_claims.csv)");
  uas->add_option("--clusters", o.uas.clusters, "Cluster assignment CSV (default <out>/clusters.csv)");
  uas->add_option("--background", o.uas.background, "Background claims: loo (all others) or stratified (other groups)")
      ->check(CLI::IsMember({"loo", "stratified"}));
  uas->add_option("--group-column", o.uas.group_column, "Column defining the groups");
  uas->add_option("--groups", o.uas.groups, "Two groups to compare (default: the first two levels)")
      ->delimiter(',')
      ->expected(0, 2);

  auto* tr = app.add_subcommand("train", "Fit the cost-avoidance ratio forest");
  add_common(tr, o.common, true, true);
  tr->add_option("--input", o.train.input, "Training claims CSV (default <out>/cost_train.csv)");
  tr->add_option("--trees", o.train.trees, "Number of trees")->check(CLI::PositiveNumber);
  tr->add_option("--mtry", o.train.mtry, "Columns tried per split (0 = ceil(p/3))");
  tr->add_option("--min-leaf", o.train.min_leaf, "Minimum rows per leaf")->check(CLI::PositiveNumber);
  tr->add_option("--max-depth", o.train.max_depth, "Maximum tree depth (0 = unlimited)");
  tr->add_option("--leaf", o.train.leaf, "Leaf model: mean or linear")->check(CLI::IsMember({"mean", "linear"}));
  tr->add_flag("--no-bootstrap", o.train.no_bootstrap, "Fit every tree on all rows (default: off)");
  tr->add_option("--features", o.train.features, "Columns used, comma separated (default: all)")->delimiter(',');
  tr->add_flag("--no-reduce-categoricals", o.train.no_reduce, "Keep raw categorical levels instead of clusters (default: off)");
  tr->add_option("--cluster-k-max", o.train.cluster_k_max, "Largest level-cluster count per categorical column");
  tr->add_flag("--skip-cv", o.train.skip_cv, "Skip the two-fold cross-validated R^2 in the report (default: off)");

  auto* sc = app.add_subcommand("score", "Predict the cost-avoidance ratio of claims");
  add_common(sc, o.common, false, true);
  sc->add_option("--input", o.score.input, "Claims CSV (default <out>/cost_test.csv)");
  sc->add_option("--model", o.score.model, "Model file (default <out>/model.json)");

  auto* rk = app.add_subcommand("rank", "Order claims into a review queue");
  add_common(rk, o.common, false, false);
  rk->add_option("--input", o.rank.input, "Claims CSV (default <out>/cost_test.csv)");
  rk->add_option("--predictions", o.rank.predictions, "Predictions CSV (default <out>/predictions.csv)");
  rk->add_option("--policy", o.rank.policy, "model, baseline, theoretical_max or theoretical_min")
      ->check(CLI::IsMember({"model", "baseline", "theoretical_max", "theoretical_min"}));

  auto* ev = app.add_subcommand("eval", "Cumulative cost-avoidance curves, improvement table and heat map");
  add_common(ev, o.common, false, true);
  ev->add_option("--input", o.eval.input, "Reviewed claims CSV (default <out>/cost_test.csv)");
  ev->add_option("--model", o.eval.model, "Model file (default <out>/model.json)");
  ev->add_option("--fractions", o.eval.fractions, "Review fractions of the improvement table")
      ->delimiter(',')
      ->check(CLI::Range(0.0, 1.0));
  ev->add_option("--heatmap-column", o.eval.heatmap_column, "Numeric column on the heat map x axis");
  ev->add_option("--heatmap-bins", o.eval.heatmap_bins, "Bins per heat map axis")->check(CLI::PositiveNumber);

  auto* im = app.add_subcommand("importance", "Permutation and node-purity importance of the model columns");
  add_common(im, o.common, true, true);
  im->add_option("--input", o.importance.input, "Training claims CSV (default <out>/cost_train.csv)");
  im->add_option("--model", o.importance.model, "Model file (default <out>/model.json)");
}

// ---------------------------------------------------------------------------
// Subcommands

std::string or_default(const std::string& value, const Common& c, const std::string& name) {
  return value.empty() ? (fs::path(c.out) / name).string() : value;
}

void require_distinct(const std::vector<std::string>& inputs, const fs::path& out_dir,
                      const std::vector<std::string>& outputs) {
  std::set<fs::path> seen;
  auto add = [&](const fs::path& p) {
    const fs::path canon = fs::weakly_canonical(p);
    if (!seen.insert(canon).second) {
      throw Error(ErrorKind::kBadConfig, "path used twice: " + p.string());
    }
  };
  for (const auto& i : inputs) add(i);
  for (const auto& o : outputs) add(out_dir / o);
}

forest::ForestModel load_model(const std::string& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::kIo, "missing model file " + path + " (run train first)");
  return forest::load_forest_file(path);
}

using Log = std::function<void(const std::string&)>;

void cmd_gen(const Options& o, OutputSet& outs, const Log& log) {
  datagen::UpcodingConfig ucfg;
  ucfg.n = o.gen.n_upcoding;
  ucfg.codes_per_profile = o.gen.codes_per_profile;
  ucfg.seed = o.common.seed;
  const auto up = datagen::gen_upcoding_dataset(ucfg);

  datagen::CostConfig ccfg;
  ccfg.n = o.gen.n_cost;
  ccfg.noise_sd = o.gen.noise_sd;
  ccfg.negative_rate = o.gen.negative_rate;
  ccfg.seed = o.common.seed;
  if (o.gen.null_signal) ccfg.coef = datagen::CarCoefficients{0.3, 0, 0, 0, 0, 0};
  const auto cost = datagen::gen_cost_avoidance_dataset(ccfg);
  const FoldSplit split = two_fold_split(cost.dataset, o.common.seed);
  log("generated " + std::to_string(up.dataset.size()) + " upcoding and " + std::to_string(cost.dataset.size()) +
      " cost-avoidance claims");

  write_claims_csv(outs.open("upcoding_claims.csv"), up.dataset);
  datagen::write_upcoding_truth_csv(outs.open("upcoding_truth.csv"), up);
  write_claims_csv(outs.open("cost_train.csv"), cost.dataset.subset(split.fold_a));
  write_claims_csv(outs.open("cost_test.csv"), cost.dataset.subset(split.fold_b));
  datagen::write_cost_truth_csv(outs.open("cost_truth.csv"), cost);
}

void cmd_cluster(const Options& o, OutputSet& outs, const Log& log) {
  const std::string input = or_default(o.cluster.input, o.common, "upcoding_claims.csv");
  require_distinct({input}, o.common.out, {"clusters.csv", "dendrogram.json", "cluster_summary.csv", "cluster_count.csv"});
  const Dataset ds = parse_claims_csv(input);
  cluster::ClusterAssignment ca;
  if (o.cluster.k > 0) {
    const auto dg = cluster::build_dendrogram(cluster::mean_severity_dissimilarity(ds));
    ca = cluster::cut_dendrogram(dg, o.cluster.k);
    cluster::write_dendrogram_json(outs.open("dendrogram.json"), dg);
  } else {
    const int levels = static_cast<int>(ds.diagnosis_levels().size());
    const auto source = o.cluster.cv_dendrogram == "full" ? upcoding::CvDendrogram::kFullData
                                                          : upcoding::CvDendrogram::kTrainingFold;
    const auto curve = upcoding::optimize_cluster_count(ds, o.common.seed, std::min(o.cluster.k_min, levels),
                                                        std::min(o.cluster.k_max, levels),
                                                        o.cluster.min_cluster_size, source);
    log("chose k = " + std::to_string(curve.chosen_k));
    ca = cluster::cut_dendrogram(curve.dendrogram, curve.chosen_k);
    cluster::write_dendrogram_json(outs.open("dendrogram.json"), curve.dendrogram);
    upcoding::write_cluster_count_csv(outs.open("cluster_count.csv"), curve);
  }
  cluster::write_assignment_csv(outs.open("clusters.csv"), ca);
  std::ostream& summary = outs.open("cluster_summary.csv");
  summary << "cluster_id,count,min,q1,median,q3,max,mean\n";
  for (const auto& s : cluster::cluster_summary(ds, ca, "severity")) {
    summary << s.cluster_id << ',' << s.count << ',' << format_double(s.min) << ',' << format_double(s.q1) << ','
            << format_double(s.median) << ',' << format_double(s.q3) << ',' << format_double(s.max) << ','
            << format_double(s.mean) << '\n';
  }
}

void cmd_uas(const Options& o, OutputSet& outs, const Log& log) {
  const std::string input = or_default(o.uas.input, o.common, "upcoding_claims.csv");
  const std::string clusters = or_default(o.uas.clusters, o.common, "clusters.csv");
  require_distinct({input, clusters}, o.common.out, {"uas.csv", "uas_histogram.csv", "uas_comparison.txt"});
  const Dataset ds = parse_claims_csv(input);
  std::ifstream in(clusters, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "missing cluster file " + clusters + " (run cluster first)");
  cluster::ClusterAssignment ca;
  try {
    ca = cluster::read_assignment_csv(in);
  } catch (const Error& e) {
    throw Error(e.kind(), clusters + ": " + e.what());
  }
  const upcoding::UASResult r = o.uas.background == "loo"
                                    ? upcoding::compute_uas(ds, ca)
                                    : upcoding::compute_uas_stratified(ds, ca, o.uas.group_column);
  log("scored " + std::to_string(r.uas.size()) + " claims, " + std::to_string(r.warning_count()) + " warnings");
  upcoding::write_uas_csv(outs.open("uas.csv"), r);

  std::vector<std::string> groups = o.uas.groups;
  if (groups.empty()) {
    const auto col = categorical_column(ds, o.uas.group_column);
    groups.assign(col.levels.begin(), col.levels.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(2, col.levels.size())));
  }
  if (groups.size() != 2) {
    throw Error(ErrorKind::kSingleGroup, "group comparison needs two groups in column '" + o.uas.group_column + "'");
  }
  const auto cmp = upcoding::compare_groups(r, ds, o.uas.group_column, groups[0], groups[1]);
  upcoding::write_comparison_csv(outs.open("uas_histogram.csv"), cmp);
  upcoding::write_comparison_summary(outs.open("uas_comparison.txt"), cmp);
}

forest::ForestConfig forest_config(const Options& o) {
  forest::ForestConfig cfg;
  cfg.n_trees = o.train.trees;
  cfg.mtry = o.train.mtry;
  cfg.min_leaf = o.train.min_leaf;
  cfg.max_depth = o.train.max_depth;
  cfg.leaf = o.train.leaf == "linear" ? forest::LeafKind::kLinear : forest::LeafKind::kMean;
  cfg.bootstrap = !o.train.no_bootstrap;
  cfg.seed = o.common.seed;
  cfg.features = o.train.features;
  cfg.reduce_categoricals = !o.train.no_reduce;
  cfg.cluster_k_max = o.train.cluster_k_max;
  return cfg;
}

// Two-fold cross-validated R^2 of the ratio.
double cv_r_squared(const Dataset& train, const forest::ForestConfig& cfg, int threads) {
  const FoldSplit split = two_fold_split(train, cfg.seed);
  std::vector<double> pred, truth;
  for (int fold = 0; fold < 2; ++fold) {
    const Dataset fit = train.subset(fold == 0 ? split.fold_a : split.fold_b);
    const Dataset held = train.subset(fold == 0 ? split.fold_b : split.fold_a);
    const auto p = forest::predict_car(forest::fit_forest(fit, cfg, threads), held, threads);
    pred.insert(pred.end(), p.car.begin(), p.car.end());
    for (const auto& c : held.claims()) truth.push_back(forest::compute_car(c));
  }
  return metrics::r_squared(pred, truth);
}

void cmd_train(const Options& o, OutputSet& outs, const Log& log) {
  const std::string input = or_default(o.train.input, o.common, "cost_train.csv");
  require_distinct({input}, o.common.out, {"model.json", "train_report.txt"});
  const Dataset train = parse_claims_csv(input);
  const forest::ForestConfig cfg = forest_config(o);
  const forest::ForestModel model = forest::fit_forest(train, cfg, o.common.threads);
  log("fitted " + std::to_string(model.trees.size()) + " trees on " + std::to_string(train.size()) + " claims");
  forest::save_forest(outs.open("model.json"), model);

  std::ostream& rep = outs.open("train_report.txt");
  rep << "claims " << train.size() << '\n' << "trees " << model.trees.size() << '\n';
  if (cfg.bootstrap) {
    const auto oob = forest::oob_mse(model, train);
    rep << "oob_mse " << format_double(oob.mse) << '\n'
        << "oob_rows_used " << oob.rows_used << '\n'
        << "oob_rows_skipped " << oob.rows_skipped << '\n';
  }
  if (!o.train.skip_cv) {
    const double r2 = cv_r_squared(train, cfg, o.common.threads);
    log("two-fold R^2 " + format_double(r2));
    rep << "cv_r2 " << format_double(r2) << '\n';
  }
}

void write_predictions_csv(std::ostream& out, const forest::CARPrediction& p) {
  out << "id,predicted_car,predicted_ca\n";
  for (std::size_t i = 0; i < p.ids.size(); ++i) {
    out << p.ids[i] << ',' << format_double(p.car[i]) << ',' << p.ca[i].to_string() << '\n';
  }
}

forest::CARPrediction read_predictions_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "missing predictions file " + path + " (run score first)");
  forest::CARPrediction p;
  std::string line;
  int line_no = 1;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"id", "predicted_car", "predicted_ca"}) {
    throw Error(ErrorKind::kMissingColumn, path + ": expected header id,predicted_car,predicted_ca");
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    const auto id = f.size() == 3 ? parse_double(f[0]) : std::nullopt;
    const auto car = f.size() == 3 ? parse_double(f[1]) : std::nullopt;
    const auto ca = f.size() == 3 ? Money::parse(f[2]) : std::nullopt;
    if (!id || !car || !ca) throw Error(ErrorKind::kBadRow, path + ": line " + std::to_string(line_no) + ": malformed prediction");
    p.ids.push_back(static_cast<std::int64_t>(*id));
    p.car.push_back(*car);
    p.ca.push_back(*ca);
  }
  return p;
}

void cmd_score(const Options& o, OutputSet& outs, const Log& log) {
  const std::string input = or_default(o.score.input, o.common, "cost_test.csv");
  const std::string model_path = or_default(o.score.model, o.common, "model.json");
  require_distinct({input, model_path}, o.common.out, {"predictions.csv"});
  const auto model = load_model(model_path);
  const Dataset ds = parse_claims_csv(input, model.schema);
  const auto p = forest::predict_car(model, ds, o.common.threads);
  log("scored " + std::to_string(p.ids.size()) + " claims");
  write_predictions_csv(outs.open("predictions.csv"), p);
}

void cmd_rank(const Options& o, OutputSet& outs, const Log& log) {
  const std::string input = or_default(o.rank.input, o.common, "cost_test.csv");
  const auto policy = *econ::parse_policy(o.rank.policy);
  const std::string queue_name = "queue_" + o.rank.policy + ".csv";
  std::optional<forest::CARPrediction> pred;
  if (policy == econ::Policy::kModel) {
    const std::string pred_path = or_default(o.rank.predictions, o.common, "predictions.csv");
    require_distinct({input, pred_path}, o.common.out, {queue_name});
    pred = read_predictions_csv(pred_path);
  } else {
    require_distinct({input}, o.common.out, {queue_name});
  }
  const Dataset ds = parse_claims_csv(input);
  const forest::CARPrediction* p = pred ? &*pred : nullptr;
  const auto order = econ::rank_queue(p, ds, policy);
  log("ranked " + std::to_string(order.size()) + " claims by " + o.rank.policy);
  econ::write_queue_csv(outs.open(queue_name), ds, order, p);
}

void cmd_eval(const Options& o, OutputSet& outs, const Log& log) {
  const std::string input = or_default(o.eval.input, o.common, "cost_test.csv");
  const std::string model_path = or_default(o.eval.model, o.common, "model.json");
  require_distinct({input, model_path}, o.common.out, {"curves.csv", "improvement.csv", "potential.csv", "heatmap.csv"});
  const auto model = load_model(model_path);
  const Dataset ds = parse_claims_csv(input, model.schema);
  const auto p = forest::predict_car(model, ds, o.common.threads);
  const auto rep = econ::evaluate(ds, p, o.eval.fractions);
  for (const auto& r : rep.table) {
    log("at " + format_double(r.fraction) + " reviewed: model " + r.model.to_string() + " vs baseline " +
        r.baseline.to_string());
  }
  econ::write_curves_csv(outs.open("curves.csv"), rep.curves);
  econ::write_improvement_csv(outs.open("improvement.csv"), rep.table);
  econ::write_potential_csv(outs.open("potential.csv"), rep.curves, ds);
  const auto h = econ::heatmap_bins(ds, p, o.eval.heatmap_column, o.eval.heatmap_bins);
  if (h.constant_x) log("warning: ConstantColumn: " + h.x_column + " is constant, one x bin emitted");
  econ::write_heatmap_csv(outs.open("heatmap.csv"), h);
}

void cmd_importance(const Options& o, OutputSet& outs, const Log& log) {
  const std::string input = or_default(o.importance.input, o.common, "cost_train.csv");
  const std::string model_path = or_default(o.importance.model, o.common, "model.json");
  require_distinct({input, model_path}, o.common.out, {"importance.csv"});
  const auto model = load_model(model_path);
  const Dataset train = parse_claims_csv(input, model.schema);
  const auto rows = importance::importance_report(model, train, o.common.seed, o.common.threads);
  log("ranked " + std::to_string(rows.size()) + " columns");
  importance::write_importance_csv(outs.open("importance.csv"), rows);
}

// ---------------------------------------------------------------------------
// Argument handling

std::vector<std::string> reversed(std::vector<std::string> v) {
  std::reverse(v.begin(), v.end());
  return v;
}

bool known_anywhere(const CLI::App& app, const std::string& flag) {
  for (const auto* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
    if (sub->get_option_no_throw(flag) != nullptr) return true;
  }
  return false;
}

// Appends config entries the command line did not set. Keys of other
// subcommands are ignored; keys no subcommand knows are an error.
std::vector<std::string> merge_config(const CLI::App& app, const CLI::App& sub, const std::string& path,
                                      std::vector<std::string> args) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kBadConfig, "cannot open config file " + path);
  std::vector<std::pair<std::string, std::string>> entries;
  try {
    entries = parse_config(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
  for (const auto& [key, value] : entries) {
    const std::string flag = "--" + key;
    if (key == "config") throw Error(ErrorKind::kBadConfig, path + ": config files cannot nest");
    const CLI::Option* opt = sub.get_option_no_throw(flag);
    if (opt == nullptr) {
      if (!known_anywhere(app, flag)) throw Error(ErrorKind::kBadConfig, path + ": unknown key '" + key + "'");
      continue;
    }
    if (opt->count() > 0) continue;
    args.push_back(flag + "=" + value);
  }
  return args;
}

int report(std::ostream& err, const std::string& kind, const std::string& msg, int code) {
  std::string line = msg;
  std::replace(line.begin(), line.end(), '\n', ' ');
  err << "error: " << kind << ": " << line << '\n';
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    Options first;
    CLI::App probe("Emergency-room claims anomaly and cost-avoidance pipeline", "erclaims");
    build_app(probe, first);
    try {
      probe.parse(reversed(args));
    } catch (const CLI::CallForHelp&) {
      out << probe.help();
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      return report(err, "Usage", e.what(), kExitUsage);
    }
    const CLI::App* sub = probe.get_subcommands().at(0);

    std::vector<std::string> full = args;
    if (!first.common.config.empty()) full = merge_config(probe, *sub, first.common.config, full);

    Options o;
    CLI::App app("Emergency-room claims anomaly and cost-avoidance pipeline", "erclaims");
    build_app(app, o);
    try {
      app.parse(reversed(full));
    } catch (const CLI::ParseError& e) {
      return report(err, "Usage", e.what(), kExitUsage);
    }
    const std::string name = app.get_subcommands().at(0)->get_name();

    const bool chatty = verbose();
    Log log = [&](const std::string& msg) {
      if (chatty) err << "[erclaims " << name << "] " << msg << '\n';
    };

    OutputSet outs(o.common.out);
    if (name == "gen") cmd_gen(o, outs, log);
    else if (name == "cluster") cmd_cluster(o, outs, log);
    else if (name == "uas") cmd_uas(o, outs, log);
    else if (name == "train") cmd_train(o, outs, log);
    else if (name == "score") cmd_score(o, outs, log);
    else if (name == "rank") cmd_rank(o, outs, log);
    else if (name == "eval") cmd_eval(o, outs, log);
    else if (name == "importance") cmd_importance(o, outs, log);
    for (const auto& p : outs.commit()) out << p.string() << '\n';
    return kExitOk;
  } catch (const Error& e) {
    const int code = e.kind() == ErrorKind::kBadConfig ? kExitUsage : kExitData;
    return report(err, error_kind_name(e.kind()), e.what(), code);
  } catch (const std::exception& e) {
    return report(err, "Internal", e.what(), kExitInternal);
  }
}

}  // namespace erclaims::cli
