#include "erclaims/importance.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <thread>

#include "erclaims/error.h"
#include "erclaims/random.h"

namespace erclaims::importance {

using forest::ForestModel;
using forest::Table;
using forest::Tree;

namespace {

// Columns a tree's predictions can depend on: split columns, plus every
// numeric column when a leaf carries a linear model.
std::vector<char> columns_used(const Tree& tree, const Table& t) {
  std::vector<char> used(t.cols(), 0);
  bool linear = false;
  for (const auto& n : tree.nodes) {
    if (n.column >= 0) used[static_cast<std::size_t>(n.column)] = 1;
    if (!n.coef.empty()) linear = true;
  }
  if (linear) {
    for (std::size_t j = 0; j < t.cols(); ++j)
      if (t.kinds[j] == ColumnKind::kNumeric) used[j] = 1;
  }
  return used;
}

}  // namespace

std::vector<PermutationScore> perm_importance(const ForestModel& model, const Dataset& train, std::uint64_t seed,
                                              int threads) {
  if (train.size() != model.train_ids.size()) {
    throw Error(ErrorKind::kInvalidArgument, "permutation importance needs the model's training data");
  }
  const Table t = forest::encode(model, train, true);
  const std::size_t p = t.cols();
  const std::size_t n_trees = model.trees.size();

  // Out-of-bag rows and baseline squared error per tree.
  std::vector<std::vector<std::size_t>> oob(n_trees);
  std::vector<double> base(n_trees, 0.0);
  for (std::size_t k = 0; k < n_trees; ++k) {
    for (std::size_t i = 0; i < t.rows; ++i)
      if (model.inbag[k][i] == 0) oob[k].push_back(i);
    for (auto i : oob[k]) base[k] += std::pow(model.trees[k].predict(t, t.row(i)) - t.y[i], 2);
    if (!oob[k].empty()) base[k] /= static_cast<double>(oob[k].size());
  }
  const std::size_t used_trees =
      static_cast<std::size_t>(std::count_if(oob.begin(), oob.end(), [](const auto& o) { return !o.empty(); }));
  if (used_trees == 0) throw Error(ErrorKind::kNoOOBRows, "no tree has out-of-bag rows");

  std::vector<std::vector<char>> used(n_trees);
  for (std::size_t k = 0; k < n_trees; ++k) used[k] = columns_used(model.trees[k], t);

  std::vector<PermutationScore> out(p);
  auto score_column = [&](std::size_t j) {
    std::vector<double> diffs;
    std::vector<double> row(p), values;
    for (std::size_t k = 0; k < n_trees; ++k) {
      if (oob[k].empty()) continue;
      if (!used[k][j]) {
        diffs.push_back(0.0);
        continue;
      }
      values.clear();
      for (auto i : oob[k]) values.push_back(t.at(i, j));
      Rng rng = Rng::stream(seed, k * p + j);
      rng.shuffle(std::span<double>(values));
      double mse = 0.0;
      for (std::size_t q = 0; q < oob[k].size(); ++q) {
        const std::size_t i = oob[k][q];
        std::copy(t.row(i), t.row(i) + p, row.begin());
        row[j] = values[q];
        mse += std::pow(model.trees[k].predict(t, row.data()) - t.y[i], 2);
      }
      diffs.push_back(mse / static_cast<double>(oob[k].size()) - base[k]);
    }
    PermutationScore& s = out[j];
    s.trees_used = diffs.size();
    s.mean_diff = std::accumulate(diffs.begin(), diffs.end(), 0.0) / static_cast<double>(diffs.size());
    double ss = 0.0;
    for (double d : diffs) ss += (d - s.mean_diff) * (d - s.mean_diff);
    s.sd_diff = diffs.size() > 1 ? std::sqrt(ss / static_cast<double>(diffs.size() - 1)) : 0.0;
    if (s.sd_diff > 0.0) {
      s.increased_mse = s.mean_diff / s.sd_diff;
    } else {
      s.increased_mse = s.mean_diff;
      s.raw_mean = true;
    }
  };

  std::size_t workers = threads <= 0 ? std::max(1u, std::thread::hardware_concurrency())
                                     : static_cast<std::size_t>(threads);
  workers = std::min(workers, p);
  if (workers <= 1) {
    for (std::size_t j = 0; j < p; ++j) score_column(j);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t j = w; j < p; j += workers) score_column(j);
      });
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

namespace {

double split_decrease(const Tree& tree, const forest::Node& n) {
  const double children =
      tree.nodes[static_cast<std::size_t>(n.left)].impurity + tree.nodes[static_cast<std::size_t>(n.right)].impurity;
  return std::max(0.0, n.impurity - children);
}

}  // namespace

double tree_purity_decrease(const Tree& tree) {
  double sum = 0.0;
  for (const auto& n : tree.nodes)
    if (n.column >= 0) sum += split_decrease(tree, n);
  return sum;
}

std::vector<double> node_purity_importance(const ForestModel& model) {
  const std::size_t p = model.columns.size();
  std::vector<double> total(p, 0.0);
  for (const auto& tree : model.trees) {
    for (const auto& n : tree.nodes)
      if (n.column >= 0) total[static_cast<std::size_t>(n.column)] += split_decrease(tree, n);
  }
  for (double& v : total) v /= static_cast<double>(model.trees.size());
  return total;
}

namespace {

std::vector<int> ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<int> r(values.size());
  for (std::size_t q = 0; q < order.size(); ++q) r[order[q]] = static_cast<int>(q) + 1;
  return r;
}

}  // namespace

std::vector<ImportanceRow> importance_report(const ForestModel& model, const Dataset& train, std::uint64_t seed,
                                             int threads) {
  const auto perm = perm_importance(model, train, seed, threads);
  const auto purity = node_purity_importance(model);
  std::vector<double> mse(perm.size());
  for (std::size_t j = 0; j < perm.size(); ++j) mse[j] = perm[j].increased_mse;
  const auto rank_mse = ranks(mse);
  const auto rank_purity = ranks(purity);
  std::vector<ImportanceRow> out;
  for (std::size_t j = 0; j < perm.size(); ++j) {
    out.push_back({model.columns[j].name, perm[j], purity[j], rank_mse[j], rank_purity[j]});
  }
  return out;
}

void write_importance_csv(std::ostream& out, const std::vector<ImportanceRow>& rows) {
  out << "column,increased_mse,node_purity,rank_mse,rank_purity\n";
  for (const auto& r : rows) {
    out << csv_escape(r.column) << ',' << format_double(r.perm.increased_mse) << ',' << format_double(r.node_purity)
        << ',' << r.rank_mse << ',' << r.rank_purity << '\n';
  }
}

}  // namespace erclaims::importance
