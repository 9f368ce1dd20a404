#include "gnas/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gnas/errors.hpp"
#include "gnas/rng.hpp"

namespace gnas {

void validate_graph(const Graph& g) {
  if (g.num_nodes <= 0) throw FormatError("graph has no nodes");
  if (g.features.rows() != g.num_nodes) throw FormatError("feature row count != num_nodes");
  if (g.features.cols() <= 0) throw FormatError("feature_dim must be positive");
  if (g.labels.size() != g.num_nodes) throw FormatError("label count != num_nodes");
  if (g.num_classes <= 0) throw FormatError("num_classes must be positive");
  for (int i = 0; i < g.num_nodes; ++i) {
    if (g.labels[i] < 0 || g.labels[i] >= g.num_classes)
      throw FormatError("label out of range at node " + std::to_string(i));
  }
  if (static_cast<int>(g.edges.size()) != g.num_edges)
    throw FormatError("edge list size != num_edges");
  for (const auto& [a, b] : g.edges) {
    if (a < 0 || b < 0 || a >= g.num_nodes || b >= g.num_nodes)
      throw FormatError("edge endpoint out of range");
    if (a >= b) throw FormatError("edges must be canonical (src < dst)");
  }
  auto sorted = g.edges;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw FormatError("duplicate undirected edge");
}

SplitMasks semi_split(const Graph& g, int per_class, int n_val, int n_test,
                      std::uint64_t seed) {
  if (per_class <= 0) throw SplitError("per_class must be positive (empty training set)");
  if (n_val <= 0 || n_test <= 0) throw SplitError("val/test sizes must be positive");

  Rng rng(seed);
  SplitMasks m;
  m.train = Mask::Constant(g.num_nodes, false);
  m.val = Mask::Constant(g.num_nodes, false);
  m.test = Mask::Constant(g.num_nodes, false);

  std::vector<std::vector<int>> by_class(g.num_classes);
  for (int i = 0; i < g.num_nodes; ++i) by_class[g.labels[i]].push_back(i);
  for (int c = 0; c < g.num_classes; ++c) {
    auto& nodes = by_class[c];
    if (static_cast<int>(nodes.size()) < per_class)
      throw SplitError("class " + std::to_string(c) + " has only " +
                       std::to_string(nodes.size()) + " nodes, need " +
                       std::to_string(per_class));
    rng.shuffle(nodes);
    for (int k = 0; k < per_class; ++k) m.train[nodes[k]] = true;
  }

  std::vector<int> rest;
  rest.reserve(g.num_nodes);
  for (int i = 0; i < g.num_nodes; ++i)
    if (!m.train[i]) rest.push_back(i);
  rng.shuffle(rest);
  if (static_cast<int>(rest.size()) < n_val + n_test)
    throw SplitError("not enough nodes left for val/test");
  for (int k = 0; k < n_val; ++k) m.val[rest[k]] = true;
  for (int k = 0; k < n_test; ++k) m.test[rest[n_val + k]] = true;
  return m;
}

SplitMasks full_split(const Graph& g, double train_frac, double val_frac,
                      std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0))
    throw ArgumentError("train_frac must lie in (0,1)");
  if (!(val_frac > 0.0 && val_frac < 1.0))
    throw ArgumentError("val_frac must lie in (0,1)");
  if (train_frac + val_frac >= 1.0)
    throw ArgumentError("train_frac + val_frac must be < 1");

  const int n = g.num_nodes;
  const int n_train = static_cast<int>(std::floor(train_frac * n));
  const int n_val = static_cast<int>(std::floor(val_frac * n));
  const int n_test = n - n_train - n_val;
  if (n_train <= 0 || n_val <= 0) throw SplitError("train/val rounded to zero nodes");
  if (n_test <= 0) throw SplitError("test split is empty");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  SplitMasks m;
  m.train = Mask::Constant(n, false);
  m.val = Mask::Constant(n, false);
  m.test = Mask::Constant(n, false);
  for (int k = 0; k < n_train; ++k) m.train[order[k]] = true;
  for (int k = 0; k < n_val; ++k) m.val[order[n_train + k]] = true;
  for (int k = 0; k < n_test; ++k) m.test[order[n_train + n_val + k]] = true;
  return m;
}

NormAdj normalize_adjacency(const Graph& g) {
  const int n = g.num_nodes;
  std::vector<std::vector<int>> nbrs(n);
  for (const auto& [a, b] : g.edges) {
    nbrs[a].push_back(b);
    nbrs[b].push_back(a);
  }
  std::vector<double> degree(n);
  for (int i = 0; i < n; ++i) {
    nbrs[i].push_back(i);  // self-loop
    std::sort(nbrs[i].begin(), nbrs[i].end());
    degree[i] = static_cast<double>(nbrs[i].size());
  }

  NormAdj adj;
  adj.num_nodes = n;
  adj.row_ptr.assign(n + 1, 0);
  std::size_t nnz = 0;
  for (int i = 0; i < n; ++i) nnz += nbrs[i].size();
  adj.rows.reserve(nnz);
  adj.cols.reserve(nnz);
  adj.coeffs.reserve(nnz);
  for (int i = 0; i < n; ++i) {
    for (int j : nbrs[i]) {
      adj.rows.push_back(i);
      adj.cols.push_back(j);
      adj.coeffs.push_back(1.0 / std::sqrt(degree[i] * degree[j]));
    }
    adj.row_ptr[i + 1] = static_cast<int>(adj.rows.size());
  }
  return adj;
}

Graph row_normalize_features(Graph g) {
  if (g.features.size() > 0 && g.features.minCoeff() < 0.0)
    throw ArgumentError("row_normalize_features requires non-negative features");
  for (int i = 0; i < g.features.rows(); ++i) {
    const double s = g.features.row(i).sum();
    if (s > 0.0) g.features.row(i) /= s;
  }
  return g;
}

}  // namespace gnas
