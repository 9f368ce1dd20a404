#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

namespace gnas {

using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

// One transductive dataset. Immutable after construction; safe to share
// across concurrent model evaluations.
struct Graph {
  int num_nodes = 0;
  int num_edges = 0;  // undirected edges counted once
  int num_classes = 0;
  Eigen::MatrixXd features;                 // num_nodes x feature_dim
  Eigen::VectorXi labels;                   // class id per node, in [0, num_classes)
  std::vector<std::pair<int, int>> edges;   // canonical: src < dst, no duplicates

  int feature_dim() const { return static_cast<int>(features.cols()); }
};

struct SplitMasks {
  Mask train, val, test;
};

// Self-looped normalized adjacency, entries sorted by (row, col).
// coeffs[k] weights the contribution of node cols[k] to node rows[k];
// c_ij = 1/sqrt(d_i d_j) with degrees counted after self-loop insertion.
struct NormAdj {
  int num_nodes = 0;
  std::vector<int> rows, cols;
  std::vector<double> coeffs;
  std::vector<int> row_ptr;  // size num_nodes + 1
};

// Throws FormatError when a Graph invariant is violated.
void validate_graph(const Graph& g);

// Stratified split: exactly `per_class` training nodes per class, then
// n_val / n_test drawn uniformly without replacement from the remainder.
SplitMasks semi_split(const Graph& g, int per_class, int n_val, int n_test,
                      std::uint64_t seed);

// Per-node uniform assignment: floor(frac * n) train and val, remainder test.
// The test set must come out non-empty.
SplitMasks full_split(const Graph& g, double train_frac, double val_frac,
                      std::uint64_t seed);

NormAdj normalize_adjacency(const Graph& g);

// Scales every nonzero feature row to sum 1; zero rows pass through.
// Requires non-negative features.
Graph row_normalize_features(Graph g);

}  // namespace gnas
