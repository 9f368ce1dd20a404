#pragma once

#include <cstdint>
#include <string>

#include "gnas/graph.hpp"

namespace gnas {

// Counters for input irregularities the loaders tolerate.
struct LoadStats {
  int dangling_citations = 0;  // edge endpoints absent from the node table
  int self_citations = 0;
  int duplicate_edges = 0;
};

// Planetoid-style raw pair: `.content` rows are `id feat_1..feat_k label`,
// `.cites` rows are `cited citing`. String ids are mapped to dense indices in
// file order; class labels are assigned ids in sorted label order. Dangling
// citations are dropped and counted, edges are symmetrized and deduplicated.
Graph load_cora_raw(const std::string& content_path, const std::string& cites_path,
                    LoadStats* stats = nullptr);

// CSV triple with headers: features.csv `id,f0,...`, edges.csv `src,dst`,
// labels.csv `id,label`. Unlike the citation loader, an edge endpoint missing
// from the feature table is a format error.
Graph load_edgelist(const std::string& features_csv, const std::string& edges_csv,
                    const std::string& labels_csv, LoadStats* stats = nullptr);

// Binary dataset cache; round-trips a Graph bit-exactly. Layout (little
// endian): magic "GNASDS1\n", int32 num_nodes/num_edges/feature_dim/
// num_classes, int32 labels[n], int32 edge pairs[2e], float64 features
// in row-major order.
void save_cache(const Graph& g, const std::string& path);
Graph load_cache(const std::string& path);

// Deterministic synthetic citation corpus: homophilous edges and
// class-conditional sparse bag-of-words features. Stands in for the public
// citation benchmarks, which this toolkit never downloads.
struct SynthSpec {
  int nodes = 2708;
  int undirected_edges = 5429;
  int features = 1433;
  int classes = 7;
  double homophily = 0.77;       // probability an edge joins same-class nodes
  double on_rate_in = 0.033;     // word-on rate inside the class vocabulary
  double on_rate_out = 0.013;    // background word-on rate
  std::uint64_t seed = 1;
};

// Named presets sized like the common citation benchmarks:
// "cora", "citeseer", "cora-small" (500 nodes), "citeseer-small" (400 nodes).
SynthSpec synth_preset(const std::string& name);

Graph generate_citation_graph(const SynthSpec& spec);

// Writers used to exercise the text loaders end to end. write_planetoid
// emits `<prefix>.content` / `<prefix>.cites`; write_csv_triple emits
// features.csv / edges.csv / labels.csv under `dir`.
void write_planetoid(const Graph& g, const std::string& prefix, std::uint64_t seed = 0);
void write_csv_triple(const Graph& g, const std::string& dir);

}  // namespace gnas
