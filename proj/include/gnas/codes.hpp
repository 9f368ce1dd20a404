#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gnas/kinds.hpp"

namespace gnas {

// 4-D layer gene [index, layer_type, activation, prefix]. Prefix -1 reads the
// block's direct input, 0 the block's residual input, k >= 1 the output of
// layer k. EoB genes carry fixed sentinels (activation none, prefix -1).
struct LayerGene {
  int index = 0;
  LayerKind type = LayerKind::GCNII;
  Activation act = Activation::ReLU;
  int prefix = -1;

  bool is_eob() const { return type == LayerKind::EoB; }
  friend bool operator==(const LayerGene&, const LayerGene&) = default;
};

struct BlockCode {
  std::vector<LayerGene> genes;

  int num_layers() const {  // non-EoB genes
    int n = 0;
    for (const auto& g : genes) n += g.is_eob() ? 0 : 1;
    return n;
  }
  friend bool operator==(const BlockCode&, const BlockCode&) = default;
};

// 5-D block gene [index, block_type, dropout, alpha, prefix]. block_type is a
// position in the block pool, or kEoB. Prefix -1 means no macro residual,
// 0 the first block's output, k >= 1 block k's output.
struct BlockGene {
  static constexpr int kEoB = -1;

  int index = 0;
  int block_type = 0;
  double dropout = 0.3;
  double alpha = 0.3;
  int prefix = -1;

  bool is_eob() const { return block_type == kEoB; }
  friend bool operator==(const BlockGene&, const BlockGene&) = default;
};

struct ArchCode {
  std::vector<BlockGene> genes;

  int num_blocks() const {
    int n = 0;
    for (const auto& g : genes) n += g.is_eob() ? 0 : 1;
    return n;
  }
  friend bool operator==(const ArchCode&, const ArchCode&) = default;
};

struct SpaceConfig {
  int max_layers = 6;  // N_l
  int max_blocks = 8;  // N_b
  std::vector<LayerKind> layer_types = {LayerKind::GCNII, LayerKind::GATII,
                                        LayerKind::SAGEIIMean, LayerKind::SAGEIIMax,
                                        LayerKind::AGNNII};
  std::vector<Activation> activations = {Activation::ReLU, Activation::ELU,
                                         Activation::PReLU, Activation::Tanh,
                                         Activation::Identity, Activation::None};
  std::vector<double> dropout_options = {0.3, 0.45, 0.6};
  std::vector<double> alpha_options = {0.1, 0.3, 0.5};
};

// --- action enumeration (the sampling MDP) ---
// Valid actions depend only on how many genes have been laid down; the next
// gene's index is len+1. EoB becomes available from length 1 on (empty codes
// are forbidden) and is the only action once the budget is exhausted.

std::vector<LayerGene> valid_layer_actions(int next_index, const SpaceConfig& cfg);
std::vector<BlockGene> valid_block_actions(int next_index, int pool_size,
                                           const SpaceConfig& cfg);

std::vector<LayerGene> valid_actions_block(const BlockCode& partial, const SpaceConfig& cfg);
std::vector<BlockGene> valid_actions_arch(const ArchCode& partial, int pool_size,
                                          const SpaceConfig& cfg);

// --- validation ---
// Violations are data, not exceptions; each entry names the gene and rule.
// `strict` additionally pins dropout/alpha to the option tables (search-time
// codes); lenient mode accepts any dropout in [0,1) and alpha in [0,1]
// (hand-written model files).

std::vector<std::string> validate_block(const BlockCode& code, const SpaceConfig& cfg);
std::vector<std::string> validate_arch(const ArchCode& code, int pool_size,
                                       const SpaceConfig& cfg, bool strict = true);

// --- decoding ---

// Block DAG: edges run prefix -> gene; acyclic because prefix < index.
struct BlockDag {
  std::vector<LayerGene> layers;  // non-EoB, in index order
  std::vector<int> sinks;         // 1-based indices of layers without successors
};

BlockDag decode_block(const BlockCode& code, const SpaceConfig& cfg);

// The fixed evaluation scaffold: max_blocks copies of one block, dropout 0.3,
// alpha 0.3, block i >= 3 taking its residual input from block i-2.
ArchCode standard_architecture(const BlockCode& block, const SpaceConfig& cfg,
                               double dropout = 0.3, double alpha = 0.3);

// Exact number of valid block codes: sum over lengths L of
// prod_{i=1..L} |types| * |activations| * (i + 1). Throws ArgumentError when
// the result would overflow 64 bits (defaults: exact for max_layers <= 8).
std::uint64_t count_blocks(const SpaceConfig& cfg);

// --- serialization ---
// JSON arrays-of-arrays, e.g. [[1,"GCNII","relu",-1],[2,"EoB","none",-1]].

std::string serialize_block(const BlockCode& code);
std::string serialize_arch(const ArchCode& code);
BlockCode parse_block(const std::string& text);
ArchCode parse_arch(const std::string& text);

std::string serialize_gene(const LayerGene& g);
std::string serialize_gene(const BlockGene& g);
LayerGene parse_layer_gene(const std::string& text);
BlockGene parse_block_gene(const std::string& text);

// One-line forms for trace files: fields joined by ':', genes by '|'.
std::string compact_string(const BlockCode& code);
std::string compact_string(const ArchCode& code);

}  // namespace gnas
