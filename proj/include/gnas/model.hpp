#pragma once

#include <vector>

#include "gnas/codes.hpp"

namespace gnas {

// Executable model description: input projection -> blocks -> classifier.
// Residual wiring is kept in code-space terms and resolved while running:
// residual_prefix -1 binds the block's residual channel to its direct input,
// 0 to the first block's output, k >= 1 to block k's output. Block 1 reads
// the projected features on both channels.
struct ModelSpec {
  struct Block {
    BlockDag dag;
    double dropout = 0.3;
    double alpha = 0.3;
    int residual_prefix = -1;
  };
  std::vector<Block> blocks;
};

// Total depth: non-EoB layers summed over blocks.
int model_depth(const ModelSpec& m);

// Decodes an architecture code against a pool of block codes. Validation is
// strict for search-produced codes and lenient (`strict=false`) for
// hand-written model files whose dropout/alpha may sit outside the tables.
ModelSpec decode_arch(const ArchCode& code, const std::vector<BlockCode>& pool,
                      const SpaceConfig& cfg, bool strict = true);

// Straight chain of `depth` single-layer blocks of one kind, no macro
// residuals. `last_act` lets the final layer differ (e.g. none before the
// classifier).
ModelSpec chain_model(LayerKind kind, Activation act, int depth, double dropout,
                      double alpha, Activation last_act);

}  // namespace gnas
