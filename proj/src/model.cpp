#include "gnas/model.hpp"

#include "gnas/errors.hpp"

namespace gnas {

int model_depth(const ModelSpec& m) {
  int d = 0;
  for (const auto& b : m.blocks) d += static_cast<int>(b.dag.layers.size());
  return d;
}

ModelSpec decode_arch(const ArchCode& code, const std::vector<BlockCode>& pool,
                      const SpaceConfig& cfg, bool strict) {
  auto violations = validate_arch(code, static_cast<int>(pool.size()), cfg, strict);
  if (!violations.empty()) throw DecodeError("invalid arch code: " + violations.front());
  ModelSpec m;
  for (const auto& g : code.genes) {
    if (g.is_eob()) continue;
    ModelSpec::Block b;
    b.dag = decode_block(pool[g.block_type], cfg);
    b.dropout = g.dropout;
    b.alpha = g.alpha;
    b.residual_prefix = g.prefix;
    m.blocks.push_back(std::move(b));
  }
  return m;
}

ModelSpec chain_model(LayerKind kind, Activation act, int depth, double dropout,
                      double alpha, Activation last_act) {
  if (depth < 1) throw ArgumentError("chain_model: depth must be >= 1");
  ModelSpec m;
  for (int i = 0; i < depth; ++i) {
    ModelSpec::Block b;
    LayerGene g;
    g.index = 1;
    g.type = kind;
    g.act = (i + 1 == depth) ? last_act : act;
    g.prefix = -1;
    b.dag.layers = {g};
    b.dag.sinks = {1};
    b.dropout = dropout;
    b.alpha = alpha;
    b.residual_prefix = -1;
    m.blocks.push_back(std::move(b));
  }
  return m;
}

}  // namespace gnas
