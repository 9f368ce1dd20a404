#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "gnas/codes.hpp"
#include "gnas/errors.hpp"

namespace gnas {

// Deterministic code-level reward functions for exercising the search agent
// without model training. Three families:
//
//   smooth    — fraction of non-EoB genes matching a preferred pattern
//               (block stage: GCNII+relu; arch stage: first dropout and
//               alpha options). Any all-preferred code scores 1.0.
//   sparse    — 1.0 for exactly the motif chain below, 0 otherwise.
//   deceptive — max(motif score, 0.55 * local fraction). The local pattern
//               (block stage: GCNII genes; arch stage: the first dropout
//               option) earns up to 0.55. The motif score
//               0.58 + 0.42 * prefix/N applies only to codes that start
//               with a motif prefix AND contain no local-pattern gene at
//               all, peaking at 1.0 for the full motif chain.
//
//               Replacing any single gene of an all-local code either keeps
//               the local score or breaks it without unlocking motif credit
//               (one foreign gene spoils purity), so the all-local code is a
//               strict local optimum under single-gene replacement. A
//               sequential sampler, by contrast, earns the step-one motif
//               credit on most continuations, which gives temporal-
//               difference learning a gradient toward the global optimum.
enum class OracleKind { Smooth, Deceptive, Sparse };

inline OracleKind oracle_kind_from(const std::string& s) {
  if (s == "smooth") return OracleKind::Smooth;
  if (s == "deceptive") return OracleKind::Deceptive;
  if (s == "sparse") return OracleKind::Sparse;
  throw ConfigError("unknown oracle kind: " + s);
}

// Motif chain gene at position i (1-based).
inline LayerGene motif_layer_gene(int i) {
  return LayerGene{i, LayerKind::AGNNII, Activation::Tanh, i == 1 ? -1 : i - 1};
}

inline BlockGene motif_block_gene(int i, const SpaceConfig& cfg) {
  BlockGene g;
  g.index = i;
  g.block_type = 0;
  g.dropout = cfg.dropout_options.back();
  g.alpha = cfg.alpha_options.back();
  g.prefix = i == 1 ? -1 : i - 1;
  return g;
}

// Full-length motif codes (the sparse/deceptive global optima).
inline BlockCode motif_block(const SpaceConfig& cfg) {
  BlockCode c;
  for (int i = 1; i <= cfg.max_layers; ++i) c.genes.push_back(motif_layer_gene(i));
  c.genes.push_back(LayerGene{cfg.max_layers + 1, LayerKind::EoB, Activation::None, -1});
  return c;
}

inline ArchCode motif_arch(const SpaceConfig& cfg) {
  ArchCode c;
  for (int i = 1; i <= cfg.max_blocks; ++i) c.genes.push_back(motif_block_gene(i, cfg));
  BlockGene eob;
  eob.index = cfg.max_blocks + 1;
  eob.block_type = BlockGene::kEoB;
  eob.dropout = 0.0;
  eob.alpha = 0.0;
  eob.prefix = -1;
  c.genes.push_back(eob);
  return c;
}

inline double oracle_score(OracleKind kind, const BlockCode& code, const SpaceConfig& cfg) {
  const int layers = code.num_layers();
  switch (kind) {
    case OracleKind::Smooth: {
      if (layers == 0) return 0.0;
      int hits = 0;
      for (const auto& g : code.genes)
        if (!g.is_eob() && g.type == LayerKind::GCNII && g.act == Activation::ReLU) ++hits;
      return static_cast<double>(hits) / layers;
    }
    case OracleKind::Sparse:
      return code == motif_block(cfg) ? 1.0 : 0.0;
    case OracleKind::Deceptive: {
      int prefix_len = 0;
      for (int i = 0; i < layers; ++i) {
        if (code.genes[i] == motif_layer_gene(i + 1))
          ++prefix_len;
        else
          break;
      }
      int local = 0;
      for (const auto& g : code.genes)
        if (!g.is_eob() && g.type == LayerKind::GCNII) ++local;
      double motif = 0.0;
      if (prefix_len >= 1 && local == 0)
        motif = 0.58 + 0.42 * static_cast<double>(prefix_len) / cfg.max_layers;
      const double base = 0.55 * static_cast<double>(local) / cfg.max_layers;
      return std::max(motif, base);
    }
  }
  throw Error("oracle_score: unknown kind");
}

inline double oracle_score(OracleKind kind, const ArchCode& code, const SpaceConfig& cfg) {
  const int blocks = code.num_blocks();
  switch (kind) {
    case OracleKind::Smooth: {
      if (blocks == 0) return 0.0;
      int hits = 0;
      for (const auto& g : code.genes)
        if (!g.is_eob() && std::abs(g.dropout - cfg.dropout_options.front()) < 1e-12 &&
            std::abs(g.alpha - cfg.alpha_options.front()) < 1e-12)
          ++hits;
      return static_cast<double>(hits) / blocks;
    }
    case OracleKind::Sparse:
      return code == motif_arch(cfg) ? 1.0 : 0.0;
    case OracleKind::Deceptive: {
      int prefix_len = 0;
      for (int i = 0; i < blocks; ++i) {
        if (code.genes[i] == motif_block_gene(i + 1, cfg))
          ++prefix_len;
        else
          break;
      }
      int local = 0;
      for (const auto& g : code.genes)
        if (!g.is_eob() && std::abs(g.dropout - cfg.dropout_options.front()) < 1e-12) ++local;
      double motif = 0.0;
      if (prefix_len >= 1 && local == 0)
        motif = 0.58 + 0.42 * static_cast<double>(prefix_len) / cfg.max_blocks;
      const double base = 0.55 * static_cast<double>(local) / cfg.max_blocks;
      return std::max(motif, base);
    }
  }
  throw Error("oracle_score: unknown kind");
}

}  // namespace gnas
