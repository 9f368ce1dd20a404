#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "gnas/codes.hpp"
#include "gnas/errors.hpp"

namespace gnas {

// Stage-specific view of the action space: state featurization plus a dense
// slot table over every gene the stage can emit. Invalid slots (prefix >=
// index combinations) exist in the table but are never enumerated as valid
// actions, so they stay masked.
//
// Block-stage state vector: one-hot index (N_l+1 slots) | layer type
// (|types|+1, EoB last) | activation | prefix (-1..N_l, N_l+2 slots).
// The 'start' state is the all-zero vector.
struct BlockStageTable {
  using Gene = LayerGene;

  SpaceConfig cfg;

  explicit BlockStageTable(SpaceConfig c = {}) : cfg(std::move(c)) {}

  int types() const { return static_cast<int>(cfg.layer_types.size()); }
  int acts() const { return static_cast<int>(cfg.activations.size()); }
  int prefix_slots() const { return cfg.max_layers + 2; }
  int index_slots() const { return cfg.max_layers + 1; }

  int width() const { return index_slots() + types() + 1 + acts() + prefix_slots(); }

  int size() const { return cfg.max_layers * types() * acts() * prefix_slots() + 1; }

  int max_code_len() const { return cfg.max_layers + 1; }

  bool is_eob(const Gene& g) const { return g.is_eob(); }
  int index_of(const Gene& g) const { return g.index; }
  std::string key(const Gene& g) const { return serialize_gene(g); }

  int type_pos(LayerKind k) const {
    if (k == LayerKind::EoB) return types();
    for (int i = 0; i < types(); ++i)
      if (cfg.layer_types[i] == k) return i;
    throw Error("featurize: layer type outside option table");
  }

  int act_pos(Activation a) const {
    for (int i = 0; i < acts(); ++i)
      if (cfg.activations[i] == a) return i;
    throw Error("featurize: activation outside option table");
  }

  Eigen::RowVectorXd featurize(const std::optional<Gene>& state) const {
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(width());
    if (!state) return v;  // 'start'
    const Gene& g = *state;
    if (g.index < 1 || g.index > index_slots())
      throw Error("featurize: index outside option table");
    if (g.prefix < -1 || g.prefix > cfg.max_layers)
      throw Error("featurize: prefix outside option table");
    int off = 0;
    v[off + g.index - 1] = 1.0;
    off += index_slots();
    v[off + type_pos(g.type)] = 1.0;
    off += types() + 1;
    if (!g.is_eob()) v[off + act_pos(g.act)] = 1.0;  // EoB activation is a sentinel
    off += acts();
    v[off + g.prefix + 1] = 1.0;
    return v;
  }

  // Non-EoB genes pack as (((index-1)*T + t)*A + a)*P + prefix+1; EoB is the
  // final slot, shared across indices (the state already encodes position).
  int slot(const Gene& g) const {
    if (g.is_eob()) return size() - 1;
    if (g.index < 1 || g.index > cfg.max_layers)
      throw Error("slot: index outside table");
    const int p = prefix_slots();
    const int a = acts();
    return (((g.index - 1) * types() + type_pos(g.type)) * a + act_pos(g.act)) * p +
           (g.prefix + 1);
  }

  std::vector<Gene> actions_at(int next_index) const {
    return valid_layer_actions(next_index, cfg);
  }

  Gene eob_gene(int index) const {
    return Gene{index, LayerKind::EoB, Activation::None, -1};
  }
};

// Arch-stage state vector: one-hot index (N_b+1) | block type (pool+1, EoB
// last) | dropout option | alpha option | prefix (-1..N_b-1, N_b+1 slots).
struct ArchStageTable {
  using Gene = BlockGene;

  SpaceConfig cfg;
  int pool_size = 0;

  ArchStageTable() = default;
  ArchStageTable(SpaceConfig c, int pool) : cfg(std::move(c)), pool_size(pool) {
    if (pool_size <= 0) throw StateError("arch stage needs a non-empty block pool");
  }

  int dropouts() const { return static_cast<int>(cfg.dropout_options.size()); }
  int alphas() const { return static_cast<int>(cfg.alpha_options.size()); }
  int prefix_slots() const { return cfg.max_blocks + 1; }
  int index_slots() const { return cfg.max_blocks + 1; }

  int width() const {
    return index_slots() + pool_size + 1 + dropouts() + alphas() + prefix_slots();
  }

  int size() const {
    return cfg.max_blocks * pool_size * dropouts() * alphas() * prefix_slots() + 1;
  }

  int max_code_len() const { return cfg.max_blocks + 1; }

  bool is_eob(const Gene& g) const { return g.is_eob(); }
  int index_of(const Gene& g) const { return g.index; }
  std::string key(const Gene& g) const { return serialize_gene(g); }

  int option_pos(const std::vector<double>& opts, double v, const char* what) const {
    for (std::size_t i = 0; i < opts.size(); ++i)
      if (std::abs(opts[i] - v) < 1e-12) return static_cast<int>(i);
    throw Error(std::string("featurize: ") + what + " outside option table");
  }

  Eigen::RowVectorXd featurize(const std::optional<Gene>& state) const {
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(width());
    if (!state) return v;
    const Gene& g = *state;
    if (g.index < 1 || g.index > index_slots())
      throw Error("featurize: index outside option table");
    if (g.prefix < -1 || g.prefix > cfg.max_blocks - 1)
      throw Error("featurize: prefix outside option table");
    int off = 0;
    v[off + g.index - 1] = 1.0;
    off += index_slots();
    if (g.is_eob()) {
      v[off + pool_size] = 1.0;
      off += pool_size + 1 + dropouts() + alphas();
    } else {
      if (g.block_type < 0 || g.block_type >= pool_size)
        throw Error("featurize: block type outside pool");
      v[off + g.block_type] = 1.0;
      off += pool_size + 1;
      v[off + option_pos(cfg.dropout_options, g.dropout, "dropout")] = 1.0;
      off += dropouts();
      v[off + option_pos(cfg.alpha_options, g.alpha, "alpha")] = 1.0;
      off += alphas();
    }
    v[off + g.prefix + 1] = 1.0;
    return v;
  }

  int slot(const Gene& g) const {
    if (g.is_eob()) return size() - 1;
    if (g.index < 1 || g.index > cfg.max_blocks) throw Error("slot: index outside table");
    const int d = option_pos(cfg.dropout_options, g.dropout, "dropout");
    const int a = option_pos(cfg.alpha_options, g.alpha, "alpha");
    return ((((g.index - 1) * pool_size + g.block_type) * dropouts() + d) * alphas() + a) *
               prefix_slots() +
           (g.prefix + 1);
  }

  std::vector<Gene> actions_at(int next_index) const {
    return valid_block_actions(next_index, pool_size, cfg);
  }

  Gene eob_gene(int index) const {
    Gene g;
    g.index = index;
    g.block_type = BlockGene::kEoB;
    g.dropout = 0.0;
    g.alpha = 0.0;
    g.prefix = -1;
    return g;
  }
};

}  // namespace gnas
