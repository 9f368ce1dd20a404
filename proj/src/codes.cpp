#include "gnas/codes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "gnas/errors.hpp"
#include "json.hpp"

namespace gnas {

namespace {

bool contains(const std::vector<double>& opts, double v) {
  for (double o : opts)
    if (std::abs(o - v) < 1e-12) return true;
  return false;
}

template <class T>
bool contains(const std::vector<T>& opts, T v) {
  return std::find(opts.begin(), opts.end(), v) != opts.end();
}

}  // namespace

std::vector<LayerGene> valid_layer_actions(int next_index, const SpaceConfig& cfg) {
  if (next_index < 1 || next_index > cfg.max_layers + 1)
    throw StateError("valid_layer_actions: index out of range");
  std::vector<LayerGene> out;
  if (next_index <= cfg.max_layers) {
    for (LayerKind type : cfg.layer_types) {
      for (Activation act : cfg.activations) {
        for (int prefix = -1; prefix < next_index; ++prefix) {
          out.push_back(LayerGene{next_index, type, act, prefix});
        }
      }
    }
  }
  if (next_index >= 2) {
    out.push_back(LayerGene{next_index, LayerKind::EoB, Activation::None, -1});
  }
  return out;
}

std::vector<LayerGene> valid_actions_block(const BlockCode& partial, const SpaceConfig& cfg) {
  for (const auto& g : partial.genes)
    if (g.is_eob()) throw StateError("valid_actions_block: code already terminated");
  return valid_layer_actions(static_cast<int>(partial.genes.size()) + 1, cfg);
}

std::vector<BlockGene> valid_block_actions(int next_index, int pool_size,
                                           const SpaceConfig& cfg) {
  if (pool_size <= 0) throw StateError("valid_block_actions: empty block pool");
  if (next_index < 1 || next_index > cfg.max_blocks + 1)
    throw StateError("valid_block_actions: index out of range");
  std::vector<BlockGene> out;
  if (next_index <= cfg.max_blocks) {
    for (int b = 0; b < pool_size; ++b) {
      for (double d : cfg.dropout_options) {
        for (double a : cfg.alpha_options) {
          for (int prefix = -1; prefix < next_index; ++prefix) {
            out.push_back(BlockGene{next_index, b, d, a, prefix});
          }
        }
      }
    }
  }
  if (next_index >= 2) {
    BlockGene eob;
    eob.index = next_index;
    eob.block_type = BlockGene::kEoB;
    eob.dropout = 0.0;
    eob.alpha = 0.0;
    eob.prefix = -1;
    out.push_back(eob);
  }
  return out;
}

std::vector<BlockGene> valid_actions_arch(const ArchCode& partial, int pool_size,
                                          const SpaceConfig& cfg) {
  for (const auto& g : partial.genes)
    if (g.is_eob()) throw StateError("valid_actions_arch: code already terminated");
  return valid_block_actions(static_cast<int>(partial.genes.size()) + 1, pool_size, cfg);
}

std::vector<std::string> validate_block(const BlockCode& code, const SpaceConfig& cfg) {
  std::vector<std::string> v;
  const int n = static_cast<int>(code.genes.size());
  if (n == 0) {
    v.push_back("code: empty");
    return v;
  }
  for (int i = 0; i < n; ++i) {
    const auto& g = code.genes[i];
    const std::string at = "gene " + std::to_string(i + 1);
    if (g.index != i + 1) v.push_back(at + ": indices must run 1..L consecutively");
    if (g.is_eob()) {
      if (i == 0) v.push_back(at + ": empty block (EoB first)");
      if (i != n - 1) v.push_back(at + ": EoB before end");
      if (g.act != Activation::None || g.prefix != -1)
        v.push_back(at + ": EoB sentinel fields");
      continue;
    }
    if (!contains(cfg.layer_types, g.type)) v.push_back(at + ": layer type not in table");
    if (!contains(cfg.activations, g.act)) v.push_back(at + ": activation not in table");
    if (g.prefix < -1) v.push_back(at + ": prefix below -1");
    if (g.prefix >= g.index) v.push_back(at + ": prefix<index violated");
  }
  if (!code.genes.back().is_eob()) v.push_back("code: unterminated (no EoB)");
  if (code.num_layers() > cfg.max_layers)
    v.push_back("code: more than " + std::to_string(cfg.max_layers) + " layers");
  return v;
}

std::vector<std::string> validate_arch(const ArchCode& code, int pool_size,
                                       const SpaceConfig& cfg, bool strict) {
  std::vector<std::string> v;
  const int n = static_cast<int>(code.genes.size());
  if (n == 0) {
    v.push_back("code: empty");
    return v;
  }
  for (int i = 0; i < n; ++i) {
    const auto& g = code.genes[i];
    const std::string at = "gene " + std::to_string(i + 1);
    if (g.index != i + 1) v.push_back(at + ": indices must run 1..L consecutively");
    if (g.is_eob()) {
      if (i == 0) v.push_back(at + ": empty architecture (EoB first)");
      if (i != n - 1) v.push_back(at + ": EoB before end");
      if (g.prefix != -1) v.push_back(at + ": EoB sentinel fields");
      continue;
    }
    if (g.block_type < 0 || g.block_type >= pool_size)
      v.push_back(at + ": block type outside pool");
    if (strict) {
      if (!contains(cfg.dropout_options, g.dropout))
        v.push_back(at + ": dropout not in table");
      if (!contains(cfg.alpha_options, g.alpha)) v.push_back(at + ": alpha not in table");
    } else {
      if (!(g.dropout >= 0.0 && g.dropout < 1.0)) v.push_back(at + ": dropout outside [0,1)");
      if (!(g.alpha >= 0.0 && g.alpha <= 1.0)) v.push_back(at + ": alpha outside [0,1]");
    }
    if (g.prefix < -1) v.push_back(at + ": prefix below -1");
    if (g.prefix >= g.index) v.push_back(at + ": prefix<index violated");
  }
  if (!code.genes.back().is_eob()) v.push_back("code: unterminated (no EoB)");
  if (code.num_blocks() > cfg.max_blocks)
    v.push_back("code: more than " + std::to_string(cfg.max_blocks) + " blocks");
  return v;
}

BlockDag decode_block(const BlockCode& code, const SpaceConfig& cfg) {
  auto violations = validate_block(code, cfg);
  if (!violations.empty()) throw DecodeError("invalid block code: " + violations.front());
  BlockDag dag;
  const int L = code.num_layers();
  std::vector<bool> has_successor(L + 1, false);
  for (const auto& g : code.genes) {
    if (g.is_eob()) continue;
    dag.layers.push_back(g);
    if (g.prefix >= 1) has_successor[g.prefix] = true;
  }
  for (int i = 1; i <= L; ++i)
    if (!has_successor[i]) dag.sinks.push_back(i);
  return dag;
}

ArchCode standard_architecture(const BlockCode& block, const SpaceConfig& cfg,
                               double dropout, double alpha) {
  auto violations = validate_block(block, cfg);
  if (!violations.empty())
    throw ArgumentError("standard_architecture: invalid block: " + violations.front());
  ArchCode arch;
  for (int i = 1; i <= cfg.max_blocks; ++i) {
    BlockGene g;
    g.index = i;
    g.block_type = 0;
    g.dropout = dropout;
    g.alpha = alpha;
    g.prefix = (i >= 3) ? i - 2 : -1;
    arch.genes.push_back(g);
  }
  BlockGene eob;
  eob.index = cfg.max_blocks + 1;
  eob.block_type = BlockGene::kEoB;
  eob.dropout = 0.0;
  eob.alpha = 0.0;
  eob.prefix = -1;
  arch.genes.push_back(eob);
  return arch;
}

std::uint64_t count_blocks(const SpaceConfig& cfg) {
  const std::uint64_t per_index_base =
      static_cast<std::uint64_t>(cfg.layer_types.size()) * cfg.activations.size();
  std::uint64_t total = 0;
  std::uint64_t product = 1;
  for (int len = 1; len <= cfg.max_layers; ++len) {
    // choices at index `len`: types x activations x (len + 1) prefixes
    std::uint64_t per_index;
    if (__builtin_mul_overflow(per_index_base, static_cast<std::uint64_t>(len + 1),
                               &per_index))
      throw ArgumentError("count_blocks: 64-bit overflow; reduce max_layers");
    if (__builtin_mul_overflow(product, per_index, &product))
      throw ArgumentError("count_blocks: 64-bit overflow; reduce max_layers");
    if (__builtin_add_overflow(total, product, &total))
      throw ArgumentError("count_blocks: 64-bit overflow; reduce max_layers");
  }
  return total;
}

// --- serialization ---

namespace {
using nlohmann::json;

json gene_to_json(const LayerGene& g) {
  return json::array({g.index, to_string(g.type), to_string(g.act), g.prefix});
}

json gene_to_json(const BlockGene& g) {
  if (g.is_eob()) return json::array({g.index, "EoB", g.dropout, g.alpha, g.prefix});
  return json::array({g.index, "B" + std::to_string(g.block_type), g.dropout, g.alpha,
                      g.prefix});
}

LayerGene layer_gene_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4)
    throw ParseError("layer gene: expected [index, type, activation, prefix]");
  LayerGene g;
  if (!j[0].is_number_integer()) throw ParseError("layer gene: index must be an integer");
  g.index = j[0].get<int>();
  g.type = layer_kind_from(j[1].get<std::string>());
  g.act = activation_from(j[2].get<std::string>());
  if (!j[3].is_number_integer()) throw ParseError("layer gene: prefix must be an integer");
  g.prefix = j[3].get<int>();
  return g;
}

BlockGene block_gene_from_json(const json& j) {
  if (!j.is_array() || j.size() != 5)
    throw ParseError("block gene: expected [index, block, dropout, alpha, prefix]");
  BlockGene g;
  if (!j[0].is_number_integer()) throw ParseError("block gene: index must be an integer");
  g.index = j[0].get<int>();
  const std::string type = j[1].get<std::string>();
  if (type == "EoB") {
    g.block_type = BlockGene::kEoB;
  } else if (type.size() >= 2 && type[0] == 'B') {
    try {
      g.block_type = std::stoi(type.substr(1));
    } catch (...) {
      throw ParseError("block gene: bad block id '" + type + "'");
    }
  } else {
    throw ParseError("block gene: bad block id '" + type + "'");
  }
  g.dropout = j[2].get<double>();
  g.alpha = j[3].get<double>();
  if (!j[4].is_number_integer()) throw ParseError("block gene: prefix must be an integer");
  g.prefix = j[4].get<int>();
  return g;
}

json parse_json_or_throw(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ParseError("malformed JSON code text");
  return j;
}
}  // namespace

std::string serialize_block(const BlockCode& code) {
  json j = json::array();
  for (const auto& g : code.genes) j.push_back(gene_to_json(g));
  return j.dump();
}

std::string serialize_arch(const ArchCode& code) {
  json j = json::array();
  for (const auto& g : code.genes) j.push_back(gene_to_json(g));
  return j.dump();
}

BlockCode parse_block(const std::string& text) {
  json j = parse_json_or_throw(text);
  if (!j.is_array()) throw ParseError("block code: expected an array of genes");
  BlockCode code;
  try {
    for (const auto& item : j) code.genes.push_back(layer_gene_from_json(item));
  } catch (const json::exception& e) {
    throw ParseError(std::string("block code: ") + e.what());
  }
  return code;
}

ArchCode parse_arch(const std::string& text) {
  json j = parse_json_or_throw(text);
  if (!j.is_array()) throw ParseError("arch code: expected an array of genes");
  ArchCode code;
  try {
    for (const auto& item : j) code.genes.push_back(block_gene_from_json(item));
  } catch (const json::exception& e) {
    throw ParseError(std::string("arch code: ") + e.what());
  }
  return code;
}

std::string serialize_gene(const LayerGene& g) { return gene_to_json(g).dump(); }
std::string serialize_gene(const BlockGene& g) { return gene_to_json(g).dump(); }

LayerGene parse_layer_gene(const std::string& text) {
  try {
    return layer_gene_from_json(parse_json_or_throw(text));
  } catch (const json::exception& e) {
    throw ParseError(std::string("layer gene: ") + e.what());
  }
}

BlockGene parse_block_gene(const std::string& text) {
  try {
    return block_gene_from_json(parse_json_or_throw(text));
  } catch (const json::exception& e) {
    throw ParseError(std::string("block gene: ") + e.what());
  }
}

namespace {
std::string trim_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}
}  // namespace

std::string compact_string(const BlockCode& code) {
  std::ostringstream out;
  for (std::size_t i = 0; i < code.genes.size(); ++i) {
    const auto& g = code.genes[i];
    if (i) out << '|';
    out << g.index << ':' << to_string(g.type) << ':' << to_string(g.act) << ':'
        << g.prefix;
  }
  return out.str();
}

std::string compact_string(const ArchCode& code) {
  std::ostringstream out;
  for (std::size_t i = 0; i < code.genes.size(); ++i) {
    const auto& g = code.genes[i];
    if (i) out << '|';
    out << g.index << ':';
    if (g.is_eob())
      out << "EoB";
    else
      out << 'B' << g.block_type;
    out << ':' << trim_num(g.dropout) << ':' << trim_num(g.alpha) << ':' << g.prefix;
  }
  return out.str();
}

}  // namespace gnas
