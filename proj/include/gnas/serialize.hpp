#pragma once

#include <optional>
#include <string>

#include "gnas/agent.hpp"
#include "gnas/params.hpp"
#include "json.hpp"

namespace gnas {

// JSON forms for checkpoints. nlohmann serializes doubles with
// shortest-round-trip formatting, so values reload bit-exactly.

template <class S>
nlohmann::json params_to_json(const ParamStore<S>& store) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, e] : store.entries) {
    nlohmann::json t;
    t["rows"] = e.value.rows();
    t["cols"] = e.value.cols();
    t["group"] = e.group;
    auto dump = [](const Mat<S>& m) {
      nlohmann::json a = nlohmann::json::array();
      for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) a.push_back(static_cast<double>(m(i, j)));
      return a;
    };
    t["data"] = dump(e.value);
    t["m1"] = dump(e.m1);
    t["m2"] = dump(e.m2);
    out[name] = std::move(t);
  }
  nlohmann::json root;
  root["step"] = store.step;
  root["tensors"] = std::move(out);
  return root;
}

template <class S>
ParamStore<S> params_from_json(const nlohmann::json& root) {
  if (!root.is_object() || !root.contains("tensors"))
    throw ParseError("parameter blob: missing tensors");
  ParamStore<S> store;
  store.step = root.value("step", 0L);
  const nlohmann::json& tensors = root.at("tensors");
  for (auto it = tensors.begin(); it != tensors.end(); ++it) {
    const std::string name = it.key();
    const nlohmann::json& t = it.value();
    const int rows = t.at("rows").get<int>();
    const int cols = t.at("cols").get<int>();
    if (rows <= 0 || cols <= 0) throw ParseError("parameter blob: bad shape for " + name);
    auto& v = store.create(name, rows, cols, t.value("group", "none"));
    auto load = [&](const char* field, Mat<S>& m) {
      const nlohmann::json& a = t.at(field);
      if (!a.is_array() || static_cast<int>(a.size()) != rows * cols)
        throw ParseError("parameter blob: bad data length for " + name);
      int k = 0;
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = static_cast<S>(a[k++].get<double>());
    };
    load("data", v);
    auto& e = store.at(name);
    load("m1", e.m1);
    load("m2", e.m2);
  }
  return store;
}

inline nlohmann::json gene_json(const LayerGene& g) {
  return nlohmann::json::parse(serialize_gene(g));
}
inline nlohmann::json gene_json(const BlockGene& g) {
  return nlohmann::json::parse(serialize_gene(g));
}
inline void gene_from_json(const nlohmann::json& j, LayerGene& g) {
  g = parse_layer_gene(j.dump());
}
inline void gene_from_json(const nlohmann::json& j, BlockGene& g) {
  g = parse_block_gene(j.dump());
}

template <class Gene>
nlohmann::json transition_to_json(const Transition<Gene>& tr) {
  nlohmann::json j;
  j["s"] = tr.state ? gene_json(*tr.state) : nlohmann::json();
  j["a"] = gene_json(tr.action);
  j["r"] = tr.reward;
  j["n"] = tr.next_state ? gene_json(*tr.next_state) : nlohmann::json();
  j["t"] = tr.terminal;
  return j;
}

template <class Gene>
Transition<Gene> transition_from_json(const nlohmann::json& j) {
  Transition<Gene> tr;
  if (!j.at("s").is_null()) {
    Gene g;
    gene_from_json(j.at("s"), g);
    tr.state = g;
  }
  gene_from_json(j.at("a"), tr.action);
  tr.reward = j.at("r").get<double>();
  if (!j.at("n").is_null()) {
    Gene g;
    gene_from_json(j.at("n"), g);
    tr.next_state = g;
  }
  tr.terminal = j.at("t").get<bool>();
  return tr;
}

}  // namespace gnas
