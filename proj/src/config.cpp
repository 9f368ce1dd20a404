#include "gnas/config.hpp"

#include <filesystem>
#include <set>

#include "gnas/run_io.hpp"
#include "json.hpp"

namespace gnas {

namespace {
using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& why) {
  throw ConfigError(path + ": " + why);
}

void expect_keys(const json& j, const std::string& where,
                 const std::set<std::string>& allowed) {
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) fail(where + "." + key, "unknown field");
  }
}

double get_num(const json& j, const std::string& where, const char* key, double def,
               double lo, double hi) {
  if (!j.contains(key)) return def;
  const std::string path = where + "." + key;
  if (!j.at(key).is_number()) fail(path, "must be a number");
  const double v = j.at(key).get<double>();
  if (v < lo || v > hi)
    fail(path, "out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return v;
}

int get_int(const json& j, const std::string& where, const char* key, int def, int lo,
            int hi) {
  if (!j.contains(key)) return def;
  const std::string path = where + "." + key;
  if (!j.at(key).is_number_integer()) fail(path, "must be an integer");
  const long v = j.at(key).get<long>();
  if (v < lo || v > hi)
    fail(path, "out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<int>(v);
}

std::string get_str(const json& j, const std::string& where, const char* key,
                    const std::string& def) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_string()) fail(where + "." + key, "must be a string");
  return j.at(key).get<std::string>();
}

bool get_bool(const json& j, const std::string& where, const char* key, bool def) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_boolean()) fail(where + "." + key, "must be a boolean");
  return j.at(key).get<bool>();
}

std::uint64_t get_seed(const json& j, const std::string& where, const char* key,
                       std::uint64_t def) {
  if (!j.contains(key)) return def;
  const std::string path = where + "." + key;
  if (!j.at(key).is_number_unsigned() && !j.at(key).is_number_integer())
    fail(path, "must be a non-negative integer");
  const auto v = j.at(key).get<long long>();
  if (v < 0) fail(path, "must be a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

DatasetConfig parse_dataset(const json& j) {
  DatasetConfig d;
  expect_keys(j, "dataset",
              {"format", "path", "name", "synth", "row_normalize", "split", "per_class",
               "val", "test", "train_frac", "val_frac", "split_seed"});
  d.format = get_str(j, "dataset", "format", d.format);
  if (d.format != "planetoid" && d.format != "csv" && d.format != "cache" &&
      d.format != "synth")
    fail("dataset.format", "must be planetoid | csv | cache | synth");
  d.path = get_str(j, "dataset", "path", d.path);
  if (d.format != "synth" && d.path.empty()) fail("dataset.path", "required");
  d.name = get_str(j, "dataset", "name", d.format == "synth" ? d.name : d.path);
  if (j.contains("synth")) {
    const json& s = j.at("synth");
    expect_keys(s, "dataset.synth",
                {"preset", "nodes", "edges", "features", "classes", "homophily",
                 "on_rate_in", "on_rate_out", "seed"});
    d.synth = synth_preset(get_str(s, "dataset.synth", "preset", "cora"));
    d.synth.nodes = get_int(s, "dataset.synth", "nodes", d.synth.nodes, 2, 1000000);
    d.synth.undirected_edges =
        get_int(s, "dataset.synth", "edges", d.synth.undirected_edges, 0, 100000000);
    d.synth.features = get_int(s, "dataset.synth", "features", d.synth.features, 1, 1000000);
    d.synth.classes = get_int(s, "dataset.synth", "classes", d.synth.classes, 2, 1000);
    d.synth.homophily = get_num(s, "dataset.synth", "homophily", d.synth.homophily, 0.0, 1.0);
    d.synth.on_rate_in = get_num(s, "dataset.synth", "on_rate_in", d.synth.on_rate_in, 0.0, 1.0);
    d.synth.on_rate_out =
        get_num(s, "dataset.synth", "on_rate_out", d.synth.on_rate_out, 0.0, 1.0);
    d.synth.seed = get_seed(s, "dataset.synth", "seed", d.synth.seed);
  }
  d.row_normalize = get_bool(j, "dataset", "row_normalize", d.row_normalize);
  d.split = get_str(j, "dataset", "split", d.split);
  if (d.split != "semi" && d.split != "full") fail("dataset.split", "must be semi | full");
  d.per_class = get_int(j, "dataset", "per_class", d.per_class, 1, 1000000);
  d.val = get_int(j, "dataset", "val", d.val, 1, 100000000);
  d.test = get_int(j, "dataset", "test", d.test, 1, 100000000);
  d.train_frac = get_num(j, "dataset", "train_frac", d.train_frac, 1e-9, 1.0 - 1e-9);
  d.val_frac = get_num(j, "dataset", "val_frac", d.val_frac, 1e-9, 1.0 - 1e-9);
  d.split_seed = get_seed(j, "dataset", "split_seed", d.split_seed);
  return d;
}

SpaceConfig parse_space(const json& j) {
  SpaceConfig s;
  expect_keys(j, "space",
              {"max_layers", "max_blocks", "layer_types", "activations", "dropout_options",
               "alpha_options"});
  s.max_layers = get_int(j, "space", "max_layers", s.max_layers, 1, 16);
  s.max_blocks = get_int(j, "space", "max_blocks", s.max_blocks, 1, 32);
  if (j.contains("layer_types")) {
    s.layer_types.clear();
    for (const auto& t : j.at("layer_types")) {
      const LayerKind k = layer_kind_from(t.get<std::string>());
      if (k == LayerKind::EoB) fail("space.layer_types", "EoB is implicit");
      s.layer_types.push_back(k);
    }
    if (s.layer_types.empty()) fail("space.layer_types", "must not be empty");
  }
  if (j.contains("activations")) {
    s.activations.clear();
    for (const auto& t : j.at("activations"))
      s.activations.push_back(activation_from(t.get<std::string>()));
    if (s.activations.empty()) fail("space.activations", "must not be empty");
  }
  auto opts = [&](const char* key, std::vector<double>& dst, double lo, double hi) {
    if (!j.contains(key)) return;
    dst.clear();
    for (const auto& t : j.at(key)) {
      const double v = t.get<double>();
      if (v < lo || v > hi) fail(std::string("space.") + key, "option out of range");
      dst.push_back(v);
    }
    if (dst.empty()) fail(std::string("space.") + key, "must not be empty");
  };
  opts("dropout_options", s.dropout_options, 0.0, 0.999);
  opts("alpha_options", s.alpha_options, 0.0, 1.0);
  return s;
}

HyperParams parse_model(const json& j) {
  HyperParams h;
  expect_keys(j, "model",
              {"alpha", "lambda", "dropout", "hidden", "lr", "epochs", "weight_decay_conv",
               "weight_decay_fc"});
  h.alpha = get_num(j, "model", "alpha", h.alpha, 0.0, 1.0);
  h.lambda = get_num(j, "model", "lambda", h.lambda, 0.0, 100.0);
  h.dropout = get_num(j, "model", "dropout", h.dropout, 0.0, 0.999);
  h.hidden = get_int(j, "model", "hidden", h.hidden, 1, 4096);
  h.lr = get_num(j, "model", "lr", h.lr, 1e-9, 10.0);
  h.epochs = get_int(j, "model", "epochs", h.epochs, 0, 1000000);
  h.weight_decay_conv = get_num(j, "model", "weight_decay_conv", h.weight_decay_conv, 0.0, 1.0);
  h.weight_decay_fc = get_num(j, "model", "weight_decay_fc", h.weight_decay_fc, 0.0, 1.0);
  return h;
}

AgentConfig parse_agent(const json& j) {
  AgentConfig a;
  expect_keys(j, "agent",
              {"episodes_block", "episodes_arch", "capacity", "batch_size", "gamma",
               "sync_period", "anneal_start_frac", "q_hidden", "lr", "pool_size"});
  a.episodes_block = get_int(j, "agent", "episodes_block", a.episodes_block, 1, 10000000);
  a.episodes_arch = get_int(j, "agent", "episodes_arch", a.episodes_arch, 1, 10000000);
  a.capacity = get_int(j, "agent", "capacity", a.capacity, 1, 10000000);
  a.batch_size = get_int(j, "agent", "batch_size", a.batch_size, 1, 100000);
  a.gamma = get_num(j, "agent", "gamma", a.gamma, 0.0, 1.0);
  a.sync_period = get_int(j, "agent", "sync_period", a.sync_period, 1, 10000000);
  a.anneal_start_frac = get_num(j, "agent", "anneal_start_frac", a.anneal_start_frac, 0.0, 1.0);
  a.q_hidden = get_int(j, "agent", "q_hidden", a.q_hidden, 1, 65536);
  a.lr = get_num(j, "agent", "lr", a.lr, 1e-9, 10.0);
  a.pool_size = get_int(j, "agent", "pool_size", a.pool_size, 1, 1000);
  return a;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config: malformed JSON");
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  expect_keys(j, "config",
              {"version", "precision", "dataset", "space", "model", "agent", "evaluator",
               "output_dir", "jobs", "seed", "deterministic_trace"});
  RunConfig cfg;
  cfg.version = get_int(j, "config", "version", 1, 1, 1);
  cfg.precision = get_str(j, "config", "precision", cfg.precision);
  if (cfg.precision != "f32" && cfg.precision != "f64")
    fail("config.precision", "must be f32 | f64");
  if (j.contains("dataset")) cfg.dataset = parse_dataset(j.at("dataset"));
  if (j.contains("space")) cfg.space = parse_space(j.at("space"));
  if (j.contains("model")) cfg.model = parse_model(j.at("model"));
  if (j.contains("agent")) cfg.agent = parse_agent(j.at("agent"));
  cfg.evaluator = get_str(j, "config", "evaluator", cfg.evaluator);
  if (cfg.evaluator != "real" && cfg.evaluator != "smooth" && cfg.evaluator != "deceptive" &&
      cfg.evaluator != "sparse")
    fail("config.evaluator", "must be real | smooth | deceptive | sparse");
  cfg.output_dir = get_str(j, "config", "output_dir", cfg.output_dir);
  cfg.jobs = get_int(j, "config", "jobs", cfg.jobs, 1, 256);
  cfg.seed = get_seed(j, "config", "seed", cfg.seed);
  cfg.deterministic_trace = get_bool(j, "config", "deterministic_trace", true);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  RunConfig cfg = parse_run_config(read_file(path));
  if (cfg.dataset.format == "planetoid") {
    if (!std::filesystem::exists(cfg.dataset.path + ".content"))
      throw ConfigError("dataset.path: missing " + cfg.dataset.path + ".content");
    if (!std::filesystem::exists(cfg.dataset.path + ".cites"))
      throw ConfigError("dataset.path: missing " + cfg.dataset.path + ".cites");
  } else if (cfg.dataset.format == "csv") {
    for (const char* f : {"features.csv", "edges.csv", "labels.csv"})
      if (!std::filesystem::exists(cfg.dataset.path + "/" + f))
        throw ConfigError("dataset.path: missing " + cfg.dataset.path + "/" + f);
  } else if (cfg.dataset.format == "cache") {
    if (!std::filesystem::exists(cfg.dataset.path))
      throw ConfigError("dataset.path: missing " + cfg.dataset.path);
  }
  return cfg;
}

std::string dump_run_config(const RunConfig& cfg) {
  json j;
  j["version"] = cfg.version;
  j["precision"] = cfg.precision;
  json d;
  d["format"] = cfg.dataset.format;
  if (!cfg.dataset.path.empty()) d["path"] = cfg.dataset.path;
  d["name"] = cfg.dataset.name;
  if (cfg.dataset.format == "synth") {
    d["synth"] = {{"nodes", cfg.dataset.synth.nodes},
                  {"edges", cfg.dataset.synth.undirected_edges},
                  {"features", cfg.dataset.synth.features},
                  {"classes", cfg.dataset.synth.classes},
                  {"homophily", cfg.dataset.synth.homophily},
                  {"on_rate_in", cfg.dataset.synth.on_rate_in},
                  {"on_rate_out", cfg.dataset.synth.on_rate_out},
                  {"seed", cfg.dataset.synth.seed}};
  }
  d["row_normalize"] = cfg.dataset.row_normalize;
  d["split"] = cfg.dataset.split;
  d["per_class"] = cfg.dataset.per_class;
  d["val"] = cfg.dataset.val;
  d["test"] = cfg.dataset.test;
  d["train_frac"] = cfg.dataset.train_frac;
  d["val_frac"] = cfg.dataset.val_frac;
  d["split_seed"] = cfg.dataset.split_seed;
  j["dataset"] = std::move(d);
  json s;
  s["max_layers"] = cfg.space.max_layers;
  s["max_blocks"] = cfg.space.max_blocks;
  {
    json types = json::array();
    for (auto t : cfg.space.layer_types) types.push_back(to_string(t));
    s["layer_types"] = std::move(types);
    json acts = json::array();
    for (auto a : cfg.space.activations) acts.push_back(to_string(a));
    s["activations"] = std::move(acts);
    s["dropout_options"] = cfg.space.dropout_options;
    s["alpha_options"] = cfg.space.alpha_options;
  }
  j["space"] = std::move(s);
  j["model"] = {{"alpha", cfg.model.alpha},
                {"lambda", cfg.model.lambda},
                {"dropout", cfg.model.dropout},
                {"hidden", cfg.model.hidden},
                {"lr", cfg.model.lr},
                {"epochs", cfg.model.epochs},
                {"weight_decay_conv", cfg.model.weight_decay_conv},
                {"weight_decay_fc", cfg.model.weight_decay_fc}};
  j["agent"] = {{"episodes_block", cfg.agent.episodes_block},
                {"episodes_arch", cfg.agent.episodes_arch},
                {"capacity", cfg.agent.capacity},
                {"batch_size", cfg.agent.batch_size},
                {"gamma", cfg.agent.gamma},
                {"sync_period", cfg.agent.sync_period},
                {"anneal_start_frac", cfg.agent.anneal_start_frac},
                {"q_hidden", cfg.agent.q_hidden},
                {"lr", cfg.agent.lr},
                {"pool_size", cfg.agent.pool_size}};
  j["evaluator"] = cfg.evaluator;
  j["output_dir"] = cfg.output_dir;
  j["jobs"] = cfg.jobs;
  j["seed"] = cfg.seed;
  j["deterministic_trace"] = cfg.deterministic_trace;
  return j.dump(2) + "\n";
}

DatasetBundle load_dataset(const DatasetConfig& cfg, LoadStats* stats) {
  DatasetBundle b;
  b.name = cfg.name;
  if (cfg.format == "planetoid") {
    b.graph = load_cora_raw(cfg.path + ".content", cfg.path + ".cites", stats);
  } else if (cfg.format == "csv") {
    b.graph = load_edgelist(cfg.path + "/features.csv", cfg.path + "/edges.csv",
                            cfg.path + "/labels.csv", stats);
  } else if (cfg.format == "cache") {
    b.graph = load_cache(cfg.path);
  } else if (cfg.format == "synth") {
    b.graph = generate_citation_graph(cfg.synth);
  } else {
    throw ConfigError("dataset.format: unknown format " + cfg.format);
  }
  if (cfg.row_normalize) b.graph = row_normalize_features(std::move(b.graph));
  b.adj = normalize_adjacency(b.graph);
  if (cfg.split == "semi")
    b.masks = semi_split(b.graph, cfg.per_class, cfg.val, cfg.test, cfg.split_seed);
  else
    b.masks = full_split(b.graph, cfg.train_frac, cfg.val_frac, cfg.split_seed);
  return b;
}

}  // namespace gnas
