#pragma once

#include <cstdint>
#include <string>

#include "gnas/dataset_io.hpp"
#include "gnas/engine.hpp"
#include "gnas/graph.hpp"
#include "gnas/search.hpp"

namespace gnas {

struct DatasetConfig {
  std::string format = "synth";  // planetoid | csv | cache | synth
  std::string path;              // planetoid prefix, csv directory, or cache file
  std::string name = "synth-cora";
  SynthSpec synth = synth_preset("cora");
  bool row_normalize = true;
  std::string split = "semi";  // semi | full
  int per_class = 20;
  int val = 500;
  int test = 1000;
  double train_frac = 0.6;
  double val_frac = 0.2;
  std::uint64_t split_seed = 1;
};

// Whole-run configuration; JSON schema version 1 (see README). Unknown keys
// are rejected with their field path.
struct RunConfig {
  int version = 1;
  std::string precision = "f32";  // f32 | f64
  DatasetConfig dataset;
  SpaceConfig space;
  HyperParams model;
  AgentConfig agent;
  std::string evaluator = "real";  // real | smooth | deceptive | sparse
  std::string output_dir = "runs/out";
  int jobs = 1;
  std::uint64_t seed = 1;
  bool deterministic_trace = true;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);  // also checks referenced paths
std::string dump_run_config(const RunConfig& cfg);   // canonical snapshot

struct DatasetBundle {
  Graph graph;
  NormAdj adj;
  SplitMasks masks;
  std::string name;
};

DatasetBundle load_dataset(const DatasetConfig& cfg, LoadStats* stats = nullptr);

}  // namespace gnas
