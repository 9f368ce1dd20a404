// gnas: two-stage GNN architecture search toolkit.
//
// Subcommands: data inspect / data synth, search blocks / search arch,
// transfer, train, eval, ablate diversity. Exit codes: 0 success,
// 2 usage/config error, 1 runtime failure, 130 interrupted with checkpoint.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gnas/config.hpp"
#include "gnas/run_io.hpp"
#include "gnas/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

void on_sigint(int) { g_stop.store(true); }

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const gnas::ConfigError*>(&e) || dynamic_cast<const gnas::ParseError*>(&e) ||
      dynamic_cast<const gnas::FormatError*>(&e) ||
      dynamic_cast<const gnas::ArgumentError*>(&e) ||
      dynamic_cast<const gnas::DecodeError*>(&e) ||
      dynamic_cast<const gnas::TransferError*>(&e) ||
      dynamic_cast<const gnas::SplitError*>(&e) || dynamic_cast<const gnas::IoError*>(&e) ||
      dynamic_cast<const gnas::StateError*>(&e))
    return 2;
  return 1;
}

struct CommonFlags {
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<int> budget;
  int stop_after = 0;
  std::string resume;
};

void apply_flags(gnas::RunConfig& cfg, const CommonFlags& f) {
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (f.seed) cfg.seed = *f.seed;
  if (f.jobs) cfg.jobs = *f.jobs;
}

gnas::RunControl make_control(const gnas::RunConfig& cfg, const CommonFlags& f) {
  gnas::RunControl ctl;
  ctl.stop = [] { return g_stop.load(); };
  ctl.stop_after = f.stop_after;
  ctl.jobs = cfg.jobs;
  ctl.deterministic_trace = cfg.deterministic_trace;
  ctl.on_episode = [](const gnas::TraceRow& r) {
    std::printf("episode=%d epsilon=%.6f reward=%.6f best=%.6f td_loss=%.6f wall_ms=%ld\n",
                r.episode, r.epsilon, r.reward, r.best, r.td_loss, r.wall_ms);
    std::fflush(stdout);
  };
  return ctl;
}

void prepare_run_dir(const std::string& dir, const gnas::RunConfig& cfg) {
  fs::create_directories(dir);
  if (fs::exists(dir + "/manifest.json"))
    throw gnas::ConfigError(dir + ": already holds a run (use --resume or a fresh directory)");
  gnas::atomic_write_file(dir + "/config.json", gnas::dump_run_config(cfg));
}

void write_manifest(const std::string& dir, const std::string& stage,
                    const std::string& status, std::size_t episodes_done, int budget) {
  json m;
  m["version"] = 1;
  m["stage"] = stage;
  m["status"] = status;
  m["episodes_done"] = episodes_done;
  m["budget"] = budget;
  m["config"] = "config.json";
  if (status == "interrupted") m["checkpoint"] = "checkpoint.json";
  gnas::atomic_write_file(dir + "/manifest.json", m.dump(2) + "\n");
}

json hyper_to_json(const gnas::HyperParams& h) {
  return {{"alpha", h.alpha},
          {"lambda", h.lambda},
          {"dropout", h.dropout},
          {"hidden", h.hidden},
          {"lr", h.lr},
          {"epochs", h.epochs},
          {"weight_decay_conv", h.weight_decay_conv},
          {"weight_decay_fc", h.weight_decay_fc}};
}

gnas::HyperParams hyper_from_json(const json& j) {
  gnas::HyperParams h;
  h.alpha = j.at("alpha").get<double>();
  h.lambda = j.at("lambda").get<double>();
  h.dropout = j.at("dropout").get<double>();
  h.hidden = j.at("hidden").get<int>();
  h.lr = j.at("lr").get<double>();
  h.epochs = j.at("epochs").get<int>();
  h.weight_decay_conv = j.at("weight_decay_conv").get<double>();
  h.weight_decay_fc = j.at("weight_decay_fc").get<double>();
  return h;
}

// ---------- data ----------

int cmd_data_inspect(const std::string& path, const std::string& format,
                     const std::string& split, int per_class, int n_val, int n_test,
                     double train_frac, double val_frac, std::uint64_t seed) {
  gnas::LoadStats stats;
  gnas::Graph g;
  if (format == "planetoid") {
    g = gnas::load_cora_raw(path + ".content", path + ".cites", &stats);
  } else if (format == "csv") {
    g = gnas::load_edgelist(path + "/features.csv", path + "/edges.csv",
                            path + "/labels.csv", &stats);
  } else if (format == "cache") {
    g = gnas::load_cache(path);
  } else if (format == "synth") {
    g = gnas::generate_citation_graph(gnas::synth_preset(path));
  } else {
    throw gnas::ConfigError("--format must be planetoid | csv | cache | synth");
  }
  std::printf("%d nodes, %d edges, %d features, %d classes\n", g.num_nodes, g.num_edges,
              g.feature_dim(), g.num_classes);
  std::printf("nodes=%d edges=%d features=%d classes=%d\n", g.num_nodes, g.num_edges,
              g.feature_dim(), g.num_classes);
  try {
    gnas::SplitMasks m = split == "semi"
                             ? gnas::semi_split(g, per_class, n_val, n_test, seed)
                             : gnas::full_split(g, train_frac, val_frac, seed);
    std::printf("split=%s train=%ld val=%ld test=%ld seed=%llu\n", split.c_str(),
                static_cast<long>(m.train.count()), static_cast<long>(m.val.count()),
                static_cast<long>(m.test.count()), static_cast<unsigned long long>(seed));
  } catch (const gnas::Error& e) {
    std::printf("split=unavailable reason=\"%s\"\n", e.what());
  }
  if (format == "planetoid" || format == "csv")
    std::printf("dropped_dangling=%d dropped_self=%d dropped_duplicate=%d\n",
                stats.dangling_citations, stats.self_citations, stats.duplicate_edges);
  return 0;
}

int cmd_data_synth(const std::string& preset, const std::string& out_dir,
                   const std::string& format, std::optional<int> nodes,
                   std::optional<int> edges, std::optional<std::uint64_t> seed) {
  gnas::SynthSpec spec = gnas::synth_preset(preset);
  if (nodes) spec.nodes = *nodes;
  if (edges) spec.undirected_edges = *edges;
  if (seed) spec.seed = *seed;
  gnas::Graph g = gnas::generate_citation_graph(spec);
  fs::create_directories(out_dir);
  if (format == "planetoid") {
    gnas::write_planetoid(g, out_dir + "/" + preset, spec.seed);
    std::printf("wrote %s/%s.content and .cites\n", out_dir.c_str(), preset.c_str());
  } else if (format == "csv") {
    gnas::write_csv_triple(g, out_dir);
    std::printf("wrote %s/{features,edges,labels}.csv\n", out_dir.c_str());
  } else if (format == "cache") {
    gnas::save_cache(g, out_dir + "/" + preset + ".gnasds");
    std::printf("wrote %s/%s.gnasds\n", out_dir.c_str(), preset.c_str());
  } else {
    throw gnas::ConfigError("--format must be planetoid | csv | cache");
  }
  std::printf("nodes=%d edges=%d features=%d classes=%d\n", g.num_nodes, g.num_edges,
              g.feature_dim(), g.num_classes);
  return 0;
}

// ---------- search ----------

template <class S>
int run_block_search(const gnas::RunConfig& cfg, const CommonFlags& flags) {
  const std::string dir = cfg.output_dir;
  const int budget = flags.budget.value_or(cfg.agent.episodes_block);

  std::optional<gnas::DatasetBundle> bundle;
  std::optional<gnas::GraphTensors<S>> gt;
  std::unique_ptr<gnas::Evaluator> ev;
  if (cfg.evaluator == "real") {
    bundle = gnas::load_dataset(cfg.dataset);
    gt = gnas::GraphTensors<S>::make(bundle->graph, bundle->adj, bundle->masks);
    ev = std::make_unique<gnas::RealEvaluator<S>>(*gt, cfg.space, cfg.model);
  } else {
    ev = std::make_unique<gnas::SyntheticEvaluator>(gnas::oracle_kind_from(cfg.evaluator),
                                                    cfg.space);
  }

  gnas::BlockSearch<S> search(cfg.space, cfg.agent, budget, cfg.seed, true,
                              cfg.dataset.name);
  if (!flags.resume.empty()) {
    json ck = json::parse(gnas::read_file(flags.resume + "/checkpoint.json"));
    search.restore(ck.at("search"));
  }
  const gnas::RunStatus status = search.run(*ev, make_control(cfg, flags));

  gnas::atomic_write_file(dir + "/trace.csv", gnas::trace_csv(search.result()));
  gnas::atomic_write_file(dir + "/summary.json", gnas::summary_json(search.result()));
  gnas::atomic_write_file(dir + "/gbp.json",
                          gnas::gbp_file_json(search.pool(), cfg.model.hidden));
  if (status == gnas::RunStatus::Interrupted) {
    json ck;
    ck["stage"] = "block";
    ck["search"] = search.checkpoint();
    gnas::atomic_write_file(dir + "/checkpoint.json", ck.dump() + "\n");
    write_manifest(dir, "block", "interrupted", search.result().trace.size(), budget);
    std::fprintf(stderr, "interrupted at episode %zu; checkpoint written to %s\n",
                 search.result().trace.size(), dir.c_str());
    return 130;
  }
  write_manifest(dir, "block", "completed", search.result().trace.size(), budget);
  std::printf("best_reward=%.6f best_episode=%d pool_size=%zu run_dir=%s\n",
              search.result().best_reward, search.result().best_episode,
              search.pool().entries.size(), dir.c_str());
  return 0;
}

template <class S>
int run_arch_search(const gnas::RunConfig& cfg, const CommonFlags& flags,
                    const std::string& gbp_path, bool transferred) {
  const std::string dir = cfg.output_dir;
  const int budget = flags.budget.value_or(cfg.agent.episodes_arch);

  int gbp_hidden = 0;
  gnas::BlockPool pool = gnas::load_gbp_file(gbp_path, &gbp_hidden);
  if (transferred && gbp_hidden != cfg.model.hidden)
    throw gnas::TransferError("GBP hidden size " + std::to_string(gbp_hidden) +
                              " does not match configured hidden size " +
                              std::to_string(cfg.model.hidden));

  std::optional<gnas::DatasetBundle> bundle;
  std::optional<gnas::GraphTensors<S>> gt;
  std::unique_ptr<gnas::Evaluator> ev;
  if (cfg.evaluator == "real") {
    bundle = gnas::load_dataset(cfg.dataset);
    gt = gnas::GraphTensors<S>::make(bundle->graph, bundle->adj, bundle->masks);
    ev = std::make_unique<gnas::RealEvaluator<S>>(*gt, cfg.space, cfg.model);
  } else {
    ev = std::make_unique<gnas::SyntheticEvaluator>(gnas::oracle_kind_from(cfg.evaluator),
                                                    cfg.space);
  }

  gnas::ArchSearch<S> search(cfg.space, cfg.agent, pool.codes(), budget, cfg.seed);
  if (transferred) search.mark_transferred();
  if (!flags.resume.empty()) {
    json ck = json::parse(gnas::read_file(flags.resume + "/checkpoint.json"));
    search.restore(ck.at("search"));
  }
  const gnas::RunStatus status = search.run(*ev, make_control(cfg, flags));

  gnas::atomic_write_file(dir + "/trace.csv", gnas::trace_csv(search.result()));
  gnas::atomic_write_file(dir + "/summary.json", gnas::summary_json(search.result()));
  if (status == gnas::RunStatus::Interrupted) {
    json ck;
    ck["stage"] = "arch";
    ck["search"] = search.checkpoint();
    gnas::atomic_write_file(dir + "/checkpoint.json", ck.dump() + "\n");
    write_manifest(dir, "arch", "interrupted", search.result().trace.size(), budget);
    std::fprintf(stderr, "interrupted at episode %zu; checkpoint written to %s\n",
                 search.result().trace.size(), dir.c_str());
    return 130;
  }

  gnas::Provenance prov{cfg.dataset.name, cfg.seed, search.best_episode()};
  gnas::atomic_write_file(
      dir + "/best_arch.json",
      gnas::arch_file_json(search.best_code(), search.pool(), search.best_score(), prov));

  if (cfg.evaluator == "real") {
    // Reproduce the best episode's training to capture its parameters.
    const gnas::ModelSpec spec = gnas::decode_arch(search.best_code(), search.pool(), cfg.space);
    gnas::ParamStore<S> best_params;
    const auto res = gnas::train_model<S>(
        spec, *gt, cfg.model,
        gnas::detail::episode_eval_seed(cfg.seed, search.best_episode()), &best_params);
    json ck;
    ck["version"] = 1;
    ck["kind"] = "model-checkpoint";
    ck["meta"] = {{"arch", json::parse(gnas::arch_file_json(search.best_code(), search.pool(),
                                                            search.best_score(), prov))},
                  {"hyper", hyper_to_json(cfg.model)},
                  {"seed", gnas::detail::episode_eval_seed(cfg.seed, search.best_episode())},
                  {"precision", cfg.precision},
                  {"val_accuracy", res.val_accuracy},
                  {"test_accuracy", res.test_accuracy}};
    ck["params"] = gnas::params_to_json(best_params);
    gnas::atomic_write_file(dir + "/best_model.ckpt.json", ck.dump() + "\n");
  }

  write_manifest(dir, "arch", "completed", search.result().trace.size(), budget);
  std::printf("best_reward=%.6f best_episode=%d transferred=%d run_dir=%s\n",
              search.best_score(), search.best_episode(), transferred ? 1 : 0, dir.c_str());
  return 0;
}

// ---------- train / eval ----------

template <class S>
int run_train(const gnas::RunConfig& cfg, const std::string& arch_path,
              const std::string& out_file) {
  const gnas::ArchFile arch = gnas::load_arch_file(arch_path);
  const gnas::ModelSpec spec =
      gnas::decode_arch(arch.code, arch.blocks, cfg.space, /*strict=*/false);
  gnas::DatasetBundle bundle = gnas::load_dataset(cfg.dataset);
  auto gt = gnas::GraphTensors<S>::make(bundle.graph, bundle.adj, bundle.masks);
  gnas::ParamStore<S> best_params;
  const gnas::EvaluationResult res =
      gnas::train_model<S>(spec, gt, cfg.model, cfg.seed, &best_params);
  std::printf(
      "val_accuracy=%.6f test_accuracy=%.6f final_train_loss=%.6f epochs=%d best_epoch=%d "
      "depth=%d failed=%d\n",
      res.val_accuracy, res.test_accuracy, res.final_train_loss, res.epochs_run,
      res.best_epoch, gnas::model_depth(spec), res.failed ? 1 : 0);
  if (res.failed) {
    std::fprintf(stderr, "training diverged; no checkpoint written\n");
    return 1;
  }
  json ck;
  ck["version"] = 1;
  ck["kind"] = "model-checkpoint";
  ck["meta"] = {{"arch", json{{"version", 1},
                              {"kind", "arch"},
                              {"blocks", json::parse(gnas::read_file(arch_path)).at("blocks")},
                              {"genes", json::parse(gnas::serialize_arch(arch.code))},
                              {"score", res.val_accuracy}}},
                {"hyper", hyper_to_json(cfg.model)},
                {"seed", cfg.seed},
                {"precision", cfg.precision},
                {"val_accuracy", res.val_accuracy},
                {"test_accuracy", res.test_accuracy}};
  ck["params"] = gnas::params_to_json(best_params);
  gnas::atomic_write_file(out_file, ck.dump() + "\n");
  std::printf("checkpoint=%s\n", out_file.c_str());
  return 0;
}

template <class S>
int run_eval(const gnas::RunConfig& cfg, const json& ck) {
  const json& meta = ck.at("meta");
  gnas::ArchFile arch;
  for (const auto& b : meta.at("arch").at("blocks"))
    arch.blocks.push_back(gnas::parse_block(b.dump()));
  arch.code = gnas::parse_arch(meta.at("arch").at("genes").dump());
  const gnas::HyperParams hp = hyper_from_json(meta.at("hyper"));
  const gnas::ModelSpec spec =
      gnas::decode_arch(arch.code, arch.blocks, cfg.space, /*strict=*/false);

  gnas::DatasetBundle bundle = gnas::load_dataset(cfg.dataset);
  auto gt = gnas::GraphTensors<S>::make(bundle.graph, bundle.adj, bundle.masks);
  gnas::ParamStore<S> params = gnas::params_from_json<S>(ck.at("params"));

  if (!params.has("proj.w") || !params.has("out.w"))
    throw gnas::FormatError("checkpoint: missing projection/classifier tensors");
  if (params.at("proj.w").value.rows() != bundle.graph.feature_dim())
    throw gnas::ConfigError("checkpoint feature width " +
                            std::to_string(params.at("proj.w").value.rows()) +
                            " does not match dataset feature width " +
                            std::to_string(bundle.graph.feature_dim()));
  if (params.at("out.w").value.cols() != bundle.graph.num_classes)
    throw gnas::ConfigError("checkpoint class count does not match dataset class count");

  const gnas::EvaluationResult res = gnas::evaluate_model<S>(spec, gt, hp, params);
  std::printf("val_accuracy=%.6f test_accuracy=%.6f depth=%d\n", res.val_accuracy,
              res.test_accuracy, gnas::model_depth(spec));
  return 0;
}

// ---------- ablation ----------

template <class S>
int run_ablate(const gnas::RunConfig& cfg, const std::string& block_path,
               const std::vector<int>& depths, const std::string& out_file) {
  const gnas::BlockCode block = gnas::load_block_file(block_path);
  gnas::DatasetBundle bundle = gnas::load_dataset(cfg.dataset);
  auto gt = gnas::GraphTensors<S>::make(bundle.graph, bundle.adj, bundle.masks);
  const auto rows =
      gnas::diversity_ablation<S>(block, depths, gt, cfg.space, cfg.model, cfg.seed, cfg.jobs);
  const std::string csv = gnas::ablation_csv(rows);
  gnas::atomic_write_file(out_file, csv);
  std::fputs(csv.c_str(), stdout);
  std::printf("csv=%s\n", out_file.c_str());
  return 0;
}

template <class F32, class F64>
int dispatch_precision(const std::string& precision, F32&& f32, F64&& f64) {
  return precision == "f64" ? f64() : f32();
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_sigint);

  CLI::App app{"Two-stage block/architecture search for deep graph neural networks"};
  app.require_subcommand(1);

  // data
  auto* data = app.add_subcommand("data", "dataset utilities");
  data->require_subcommand(1);
  std::string d_path, d_format = "planetoid", d_split = "semi";
  int d_per_class = 20, d_val = 500, d_test = 1000;
  double d_train_frac = 0.6, d_val_frac = 0.2;
  std::uint64_t d_seed = 1;
  auto* inspect = data->add_subcommand("inspect", "print dataset and split statistics");
  inspect->add_option("path", d_path, "dataset path (planetoid prefix, csv dir, cache file, or synth preset)")
      ->required();
  inspect->add_option("--format", d_format, "planetoid | csv | cache | synth");
  inspect->add_option("--split", d_split, "semi | full");
  inspect->add_option("--per-class", d_per_class, "training nodes per class (semi)");
  inspect->add_option("--val", d_val, "validation nodes (semi)");
  inspect->add_option("--test", d_test, "test nodes (semi)");
  inspect->add_option("--train-frac", d_train_frac, "training fraction (full)");
  inspect->add_option("--val-frac", d_val_frac, "validation fraction (full)");
  inspect->add_option("--seed", d_seed, "split seed");

  std::string s_preset = "cora", s_out = ".", s_format = "planetoid";
  std::optional<int> s_nodes, s_edges;
  std::optional<std::uint64_t> s_seed;
  auto* synth = data->add_subcommand("synth", "write a synthetic citation corpus");
  synth->add_option("preset", s_preset, "cora | citeseer | cora-small | citeseer-small");
  synth->add_option("--out", s_out, "output directory");
  synth->add_option("--format", s_format, "planetoid | csv | cache");
  synth->add_option("--nodes", s_nodes, "override node count");
  synth->add_option("--edges", s_edges, "override edge count");
  synth->add_option("--seed", s_seed, "generator seed");

  // search
  auto* search = app.add_subcommand("search", "run a search stage");
  search->require_subcommand(1);
  std::string sb_config;
  CommonFlags sb_flags;
  auto* sblocks = search->add_subcommand("blocks", "stage one: block-wise search");
  sblocks->add_option("config", sb_config, "run configuration JSON");
  sblocks->add_option("--out", sb_flags.out, "run directory (overrides config)");
  sblocks->add_option("--seed", sb_flags.seed, "seed override");
  sblocks->add_option("--jobs", sb_flags.jobs, "max concurrent evaluations");
  sblocks->add_option("--budget", sb_flags.budget, "episode budget override");
  sblocks->add_option("--stop-after", sb_flags.stop_after,
                      "interrupt after this many episodes (writes a checkpoint)");
  sblocks->add_option("--resume", sb_flags.resume, "resume from an interrupted run directory");

  std::string sa_config, sa_gbp;
  CommonFlags sa_flags;
  auto* sarch = search->add_subcommand("arch", "stage two: architecture-wise search");
  sarch->add_option("config", sa_config, "run configuration JSON");
  sarch->add_option("--gbp", sa_gbp, "block pool file from stage one")->required();
  sarch->add_option("--out", sa_flags.out, "run directory (overrides config)");
  sarch->add_option("--seed", sa_flags.seed, "seed override");
  sarch->add_option("--jobs", sa_flags.jobs, "max concurrent evaluations");
  sarch->add_option("--budget", sa_flags.budget, "episode budget override");
  sarch->add_option("--stop-after", sa_flags.stop_after,
                    "interrupt after this many episodes (writes a checkpoint)");
  sarch->add_option("--resume", sa_flags.resume, "resume from an interrupted run directory");

  std::string t_config, t_gbp;
  CommonFlags t_flags;
  auto* transfer = app.add_subcommand(
      "transfer", "second-stage search on a new dataset with an imported block pool");
  transfer->add_option("config", t_config, "run configuration JSON")->required();
  transfer->add_option("--gbp", t_gbp, "block pool file to import")->required();
  transfer->add_option("--out", t_flags.out, "run directory (overrides config)");
  transfer->add_option("--seed", t_flags.seed, "seed override");
  transfer->add_option("--jobs", t_flags.jobs, "max concurrent evaluations");
  transfer->add_option("--budget", t_flags.budget, "episode budget override");
  transfer->add_option("--stop-after", t_flags.stop_after,
                       "interrupt after this many episodes (writes a checkpoint)");
  transfer->add_option("--resume", t_flags.resume, "resume from an interrupted run directory");

  std::string tr_arch, tr_config, tr_out = "model.ckpt.json";
  std::optional<std::uint64_t> tr_seed;
  auto* train = app.add_subcommand("train", "train one architecture file");
  train->add_option("arch", tr_arch, "architecture code file")->required();
  train->add_option("config", tr_config, "run configuration JSON")->required();
  train->add_option("--out", tr_out, "checkpoint output file");
  train->add_option("--seed", tr_seed, "seed override");

  std::string ev_ckpt, ev_config;
  auto* evalc = app.add_subcommand("eval", "evaluate a trained checkpoint");
  evalc->add_option("checkpoint", ev_ckpt, "model checkpoint file")->required();
  evalc->add_option("config", ev_config, "run configuration JSON")->required();

  std::string ab_block, ab_config, ab_depths = "4,8,16,32", ab_out = "ablation.csv";
  std::optional<std::uint64_t> ab_seed;
  auto* ablate = app.add_subcommand("ablate", "ablation studies");
  ablate->require_subcommand(1);
  auto* adiv = ablate->add_subcommand(
      "diversity", "searched block vs fixed single-type chain across depths");
  adiv->add_option("block", ab_block, "block code file")->required();
  adiv->add_option("config", ab_config, "run configuration JSON")->required();
  adiv->add_option("--depths", ab_depths, "comma-separated depth list");
  adiv->add_option("--out", ab_out, "CSV output file");
  adiv->add_option("--seed", ab_seed, "seed override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (inspect->parsed())
      return cmd_data_inspect(d_path, d_format, d_split, d_per_class, d_val, d_test,
                              d_train_frac, d_val_frac, d_seed);
    if (synth->parsed())
      return cmd_data_synth(s_preset, s_out, s_format, s_nodes, s_edges, s_seed);

    if (sblocks->parsed()) {
      gnas::RunConfig cfg;
      if (!sb_flags.resume.empty()) {
        cfg = gnas::load_run_config(sb_flags.resume + "/config.json");
        cfg.output_dir = sb_flags.resume;
      } else {
        if (sb_config.empty()) throw gnas::ConfigError("config file required (or --resume)");
        cfg = gnas::load_run_config(sb_config);
        apply_flags(cfg, sb_flags);
        prepare_run_dir(cfg.output_dir, cfg);
      }
      return dispatch_precision(
          cfg.precision, [&] { return run_block_search<float>(cfg, sb_flags); },
          [&] { return run_block_search<double>(cfg, sb_flags); });
    }
    if (sarch->parsed() || transfer->parsed()) {
      const bool is_transfer = transfer->parsed();
      const std::string config_path = is_transfer ? t_config : sa_config;
      const std::string gbp_path = is_transfer ? t_gbp : sa_gbp;
      CommonFlags flags = is_transfer ? t_flags : sa_flags;
      gnas::RunConfig cfg;
      if (!flags.resume.empty()) {
        cfg = gnas::load_run_config(flags.resume + "/config.json");
        cfg.output_dir = flags.resume;
      } else {
        if (config_path.empty())
          throw gnas::ConfigError("config file required (or --resume)");
        cfg = gnas::load_run_config(config_path);
        apply_flags(cfg, flags);
        prepare_run_dir(cfg.output_dir, cfg);
      }
      return dispatch_precision(
          cfg.precision,
          [&] { return run_arch_search<float>(cfg, flags, gbp_path, is_transfer); },
          [&] { return run_arch_search<double>(cfg, flags, gbp_path, is_transfer); });
    }
    if (train->parsed()) {
      gnas::RunConfig cfg = gnas::load_run_config(tr_config);
      if (tr_seed) cfg.seed = *tr_seed;
      return dispatch_precision(
          cfg.precision, [&] { return run_train<float>(cfg, tr_arch, tr_out); },
          [&] { return run_train<double>(cfg, tr_arch, tr_out); });
    }
    if (evalc->parsed()) {
      gnas::RunConfig cfg = gnas::load_run_config(ev_config);
      json ck = json::parse(gnas::read_file(ev_ckpt), nullptr, false);
      if (ck.is_discarded() || ck.value("kind", "") != "model-checkpoint")
        throw gnas::FormatError(ev_ckpt + ": not a model checkpoint");
      const std::string precision = ck.at("meta").value("precision", "f32");
      return dispatch_precision(
          precision, [&] { return run_eval<float>(cfg, ck); },
          [&] { return run_eval<double>(cfg, ck); });
    }
    if (adiv->parsed()) {
      gnas::RunConfig cfg = gnas::load_run_config(ab_config);
      if (ab_seed) cfg.seed = *ab_seed;
      std::vector<int> depths;
      std::stringstream ss(ab_depths);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        try {
          std::size_t pos = 0;
          const int d = std::stoi(tok, &pos);
          if (pos != tok.size() || d < 1) throw std::invalid_argument(tok);
          depths.push_back(d);
        } catch (...) {
          throw gnas::ArgumentError("--depths: bad depth '" + tok + "'");
        }
      }
      if (depths.empty()) throw gnas::ArgumentError("--depths: empty list");
      return dispatch_precision(
          cfg.precision, [&] { return run_ablate<float>(cfg, ab_block, depths, ab_out); },
          [&] { return run_ablate<double>(cfg, ab_block, depths, ab_out); });
    }
    throw gnas::ConfigError("no command selected");
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  }
}
