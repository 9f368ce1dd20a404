#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <map>
#include <set>

#include "doctest.h"
#include "gnas/config.hpp"
#include "gnas/run_io.hpp"
#include "gnas/search.hpp"
#include "helpers.hpp"

using namespace gnas;

namespace {

AgentConfig tiny_agent_cfg() {
  AgentConfig a;
  a.capacity = 100;
  a.batch_size = 8;
  a.sync_period = 10;
  a.q_hidden = 32;
  a.pool_size = 3;
  return a;
}

SpaceConfig small_space() {
  SpaceConfig cfg;
  cfg.max_layers = 2;
  return cfg;
}

// Recomputes the pool an honest replay of the trace would produce.
std::vector<double> top_scores_from_trace(const SearchRun& run, int n) {
  std::map<std::string, double> best_by_code;
  for (const auto& row : run.trace) {
    auto it = best_by_code.find(row.code);
    if (it == best_by_code.end() || row.reward > it->second)
      best_by_code[row.code] = row.reward;
  }
  std::vector<double> scores;
  for (const auto& [code, r] : best_by_code) scores.push_back(r);
  std::sort(scores.rbegin(), scores.rend());
  if (static_cast<int>(scores.size()) > n) scores.resize(n);
  return scores;
}

}  // namespace

TEST_CASE("block pool update rules") {
  BlockPool pool;
  pool.capacity = 3;
  BlockCode a, b, c, d;
  a.genes = {LayerGene{1, LayerKind::GCNII, Activation::ReLU, -1},
             LayerGene{2, LayerKind::EoB, Activation::None, -1}};
  b = a;
  b.genes[0].act = Activation::ELU;
  c = a;
  c.genes[0].act = Activation::Tanh;
  d = a;
  d.genes[0].act = Activation::Identity;

  SUBCASE("any score enters an empty pool") {
    CHECK(update_gbp(pool, a, 0.1, {}));
    CHECK(pool.entries.size() == 1);
  }
  SUBCASE("replacement keeps the pool sorted and bounded") {
    update_gbp(pool, a, 0.8, {});
    update_gbp(pool, b, 0.7, {});
    update_gbp(pool, c, 0.6, {});
    CHECK(update_gbp(pool, d, 0.65, {}));
    REQUIRE(pool.entries.size() == 3);
    CHECK(pool.entries[0].score == 0.8);
    CHECK(pool.entries[1].score == 0.7);
    CHECK(pool.entries[2].score == 0.65);
    SUBCASE("below-minimum scores leave the pool unchanged") {
      CHECK(!update_gbp(pool, c, 0.5, {}));
      CHECK(pool.entries[2].score == 0.65);
    }
  }
  SUBCASE("duplicate codes keep the higher score") {
    update_gbp(pool, a, 0.5, {});
    CHECK(update_gbp(pool, a, 0.9, {}));
    REQUIRE(pool.entries.size() == 1);
    CHECK(pool.entries[0].score == 0.9);
    CHECK(!update_gbp(pool, a, 0.2, {}));
    CHECK(pool.entries[0].score == 0.9);
  }
  SUBCASE("scores outside [0,1] are rejected") {
    CHECK_THROWS_AS(update_gbp(pool, a, 1.5, {}), ArgumentError);
  }
}

TEST_CASE("block search over the smooth oracle") {
  SpaceConfig cfg = small_space();
  SyntheticEvaluator ev(OracleKind::Smooth, cfg);

  SUBCASE("five episodes produce five trace rows and a top-3 pool") {
    BlockSearch<double> s(cfg, tiny_agent_cfg(), 5, 11);
    CHECK(s.run(ev) == RunStatus::Completed);
    const SearchRun& run = s.result();
    REQUIRE(run.trace.size() == 5);
    for (int i = 0; i < 5; ++i) CHECK(run.trace[i].episode == i + 1);
    auto want = top_scores_from_trace(run, 3);
    REQUIRE(s.pool().entries.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i)
      CHECK(s.pool().entries[i].score == doctest::Approx(want[i]));
  }
  SUBCASE("zero budget is an error") {
    BlockSearch<double> s(cfg, tiny_agent_cfg(), 0, 1);
    CHECK_THROWS_AS(s.run(ev), ArgumentError);
  }
  SUBCASE("the trace's best column is the running maximum of rewards") {
    BlockSearch<double> s(cfg, tiny_agent_cfg(), 60, 3);
    s.run(ev);
    double best = 0;
    for (const auto& row : s.result().trace) {
      best = std::max(best, row.reward);
      CHECK(row.best == doctest::Approx(best));
    }
  }
  SUBCASE("pool minimum never decreases over the run") {
    // replay the trace through a fresh pool, tracking its minimum
    BlockSearch<double> s(cfg, tiny_agent_cfg(), 80, 5);
    s.run(ev);
    BlockPool replay;
    replay.capacity = 3;
    double last_min = -1;
    int updates = 0;
    for (const auto& row : s.result().trace) {
      BlockCode code;
      code.genes = {LayerGene{1, LayerKind::GCNII, Activation::ReLU, -1},
                    LayerGene{2, LayerKind::EoB, Activation::None, -1}};
      code.genes[0].prefix = (updates++ % 2) ? -1 : 0;  // distinct filler codes
      if (update_gbp(replay, code, row.reward, {})) {
        if (replay.full()) {
          CHECK(replay.min_score() >= last_min);
          last_min = replay.min_score();
        }
      }
    }
  }
}

TEST_CASE("sync schedule fires at every sync_period episodes") {
  SpaceConfig cfg = small_space();
  AgentConfig acfg = tiny_agent_cfg();
  acfg.sync_period = 10;
  SyntheticEvaluator ev(OracleKind::Smooth, cfg);
  BlockSearch<double> s(cfg, acfg, 35, 2);
  s.run(ev);
  CHECK(s.result().sync_episodes == std::vector<int>{10, 20, 30});
}

TEST_CASE("arch search over the smooth oracle") {
  SpaceConfig cfg = small_space();
  cfg.max_blocks = 3;
  BlockCode block;
  block.genes = {LayerGene{1, LayerKind::GCNII, Activation::ReLU, -1},
                 LayerGene{2, LayerKind::EoB, Activation::None, -1}};
  SyntheticEvaluator ev(OracleKind::Smooth, cfg);

  SUBCASE("best equals the maximum sampled reward") {
    ArchSearch<double> s(cfg, tiny_agent_cfg(), {block}, 3, 5);
    CHECK(s.run(ev) == RunStatus::Completed);
    REQUIRE(s.result().trace.size() == 3);
    double mx = 0;
    for (const auto& row : s.result().trace) mx = std::max(mx, row.reward);
    CHECK(s.best_score() == doctest::Approx(mx));
    CHECK(oracle_score(OracleKind::Smooth, s.best_code(), cfg) ==
          doctest::Approx(s.best_score()));
  }
  SUBCASE("an empty pool is a state error") {
    CHECK_THROWS_AS(ArchSearch<double>(cfg, tiny_agent_cfg(), {}, 3, 5), StateError);
  }
  SUBCASE("every emitted code validates") {
    ArchSearch<double> s(cfg, tiny_agent_cfg(), {block}, 40, 6);
    s.run(ev);
    CHECK(validate_arch(s.best_code(), 1, cfg).empty());
  }
}

TEST_CASE("random search baseline") {
  SpaceConfig cfg = small_space();
  SyntheticEvaluator ev(OracleKind::Smooth, cfg);
  SUBCASE("mean best-so-far is monotone and budget=1 gives one row") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      SearchRun run = random_search<double>(cfg, tiny_agent_cfg(), ev, 100, seed);
      REQUIRE(run.trace.size() == 100);
      for (std::size_t i = 1; i < run.trace.size(); ++i)
        CHECK(run.trace[i].best >= run.trace[i - 1].best);
    }
    SearchRun one = random_search<double>(cfg, tiny_agent_cfg(), ev, 1, 9);
    CHECK(one.trace.size() == 1);
  }
  SUBCASE("forced epsilon=1 search samples the same codes as random search") {
    AgentConfig acfg = tiny_agent_cfg();
    acfg.anneal_start_frac = 1.0;  // exploration never anneals during the run
    BlockSearch<double> learn(cfg, acfg, 50, 77, /*learn=*/true);
    learn.run(ev);
    SearchRun rnd = random_search<double>(cfg, acfg, ev, 50, 77);
    REQUIRE(learn.result().trace.size() == rnd.trace.size());
    for (std::size_t i = 0; i < rnd.trace.size(); ++i)
      CHECK(learn.result().trace[i].code == rnd.trace[i].code);
  }
}

TEST_CASE("synthetic oracle families") {
  SpaceConfig cfg = small_space();
  SUBCASE("smooth: all-preferred codes score 1") {
    BlockCode best;
    best.genes = {LayerGene{1, LayerKind::GCNII, Activation::ReLU, -1},
                  LayerGene{2, LayerKind::GCNII, Activation::ReLU, 1},
                  LayerGene{3, LayerKind::EoB, Activation::None, -1}};
    CHECK(oracle_score(OracleKind::Smooth, best, cfg) == 1.0);
    best.genes[1].act = Activation::Tanh;
    CHECK(oracle_score(OracleKind::Smooth, best, cfg) == 0.5);
  }
  SUBCASE("sparse: only the motif scores") {
    CHECK(oracle_score(OracleKind::Sparse, motif_block(cfg), cfg) == 1.0);
    BlockCode off = motif_block(cfg);
    off.genes[0].act = Activation::ReLU;
    CHECK(oracle_score(OracleKind::Sparse, off, cfg) == 0.0);
  }
  SUBCASE("deceptive: greedy local optimum differs from the global optimum") {
    // exhaustive argmax over the N_l=2 space
    std::vector<BlockCode> all;
    {
      BlockCode partial;
      std::function<void()> rec = [&]() {
        for (const auto& g : valid_actions_block(partial, cfg)) {
          partial.genes.push_back(g);
          if (g.is_eob())
            all.push_back(partial);
          else
            rec();
          partial.genes.pop_back();
        }
      };
      rec();
    }
    double global_best = -1;
    BlockCode global_arg;
    for (const auto& code : all) {
      const double r = oracle_score(OracleKind::Deceptive, code, cfg);
      if (r > global_best) {
        global_best = r;
        global_arg = code;
      }
    }
    CHECK(global_best == 1.0);
    CHECK(global_arg == motif_block(cfg));

    // strict-improvement hill climbing in the single-gene-replacement
    // neighborhood, starting from the all-GCNII local pattern
    BlockCode current;
    current.genes = {LayerGene{1, LayerKind::GCNII, Activation::ReLU, -1},
                     LayerGene{2, LayerKind::GCNII, Activation::ReLU, 1},
                     LayerGene{3, LayerKind::EoB, Activation::None, -1}};
    double cur = oracle_score(OracleKind::Deceptive, current, cfg);
    bool improved = true;
    while (improved) {
      improved = false;
      for (std::size_t i = 0; i + 1 < current.genes.size() && !improved; ++i) {
        for (const auto& repl : valid_layer_actions(current.genes[i].index, cfg)) {
          if (repl.is_eob()) continue;
          BlockCode cand = current;
          cand.genes[i] = repl;
          if (!validate_block(cand, cfg).empty()) continue;
          const double r = oracle_score(OracleKind::Deceptive, cand, cfg);
          if (r > cur) {
            current = cand;
            cur = r;
            improved = true;
            break;
          }
        }
      }
    }
    CHECK(cur < global_best);  // the climb stalls below the global optimum
    CHECK(cur == doctest::Approx(0.55));
  }
}

TEST_CASE("report serialization is deterministic and consistent") {
  SpaceConfig cfg = small_space();
  SyntheticEvaluator ev(OracleKind::Smooth, cfg);
  BlockSearch<double> s(cfg, tiny_agent_cfg(), 25, 13);
  s.run(ev);

  const std::string csv1 = trace_csv(s.result());
  const std::string csv2 = trace_csv(s.result());
  CHECK(csv1 == csv2);
  // row count: header + episodes
  CHECK(std::count(csv1.begin(), csv1.end(), '\n') == 26);

  const std::string dir = test::temp_dir("report");
  atomic_write_file(dir + "/trace.csv", csv1);
  CHECK(read_file(dir + "/trace.csv") == csv1);

  const std::string gbp1 = gbp_file_json(s.pool(), 32);
  atomic_write_file(dir + "/gbp.json", gbp1);
  int hidden = 0;
  BlockPool loaded = load_gbp_file(dir + "/gbp.json", &hidden);
  CHECK(hidden == 32);
  REQUIRE(loaded.entries.size() == s.pool().entries.size());
  for (std::size_t i = 0; i < loaded.entries.size(); ++i) {
    CHECK(loaded.entries[i].code == s.pool().entries[i].code);
    CHECK(loaded.entries[i].score == s.pool().entries[i].score);
  }
  CHECK(gbp_file_json(loaded, 32) == gbp1);

  SUBCASE("summary fields") {
    const std::string summary = summary_json(s.result());
    CHECK(summary.find("\"best_reward\"") != std::string::npos);
    CHECK(summary.find("\"best_episode\"") != std::string::npos);
  }
}

TEST_CASE("checkpoint and resume reproduce the uninterrupted run") {
  SpaceConfig cfg = small_space();
  AgentConfig acfg = tiny_agent_cfg();
  SyntheticEvaluator ev(OracleKind::Deceptive, cfg);

  BlockSearch<double> full(cfg, acfg, 20, 99);
  full.run(ev);

  BlockSearch<double> part(cfg, acfg, 20, 99);
  RunControl ctl;
  ctl.stop_after = 7;
  CHECK(part.run(ev, ctl) == RunStatus::Interrupted);
  CHECK(part.result().trace.size() == 7);
  nlohmann::json ck = part.checkpoint();

  BlockSearch<double> resumed(cfg, acfg, 20, 99);
  resumed.restore(ck);
  CHECK(resumed.run(ev) == RunStatus::Completed);

  CHECK(trace_csv(resumed.result()) == trace_csv(full.result()));
  CHECK(gbp_file_json(resumed.pool(), 32) == gbp_file_json(full.pool(), 32));
}

TEST_CASE("arch files round-trip self-contained models") {
  SpaceConfig cfg = small_space();
  cfg.max_blocks = 3;
  BlockCode block;
  block.genes = {LayerGene{1, LayerKind::AGNNII, Activation::Tanh, -1},
                 LayerGene{2, LayerKind::EoB, Activation::None, -1}};
  ArchCode arch;
  arch.genes = {BlockGene{1, 0, 0.3, 0.1, -1}, BlockGene{2, 0, 0.45, 0.5, 0},
                BlockGene{3, BlockGene::kEoB, 0.0, 0.0, -1}};
  const std::string dir = test::temp_dir("archfile");
  atomic_write_file(dir + "/a.json", arch_file_json(arch, {block}, 0.5, {"ds", 7, 3}));
  ArchFile loaded = load_arch_file(dir + "/a.json");
  CHECK(loaded.code == arch);
  REQUIRE(loaded.blocks.size() == 1);
  CHECK(loaded.blocks[0] == block);
  CHECK(loaded.score == 0.5);
  CHECK_NOTHROW(decode_arch(loaded.code, loaded.blocks, cfg));

  atomic_write_file(dir + "/bad.json", "{\"kind\": \"gbp\"}");
  CHECK_THROWS_AS(load_arch_file(dir + "/bad.json"), FormatError);
}

TEST_CASE("diversity ablation: schema and the chain construction oracle") {
  SynthSpec spec = synth_preset("cora-small");
  spec.nodes = 90;
  spec.undirected_edges = 180;
  spec.features = 30;
  spec.classes = 3;
  Graph g = generate_citation_graph(spec);
  NormAdj adj = normalize_adjacency(g);
  SplitMasks masks = semi_split(g, 6, 24, 30, 2);
  auto gt = GraphTensors<double>::make(g, adj, masks);

  SpaceConfig cfg;
  HyperParams hp;
  hp.hidden = 8;
  hp.epochs = 8;
  BlockCode block;
  block.genes = {LayerGene{1, LayerKind::GCNII, Activation::ReLU, -1},
                 LayerGene{2, LayerKind::GATII, Activation::ELU, 1},
                 LayerGene{3, LayerKind::EoB, Activation::None, -1}};

  auto rows = diversity_ablation<double>(block, {2, 4}, gt, cfg, hp, 5);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].depth == 2);
  CHECK(rows[0].variant == "blocked");
  CHECK(rows[1].variant == "chain");
  CHECK(rows[2].depth == 4);
  for (const auto& r : rows) {
    CHECK(r.accuracy >= 0.0);
    CHECK(r.accuracy <= 1.0);
    CHECK(r.seed == 5);
  }

  // chain variant equals a hand-assembled chain under the same seed
  ModelSpec hand = chain_model(LayerKind::GCNII, Activation::ReLU, 2, hp.dropout, hp.alpha,
                               Activation::ReLU);
  EvaluationResult want = train_model<double>(hand, gt, hp, 5);
  CHECK(rows[1].accuracy == doctest::Approx(want.test_accuracy));

  const std::string csv = ablation_csv(rows);
  CHECK(csv.rfind("depth,variant,accuracy,seed\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

  SUBCASE("jobs > 1 gives identical results") {
    auto rows2 = diversity_ablation<double>(block, {2, 4}, gt, cfg, hp, 5, 4);
    REQUIRE(rows2.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      CHECK(rows2[i].accuracy == rows[i].accuracy);
  }
}

TEST_CASE("blocked variant stays stable as depth grows (ablation mirror)") {
  // 500-node corpus, reduced epochs; the searched-block architecture should
  // hold its accuracy from depth 4 to depth 32 (tolerance ours: 0.05)
  DatasetConfig dc;
  dc.format = "synth";
  dc.synth = synth_preset("cora-small");
  dc.split = "semi";
  dc.per_class = 5;
  dc.val = 100;
  dc.test = 200;
  DatasetBundle b = load_dataset(dc);
  auto gt = GraphTensors<float>::make(b.graph, b.adj, b.masks);

  SpaceConfig cfg;
  HyperParams hp;
  hp.epochs = 60;
  BlockCode block;
  block.genes = {LayerGene{1, LayerKind::GCNII, Activation::ReLU, -1},
                 LayerGene{2, LayerKind::GATII, Activation::ELU, 1},
                 LayerGene{3, LayerKind::SAGEIIMean, Activation::Tanh, 0},
                 LayerGene{4, LayerKind::EoB, Activation::None, -1}};
  auto rows = diversity_ablation<float>(block, {4, 32}, gt, cfg, hp, 11, 2);
  REQUIRE(rows.size() == 4);
  double blocked4 = -1, blocked32 = -1;
  for (const auto& r : rows) {
    if (r.variant == "blocked" && r.depth == 4) blocked4 = r.accuracy;
    if (r.variant == "blocked" && r.depth == 32) blocked32 = r.accuracy;
  }
  REQUIRE(blocked4 >= 0);
  REQUIRE(blocked32 >= 0);
  CHECK(blocked32 >= blocked4 - 0.05);
}

TEST_CASE("miniature real search: episodes evaluate, fail-safe, and re-evaluate") {
  SynthSpec spec;
  spec.nodes = 70;
  spec.undirected_edges = 140;
  spec.features = 24;
  spec.classes = 3;
  spec.seed = 4;
  Graph g = generate_citation_graph(spec);
  NormAdj adj = normalize_adjacency(g);
  SplitMasks masks = semi_split(g, 5, 20, 25, 3);
  auto gt = GraphTensors<double>::make(g, adj, masks);

  SpaceConfig cfg;
  cfg.max_layers = 2;
  cfg.max_blocks = 2;
  HyperParams hp;
  hp.hidden = 8;
  hp.epochs = 6;
  RealEvaluator<double> ev(gt, cfg, hp);

  AgentConfig acfg = tiny_agent_cfg();
  BlockSearch<double> s(cfg, acfg, 6, 21, true, "synth-tiny");
  CHECK(s.run(ev) == RunStatus::Completed);
  REQUIRE(!s.pool().entries.empty());
  for (const auto& row : s.result().trace) {
    CHECK(row.reward >= 0.0);
    CHECK(row.reward <= 1.0);
  }
  // every pool code validates and decodes into the standard architecture
  for (const auto& e : s.pool().entries) {
    CHECK(validate_block(e.code, cfg).empty());
    CHECK_NOTHROW(decode_arch(standard_architecture(e.code, cfg), {e.code}, cfg));
  }
  // recorded pool scores reproduce under the recorded provenance seed
  const auto& entry = s.pool().entries.front();
  const double again = ev.evaluate_block(
      entry.code, detail::episode_eval_seed(entry.prov.seed, entry.prov.episode));
  CHECK(again == doctest::Approx(entry.score).epsilon(1e-12));
}
