#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "gnas/run_io.hpp"
#include "helpers.hpp"
#include "json.hpp"

namespace {

struct CmdResult {
  int code = -1;
  std::string out;
};

// Runs the CLI with stdout+stderr captured.
CmdResult run_cli(const std::string& args) {
  const std::string cmd = std::string(GNAS_CLI_PATH) + " " + args + " 2>&1";
  CmdResult r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof(buf), p)) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string tiny_synth_config(const std::string& out_dir, const std::string& evaluator,
                              int budget, int max_layers = 2, std::uint64_t seed = 3) {
  nlohmann::json j;
  j["dataset"] = {{"format", "synth"},
                  {"name", "tiny"},
                  {"synth",
                   {{"preset", "cora-small"},
                    {"nodes", 80},
                    {"edges", 160},
                    {"features", 24},
                    {"classes", 4},
                    {"seed", 5}}},
                  {"split", "semi"},
                  {"per_class", 4},
                  {"val", 20},
                  {"test", 30}};
  j["space"] = {{"max_layers", max_layers}, {"max_blocks", 2}};
  j["model"] = {{"hidden", 8}, {"epochs", 6}};
  j["agent"] = {{"episodes_block", budget},
                {"episodes_arch", budget},
                {"capacity", 60},
                {"batch_size", 8},
                {"sync_period", 10},
                {"q_hidden", 24},
                {"pool_size", 3}};
  j["evaluator"] = evaluator;
  j["output_dir"] = out_dir;
  j["seed"] = seed;
  return j.dump(2);
}

int line_count(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  int n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("help screens exist for every command") {
  for (const char* cmd :
       {"--help", "data --help", "data inspect --help", "data synth --help",
        "search --help", "search blocks --help", "search arch --help", "transfer --help",
        "train --help", "eval --help", "ablate --help", "ablate diversity --help"}) {
    CmdResult r = run_cli(cmd);
    CHECK(r.code == 0);
    CHECK(r.out.find("Usage") != std::string::npos);
  }
}

TEST_CASE("data inspect") {
  SUBCASE("missing file exits 2") {
    CmdResult r = run_cli("data inspect /nonexistent/prefix --format planetoid");
    CHECK(r.code == 2);
    CHECK(r.out.find("error:") != std::string::npos);
  }
  SUBCASE("synthetic presets print the headline counts") {
    CmdResult r = run_cli("data inspect cora-small --format synth --per-class 5 --val 100 --test 200");
    CHECK(r.code == 0);
    CHECK(r.out.find("500 nodes, 1000 edges, 1433 features, 7 classes") != std::string::npos);
    CHECK(r.out.find("train=35 val=100 test=200") != std::string::npos);
  }
  SUBCASE("hand fixture counts match a hand tally") {
    const std::string dir = gnas::test::temp_dir("cli_fixture");
    gnas::test::write_text(dir + "/t.content", "a 1 0 x\nb 0 1 y\nc 1 1 x\n");
    gnas::test::write_text(dir + "/t.cites", "a b\nb c\n");
    CmdResult r = run_cli("data inspect " + dir + "/t --format planetoid --per-class 1 --val 1 --test 1");
    CHECK(r.code == 0);
    CHECK(r.out.find("3 nodes, 2 edges, 2 features, 2 classes") != std::string::npos);
  }
}

TEST_CASE("data synth writes loadable corpora") {
  const std::string dir = gnas::test::temp_dir("cli_synth");
  CmdResult r = run_cli("data synth cora-small --nodes 60 --edges 120 --out " + dir +
                        " --format csv");
  CHECK(r.code == 0);
  CmdResult ins = run_cli("data inspect " + dir +
                          " --format csv --per-class 2 --val 10 --test 10");
  CHECK(ins.code == 0);
  CHECK(ins.out.find("60 nodes, 120 edges, 1433 features, 7 classes") != std::string::npos);
}

TEST_CASE("block search runs, streams progress, and is byte-deterministic") {
  const std::string base = gnas::test::temp_dir("cli_blocks");
  gnas::test::write_text(base + "/cfg.json", tiny_synth_config(base + "/run1", "smooth", 20));
  CmdResult r1 = run_cli("search blocks " + base + "/cfg.json");
  CHECK(r1.code == 0);
  CHECK(r1.out.find("episode=1 ") != std::string::npos);
  CHECK(r1.out.find("episode=20 ") != std::string::npos);
  CHECK(line_count(base + "/run1/trace.csv") == 21);  // header + 20 rows
  CHECK(std::filesystem::exists(base + "/run1/gbp.json"));
  CHECK(std::filesystem::exists(base + "/run1/summary.json"));
  CHECK(std::filesystem::exists(base + "/run1/config.json"));

  // identical config and seed into a fresh directory: identical trace bytes
  gnas::test::write_text(base + "/cfg2.json", tiny_synth_config(base + "/run2", "smooth", 20));
  CmdResult r2 = run_cli("search blocks " + base + "/cfg2.json");
  CHECK(r2.code == 0);
  CHECK(gnas::read_file(base + "/run1/trace.csv") == gnas::read_file(base + "/run2/trace.csv"));

  SUBCASE("a run directory is not silently reused") {
    CmdResult again = run_cli("search blocks " + base + "/cfg.json");
    CHECK(again.code == 2);
  }
}

TEST_CASE("arch search requires --gbp and consumes a pool") {
  const std::string base = gnas::test::temp_dir("cli_arch");
  gnas::test::write_text(base + "/cfg.json", tiny_synth_config(base + "/blocks", "smooth", 15));
  REQUIRE(run_cli("search blocks " + base + "/cfg.json").code == 0);

  CmdResult missing = run_cli("search arch " + base + "/cfg.json");
  CHECK(missing.code == 2);

  gnas::test::write_text(base + "/acfg.json", tiny_synth_config(base + "/arch", "smooth", 10));
  CmdResult r = run_cli("search arch " + base + "/acfg.json --gbp " + base +
                        "/blocks/gbp.json");
  CHECK(r.code == 0);
  CHECK(std::filesystem::exists(base + "/arch/best_arch.json"));
  CHECK(line_count(base + "/arch/trace.csv") == 11);
}

TEST_CASE("interrupt with --stop-after writes a checkpoint; resume matches") {
  const std::string base = gnas::test::temp_dir("cli_resume");
  gnas::test::write_text(base + "/cfg.json", tiny_synth_config(base + "/full", "deceptive", 18));
  REQUIRE(run_cli("search blocks " + base + "/cfg.json").code == 0);

  gnas::test::write_text(base + "/cfg2.json", tiny_synth_config(base + "/part", "deceptive", 18));
  CmdResult stopped = run_cli("search blocks " + base + "/cfg2.json --stop-after 6");
  CHECK(stopped.code == 130);
  CHECK(std::filesystem::exists(base + "/part/checkpoint.json"));
  nlohmann::json manifest = nlohmann::json::parse(gnas::read_file(base + "/part/manifest.json"));
  CHECK(manifest.at("status") == "interrupted");
  CHECK(manifest.at("episodes_done") == 6);

  CmdResult resumed = run_cli("search blocks --resume " + base + "/part");
  CHECK(resumed.code == 0);
  CHECK(gnas::read_file(base + "/part/trace.csv") == gnas::read_file(base + "/full/trace.csv"));
  nlohmann::json m2 = nlohmann::json::parse(gnas::read_file(base + "/part/manifest.json"));
  CHECK(m2.at("status") == "completed");
}

TEST_CASE("train and eval round-trip a model checkpoint") {
  const std::string base = gnas::test::temp_dir("cli_train");
  gnas::test::write_text(base + "/cfg.json", tiny_synth_config(base + "/unused", "real", 5));

  // hand-written two-block GCN-style architecture file
  nlohmann::json arch;
  arch["version"] = 1;
  arch["kind"] = "arch";
  arch["blocks"] = nlohmann::json::array(
      {nlohmann::json::parse(R"([[1,"GCNII","relu",-1],[2,"EoB","none",-1]])"),
       nlohmann::json::parse(R"([[1,"GCNII","none",-1],[2,"EoB","none",-1]])")});
  arch["genes"] = nlohmann::json::parse(
      R"([[1,"B0",0.5,0.0,-1],[2,"B1",0.5,0.0,-1],[3,"EoB",0.0,0.0,-1]])");
  gnas::test::write_text(base + "/gcn.json", arch.dump());

  CmdResult tr = run_cli("train " + base + "/gcn.json " + base + "/cfg.json --out " + base +
                         "/model.ckpt.json");
  CHECK(tr.code == 0);
  CHECK(tr.out.find("val_accuracy=") != std::string::npos);
  CHECK(tr.out.find("depth=2") != std::string::npos);

  // test accuracy printed by eval must match train's print exactly
  auto pick = [](const std::string& s, const std::string& key) {
    const auto at = s.find(key);
    REQUIRE(at != std::string::npos);
    return s.substr(at + key.size(), 8);
  };
  CmdResult ev = run_cli("eval " + base + "/model.ckpt.json " + base + "/cfg.json");
  CHECK(ev.code == 0);
  CHECK(pick(ev.out, "test_accuracy=") == pick(tr.out, "test_accuracy="));

  SUBCASE("corrupted checkpoint exits 2") {
    gnas::test::write_text(base + "/bad.ckpt.json", "{\"kind\": \"nope\"}");
    CHECK(run_cli("eval " + base + "/bad.ckpt.json " + base + "/cfg.json").code == 2);
    gnas::test::write_text(base + "/trunc.ckpt.json",
                           gnas::read_file(base + "/model.ckpt.json").substr(0, 500));
    CHECK(run_cli("eval " + base + "/trunc.ckpt.json " + base + "/cfg.json").code == 2);
  }
  SUBCASE("dataset dimension mismatch exits 2") {
    std::string other = tiny_synth_config(base + "/unused2", "real", 5);
    nlohmann::json j = nlohmann::json::parse(other);
    j["dataset"]["synth"]["features"] = 10;
    gnas::test::write_text(base + "/cfg10.json", j.dump());
    CmdResult r = run_cli("eval " + base + "/model.ckpt.json " + base + "/cfg10.json");
    CHECK(r.code == 2);
    CHECK(r.out.find("feature width") != std::string::npos);
  }
}

TEST_CASE("train reaches GCN-level accuracy on the benchmark-shaped corpus") {
  // full-size corpus, 200 epochs: enough to clear the 0.75 bar with margin
  const std::string base = gnas::test::temp_dir("cli_gcn");
  nlohmann::json cfg;
  cfg["dataset"] = {{"format", "synth"},
                    {"name", "synth-cora"},
                    {"synth", {{"preset", "cora"}}},
                    {"split", "semi"}};
  cfg["model"] = {{"alpha", 0.0}, {"lambda", 0.0}, {"dropout", 0.5}, {"epochs", 200}};
  cfg["seed"] = 1;
  gnas::test::write_text(base + "/cfg.json", cfg.dump());

  nlohmann::json arch;
  arch["version"] = 1;
  arch["kind"] = "arch";
  arch["blocks"] = nlohmann::json::array(
      {nlohmann::json::parse(R"([[1,"GCNII","relu",-1],[2,"EoB","none",-1]])"),
       nlohmann::json::parse(R"([[1,"GCNII","none",-1],[2,"EoB","none",-1]])")});
  arch["genes"] = nlohmann::json::parse(
      R"([[1,"B0",0.5,0.0,-1],[2,"B1",0.5,0.0,-1],[3,"EoB",0.0,0.0,-1]])");
  gnas::test::write_text(base + "/gcn.json", arch.dump());

  CmdResult r = run_cli("train " + base + "/gcn.json " + base + "/cfg.json --out " + base +
                        "/gcn.ckpt.json");
  CHECK(r.code == 0);
  const auto at = r.out.find("test_accuracy=");
  REQUIRE(at != std::string::npos);
  const double acc = std::stod(r.out.substr(at + 14));
  CHECK(acc >= 0.75);
}

TEST_CASE("config validation reports field paths before any work") {
  const std::string base = gnas::test::temp_dir("cli_cfg");
  nlohmann::json j = nlohmann::json::parse(tiny_synth_config(base + "/x", "smooth", 5));
  j["agent"]["batch_size"] = -3;
  gnas::test::write_text(base + "/bad.json", j.dump());
  CmdResult r = run_cli("search blocks " + base + "/bad.json");
  CHECK(r.code == 2);
  CHECK(r.out.find("agent.batch_size") != std::string::npos);

  nlohmann::json k = nlohmann::json::parse(tiny_synth_config(base + "/y", "smooth", 5));
  k["agent"]["batchsize"] = 8;  // typo
  gnas::test::write_text(base + "/typo.json", k.dump());
  CmdResult r2 = run_cli("search blocks " + base + "/typo.json");
  CHECK(r2.code == 2);
  CHECK(r2.out.find("agent.batchsize") != std::string::npos);
}

TEST_CASE("ablate diversity emits the pinned CSV schema") {
  const std::string base = gnas::test::temp_dir("cli_ablate");
  gnas::test::write_text(base + "/cfg.json", tiny_synth_config(base + "/x", "real", 5));
  gnas::test::write_text(base + "/block.json", R"([[1,"GCNII","relu",-1],[2,"EoB","none",-1]])");

  CmdResult bad = run_cli("ablate diversity " + base + "/block.json " + base +
                          "/cfg.json --depths 4,x");
  CHECK(bad.code == 2);

  CmdResult r = run_cli("ablate diversity " + base + "/block.json " + base +
                        "/cfg.json --depths 2,4 --out " + base + "/ab.csv");
  CHECK(r.code == 0);
  const std::string csv = gnas::read_file(base + "/ab.csv");
  CHECK(csv.rfind("depth,variant,accuracy,seed\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("transfer runs the second stage against a different dataset") {
  const std::string base = gnas::test::temp_dir("cli_transfer");
  gnas::test::write_text(base + "/cfg.json", tiny_synth_config(base + "/blocks", "real", 4));
  REQUIRE(run_cli("search blocks " + base + "/cfg.json").code == 0);

  // new dataset with a different feature width
  nlohmann::json j = nlohmann::json::parse(tiny_synth_config(base + "/moved", "real", 3));
  j["dataset"]["synth"]["features"] = 32;
  j["dataset"]["synth"]["classes"] = 3;
  j["dataset"]["synth"]["seed"] = 9;
  gnas::test::write_text(base + "/tcfg.json", j.dump());
  CmdResult r = run_cli("transfer " + base + "/tcfg.json --gbp " + base + "/blocks/gbp.json");
  CHECK(r.code == 0);
  CHECK(r.out.find("transferred=1") != std::string::npos);
  nlohmann::json summary = nlohmann::json::parse(gnas::read_file(base + "/moved/summary.json"));
  CHECK(summary.at("transferred") == true);

  SUBCASE("hidden-size mismatch is a transfer error") {
    nlohmann::json k = nlohmann::json::parse(tiny_synth_config(base + "/h", "real", 3));
    k["model"]["hidden"] = 16;
    gnas::test::write_text(base + "/hcfg.json", k.dump());
    CmdResult bad = run_cli("transfer " + base + "/hcfg.json --gbp " + base + "/blocks/gbp.json");
    CHECK(bad.code == 2);
    CHECK(bad.out.find("hidden size") != std::string::npos);
  }
}
