#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dcrbm/cli.hpp"
#include "dcrbm/sequence_io.hpp"

namespace fs = std::filesystem;
using dcrbm::cli::run;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& file) const { return (path / file).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dcrbm");
  return run(args);
}

}  // namespace

TEST_CASE("verify passes on a fresh build") {
  TempDir dir("dcrbm_cli_verify");
  CHECK(cli({"verify", "--trials", "20", "--grad-trials", "5", "--out", dir / "v.json"}) == 0);
  const auto doc = nlohmann::json::parse(slurp(dir / "v.json"));
  CHECK(doc["passed"] == true);
  CHECK(doc["posterior"]["max_posterior_deviation"].get<double>() < 1e-9);
  CHECK(doc["config"]["seed"] == 0);
}

TEST_CASE("synth is byte-identical for the same seed") {
  TempDir dir("dcrbm_cli_synth");
  const std::vector<std::string> common{"--seed", "7", "--samples-per-class", "2", "--frames", "40"};
  std::vector<std::string> a{"synth", "--out", dir / "a.dyad"}, b{"synth", "--out", dir / "b.dyad"};
  a.insert(a.end(), common.begin(), common.end());
  b.insert(b.end(), common.begin(), common.end());
  REQUIRE(cli(a) == 0);
  REQUIRE(cli(b) == 0);
  CHECK(slurp(dir / "a.dyad") == slurp(dir / "b.dyad"));
  const dcrbm::DyadDataset d = dcrbm::load_sequences(dir / "a.dyad");
  CHECK(d.sequences.size() == 6);
  const auto config = nlohmann::json::parse(d.metadata.at("config"));
  CHECK(config["seed"] == 7);
  CHECK(config["synth"]["frames"] == 40);
}

TEST_CASE("usage, data and mismatch errors have distinct exit codes") {
  TempDir dir("dcrbm_cli_errors");
  CHECK(cli({}) == dcrbm::cli::kUsageError);
  CHECK(cli({"synth", "--out", dir / "x.dyad", "--bogus"}) == dcrbm::cli::kUsageError);
  CHECK(cli({"frobnicate"}) == dcrbm::cli::kUsageError);
  CHECK(cli({"synth", "--out", dir / "x.dyad", "--frames", "5"}) == dcrbm::cli::kUsageError);
  CHECK(cli({"train", "--data", dir / "missing.dyad", "--out", dir / "m.json"}) ==
        dcrbm::cli::kDataError);
  CHECK(cli({"synth", "--help"}) == 0);

  REQUIRE(cli({"synth", "--out", dir / "three.dyad", "--samples-per-class", "2", "--frames",
               "40"}) == 0);
  REQUIRE(cli({"synth", "--out", dir / "two.dyad", "--samples-per-class", "2", "--frames", "40",
               "--coupling", "0,0.9"}) == 0);
  REQUIRE(cli({"train", "--data", dir / "three.dyad", "--out", dir / "m.json", "--epochs", "1",
               "--hidden", "4", "--history", "3"}) == 0);
  CHECK(cli({"classify", "--model", dir / "m.json", "--data", dir / "two.dyad", "--out",
             dir / "c.json"}) == dcrbm::cli::kMismatchError);
  std::ofstream(dir / "garbage.dyad") << "dyadseq-v1\nheader visible=x\n";
  CHECK(cli({"classify", "--model", dir / "m.json", "--data", dir / "garbage.dyad", "--out",
             dir / "c.json"}) == dcrbm::cli::kDataError);
}

TEST_CASE("config files supply defaults and flags win") {
  TempDir dir("dcrbm_cli_config");
  std::ofstream(dir / "run.cfg") << "# settings\nsamples_per_class = 1\nframes=40\nseed=3\n";
  REQUIRE(cli({"synth", "--config", dir / "run.cfg", "--out", dir / "a.dyad", "--seed", "4"}) == 0);
  const dcrbm::DyadDataset d = dcrbm::load_sequences(dir / "a.dyad");
  CHECK(d.sequences.size() == 3);
  CHECK(d.sequences[0].length() == 40);
  CHECK(nlohmann::json::parse(d.metadata.at("config"))["seed"] == 4);
  std::ofstream(dir / "bad.cfg") << "no_such_option=1\n";
  CHECK(cli({"synth", "--config", dir / "bad.cfg", "--out", dir / "b.dyad"}) ==
        dcrbm::cli::kUsageError);
}

TEST_CASE("pipeline: train, classify, generate, eval-gen, cv") {
  TempDir dir("dcrbm_cli_pipeline");
  REQUIRE(cli({"synth", "--out", dir / "d.dyad", "--samples-per-class", "2", "--frames", "60",
               "--seed", "1"}) == 0);
  const std::vector<std::string> train{"train",     "--data",    dir / "d.dyad", "--epochs",
                                       "2",         "--hidden",  "5",            "--history",
                                       "3",         "--seed",    "2",            "--no-resample-labels"};
  std::vector<std::string> t1 = train, t2 = train;
  t1.insert(t1.end(), {"--out", dir / "m1.json"});
  t2.insert(t2.end(), {"--out", dir / "m2.json", "--report", dir / "r2.json"});
  REQUIRE(cli(t1) == 0);
  REQUIRE(cli(t2) == 0);
  CHECK(slurp(dir / "m1.json") == slurp(dir / "m2.json"));
  CHECK(slurp(dir / "m1.json.report.json") == slurp(dir / "r2.json"));
  const auto ckpt = nlohmann::json::parse(slurp(dir / "m1.json"));
  CHECK(ckpt["metadata"]["config"]["train"]["resample_labels"] == false);
  CHECK(ckpt["metadata"]["config"]["train"]["epochs"] == 2);
  const auto report = nlohmann::json::parse(slurp(dir / "r2.json"));
  CHECK(report["epochs"].size() == 2);
  CHECK(report["config"]["seed"] == 2);

  REQUIRE(cli({"classify", "--model", dir / "m1.json", "--data", dir / "d.dyad", "--out",
               dir / "c.json"}) == 0);
  const auto metrics = nlohmann::json::parse(slurp(dir / "c.json"));
  CHECK(metrics["total"] == 6);
  CHECK(metrics["config"]["aggregation"] == "majority");

  REQUIRE(cli({"generate", "--model", dir / "m1.json", "--data", dir / "d.dyad", "--sequence",
               "4", "--length", "20", "--iters", "3", "--out", dir / "g.dyad"}) == 0);
  const dcrbm::DyadDataset g = dcrbm::load_sequences(dir / "g.dyad");
  const dcrbm::DyadDataset d = dcrbm::load_sequences(dir / "d.dyad");
  REQUIRE(g.sequences.size() == 1);
  CHECK(g.sequences[0].length() == 20);
  // Partial setting: the observed actor comes back in original coordinates.
  CHECK((g.sequences[0].frames.leftCols(6) - d.sequences[4].frames.middleRows(3, 20).leftCols(6))
            .cwiseAbs()
            .maxCoeff() < 1e-9);
  CHECK(cli({"generate", "--model", dir / "m1.json", "--data", dir / "d.dyad", "--setting",
             "full", "--length", "80", "--iters", "2", "--out", dir / "gf.dyad"}) == 0);
  CHECK(cli({"generate", "--model", dir / "m1.json", "--data", dir / "d.dyad", "--length", "80",
             "--out", dir / "bad.dyad"}) == dcrbm::cli::kDataError);

  REQUIRE(cli({"eval-gen", "--model", dir / "m1.json", "--data", dir / "d.dyad", "--lengths",
               "16,20", "--iters", "2", "--out", dir / "e.json", "--csv", dir / "e.csv"}) == 0);
  const auto curves = nlohmann::json::parse(slurp(dir / "e.json"))["curves"];
  // 3 classes x 2 settings x (model, mean-pose, persistence)
  CHECK(curves.size() == 18);
  CHECK(curves[0]["lengths"] == nlohmann::json({16, 20}));
  std::ifstream csv(dir / "e.csv");
  std::string line;
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 1 + 18 * 2);

  REQUIRE(cli({"cv", "--data", dir / "d.dyad", "--folds", "2", "--epochs", "1", "--hidden", "4",
               "--history", "3", "--out", dir / "cv.json"}) == 0);
  const auto cv = nlohmann::json::parse(slurp(dir / "cv.json"));
  CHECK(cv["folds"].size() == 2);
  CHECK(cv["config"]["folds"] == 2);
}
