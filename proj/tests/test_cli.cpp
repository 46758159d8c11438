#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kCli = GRAPHDA_CLI_PATH;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = kCli + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  return std::string((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
}

const std::string kSynthArgs =
    "--nodes 90 --classes 3 --intra 0.1 --inter 0.02 --attr-dim 16 "
    "--domain-shift 0.3 --seed 4";

const std::string kTrainArgs =
    "--epochs 2 --batch-size 24 --sample-sizes 3,3 --layer-dims 12/6 "
    "--topk 5 --n 2 --seed 4 --temperature 10";

}  // namespace

TEST_CASE("synth writes six data files plus a manifest") {
  TempDir dir("graphda_cli_synth");
  const fs::path out = dir.path / "data";
  CHECK(run("synth --out " + out.string() + " " + kSynthArgs,
            dir.path / "log.txt") == 0);
  for (const char* name :
       {"source_edges.txt", "source_attrs.txt", "source_labels.txt",
        "target_edges.txt", "target_attrs.txt", "target_labels.txt",
        "manifest.txt"})
    CHECK(fs::exists(out / name));
}

TEST_CASE("synth refuses to clobber a non-empty directory") {
  TempDir dir("graphda_cli_synth2");
  const fs::path out = dir.path / "data";
  fs::create_directories(out);
  std::ofstream(out / "existing.txt") << "x";
  CHECK(run("synth --out " + out.string(), dir.path / "log.txt") == 1);
}

TEST_CASE("synth rejects invalid probabilities with exit code 1") {
  TempDir dir("graphda_cli_synth3");
  CHECK(run("synth --out " + (dir.path / "d").string() + " --intra 1.5",
            dir.path / "log.txt") == 1);
  const std::string log = slurp(dir.path / "log.txt");
  CHECK(log.find("error:") != std::string::npos);
}

TEST_CASE("repeated synth with one seed is byte-identical") {
  TempDir dir("graphda_cli_synth4");
  const fs::path a = dir.path / "a", b = dir.path / "b";
  REQUIRE(run("synth --out " + a.string() + " " + kSynthArgs,
              dir.path / "log.txt") == 0);
  REQUIRE(run("synth --out " + b.string() + " " + kSynthArgs,
              dir.path / "log.txt") == 0);
  for (const char* name :
       {"source_edges.txt", "source_attrs.txt", "source_labels.txt",
        "target_edges.txt", "target_attrs.txt", "target_labels.txt"})
    CHECK(slurp(a / name) == slurp(b / name));
}

TEST_CASE("diffuse writes caches, skips when fresh, honors --force") {
  TempDir dir("graphda_cli_diffuse");
  const fs::path data = dir.path / "data";
  REQUIRE(run("synth --out " + data.string() + " " + kSynthArgs,
              dir.path / "log.txt") == 0);
  CHECK(run("diffuse --data " + data.string() + " --alpha 0.1 --topk 5",
            dir.path / "log.txt") == 0);
  CHECK(fs::exists(data / "source_diffusion.txt"));
  CHECK(fs::exists(data / "target_diffusion.txt"));

  CHECK(run("diffuse --data " + data.string() + " --alpha 0.1 --topk 5",
            dir.path / "log2.txt") == 0);
  CHECK(slurp(dir.path / "log2.txt").find("skipping") != std::string::npos);

  CHECK(run("diffuse --data " + data.string() +
                " --alpha 0.1 --topk 5 --force",
            dir.path / "log3.txt") == 0);
  CHECK(slurp(dir.path / "log3.txt").find("skipping") == std::string::npos);
}

TEST_CASE("train + eval pipeline with consistent accuracy") {
  TempDir dir("graphda_cli_train");
  const fs::path data = dir.path / "data";
  REQUIRE(run("synth --out " + data.string() + " " + kSynthArgs,
              dir.path / "log.txt") == 0);
  const fs::path out = dir.path / "run";
  // No diffusion cache yet: the trainer computes it with a warning.
  REQUIRE(run("train --data " + data.string() + " --out " + out.string() +
                  " " + kTrainArgs,
              dir.path / "train.txt") == 0);
  const std::string train_log = slurp(dir.path / "train.txt");
  CHECK(train_log.find("accuracy") != std::string::npos);
  for (const char* name : {"report.csv", "checkpoint.bin", "manifest.txt",
                           "embeddings_source.csv", "embeddings_target.csv"})
    CHECK(fs::exists(out / name));

  REQUIRE(run("eval --data " + data.string() + " --checkpoint " +
                  (out / "checkpoint.bin").string(),
              dir.path / "eval.txt") == 0);
  const std::string eval_log = slurp(dir.path / "eval.txt");

  // The final training accuracy line must be reproduced by eval.
  auto pick_accuracy = [](const std::string& log) {
    const auto pos = log.find("accuracy ");
    REQUIRE(pos != std::string::npos);
    return log.substr(pos, log.find('\n', pos) - pos);
  };
  const auto train_pos = train_log.rfind("accuracy ");
  REQUIRE(train_pos != std::string::npos);
  const std::string train_acc =
      train_log.substr(train_pos, train_log.find('\n', train_pos) - train_pos);
  CHECK(pick_accuracy(eval_log) == train_acc);
  CHECK(eval_log.find("class 0 accuracy") != std::string::npos);
  CHECK(eval_log.find("gamma") != std::string::npos);
}

TEST_CASE("identical train invocations produce identical loss CSVs") {
  TempDir dir("graphda_cli_det");
  const fs::path data = dir.path / "data";
  REQUIRE(run("synth --out " + data.string() + " " + kSynthArgs,
              dir.path / "log.txt") == 0);
  REQUIRE(run("diffuse --data " + data.string() + " --alpha 0.1 --topk 5",
              dir.path / "log.txt") == 0);
  const fs::path r1 = dir.path / "r1", r2 = dir.path / "r2";
  REQUIRE(run("train --data " + data.string() + " --out " + r1.string() +
                  " " + kTrainArgs,
              dir.path / "t1.txt") == 0);
  REQUIRE(run("train --data " + data.string() + " --out " + r2.string() +
                  " " + kTrainArgs,
              dir.path / "t2.txt") == 0);
  CHECK(slurp(r1 / "report.csv") == slurp(r2 / "report.csv"));
}

TEST_CASE("ablation flags are accepted and recorded in the manifest") {
  TempDir dir("graphda_cli_ablate");
  const fs::path data = dir.path / "data";
  REQUIRE(run("synth --out " + data.string() + " " + kSynthArgs,
              dir.path / "log.txt") == 0);
  const fs::path out = dir.path / "run";
  REQUIRE(run("train --data " + data.string() + " --out " + out.string() +
                  " " + kTrainArgs + " --ablate da --ablate cl",
              dir.path / "train.txt") == 0);
  const std::string manifest = slurp(out / "manifest.txt");
  CHECK(manifest.find("ablate_da = true") != std::string::npos);
  CHECK(manifest.find("ablate_cl = true") != std::string::npos);
}

TEST_CASE("UDA mode trains with n = 0") {
  TempDir dir("graphda_cli_uda");
  const fs::path data = dir.path / "data";
  REQUIRE(run("synth --out " + data.string() + " " + kSynthArgs,
              dir.path / "log.txt") == 0);
  CHECK(run("train --data " + data.string() + " --out " +
                (dir.path / "run").string() + " " + kTrainArgs + " --n 0",
            dir.path / "train.txt") == 0);
}

TEST_CASE("seed fan-out reports every seed and the mean") {
  TempDir dir("graphda_cli_seeds");
  const fs::path data = dir.path / "data";
  REQUIRE(run("synth --out " + data.string() + " " + kSynthArgs,
              dir.path / "log.txt") == 0);
  REQUIRE(run("train --data " + data.string() + " --out " +
                  (dir.path / "runs").string() + " " + kTrainArgs +
                  " --seeds 1 2 --jobs 2",
              dir.path / "train.txt") == 0);
  const std::string log = slurp(dir.path / "train.txt");
  CHECK(log.find("seed 1 accuracy") != std::string::npos);
  CHECK(log.find("seed 2 accuracy") != std::string::npos);
  CHECK(log.find("mean accuracy") != std::string::npos);
  CHECK(fs::exists(dir.path / "runs" / "seed_1" / "report.csv"));
  CHECK(fs::exists(dir.path / "runs" / "seed_2" / "report.csv"));
}

TEST_CASE("missing data paths fail with exit code 1") {
  TempDir dir("graphda_cli_missing");
  CHECK(run("train --out " + (dir.path / "run").string(),
            dir.path / "log.txt") == 1);
  CHECK(run("diffuse", dir.path / "log2.txt") == 1);
}
