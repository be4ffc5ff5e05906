#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int status;
  std::string output;
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("uffia_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Run uffia(const std::string& args, const std::string& env = "") {
  const fs::path log = fs::temp_directory_path() / "uffia_test_cli_output.txt";
  const std::string cmd = env + " " + UFFIA_CLI + std::string(" ") + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(log)};
}

/// A run small enough for the command line smoke tests.
nlohmann::json tiny_run() {
  return {
      {"arch",
       {{"dim", 16},
        {"heads", 2},
        {"layers", 1},
        {"ffn", 16},
        {"conv_channels", {4, 8}},
        {"audio_tokens", 4},
        {"patch", 8},
        {"frames", 2},
        {"frame_size", 16}}},
      {"teacher", {{"audio_channels", {4}}, {"video_channels", {4}}, {"hidden", 8}, {"video_input_pool", 1}}},
      {"data", {{"frames", 4}, {"frame_size", 16}, {"train", 8}, {"val", 4}, {"test", 4}}},
      {"optim", {{"batch", 4}, {"epochs", 3}}},
      {"corruption", {{"snrs", {-10, 0, 20}}}},
  };
}

std::size_t data_rows(const std::string& csv) {
  std::size_t rows = 0;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') ++rows;
  }
  return rows - 1;  // header
}

}  // namespace

TEST_CASE("usage and exit codes") {
  const Run help = uffia("--help");
  CHECK(help.status == 0);
  for (const char* verb : {"synth", "manifest", "preprocess", "train", "distill", "eval", "sweep", "flops"}) {
    CHECK(help.output.find(verb) != std::string::npos);
  }
  CHECK(uffia("train --help").status == 0);
  CHECK(uffia("").status == 2);
  CHECK(uffia("frobnicate").status == 2);
  CHECK(uffia("train --bogus-flag").status == 2);
  CHECK(uffia("eval").status == 2);  // --checkpoint is required

  const fs::path dir = scratch("errors");
  std::ofstream(dir / "bad.json") << R"({"optim": {"learning_rate": 0.1}})";
  const Run bad = uffia("train --config " + (dir / "bad.json").string() + " --out " + (dir / "out").string());
  CHECK(bad.status == 1);
  CHECK(bad.output.find("optim.learning_rate") != std::string::npos);
  const Run bad_set = uffia("flops --set optim.batch=0");
  CHECK(bad_set.status == 1);
  CHECK(bad_set.output.find("optim.batch") != std::string::npos);
  CHECK(uffia("train --out " + (dir / "out").string() + " --set data.source=manifest").status == 1);
  CHECK(!fs::exists(dir / "out" / "checkpoint.bin"));
}

TEST_CASE("train, rerun from run.json, eval, sweep, flops") {
  const fs::path dir = scratch("train");
  const fs::path config = dir / "run.json";
  std::ofstream(config) << tiny_run().dump(2);
  const std::string before = slurp(config);

  const Run first = uffia("train --config " + config.string() + " --set epochs=1 --threads 1 --out " +
                          (dir / "a").string());
  REQUIRE_MESSAGE(first.status == 0, first.output);
  CHECK(slurp(config) == before);  // inputs untouched
  for (const char* f : {"metrics.csv", "checkpoint.bin", "run.json"}) CHECK(fs::exists(dir / "a" / f));
  const auto record = nlohmann::json::parse(slurp(dir / "a" / "run.json"));
  CHECK(record.at("config").at("optim").at("epochs") == 1);
  CHECK(record.at("config").at("threads") == 1);
  CHECK(record.at("result").at("epochs_run") == 1);

  // The echoed config alone reproduces the run.
  const Run again = uffia("train --config " + (dir / "a" / "run.json").string() + " --out " + (dir / "b").string());
  REQUIRE_MESSAGE(again.status == 0, again.output);
  CHECK(slurp(dir / "a" / "checkpoint.bin") == slurp(dir / "b" / "checkpoint.bin"));
  CHECK(slurp(dir / "a" / "metrics.csv") == slurp(dir / "b" / "metrics.csv"));

  const std::string ck = (dir / "a" / "checkpoint.bin").string();
  const Run eval = uffia("eval --checkpoint " + ck + " --mode V --snr 0 --out " + (dir / "eval").string());
  REQUIRE_MESSAGE(eval.status == 0, eval.output);
  CHECK(data_rows(slurp(dir / "eval" / "eval.csv")) == 1);
  CHECK(uffia("eval --checkpoint " + ck + " --mode X").status == 1);
  CHECK(uffia("eval --checkpoint " + (dir / "missing.bin").string()).status == 1);

  const Run sweep = uffia("sweep --checkpoint " + ck + " --mode AV --out " + (dir / "sweep").string());
  REQUIRE_MESSAGE(sweep.status == 0, sweep.output);
  const std::string csv = slurp(dir / "sweep" / "sweep.csv");
  CHECK(csv.rfind("mode,snr_db,accuracy\n", 0) == 0);
  CHECK(data_rows(csv) == 3);

  const Run flops = uffia("flops --config " + config.string() + " --out " + (dir / "flops").string());
  REQUIRE_MESSAGE(flops.status == 0, flops.output);
  CHECK(flops.output.find("multiply-accumulate = 2 FLOPs") != std::string::npos);
  CHECK(slurp(dir / "flops" / "flops.csv").find("# 1 multiply-accumulate") == 0);
  CHECK(data_rows(slurp(dir / "flops" / "flops.csv")) == 3);
}

TEST_CASE("synth, manifest, preprocess and training from a feature cache") {
  const fs::path dir = scratch("pipeline");
  const fs::path config = dir / "run.json";
  std::ofstream(config) << tiny_run().dump(2);
  const std::string cfg = " --config " + config.string();

  const Run synth = uffia("synth" + cfg + " --out " + (dir / "clips").string());
  REQUIRE_MESSAGE(synth.status == 0, synth.output);
  CHECK(fs::exists(dir / "clips" / "manifest.csv"));
  CHECK(fs::is_directory(dir / "clips" / "Strong"));

  // Folder scan with the dataset root taken from the environment.
  const Run manifest = uffia("manifest" + cfg + " --out " + (dir / "scan").string(),
                             "UFFIA_DATA_ROOT=" + (dir / "clips").string());
  REQUIRE_MESSAGE(manifest.status == 0, manifest.output);
  CHECK(data_rows(slurp(dir / "scan" / "manifest.csv")) == 16);
  CHECK(uffia("manifest" + cfg + " --out " + (dir / "scan2").string(), "UFFIA_DATA_ROOT=").status == 1);

  const Run packed = uffia("synth" + cfg + " --packed --out " + (dir / "packed").string());
  REQUIRE_MESSAGE(packed.status == 0, packed.output);

  // Relative manifest path resolved against UFFIA_DATA_ROOT.
  const Run pre = uffia("preprocess" + cfg + " --set data.source=manifest --set data.manifest=manifest.csv --out " +
                            (dir / "cache").string(),
                        "UFFIA_DATA_ROOT=" + (dir / "packed").string());
  REQUIRE_MESSAGE(pre.status == 0, pre.output);
  CHECK(fs::exists(dir / "cache" / "features.bin"));

  const std::string from_cache =
      " --set epochs=1 --set data.source=cache --set data.cache=" + (dir / "cache" / "features.bin").string();
  // A cache alone holds no audio to mix noise into.
  const Run deaf = uffia("train" + cfg + from_cache + " --out " + (dir / "run").string());
  CHECK(deaf.status == 1);
  CHECK(deaf.output.find("augment.noise_prob") != std::string::npos);
  const Run train = uffia("train" + cfg + from_cache + " --set augment.noise_prob=0 --out " + (dir / "run").string());
  REQUIRE_MESSAGE(train.status == 0, train.output);
  CHECK(fs::exists(dir / "run" / "checkpoint.bin"));

  // Distillation from freshly trained teachers.
  for (const char* kind : {"audio-teacher", "video-teacher"}) {
    const Run t = uffia("train" + cfg + " --set epochs=1 --set model=" + kind + " --out " + (dir / kind).string());
    REQUIRE_MESSAGE(t.status == 0, t.output);
  }
  CHECK(uffia("distill" + cfg + " --out " + (dir / "kd0").string()).status == 1);  // no teacher given
  const Run kd = uffia("distill" + cfg + " --set epochs=1 --set kd.audio_teacher=" +
                       (dir / "audio-teacher" / "checkpoint.bin").string() + " --set kd.video_teacher=" +
                       (dir / "video-teacher" / "checkpoint.bin").string() + " --out " + (dir / "kd").string());
  REQUIRE_MESSAGE(kd.status == 0, kd.output);
  CHECK(nlohmann::json::parse(slurp(dir / "kd" / "run.json")).at("config").at("kd").at("enabled") == true);
}
