#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>

#include <json.hpp>

#include "segfp/config.h"
#include "segfp/error.h"
#include "segfp/pipeline.h"
#include "segfp/util.h"
#include "test_support.h"

using namespace segfp;
namespace fs = std::filesystem;

namespace {

ErrorCode config_error_of(const nlohmann::json& patch) {
  nlohmann::json j = nlohmann::json(ExperimentConfig{});
  j.merge_patch(patch);
  try {
    parse_config(j.dump());
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIoError;
}

nlohmann::json tiny_config(const fs::path& workspace) {
  return {
      {"corpus", {{"n_train", 4}, {"n_ref", 4}, {"n_dist", 2}, {"clip_len_s", 4}, {"master_seed", 3}}},
      {"features", {{"mel_bins", 16}}},
      {"encoder",
       {{"mel_bins", 16},
        {"adapter_t0", 16},
        {"fingerprint_dim", 8},
        {"base_channels", 4},
        {"time_strides", {2, 2, 2, 2, 1, 1, 1, 1}},
        {"freq_strides", {2, 2, 2, 2, 1, 1, 1, 1}},
        {"adapter_inputs", {16, 32}},
        {"seed", 5}}},
      {"training", {{"batch_pairs", 4}, {"steps", 3}, {"seed", 2}, {"noise_pool_size", 2}}},
      {"segmentation", {{"w_values", {0.5, 1}}, {"hop_h", 0.5}}},
      {"evaluation",
       {{"l_values", {0.5, 1, 2}},
        {"query_set", {{"queries_per_track", 1}, {"query_len_s", 2}, {"max_jitter_s", 0.1}, {"seed", 4}}}}},
      {"advisor", {{"replay_dir", (oracle::source_dir() / "data" / "replays").string()}}},
      {"paths", {{"workspace", workspace.string()}}},
      {"threads", 1}};
}

struct CliRun {
  int status;
  std::string out;
};

CliRun run_cli(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt";
  const std::string cmd = std::string(SEGFP_CLI_PATH) + " " + args + " > " + out.string() + " 2> " +
                          (dir / "stderr.txt").string();
  const int raw = std::system(cmd.c_str());
  CliRun r{WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, {}};
  if (fs::exists(out)) r.out = read_file(out);
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("segfp_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override {
    if (!HasFailure()) fs::remove_all(dir_);
  }

  fs::path write_config(const nlohmann::json& j, const std::string& name = "cfg.json") {
    const fs::path p = dir_ / name;
    write_file_atomic(p, j.dump(2));
    return p;
  }

  fs::path dir_;
};

}  // namespace

TEST(Config, DefaultsValidate) {
  const ExperimentConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.segmentation.w_values, (std::vector<double>{0.5, 1, 2}));
  EXPECT_EQ(cfg.segmentation.hop_h, 0.5);
  EXPECT_EQ(cfg.evaluation.l_values.size(), 10u);
  EXPECT_EQ(cfg.evaluation.k_values, (std::vector<std::size_t>{1, 3, 10}));
  EXPECT_EQ(cfg.features.sample_rate, 8000);
  EXPECT_EQ(cfg.encoder_for(2.0).window_w, 2.0);
}

TEST(Config, EmptyObjectGivesDefaults) {
  const ExperimentConfig cfg = parse_config("{}");
  EXPECT_EQ(nlohmann::json(cfg), nlohmann::json(ExperimentConfig{}));
}

TEST(Config, RoundTrip) {
  const ExperimentConfig cfg = load_config(oracle::source_dir() / "configs" / "toy.json");
  EXPECT_EQ(cfg.workspace, fs::path("workspace/toy"));
  EXPECT_EQ(cfg.encoder.fingerprint_dim, 32u);
  EXPECT_EQ(cfg.training.train.steps, 500u);
  const ExperimentConfig again = parse_config(nlohmann::json(cfg).dump());
  EXPECT_EQ(nlohmann::json(again), nlohmann::json(cfg));
}

TEST(Config, CrossFieldErrors) {
  EXPECT_EQ(config_error_of({{"evaluation", {{"k_nn", 5}}}}), ErrorCode::kConfigError);
  EXPECT_EQ(config_error_of({{"evaluation", {{"top_m", 3}}}}), ErrorCode::kConfigError);
  EXPECT_EQ(config_error_of({{"evaluation", {{"k_values", {1, 5}}}}}), ErrorCode::kConfigError);
  EXPECT_EQ(config_error_of({{"evaluation", {{"l_values", {0.25, 1}}}}}), ErrorCode::kConfigError);
  EXPECT_EQ(config_error_of({{"features", {{"mel_bins", 64}}}}), ErrorCode::kConfigError);
  EXPECT_EQ(config_error_of({{"features", {{"sample_rate", 16000}}}}), ErrorCode::kConfigError);
  EXPECT_EQ(config_error_of({{"segmentation", {{"w_values", nlohmann::json::array()}}}}), ErrorCode::kConfigError);
  EXPECT_EQ(config_error_of({{"segmentation", {{"w_values", {0.5, 3}}}}}), ErrorCode::kConfigError);
  EXPECT_EQ(config_error_of({{"segmentation", {{"hop_h", 0}}}}), ErrorCode::kConfigError);
  EXPECT_EQ(config_error_of({{"training", {{"noise_seed", 11}}}, {"evaluation", {{"query_set", {{"noise_seed", 11}}}}}}),
            ErrorCode::kConfigError);
  EXPECT_EQ(config_error_of({{"corpus", {{"clip_len_s", 10}}}}), ErrorCode::kConfigError);
  EXPECT_EQ(config_error_of({{"threads", -1}}), ErrorCode::kConfigError);
  EXPECT_EQ(config_error_of({{"training", {{"learning_rate", -1}}}}), ErrorCode::kConfigError);
  EXPECT_EQ(config_error_of({{"corpus", {{"n_ref", "many"}}}}), ErrorCode::kConfigError);
  EXPECT_THROW(parse_config("{not json"), Error);
  EXPECT_THROW(load_config("/nonexistent/cfg.json"), Error);
}

TEST_F(CliTest, RejectsInvalidConfig) {
  nlohmann::json j = tiny_config(dir_ / "ws");
  j["evaluation"]["k_nn"] = 2;
  const fs::path cfg = write_config(j);
  EXPECT_EQ(run_cli("-c " + cfg.string() + " gen-corpus", dir_).status, 2);
  EXPECT_NE(run_cli("-c " + cfg.string() + " no-such-command", dir_).status, 0);
}

TEST_F(CliTest, TrainBuildQuery) {
  const fs::path ws = dir_ / "ws";
  const fs::path cfg = write_config(tiny_config(ws));
  const std::string c = "-c " + cfg.string() + " ";
  ASSERT_EQ(run_cli(c + "gen-corpus", dir_).status, 0);
  ASSERT_TRUE(fs::exists(ws / "corpus" / "manifest.json"));

  const fs::path ckpt = dir_ / "m.nfpw";
  ASSERT_EQ(run_cli(c + "train --w 0.5 -o " + ckpt.string(), dir_).status, 0);
  EXPECT_TRUE(fs::exists(dir_ / "m.train_log.csv"));
  EXPECT_EQ(run_cli(c + "build-db --w 1 --checkpoint " + ckpt.string(), dir_).status, 2);
  const fs::path db = dir_ / "m.nfpd";
  ASSERT_EQ(run_cli(c + "build-db --w 0.5 --checkpoint " + ckpt.string() + " -o " + db.string(), dir_).status, 0);

  const fs::path wav = ws / "corpus" / "ref_0002.wav";
  ASSERT_TRUE(fs::exists(wav)) << wav;
  const nlohmann::json manifest = nlohmann::json::parse(read_file(ws / "corpus" / "manifest.json"));
  std::string expected_name;
  for (const auto& e : manifest.at("ref")) {
    if (e.at("file") == "ref_0002.wav") expected_name = e.at("name");
  }
  const CliRun q = run_cli(c + "query --db " + db.string() + " --checkpoint " + ckpt.string() + " --wav " +
                               wav.string() + " --l 2 --offset 1 --top 3",
                           dir_);
  ASSERT_EQ(q.status, 0);
  std::istringstream lines(q.out);
  std::string first;
  ASSERT_TRUE(std::getline(lines, first));
  const auto top = nlohmann::json::parse(first);
  EXPECT_EQ(top.at("rank"), 1);
  EXPECT_EQ(top.at("track"), expected_name);
  EXPECT_EQ(top.at("start_index"), 2);
  EXPECT_EQ(top.at("start_time_s"), 1.0);

  EXPECT_EQ(run_cli(c + "query --db " + db.string() + " --checkpoint " + ckpt.string() + " --wav " + wav.string() +
                        " --l 0.25",
                    dir_)
                .status,
            2);

  const CliRun ev = run_cli(c + "eval --db " + db.string() + " --checkpoint " + ckpt.string(), dir_);
  ASSERT_EQ(ev.status, 0);
  EXPECT_TRUE(ev.out.starts_with("W,L,"));
  EXPECT_TRUE(fs::exists(ws / "reports" / "hits_w0.5.csv"));
}

TEST_F(CliTest, AdviseReplay) {
  const fs::path cfg = write_config(tiny_config(dir_ / "ws"));
  const CliRun r = run_cli("-c " + cfg.string() + " advise --mode replay", dir_);
  ASSERT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(r.out);
  ASSERT_EQ(j.size(), 15u);
  EXPECT_EQ(j[0].at("model"), "gpt-5-mini");
  EXPECT_EQ(j[0].at("interval"), nlohmann::json({1.0, 2.0}));
  EXPECT_TRUE(j[0].at("distance_to_empirical").is_null());
  EXPECT_EQ(j[5].at("model"), "gemini-2.5-flash");
  EXPECT_EQ(j[5].at("interval"), nlohmann::json({3.0, 5.0}));
  EXPECT_EQ(read_file(dir_ / "ws" / "reports" / "advice.json"), r.out);

  const CliRun one = run_cli("-c " + cfg.string() + " advise --model claude-sonnet-4.5 --question 4", dir_);
  ASSERT_EQ(one.status, 0);
  const auto k = nlohmann::json::parse(one.out);
  ASSERT_EQ(k.size(), 1u);
  EXPECT_EQ(k[0].at("interval"), nlohmann::json({1.0, 3.0}));
  EXPECT_EQ(run_cli("-c " + cfg.string() + " advise --model nobody", dir_).status, 2);
}

TEST_F(CliTest, SweepIsByteReproducible) {
  const fs::path cfg_a = write_config(tiny_config(dir_ / "a"), "a.json");
  const fs::path cfg_b = write_config(tiny_config(dir_ / "b"), "b.json");
  const CliRun a = run_cli("-c " + cfg_a.string() + " sweep", dir_);
  ASSERT_EQ(a.status, 0);
  const CliRun b = run_cli("-c " + cfg_b.string() + " --threads 0 sweep", dir_);
  ASSERT_EQ(b.status, 0);
  EXPECT_EQ(a.out, b.out);
  for (const char* f : {"hits.csv", "hits.md", "hits.svg", "hits_w0.5.csv", "hits_w1.csv"}) {
    EXPECT_EQ(read_file(dir_ / "a" / "reports" / f), read_file(dir_ / "b" / "reports" / f)) << f;
  }
  EXPECT_EQ(read_file(dir_ / "a" / "checkpoints" / "w1.nfpw"), read_file(dir_ / "b" / "checkpoints" / "w1.nfpw"));
  EXPECT_EQ(read_file(dir_ / "a" / "dbs" / "w0.5.nfpd"), read_file(dir_ / "b" / "dbs" / "w0.5.nfpd"));
  const std::string md = read_file(dir_ / "a" / "reports" / "hits.md");
  EXPECT_NE(md.find("| - |"), std::string::npos) << md;

  const CliRun adv = run_cli("-c " + cfg_a.string() + " advise", dir_);
  ASSERT_EQ(adv.status, 0);
  const auto j = nlohmann::json::parse(adv.out);
  for (const auto& e : j) EXPECT_TRUE(e.at("distance_to_empirical").is_number());

  const CliRun again = run_cli("-c " + cfg_a.string() + " sweep", dir_);
  ASSERT_EQ(again.status, 0);
  EXPECT_EQ(again.out, a.out);
}
