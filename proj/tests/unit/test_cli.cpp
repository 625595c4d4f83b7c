// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fxda/cli/commands.hpp"
#include "fxda/data/store.hpp"
#include "fxda/io/binary.hpp"
#include "testing.hpp"

namespace fxda::cli {
namespace {

namespace fs = std::filesystem;
using testing::random_tensor;

constexpr const char* kSmallIni = R"([grid]
height = 32
width = 64

[obs]
crop_row0 = 8
crop_col0 = 24
crop_height = 16
crop_width = 16

[dataset]
n_train = 6
n_valid = 2
n_test = 3
spinup = 15
gap = 10

[net]
widths = 4, 6, 4

[train]
warmup_steps = 2
total_iterations = 6
checkpoint_every = 3
rollout = 1

[eval]
max_lead = 4
bootstrap = 100

[perturb]
edge = 3
ring_radius = 3
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("fxda_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run_exe(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(FXDA_EXE) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Config, DefaultsRoundTrip) {
  const RunConfig c;
  const std::string text = to_ini(c);
  EXPECT_EQ(to_ini(parse_config(text)), text);
  EXPECT_EQ(to_ini(parse_config("")), text);
}

TEST(Config, ShippedDefaultFileMatchesDefaults) {
  EXPECT_EQ(to_ini(load_config(FXDA_DEFAULT_INI)), to_ini(RunConfig{}));
}

TEST(Config, ValuesRoundTripExactly) {
  RunConfig c = parse_config(kSmallIni);
  c.dataset.forecast.diffusion = 0.1234567890123;
  c.train.adam.weight_decay = 3.3e-7;
  c.dataset.obs.channels[1].peak_pressure = 512.25;
  const RunConfig back = parse_config(to_ini(c));
  EXPECT_EQ(back.dataset.forecast.diffusion, c.dataset.forecast.diffusion);
  EXPECT_EQ(back.train.adam.weight_decay, 3.3e-7);
  EXPECT_EQ(back.dataset.obs.channels[1].peak_pressure, 512.25);
  EXPECT_EQ(back.widths, (std::array<std::size_t, 3>{4, 6, 4}));
  EXPECT_EQ(back.dataset.n_train, 6u);
  EXPECT_EQ(to_ini(back), to_ini(c));
}

TEST(Config, RejectsUnknownAndMalformed) {
  EXPECT_THROW(parse_config("[grid]\nheigth = 32\n"), ConfigError);
  EXPECT_THROW(parse_config("[gird]\nheight = 32\n"), ConfigError);
  EXPECT_THROW(parse_config("height = 32\n"), ConfigError);
  EXPECT_THROW(parse_config("[grid]\nheight = tall\n"), ConfigError);
  EXPECT_THROW(parse_config("[grid]\nheight = 32x\n"), ConfigError);
  EXPECT_THROW(parse_config("[net]\nwidths = 1, 2\n"), ConfigError);
  try {
    parse_config("[train]\nbatchsize = 2\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("batchsize"), std::string::npos);
  }
}

TEST(Config, EveryKeyIsPrinted) {
  const std::string text = to_ini(RunConfig{});
  for (const auto& [section, key] : config_keys()) {
    EXPECT_NE(text.find("\n" + key + " = "), std::string::npos) << section << "." << key;
  }
}

TEST(Binary, GridRoundTripAndChecksum) {
  Rng rng(1);
  auto t = random_tensor(rng, diff::Shape{3, 5, 7}, -300, 300);
  data::quantize(t);
  const fs::path dir = fresh_dir("bin");
  io::write_grid(dir / "a.fxg", t);
  EXPECT_EQ(io::read_grid(dir / "a.fxg"), t);
  std::string bytes = slurp(dir / "a.fxg");
  bytes[bytes.size() / 2] ^= 0x10;
  std::ofstream(dir / "b.fxg", std::ios::binary) << bytes;
  try {
    io::read_grid(dir / "b.fxg");
    FAIL();
  } catch (const io::FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos) << e.what();
  }
  std::ofstream(dir / "c.fxg", std::ios::binary) << "FXDAX";
  EXPECT_THROW(io::read_grid(dir / "c.fxg"), io::FormatError);
  fs::remove_all(dir);
}

TEST(Binary, ObsAndCheckpointRoundTrip) {
  const auto ds = data::generate_dataset(testing::tiny_dataset());
  const fs::path dir = fresh_dir("bin2");
  const auto& so = ds.samples.front().obs;
  io::write_obs(dir / "o.fxo", so);
  EXPECT_EQ(io::read_obs(dir / "o.fxo"), so);

  io::Checkpoint ck;
  Rng rng(2);
  auto w = random_tensor(rng, diff::Shape{4, 2, 3, 3});
  data::quantize(w);
  ck.tensors.emplace_back("layer.w", w);
  ck.tensors.emplace_back("empty", diff::Tensor(diff::Shape{0}));
  ck.meta["kind"] = "assi";
  io::write_checkpoint(dir / "m.fxc", ck);
  EXPECT_EQ(io::read_checkpoint(dir / "m.fxc"), ck);
  std::string bytes = slurp(dir / "m.fxc");
  bytes[bytes.size() - 9] ^= 0x01;
  std::ofstream(dir / "m2.fxc", std::ios::binary) << bytes;
  EXPECT_THROW(io::read_checkpoint(dir / "m2.fxc"), io::FormatError);
  fs::remove_all(dir);
}

class CommandTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(fresh_dir("commands"));
    config_ = new RunConfig(parse_config(kSmallIni));
    config_->dataset_dir = (*root_ / "data").string();
    cmd_generate(*config_, config_->dataset_dir);
  }
  static void TearDownTestSuite() {
    fs::remove_all(*root_);
    delete config_;
    delete root_;
  }
  static fs::path* root_;
  static RunConfig* config_;
};
fs::path* CommandTest::root_ = nullptr;
RunConfig* CommandTest::config_ = nullptr;

TEST_F(CommandTest, GenerateWritesSplitsDeterministically) {
  const fs::path dir = config_->dataset_dir;
  std::size_t bg = 0, ob = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    bg += ext == ".fxg" && e.path().filename() != "truth.fxg";
    ob += ext == ".fxo";
  }
  EXPECT_EQ(bg, 11u);
  EXPECT_EQ(ob, 11u);
  const fs::path again = *root_ / "data_again";
  cmd_generate(*config_, again);
  fs::remove(again / "config.resolved.ini");
  fs::remove(again / "manifest.json");
  fs::copy_file(dir / "manifest.json", again / "manifest.json");
  fs::copy_file(dir / "config.resolved.ini", again / "config.resolved.ini");
  EXPECT_EQ(io::directory_crc32(dir), io::directory_crc32(again));
  const auto ds = data::load_dataset(dir, config_->dataset);
  const auto generated = data::generate_dataset(config_->dataset);
  EXPECT_EQ(ds.samples, generated.samples);
  const std::size_t begin = config_->dataset.split_begin(data::Split::train) - 1;
  for (std::size_t t = begin; t < generated.truth.size(); ++t) {
    EXPECT_EQ(ds.truth.at(t).fields(), generated.truth[t].fields());
  }
  fs::remove_all(again);
}

TEST_F(CommandTest, CorrectorIgnoresObservationFiles) {
  const fs::path stripped = *root_ / "data_noobs";
  fs::copy(config_->dataset_dir, stripped);
  for (const auto& e : fs::directory_iterator(stripped)) {
    if (e.path().extension() == ".fxo") fs::remove(e.path());
  }
  Inputs full;
  Inputs no_obs;
  no_obs.dataset = stripped;
  const auto a = cmd_train(*config_, full, *root_ / "corr_a", net::NetKind::corrector);
  const auto b = cmd_train(*config_, no_obs, *root_ / "corr_b", net::NetKind::corrector);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(slurp(*root_ / "corr_a" / "model.fxc"), slurp(*root_ / "corr_b" / "model.fxc"));
  EXPECT_ANY_THROW(cmd_train(*config_, no_obs, *root_ / "assi_x", net::NetKind::assimilator));

  std::ifstream csv(*root_ / "corr_a" / "loss.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, train::kLossHeader);
  std::size_t step = 0;
  while (std::getline(csv, line)) {
    ++step;
    const auto first = line.find(',');
    const auto second = line.find(',', first + 1);
    EXPECT_EQ(std::stoul(line.substr(0, first)), step);
    EXPECT_EQ(std::stod(line.substr(first + 1, second - first - 1)),
              train::lr_at_step(step, config_->train.schedule));
  }
  EXPECT_EQ(step, 6u);
}

TEST_F(CommandTest, EvaluateWithoutCheckpoints) {
  const fs::path out = *root_ / "eval_ctrl";
  const auto set = cmd_evaluate(*config_, {}, out);
  EXPECT_EQ(set.run(eval::Exp::ctrl).rmse, set.run(eval::Exp::assi).rmse);
  for (const char* f : {"rmse.csv", "normalized_diff.csv", "regional.csv", "summary.json",
                        "manifest.json", "config.resolved.ini"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest.at("inputs").at("dataset").at("crc32").get<std::string>(),
            io::hex32(io::directory_crc32(config_->dataset_dir)));
  EXPECT_EQ(manifest.at("command"), "evaluate");
  EXPECT_NE(manifest.at("rerun").get<std::string>().find("--dataset"), std::string::npos);
  EXPECT_EQ(load_config(out / "config.resolved.ini").dataset.n_test, 3u);
}

TEST_F(CommandTest, TrainedEvaluationAndPerturbation) {
  const fs::path assi_dir = *root_ / "assi";
  cmd_train(*config_, {}, assi_dir, net::NetKind::assimilator);
  Inputs in;
  in.checkpoints = {assi_dir / "model.fxc"};
  const auto set = cmd_evaluate(*config_, in, *root_ / "eval_assi");
  EXPECT_NE(set.run(eval::Exp::assi).rmse, set.run(eval::Exp::ctrl).rmse);
  EXPECT_EQ(set.run(eval::Exp::corr).rmse, set.run(eval::Exp::ctrl).rmse);

  const auto net_report = cmd_perturb(*config_, in, *root_ / "perturb_net");
  EXPECT_FALSE(net_report.rows.empty());

  const fs::path spec = *root_ / "zero.csv";
  const auto ds = data::load_dataset(config_->dataset_dir, config_->dataset);
  const auto* sample = ds.split(data::Split::test).front();
  const auto t = perturb::pick_targets(sample->obs, 3);
  std::ofstream(spec) << "id,row,col,channel,magnitude,window,sky\nz," << t.clear_row << ','
                      << t.clear_col << ",9,0,middle,clear\n";
  in.spec = spec;
  const auto zero = cmd_perturb(*config_, in, *root_ / "perturb_zero");
  ASSERT_EQ(zero.cases.size(), 1u);
  for (const auto& row : zero.rows) EXPECT_EQ(row.value, 0.0);
  std::ifstream csv(*root_ / "perturb_zero" / "report.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "case_id,check_id,value,pass");
}

TEST_F(CommandTest, OracleModes) {
  const auto report = cmd_perturb(*config_, {}, *root_ / "perturb_oracle");
  EXPECT_FALSE(report.degenerate());
  for (const auto& row : report.rows) EXPECT_NE(row.status, perturb::Status::fail) << row.check_id;

  const fs::path out = *root_ / "oracle";
  cmd_oracle(*config_, {}, out);
  std::ifstream csv(out / "comparison.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "channel,rmse_background,rmse_oracle,rmse_network");
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, config_->dataset.grid.channels());

  RunConfig weak = *config_;
  weak.oracle.obs_variance = 1e12;
  cmd_oracle(weak, {}, *root_ / "oracle_weak");
  const auto ds = data::load_dataset(config_->dataset_dir, config_->dataset);
  const auto& bg = ds.split(data::Split::test).front()->background.fields();
  const auto analysis = io::read_grid(*root_ / "oracle_weak" / "oracle_analysis.fxg");
  double worst = 0.0;
  for (std::size_t k = 0; k < bg.numel(); ++k) worst = std::max(worst, std::abs(analysis[k] - bg[k]));
  // The analysis file holds 32-bit values.
  EXPECT_LT(worst, 1e-4);
}

TEST_F(CommandTest, ExecutableExitCodes) {
  const fs::path ini = *root_ / "small.ini";
  write_config(*config_, ini);
  const fs::path log = *root_ / "log.txt";
  EXPECT_EQ(run_exe("evaluate --config " + ini.string() + " --out " + (*root_ / "exe_eval").string(), log), 0)
      << slurp(log);
  EXPECT_NE(run_exe("evaluate --config " + ini.string() + " --out " + (*root_ / "x").string() +
                        " --checkpoint " + (*root_ / "missing.fxc").string(),
                    log),
            0);

  // Without a gap the first validation background starts from the last training state.
  RunConfig leaky = *config_;
  leaky.dataset.gap = 0;
  leaky.dataset_dir = (*root_ / "leaky").string();
  leaky.eval.split = data::Split::valid;
  const fs::path leaky_ini = *root_ / "leaky.ini";
  write_config(leaky, leaky_ini);
  ASSERT_EQ(run_exe("generate --config " + leaky_ini.string() + " --out " + leaky.dataset_dir, log), 0)
      << slurp(log);
  EXPECT_EQ(run_exe("evaluate --config " + leaky_ini.string() + " --out " +
                        (*root_ / "leak_eval").string(),
                    log),
            1);
  EXPECT_NE(slurp(log).find("leakage"), std::string::npos) << slurp(log);

  const fs::path bad_ini = *root_ / "bad.ini";
  std::ofstream(bad_ini) << "[grid]\nheigth = 32\n";
  EXPECT_EQ(run_exe("generate --config " + bad_ini.string() + " --out " + (*root_ / "y").string(), log), 1);
  EXPECT_NE(slurp(log).find("fxda: error:"), std::string::npos);
}

TEST_F(CommandTest, SeedOverrideChangesDataset) {
  const fs::path ini = *root_ / "seed.ini";
  write_config(*config_, ini);
  const fs::path log = *root_ / "log_seed.txt";
  const fs::path a = *root_ / "seed_a", b = *root_ / "seed_b", c = *root_ / "seed_c";
  ASSERT_EQ(run_exe("generate --config " + ini.string() + " --out " + a.string() + " --seed 5", log), 0);
  ASSERT_EQ(run_exe("generate --config " + ini.string() + " --out " + b.string() + " --seed 5", log), 0);
  ASSERT_EQ(run_exe("generate --config " + ini.string() + " --out " + c.string() + " --seed 6", log), 0);
  EXPECT_EQ(slurp(a / "truth.fxg"), slurp(b / "truth.fxg"));
  EXPECT_NE(slurp(a / "truth.fxg"), slurp(c / "truth.fxg"));
  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  EXPECT_EQ(manifest.at("seed").get<std::uint64_t>(), 5u);
  EXPECT_EQ(load_config(a / "config.resolved.ini").dataset.seed, 5u);
}

}  // namespace
}  // namespace fxda::cli
