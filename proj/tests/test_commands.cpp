#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "gsmax/app/commands.hpp"
#include "gsmax/checkpoint.hpp"
#include "gsmax/errors.hpp"

using namespace gsmax;
using namespace gsmax::app;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("gsmax_cmd_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig small_run(const fs::path& out) {
  auto c = parse_config(
      "[data]\nsubs_per_super = 2 2 2\ndim = 8\nn_per_sub = 20\nn_test_per_sub = 10\n"
      "[network]\nhidden = 8\n[train]\nepochs = 2\nbatch_size = 8\n");
  c.output = out;
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GSMAX_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Train, ZeroEpochsLeavesInitialWeights) {
  const auto dir = scratch("zero");
  auto c = small_run(dir);
  c.train.epochs = 0;
  const auto r = cmd_train(c);
  EXPECT_EQ(slurp(r.metrics), "epoch,train_loss,train_super_acc,test_super_acc,lr\n");
  const auto data = load_datasets(c);
  const auto init = build_network(c, data.train.hierarchy, data.train.sample_shape());
  EXPECT_EQ(read_chunks(r.checkpoint), init.state());
  const auto dump = read_dataset(r.activations);
  EXPECT_EQ(dump.samples.shape(), (Shape{60, 6}));
  EXPECT_EQ(dump.sub_labels, data.test.sub_labels);
}

TEST(Train, OutputsDoNotDependOnWorkerCount) {
  const auto a = scratch("w1"), b = scratch("w4");
  auto c = small_run(a);
  c.workers = 1;
  cmd_train(c);
  c.output = b;
  c.workers = 4;
  cmd_train(c);
  for (const char* f : {kMetricsFile, kCheckpointFile, kActivationFile}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const auto metrics = slurp(a / kMetricsFile);
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 3);
}

TEST(Discover, WritesCsvAndJson) {
  const auto dir = scratch("discover");
  const auto c = small_run(dir);
  cmd_train(c);
  const auto r = cmd_discover(c, {});
  EXPECT_EQ(r.summary.samples, 60u);
  EXPECT_EQ(r.summary.chance, 0.5);
  EXPECT_FALSE(r.summary.control_delta);
  EXPECT_NEAR(r.summary.accuracy, r.association_bound, 1e-15);
  const auto j = nlohmann::json::parse(slurp(dir / kDiscoveryJson));
  EXPECT_EQ(j["accuracy"].get<double>(), r.summary.accuracy);
  EXPECT_EQ(slurp(dir / kDiscoveryCsv).substr(0, 27), "neuron,group,assigned,votes");

  const auto from_dump = discover_on_dump(read_dataset(dir / kActivationFile), false, 1);
  EXPECT_EQ(from_dump.summary.accuracy, r.summary.accuracy);

  auto held = c;
  held.holdout = true;
  held.output = scratch("discover_holdout");
  DiscoverOptions opts;
  opts.checkpoint = dir / kCheckpointFile;
  opts.baseline = dir / kDiscoveryJson;
  const auto h = cmd_discover(held, opts);
  EXPECT_EQ(h.summary.samples, 30u);
  ASSERT_TRUE(h.summary.control_delta);
  EXPECT_NEAR(*h.summary.control_delta, h.summary.accuracy - r.summary.accuracy, 1e-15);
}

TEST(FilterGrid, LayoutAndScaling) {
  Tensor f({4, 3, 3, 3});
  for (std::size_t i = 0; i < 27; ++i) f[i] = static_cast<double>(i);  // filter 0: ramp
  for (std::size_t i = 27; i < 54; ++i) f[i] = 2.0;                  // filter 1: constant
  const auto img = filter_grid(f, GroupSpec::uniform(4, 2));
  EXPECT_EQ(img.width, 9u);
  EXPECT_EQ(img.height, 9u);
  const auto px = [&](std::size_t x, std::size_t y, std::size_t ch) { return img.rgb[(y * img.width + x) * 3 + ch]; };
  EXPECT_EQ(px(0, 0, 0), 0);
  EXPECT_EQ(px(4, 2, 1), 0);  // separator column
  // Filter 0 sits at (1, 1); red of pixel (0, 0) is the minimum, blue of (2, 2) the maximum.
  EXPECT_EQ(px(1, 1, 0), 0);
  EXPECT_EQ(px(3, 3, 2), 255);
  // Green (channel 1) at pixel (1, 0): value 10 of 0..26.
  EXPECT_EQ(px(2, 1, 1), static_cast<std::uint8_t>(std::lround(10.0 / 26.0 * 255.0)));
  // Filter 1 is the second member of group 0: tile origin (1, 5).
  EXPECT_EQ(px(1, 5, 0), 128);
  const auto back = decode_ppm(encode_ppm(img));
  EXPECT_EQ(back.rgb, img.rgb);
}

TEST(Visualize, EdgesConvFilters) {
  const auto dir = scratch("viz");
  auto c = parse_config("[data]\nsource = edges\nn_per_orbit = 4\ntest_per_orbit = 2\n"
                        "[network]\npreset = edges-conv\n[train]\nepochs = 1\n");
  c.output = dir;
  const auto r = cmd_train(c);
  const auto v = cmd_visualize_filters(c, r.checkpoint, 0, dir / "f.ppm");
  const auto img = decode_ppm(read_file_bytes(v.image));
  EXPECT_EQ(img.width, 4u * 3 + 5);
  EXPECT_EQ(img.height, 2u * 3 + 3);
  ASSERT_TRUE(v.similarity);
  EXPECT_TRUE(fs::exists(dir / "similarity.json"));
  EXPECT_THROW(cmd_visualize_filters(c, r.checkpoint, 2, dir / "g.ppm"), ConfigError);
}

TEST(GenData, WritesBothSplits) {
  const auto dir = scratch("gen");
  cmd_gen_data(small_run(dir));
  EXPECT_EQ(read_dataset(dir / "train.bin").size(), 120u);
  EXPECT_EQ(read_dataset(dir / "test.bin").size(), 60u);
}

TEST(OracleCheck, PassesForGsmaxAndCatchesAMutant) {
  OracleCheckOptions opts;
  opts.trials = 30;
  opts.gradients = false;
  EXPECT_TRUE(run_oracle_check(opts).passed());
  // Off-by-one ground state: exp(z) / (2 + sum exp(z)).
  opts.gsmax = [](const Tensor& z, const GroupSpec& spec, const GsmaxParams&) {
    Tensor p(z.shape());
    for (std::size_t n = 0; n < z.dim(0); ++n)
      for (const auto& g : spec.groups()) {
        double s = 2.0;
        for (auto i : g) s += std::exp(z.at(n, i));
        for (auto i : g) p.at(n, i) = std::exp(z.at(n, i)) / s;
      }
    return p;
  };
  const auto r = run_oracle_check(opts);
  EXPECT_FALSE(r.posterior_passed());
  EXPECT_GT(r.max_marginal_dev, 1e-3);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  EXPECT_EQ(run_cli("oracle-check --trials 10"), 0);
  std::ofstream(dir / "bad.cfg") << "[train]\nepochs = many\n";
  EXPECT_EQ(run_cli("train --config " + (dir / "bad.cfg").string()), 1);
  EXPECT_EQ(run_cli("train --config " + (dir / "missing.cfg").string()), 2);
  EXPECT_EQ(run_cli("no-such-command"), 1);
  std::ofstream(dir / "ok.cfg") << "[data]\nsubs_per_super = 2 2\ndim = 4\nn_per_sub = 5\nn_test_per_sub = 5\n"
                                   "[network]\nhidden = 4\n[train]\nepochs = 1\n";
  EXPECT_EQ(run_cli("train --config " + (dir / "ok.cfg").string() + " --out " + (dir / "run").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "run" / kCheckpointFile));
  EXPECT_EQ(run_cli("discover --config " + (dir / "ok.cfg").string() + " --out " + (dir / "run").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "run" / kDiscoveryJson));
}
