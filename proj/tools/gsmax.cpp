#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "gsmax/app/commands.hpp"
#include "gsmax/app/config.hpp"
#include "gsmax/errors.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitIo = 2;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool holdout = false;
  bool control = false;
  std::optional<std::size_t> workers;
};

gsmax::app::RunConfig resolve(const Flags& f) {
  auto c = f.config.empty() ? gsmax::app::RunConfig{} : gsmax::app::read_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (!f.out.empty()) c.output = f.out;
  if (f.holdout) c.holdout = true;
  if (f.control) c.control = true;
  if (f.workers) c.workers = *f.workers;
  c.validate();
  return c;
}

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "Run configuration file");
  cmd->add_option("--seed", f.seed, "Override the configured seed");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_flag("--holdout", f.holdout, "Associate on one half of the test set, evaluate on the other");
  cmd->add_flag("--control", f.control, "Drop the GSMax layer before group_maxout");
  cmd->add_option("--workers", f.workers, "Threads for eval-mode forward passes")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grouped softmax with a ground state: training, oracle checks and concept discovery"};
  app.require_subcommand(1);
  Flags flags;

  auto* train = app.add_subcommand("train", "Train a network and dump penultimate activations");
  add_common(train, flags);

  auto* discover = app.add_subcommand("discover", "Associate penultimate neurons with sub-classes");
  add_common(discover, flags);
  std::string checkpoint, dump, baseline;
  discover->add_option("--checkpoint", checkpoint, "Checkpoint (default <out>/checkpoint.bin)");
  discover->add_option("--dump", dump, "Activation dump to use instead of a forward pass");
  discover->add_option("--baseline", baseline, "discovery.json to report control_delta against");

  auto* oracle = app.add_subcommand("oracle-check", "GSMax against exact enumeration, gradients against finite differences");
  add_common(oracle, flags);
  std::size_t trials = 100;
  oracle->add_option("--trials", trials, "Random machines to compare")->check(CLI::PositiveNumber);

  auto* visualize = app.add_subcommand("visualize-filters", "Write a layer's filters as a PPM grid");
  add_common(visualize, flags);
  std::size_t layer = 0;
  std::string image;
  visualize->add_option("--checkpoint", checkpoint, "Checkpoint (default <out>/checkpoint.bin)");
  visualize->add_option("--layer", layer, "Layer index");
  visualize->add_option("--image", image, "Output PPM (default <out>/filters.ppm)");

  auto* gen = app.add_subcommand("gen-data", "Write the configured train/test datasets");
  add_common(gen, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (oracle->parsed()) {
      const auto seed = flags.seed.value_or(1);
      const auto report = gsmax::app::cmd_oracle_check(trials, seed);
      std::cout << gsmax::format_oracle_report(report);
      return report.passed() ? kExitOk : kExitInvalid;
    }
    const auto config = resolve(flags);
    if (train->parsed()) {
      const auto r = gsmax::app::cmd_train(config);
      std::cout << "metrics " << r.metrics.string() << "\ncheckpoint " << r.checkpoint.string() << '\n';
      if (!r.activations.empty()) std::cout << "activations " << r.activations.string() << '\n';
    } else if (discover->parsed()) {
      gsmax::app::DiscoverOptions o;
      if (!checkpoint.empty()) o.checkpoint = checkpoint;
      if (!dump.empty()) o.dump = dump;
      if (!baseline.empty()) o.baseline = baseline;
      const auto r = gsmax::app::cmd_discover(config, o);
      std::cout << gsmax::summary_json(r.summary) << '\n';
    } else if (visualize->parsed()) {
      const auto ckpt = checkpoint.empty() ? config.output / gsmax::app::kCheckpointFile : std::filesystem::path(checkpoint);
      const auto out = image.empty() ? config.output / "filters.ppm" : std::filesystem::path(image);
      const auto r = gsmax::app::cmd_visualize_filters(config, ckpt, layer, out);
      std::cout << "image " << r.image.string() << '\n';
      if (r.similarity) std::cout << gsmax::similarity_json(*r.similarity) << '\n';
    } else if (gen->parsed()) {
      gsmax::app::cmd_gen_data(config);
      std::cout << "wrote " << (config.output / "train.bin").string() << " and "
                << (config.output / "test.bin").string() << '\n';
    }
  } catch (const gsmax::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const gsmax::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitOk;
}
