#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "deocc/commands.hpp"
#include "deocc/errors.hpp"

namespace {

deocc::RunConfig resolve(const std::string& config_path, const std::optional<std::uint64_t>& seed,
                         const std::optional<std::string>& out, bool out_is_data_dir) {
  deocc::RunConfig config = config_path.empty() ? deocc::parse_run_config("") : deocc::load_run_config(config_path);
  if (seed) config.set_seed(*seed);
  if (out) {
    if (out_is_data_dir) {
      config.data_dir = *out;
    } else {
      config.out_dir = *out;
    }
  }
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Occlusion-robust embedding distillation on synthetic identities"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "overrides the config seed");
    sub->add_option("--out", out, "output directory");
  };

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset and evaluation pairs");
  add_common(gen);
  auto* train = app.add_subcommand("train", "train the student and write a checkpoint and metrics.csv");
  add_common(train);
  auto* eval = app.add_subcommand("eval", "score verification pairs with a checkpoint");
  add_common(eval);
  std::string checkpoint, pairs;
  eval->add_option("--checkpoint", checkpoint, "checkpoint directory (default: <out_dir>/checkpoint)");
  eval->add_option("--pairs", pairs, "pairs CSV (default: <data_dir>/pairs.csv)");
  auto* grad = app.add_subcommand("gradcheck", "compare analytic gradients with finite differences");
  std::size_t points = 100;
  std::uint64_t grad_seed = 2024;
  grad->add_option("--points", points, "random points per gradient");
  grad->add_option("--seed", grad_seed, "seed for the random points");
  auto* ablate = app.add_subcommand("ablate", "train every loss variant over several seeds");
  add_common(ablate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? deocc::kExitOk : deocc::kExitValidation;
  }

  try {
    if (*gen) {
      deocc::cmd_gen_data(resolve(config_path, seed, out, true), std::cout);
    } else if (*train) {
      deocc::cmd_train(resolve(config_path, seed, out, false), std::cout);
    } else if (*eval) {
      const auto config = resolve(config_path, seed, out, false);
      const std::filesystem::path ckpt = checkpoint.empty() ? config.out_dir / "checkpoint" : std::filesystem::path(checkpoint);
      const std::filesystem::path pair_file = pairs.empty() ? config.data_dir / "pairs.csv" : std::filesystem::path(pairs);
      deocc::cmd_eval(config, ckpt, pair_file, std::cout);
    } else if (*grad) {
      if (!deocc::cmd_gradcheck(std::cout, points, grad_seed)) return deocc::kExitRuntime;
    } else if (*ablate) {
      deocc::cmd_ablate(resolve(config_path, seed, out, false), std::cout);
    }
  } catch (const deocc::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return deocc::kExitValidation;
  } catch (const deocc::DegenerateInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return deocc::kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return deocc::kExitRuntime;
  }
  return deocc::kExitOk;
}
