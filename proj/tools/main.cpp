#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "tempflow/common/errors.hpp"
#include "tempflow/harness/commands.hpp"
#include "tempflow/harness/config.hpp"
#include "tempflow/harness/presets.hpp"

namespace fs = std::filesystem;
using namespace tempflow;

namespace {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfig = 2, kNumeric = 3, kIo = 4 };

struct Flags {
  std::string config;
  std::string checkpoint;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string preset;
  std::string analysis;
};

harness::ExperimentConfig resolve(const Flags& f) {
  harness::ExperimentConfig cfg = f.config.empty() ? harness::default_config() : harness::load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (!f.preset.empty()) harness::apply_preset(cfg.grpo, f.preset);
  cfg.validate();
  return cfg;
}

fs::path out_dir(const Flags& f, const harness::ExperimentConfig& cfg) {
  return f.out.empty() ? fs::path(cfg.run.output_dir) : fs::path(f.out);
}

fs::path require_checkpoint(const Flags& f) {
  if (f.checkpoint.empty()) throw ConfigError("--checkpoint is required", "checkpoint");
  return f.checkpoint;
}

void print_checks(const std::vector<analysis::Check>& checks) {
  for (const auto& c : checks)
    std::cout << (c.passed() ? "PASS " : "FAIL ") << c.name << " = " << c.value << " (" << analysis::to_string(c.comparator)
              << " " << c.threshold << ")\n";
}

int run(int argc, char** argv) {
  CLI::App app{"TempFlow-GRPO experiments on toy flow-matching models"};
  app.require_subcommand(1);
  Flags flags;
  const std::vector<std::string> presets = harness::preset_names();

  auto add_common = [&](CLI::App* sub, bool checkpoint) {
    sub->add_option("--config", flags.config, "experiment config (dotted key = value)");
    sub->add_option("--out", flags.out, "output directory (default: run.output_dir)");
    sub->add_option("--seed", flags.seed, "overrides the config seed");
    sub->add_option("--preset", flags.preset, "training variant")->check(CLI::IsMember(presets));
    if (checkpoint) sub->add_option("--checkpoint", flags.checkpoint, "pretrained model checkpoint");
  };

  auto* pretrain = app.add_subcommand("pretrain", "flow-matching pretraining on the configured data");
  add_common(pretrain, false);
  auto* train = app.add_subcommand("train", "GRPO fine-tuning from a checkpoint");
  add_common(train, true);
  auto* analyze = app.add_subcommand("analyze", "variance, scale-term and direction analyses");
  add_common(analyze, true);
  analyze->add_option("which", flags.analysis, "analysis to run")
      ->required()
      ->check(CLI::IsMember(harness::analysis_names()));
  auto* presets_cmd = app.add_subcommand("presets", "print the expanded preset configurations");
  presets_cmd->add_option("--config", flags.config, "base config");
  presets_cmd->add_option("--seed", flags.seed, "overrides the config seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  if (pretrain->parsed()) {
    const auto cfg = resolve(flags);
    const auto dir = out_dir(flags, cfg);
    const auto s = harness::cmd_pretrain(cfg, dir);
    std::cout << "checkpoint " << s.checkpoint.string() << "\n"
              << "loss first-100 mean " << s.first_loss_avg << ", last-100 mean " << s.last_loss_avg << "\n";
  } else if (train->parsed()) {
    const auto cfg = resolve(flags);
    const auto s = harness::cmd_train(cfg, require_checkpoint(flags), out_dir(flags, cfg));
    std::cout << "iterations " << s.iterations << "\n"
              << "mean reward " << s.before.mean_reward << " -> " << s.after.mean_reward << "\n"
              << "mode occupancy " << s.before.mode_occupancy << " -> " << s.after.mode_occupancy << "\n";
  } else if (analyze->parsed()) {
    const auto cfg = resolve(flags);
    print_checks(harness::cmd_analyze(cfg, require_checkpoint(flags), flags.analysis, out_dir(flags, cfg)));
  } else if (presets_cmd->parsed()) {
    std::cout << harness::cmd_presets(resolve(flags));
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error" << (e.key().empty() ? "" : " [" + e.key() + "]") << ": " << e.what() << "\n";
    return kConfig;
  } catch (const ContractError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kConfig;
  } catch (const DomainError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kConfig;
  } catch (const TrainingError& e) {
    std::cerr << "numeric failure at iteration " << e.index() << ": " << e.what() << "\n";
    return kNumeric;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure (" << e.where() << "): " << e.what() << "\n";
    return kNumeric;
  } catch (const DegenerateError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}
