#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tempflow/analysis/reports.hpp"
#include "tempflow/grpo/trainer.hpp"
#include "tempflow/harness/config.hpp"

namespace tempflow::harness {

struct PretrainSummary {
  std::filesystem::path checkpoint;
  double first_loss_avg = 0.0;  // mean over the first 100 steps (or all, if fewer)
  double last_loss_avg = 0.0;   // mean over the last 100 steps
};

// Writes model.ckpt (+ sidecar), loss.csv (step, loss), config.txt and
// manifest.json into out_dir.
PretrainSummary cmd_pretrain(const ExperimentConfig& config, const std::filesystem::path& out_dir);

struct TrainSummary {
  grpo::EvalSnapshot before;
  grpo::EvalSnapshot after;
  std::size_t iterations = 0;
};

// Loads `checkpoint` (LoadError if it does not match config.net), runs GRPO
// and writes metrics.csv, step_std.csv, final.ckpt, summary.json, config.txt,
// periodic checkpoints under checkpoints/ and manifest.json.
TrainSummary cmd_train(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                       const std::filesystem::path& out_dir);

const std::vector<std::string>& analysis_names();

// which: variance_profile, scale_terms, direction_check, std_vs_noise.
// Writes the CSV reports, <which>_summary.json and manifest.json; returns the
// checks. Unknown names throw ConfigError (key "analysis").
std::vector<analysis::Check> cmd_analyze(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                                         const std::string& which, const std::filesystem::path& out_dir);

// Canonical text of the four expanded presets, each headed by "# preset: <name>".
std::string cmd_presets(const ExperimentConfig& base);

}  // namespace tempflow::harness
