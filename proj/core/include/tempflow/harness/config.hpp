#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tempflow/autodiff/network.hpp"
#include "tempflow/flowmodel/data_spec.hpp"
#include "tempflow/grpo/trainer.hpp"
#include "tempflow/rewards/rewards.hpp"
#include "tempflow/stochastic/schedule.hpp"

namespace tempflow::harness {

struct NetConfig {
  std::vector<std::size_t> hidden{64, 64};
  ad::Activation activation = ad::Activation::silu;
  std::size_t time_freqs = 4;
  bool operator==(const NetConfig&) const = default;
};

struct PretrainConfig {
  std::size_t steps = 6000;
  std::size_t batch = 256;
  double lr = 5e-4;
  bool cosine_decay = true;
  bool operator==(const PretrainConfig&) const = default;
};

struct RunConfig {
  std::size_t iterations = 300;
  std::size_t checkpoint_every = 0;
  std::string output_dir = "runs/default";
  std::size_t eval_samples = 512;
  bool operator==(const RunConfig&) const = default;
};

struct AnalysisConfig {
  std::size_t conditions = 64;   // variance profile
  std::size_t group_size = 24;
  std::size_t num_groups = 8;    // scale terms, per seed
  std::size_t seeds = 20;
  std::size_t samples = 10000;   // direction check
  double noise_scale = 0.01;
  std::vector<double> shifts{1.0, 3.0};
  std::vector<std::size_t> direction_steps;  // empty: first and last transition
  Vector direction = Vector::Ones(2);  // linear reward for the direction check
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  flow::DataSpec data;
  NetConfig net;
  PretrainConfig pretrain;
  stochastic::ScheduleParams schedule;
  grpo::GrpoConfig grpo;
  rewards::RewardSpec reward;
  RunConfig run;
  AnalysisConfig analysis;

  // Throws ConfigError naming the key of the first invalid field.
  void validate() const;
  ad::Network make_network() const;
  stochastic::NoiseSchedule make_schedule() const;
};

// Parses flat "dotted.key = value" text. '#' starts a comment. Unknown and
// duplicate keys are errors; seed, data.kind and reward.kind are required,
// as are the parameters of the chosen data and reward kinds.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Canonical text form: every key, sorted, 17 significant digits. Parsing it
// yields an identical configuration.
std::string to_text(const ExperimentConfig& config);
std::uint64_t config_hash(const ExperimentConfig& config);

}  // namespace tempflow::harness
