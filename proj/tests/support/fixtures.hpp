#pragma once

#include <filesystem>

#include "tempflow/autodiff/network.hpp"
#include "tempflow/autodiff/param_set.hpp"
#include "tempflow/flowmodel/flow.hpp"
#include "tempflow/harness/config.hpp"
#include "tempflow/rewards/rewards.hpp"
#include "tempflow/stochastic/schedule.hpp"

namespace tftest {

struct TrainedModel {
  tempflow::harness::ExperimentConfig config;
  tempflow::ad::Network net;
  tempflow::ad::ParamSet params;

  tempflow::flow::FlowModel model() const { return {net, params}; }
  tempflow::stochastic::NoiseSchedule schedule() const { return config.make_schedule(); }
  tempflow::rewards::RewardFn reward() const { return tempflow::rewards::make_reward(config.reward); }
  tempflow::rewards::TargetFn in_target() const;
};

// Pretrained two-Gaussian model of the default experiment. Trained once and
// cached under the test cache directory, keyed by the config hash.
const TrainedModel& two_gaussian_model();

std::filesystem::path cache_dir();
std::filesystem::path two_gaussian_checkpoint();

// Fresh scratch directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace tftest
