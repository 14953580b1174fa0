#include <benchmark/benchmark.h>

#include <vector>

#include "tempflow/autodiff/network.hpp"
#include "tempflow/autodiff/tape.hpp"
#include "tempflow/branching/branching.hpp"
#include "tempflow/common/rng.hpp"
#include "tempflow/grpo/advantages.hpp"
#include "tempflow/grpo/trainer.hpp"
#include "tempflow/harness/config.hpp"
#include "tempflow/harness/presets.hpp"
#include "tempflow/stochastic/sde.hpp"

using namespace tempflow;

namespace {

struct Setup {
  harness::ExperimentConfig config = harness::default_config();
  ad::Network net = config.make_network();
  ad::ParamSet params;
  stochastic::NoiseSchedule schedule = config.make_schedule();
  rewards::RewardFn reward = rewards::make_reward(config.reward);

  Setup() {
    Rng rng(config.seed);
    params = net.init_params(rng);
  }
};

const Setup& setup() {
  static const Setup s;
  return s;
}

void BM_NetworkForward(benchmark::State& state) {
  const auto& s = setup();
  const auto batch = static_cast<Eigen::Index>(state.range(0));
  Rng rng(1);
  const Matrix x = rng.normal_matrix(batch, 2);
  const std::vector<double> t(static_cast<std::size_t>(batch), 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(s.net.forward(s.params, x, t));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_NetworkForward)->Arg(64)->Arg(512);

void BM_TapeForwardBackward(benchmark::State& state) {
  const auto& s = setup();
  const auto batch = static_cast<Eigen::Index>(state.range(0));
  Rng rng(2);
  const Matrix x = rng.normal_matrix(batch, 2);
  const std::vector<double> t(static_cast<std::size_t>(batch), 0.5);
  for (auto _ : state) {
    ad::Tape tape;
    const auto bound = s.net.bind(tape, s.params);
    const ad::Var v = s.net.forward(tape, bound, x, t);
    tape.backward(ad::mean(ad::square(v)));
    benchmark::DoNotOptimize(s.net.gradients(bound, s.params));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_TapeForwardBackward)->Arg(64)->Arg(512);

void BM_OdeSampleBatch(benchmark::State& state) {
  const auto& s = setup();
  const flow::FlowModel model(s.net, s.params);
  const Matrix x_T = Rng(3).normal_matrix(state.range(0), 2);
  for (auto _ : state) benchmark::DoNotOptimize(flow::ode_sample_batch(model, x_T, s.schedule));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_OdeSampleBatch)->Arg(512);

void BM_SdeSampleBatch(benchmark::State& state) {
  const auto& s = setup();
  const flow::FlowModel model(s.net, s.params);
  Rng rng(4);
  const Matrix x_T = rng.normal_matrix(state.range(0), 2);
  std::vector<Matrix> eps;
  for (std::size_t i = 0; i < s.schedule.num_transitions(); ++i) eps.push_back(rng.normal_matrix(state.range(0), 2));
  for (auto _ : state) benchmark::DoNotOptimize(stochastic::sde_sample_batch(model, x_T, s.schedule, eps));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SdeSampleBatch)->Arg(512);

void BM_BranchGroup(benchmark::State& state) {
  const auto& s = setup();
  const flow::FlowModel model(s.net, s.params);
  const Rng rng(5);
  const auto k = static_cast<std::size_t>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(branching::group_branch_rollouts(model, 0, k, 24, rng, s.schedule, s.reward));
}
BENCHMARK(BM_BranchGroup)->Arg(0)->Arg(7);

void BM_ComputeAdvantages(benchmark::State& state) {
  Rng rng(6);
  std::vector<Matrix> groups;
  for (int g = 0; g < 8; ++g) groups.push_back(rng.normal_matrix(8, 8));
  for (auto _ : state)
    benchmark::DoNotOptimize(grpo::compute_advantages(groups, grpo::AdvantageMode::groupwise_std));
}
BENCHMARK(BM_ComputeAdvantages);

void BM_TrainIteration(benchmark::State& state, const char* preset) {
  const auto& s = setup();
  const auto cfg = harness::expand_preset(s.config, preset);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        grpo::train(s.net, s.params, cfg.grpo, s.schedule, s.reward, {.iterations = 1, .eval_samples = 64}));
}
BENCHMARK_CAPTURE(BM_TrainIteration, tempflow, "tempflow")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_TrainIteration, flow_grpo_fixed, "flow-grpo-fixed")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
