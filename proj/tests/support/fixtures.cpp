#include "fixtures.hpp"

#include <cstdio>
#include <string>
#include <system_error>
#include <unistd.h>

#include "tempflow/autodiff/checkpoint.hpp"
#include "tempflow/harness/presets.hpp"

namespace fs = std::filesystem;
using namespace tempflow;

namespace tftest {

namespace {

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

TrainedModel load_or_train() {
  const harness::ExperimentConfig cfg = harness::default_config();
  const ad::Network net = cfg.make_network();
  const fs::path path = two_gaussian_checkpoint();
  if (fs::exists(path)) return {cfg, net, ad::load_checkpoint(path, net)};

  const flow::PretrainOptions opt{.steps = cfg.pretrain.steps,
                                  .batch = cfg.pretrain.batch,
                                  .lr = cfg.pretrain.lr,
                                  .cosine_decay = cfg.pretrain.cosine_decay,
                                  .seed = cfg.seed};
  flow::PretrainResult res = flow::cfm_pretrain(net, cfg.data, opt);
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp" + std::to_string(::getpid());
  ad::save_checkpoint(tmp, net, res.params);
  std::error_code ec;
  fs::rename(ad::sidecar_path(tmp), ad::sidecar_path(path), ec);
  fs::rename(tmp, path, ec);
  return {cfg, net, std::move(res.params)};
}

}  // namespace

rewards::TargetFn TrainedModel::in_target() const {
  return rewards::target_indicator(config.reward, config.data.mode_centers());
}

fs::path cache_dir() {
#ifdef TEMPFLOW_TEST_CACHE_DIR
  return TEMPFLOW_TEST_CACHE_DIR;
#else
  return fs::temp_directory_path() / "tempflow-test-cache";
#endif
}

fs::path two_gaussian_checkpoint() {
  return cache_dir() / ("two_gaussians_" + hex(harness::config_hash(harness::default_config())) + ".ckpt");
}

const TrainedModel& two_gaussian_model() {
  static const TrainedModel model = load_or_train();
  return model;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("tempflow-test-" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace tftest
