#include "tempflow/harness/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "tempflow/analysis/direction_check.hpp"
#include "tempflow/analysis/scale_terms.hpp"
#include "tempflow/autodiff/checkpoint.hpp"
#include "tempflow/branching/branching.hpp"
#include "tempflow/common/csv.hpp"
#include "tempflow/common/errors.hpp"
#include "tempflow/common/stats.hpp"
#include "tempflow/flowmodel/flow.hpp"
#include "tempflow/harness/manifest.hpp"
#include "tempflow/harness/presets.hpp"

namespace tempflow::harness {

namespace fs = std::filesystem;
using analysis::Check;
using analysis::Comparator;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

fs::path write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
  return path;
}

void record_checkpoint(RunManifest& m, const fs::path& dir, const fs::path& ckpt) {
  add_file(m, dir, ckpt);
  add_file(m, dir, ad::sidecar_path(ckpt));
}

double window_mean(const std::vector<double>& xs, std::size_t begin, std::size_t end) {
  if (begin >= end) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(xs.begin() + static_cast<std::ptrdiff_t>(begin), xs.begin() + static_cast<std::ptrdiff_t>(end), 0.0) /
         static_cast<double>(end - begin);
}

ad::ParamSet load_for(const ExperimentConfig& config, const fs::path& checkpoint) {
  if (!fs::exists(checkpoint)) throw IoError("checkpoint not found: " + checkpoint.string());
  return ad::load_checkpoint(checkpoint, config.make_network());
}

void write_checks(const fs::path& path, const std::vector<Check>& checks) { analysis::write_summary(path, checks); }

std::vector<Check> variance_checks(const branching::StdProfile& profile) {
  const std::size_t T = profile.reward_std.size();
  const std::size_t third = std::max<std::size_t>(1, (T + 1) / 3);
  const double early = window_mean(profile.reward_std, 0, third);
  const double late = window_mean(profile.reward_std, T - third, T);
  std::vector<double> steps(T);
  std::iota(steps.begin(), steps.end(), 0.0);
  std::vector<Check> checks;
  checks.push_back({"early_over_late_std_ratio", late > 0.0 ? early / late : std::numeric_limits<double>::infinity(),
                    2.0, Comparator::greater_equal});
  checks.push_back({"std_vs_step_correlation", stats::pearson(profile.reward_std, steps), 0.0, Comparator::less});
  return checks;
}

std::vector<Check> run_variance_profile(const ExperimentConfig& config, const flow::FlowModel& model,
                                        const fs::path& out, RunManifest& manifest, bool with_noise_report) {
  const auto schedule = config.make_schedule();
  const auto reward = rewards::make_reward(config.reward);
  const Rng rng = Rng(config.seed).derive("variance_profile");
  const auto profile = branching::reward_std_profile(model, config.analysis.conditions, config.analysis.group_size,
                                                     schedule, reward, rng);
  std::vector<Check> checks;
  if (!with_noise_report) {
    const auto path = out / "variance_profile.csv";
    branching::write_profile_csv(path, profile);
    add_file(manifest, out, path);
    checks = variance_checks(profile);
  } else {
    const auto report = analysis::std_vs_noise_report(profile.reward_std, schedule);
    const auto path = out / "std_vs_noise.csv";
    analysis::write_std_noise_csv(path, report);
    add_file(manifest, out, path);
    checks.push_back({"std_vs_noise_correlation", report.correlation, 0.8, Comparator::greater});
  }
  return checks;
}

std::vector<Check> run_scale_terms(const ExperimentConfig& config, const ad::Network& net, const ad::ParamSet& params,
                                   const fs::path& out, RunManifest& manifest) {
  const auto reward = rewards::make_reward(config.reward);
  std::vector<Check> checks;
  for (double shift : config.analysis.shifts) {
    auto params_sched = config.schedule;
    params_sched.shift = shift;
    const stochastic::NoiseSchedule schedule(params_sched);
    auto profile = analysis::scale_profile(schedule);
    const std::size_t T = schedule.num_transitions();
    profile.empirical_norm.assign(T, 0.0);
    profile.empirical_weighted_norm.assign(T, 0.0);
    analysis::GradientScaleOptions opt{config.analysis.group_size, config.analysis.num_groups, false};
    for (std::size_t s = 0; s < config.analysis.seeds; ++s) {
      const Rng rng = Rng(config.seed).derive("scale_terms", s);
      opt.reweighted = false;
      const auto u = analysis::empirical_gradient_profile(net, params, reward, schedule, opt, rng);
      opt.reweighted = true;
      const auto w = analysis::empirical_gradient_profile(net, params, reward, schedule, opt, rng);
      for (std::size_t k = 0; k < T; ++k) {
        profile.empirical_norm[k] += u[k] / static_cast<double>(config.analysis.seeds);
        profile.empirical_weighted_norm[k] += w[k] / static_cast<double>(config.analysis.seeds);
      }
    }
    const auto path = out / ("scale_terms_shift_" + format_shortest(shift) + ".csv");
    analysis::write_scale_profile_csv(path, profile);
    add_file(manifest, out, path);
    if (shift == 1.0) {
      const auto [lo, hi] = std::minmax_element(profile.reweighted_scale.begin(), profile.reweighted_scale.end());
      checks.push_back({"reweighted_scale_spread_shift_1", *hi - *lo, 0.0, Comparator::less_equal});
      checks.push_back({"raw_scale_vs_uniform_norm_correlation",
                        stats::pearson(profile.empirical_norm, profile.raw_scale), 0.9, Comparator::greater});
      checks.push_back({"weighted_norm_coefficient_of_variation",
                        stats::coefficient_of_variation(profile.empirical_weighted_norm), 0.15, Comparator::less});
    }
  }
  return checks;
}

std::vector<Check> run_direction_check(const ExperimentConfig& config, const flow::FlowModel& model,
                                       const fs::path& out, RunManifest& manifest) {
  const auto schedule = config.make_schedule();
  rewards::RewardSpec spec;
  spec.kind = rewards::RewardKind::linear;
  spec.direction = config.analysis.direction;
  const auto reward = rewards::make_reward(spec);
  std::vector<std::size_t> steps = config.analysis.direction_steps;
  if (steps.empty()) steps = {0, schedule.num_transitions() - 1};

  const Rng root = Rng(config.seed).derive("direction_check");
  const Vector x_T = branching::condition_noise(root, 0, model.state_dim());
  analysis::DirectionOptions opt;
  opt.samples = config.analysis.samples;
  opt.noise_scale = config.analysis.noise_scale;

  const auto path = out / "direction_check.csv";
  std::vector<std::string> header{"step_index", "t", "norm", "cosine"};
  for (std::size_t i = 0; i < model.state_dim(); ++i) {
    header.push_back("g" + std::to_string(i));
    header.push_back("mc" + std::to_string(i));
  }
  CsvWriter csv(path, header);
  std::vector<Check> checks;
  std::vector<double> norms;
  for (std::size_t k : steps) {
    Matrix x = x_T.transpose();
    for (std::size_t i = 0; i < k; ++i) x = flow::ode_step(model, x, schedule.t(i), schedule.dt(i));
    Rng rng = root.derive("eps-step", k);
    const auto dc = analysis::direction_check(model, reward, x.row(0).transpose(), k, schedule, opt, rng);
    std::vector<double> row{schedule.t(k), dc.norm, dc.cosine};
    for (Eigen::Index i = 0; i < dc.g.size(); ++i) {
      row.push_back(dc.g[i]);
      row.push_back(dc.mc_estimate[i]);
    }
    csv.row(static_cast<long long>(k), row);
    const std::string tag = "_step_" + std::to_string(k);
    checks.push_back({"norm" + tag, dc.norm, 0.9, Comparator::greater_equal});
    checks.push_back({"norm" + tag, dc.norm, 1.1, Comparator::less_equal});
    checks.push_back({"cosine" + tag, dc.cosine, 0.95, Comparator::greater});
    norms.push_back(dc.norm);
  }
  const auto [lo, hi] = std::minmax_element(norms.begin(), norms.end());
  checks.push_back({"norm_spread_across_steps", *hi - *lo, 0.15, Comparator::less});
  add_file(manifest, out, path);
  return checks;
}

}  // namespace

PretrainSummary cmd_pretrain(const ExperimentConfig& config, const fs::path& out_dir) {
  config.validate();
  ensure_dir(out_dir);
  RunManifest manifest = begin_manifest("pretrain", config);
  const ad::Network net = config.make_network();
  const flow::PretrainOptions opt{.steps = config.pretrain.steps,
                                  .batch = config.pretrain.batch,
                                  .lr = config.pretrain.lr,
                                  .cosine_decay = config.pretrain.cosine_decay,
                                  .seed = config.seed};
  const flow::PretrainResult res = flow::cfm_pretrain(net, config.data, opt);

  PretrainSummary summary;
  summary.checkpoint = out_dir / "model.ckpt";
  ad::save_checkpoint(summary.checkpoint, net, res.params);
  record_checkpoint(manifest, out_dir, summary.checkpoint);

  const auto loss_path = out_dir / "loss.csv";
  {
    CsvWriter csv(loss_path, {"step", "loss"});
    for (std::size_t i = 0; i < res.losses.size(); ++i) csv.row(static_cast<long long>(i), {res.losses[i]});
  }
  add_file(manifest, out_dir, loss_path);
  add_file(manifest, out_dir, write_text(out_dir / "config.txt", to_text(config)));
  const std::size_t n = res.losses.size();
  const std::size_t w = std::min<std::size_t>(100, n);
  summary.first_loss_avg = window_mean(res.losses, 0, w);
  summary.last_loss_avg = window_mean(res.losses, n - w, n);
  write_manifest(out_dir, manifest);
  return summary;
}

TrainSummary cmd_train(const ExperimentConfig& config, const fs::path& checkpoint, const fs::path& out_dir) {
  config.validate();
  const ad::Network net = config.make_network();
  const ad::ParamSet initial = load_for(config, checkpoint);
  ensure_dir(out_dir);
  RunManifest manifest = begin_manifest("train", config);
  const auto schedule = config.make_schedule();
  const auto reward = rewards::make_reward(config.reward);

  grpo::TrainOptions opt;
  opt.iterations = config.run.iterations;
  opt.seed = config.seed;
  opt.eval_samples = config.run.eval_samples;
  opt.in_target = rewards::target_indicator(config.reward, config.data.mode_centers());
  opt.checkpoint_every = config.run.checkpoint_every;
  opt.checkpoint_dir = out_dir / "checkpoints";
  const grpo::TrainResult res = grpo::train(net, initial, config.grpo, schedule, reward, opt);

  const auto metrics_path = out_dir / "metrics.csv";
  grpo::write_metrics_csv(metrics_path, res.metrics);
  add_file(manifest, out_dir, metrics_path);

  const auto step_path = out_dir / "step_std.csv";
  {
    std::size_t cols = res.metrics.empty() ? 0 : res.metrics.front().step_reward_std.size();
    std::vector<std::string> header{"iter"};
    for (std::size_t j = 0; j < cols; ++j) header.push_back("cohort_" + std::to_string(j));
    CsvWriter csv(step_path, header);
    for (const auto& m : res.metrics) csv.row(static_cast<long long>(m.iter), m.step_reward_std);
  }
  add_file(manifest, out_dir, step_path);

  for (const auto& ckpt : res.checkpoints) record_checkpoint(manifest, out_dir, ckpt);
  const auto final_path = out_dir / "final.ckpt";
  ad::save_checkpoint(final_path, net, res.params);
  record_checkpoint(manifest, out_dir, final_path);

  TrainSummary summary{res.initial, res.final_eval, res.metrics.size()};
  nlohmann::json doc;
  doc["iterations"] = summary.iterations;
  doc["before"] = {{"mean_reward", summary.before.mean_reward}, {"mode_occupancy", summary.before.mode_occupancy}};
  doc["after"] = {{"mean_reward", summary.after.mean_reward}, {"mode_occupancy", summary.after.mode_occupancy}};
  doc["weight_hash"] = res.metrics.empty() ? 0 : res.metrics.front().weight_hash;
  add_file(manifest, out_dir, write_text(out_dir / "summary.json", doc.dump(2) + "\n"));
  add_file(manifest, out_dir, write_text(out_dir / "config.txt", to_text(config)));
  write_manifest(out_dir, manifest);
  return summary;
}

const std::vector<std::string>& analysis_names() {
  static const std::vector<std::string> names{"variance_profile", "scale_terms", "direction_check", "std_vs_noise"};
  return names;
}

std::vector<Check> cmd_analyze(const ExperimentConfig& config, const fs::path& checkpoint, const std::string& which,
                               const fs::path& out_dir) {
  const auto& names = analysis_names();
  if (std::find(names.begin(), names.end(), which) == names.end())
    throw ConfigError("unknown analysis '" + which + "'", "analysis");
  config.validate();
  const ad::Network net = config.make_network();
  const ad::ParamSet params = load_for(config, checkpoint);
  ensure_dir(out_dir);
  RunManifest manifest = begin_manifest("analyze " + which, config);
  const flow::FlowModel model(net, params);

  std::vector<Check> checks;
  if (which == "variance_profile")
    checks = run_variance_profile(config, model, out_dir, manifest, false);
  else if (which == "std_vs_noise")
    checks = run_variance_profile(config, model, out_dir, manifest, true);
  else if (which == "scale_terms")
    checks = run_scale_terms(config, net, params, out_dir, manifest);
  else
    checks = run_direction_check(config, model, out_dir, manifest);

  const auto summary = out_dir / (which + "_summary.json");
  write_checks(summary, checks);
  add_file(manifest, out_dir, summary);
  add_file(manifest, out_dir, write_text(out_dir / "config.txt", to_text(config)));
  write_manifest(out_dir, manifest);
  return checks;
}

std::string cmd_presets(const ExperimentConfig& base) {
  std::string out;
  for (const std::string& name : preset_names()) {
    out += "# preset: " + name + "\n";
    out += to_text(expand_preset(base, name));
    out += "\n";
  }
  return out;
}

}  // namespace tempflow::harness
