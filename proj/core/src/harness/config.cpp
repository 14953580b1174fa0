#include "tempflow/harness/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "tempflow/common/csv.hpp"
#include "tempflow/common/errors.hpp"
#include "tempflow/common/rng.hpp"

namespace tempflow::harness {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string& text, const std::string& key) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end || text.empty()) throw ConfigError("expected a number, got '" + text + "'", key);
  return v;
}

std::uint64_t parse_uint(const std::string& text, const std::string& key) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end || text.empty())
    throw ConfigError("expected a non-negative integer, got '" + text + "'", key);
  return v;
}

bool parse_bool(const std::string& text, const std::string& key) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigError("expected true or false, got '" + text + "'", key);
}

std::vector<double> parse_doubles(const std::string& text, const std::string& key) {
  std::vector<double> out;
  if (text.empty()) return out;
  for (const std::string& item : split(text, ',')) out.push_back(parse_double(item, key));
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& text, const std::string& key) {
  std::vector<std::size_t> out;
  if (text.empty()) return out;
  for (const std::string& item : split(text, ',')) out.push_back(parse_uint(item, key));
  return out;
}

Vector to_vector(const std::vector<double>& v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

std::vector<Vector> parse_rows(const std::string& text, const std::string& key) {
  std::vector<Vector> rows;
  if (text.empty()) return rows;
  for (const std::string& row : split(text, ';')) rows.push_back(to_vector(parse_doubles(row, key)));
  return rows;
}

Matrix parse_matrix(const std::string& text, const std::string& key) {
  const auto rows = parse_rows(text, key);
  if (rows.empty()) throw ConfigError("expected a matrix", key);
  Matrix m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) throw ConfigError("matrix rows differ in length", key);
    m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return m;
}

std::string join(const Vector& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_shortest(v[i]);
  return out;
}

std::string join(const std::vector<double>& v) { return join(to_vector(v)); }

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string join_rows(const Matrix& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) out += (i ? "; " : "") + join(Vector(m.row(i).transpose()));
  return out;
}

// Key/value store that tracks which keys were consumed.
class Entries {
 public:
  void add(std::string key, std::string value, std::size_t line) {
    if (!values_.emplace(key, value).second)
      throw ConfigError("duplicate key (line " + std::to_string(line) + ")", key);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string take(const std::string& key) {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing required key", key);
    std::string v = it->second;
    values_.erase(it);
    return v;
  }

  template <class T, class Parse>
  void optional(const std::string& key, T& target, Parse parse) {
    if (has(key)) target = parse(take(key), key);
  }

  void reject_leftovers() const {
    if (!values_.empty()) throw ConfigError("unknown key", values_.begin()->first);
  }

 private:
  std::map<std::string, std::string> values_;
};

std::string as_string(const std::string& text, const std::string&) { return text; }
std::size_t as_size(const std::string& text, const std::string& key) { return parse_uint(text, key); }

void read_data(Entries& e, flow::DataSpec& data) {
  data.kind = flow::data_kind_from_string(e.take("data.kind"));
  e.optional("data.dim", data.dim, as_size);
  switch (data.kind) {
    case flow::DataKind::gaussian_mixture: {
      const auto means = parse_rows(e.take("data.means"), "data.means");
      if (means.empty()) throw ConfigError("mixture needs at least one component", "data.means");
      std::vector<double> stds{0.3};
      e.optional("data.stds", stds, parse_doubles);
      std::vector<double> weights(means.size(), 1.0 / static_cast<double>(means.size()));
      e.optional("data.weights", weights, parse_doubles);
      if (stds.size() == 1) stds.assign(means.size(), stds.front());
      if (stds.size() != means.size()) throw ConfigError("need one std per component", "data.stds");
      if (weights.size() != means.size()) throw ConfigError("need one weight per component", "data.weights");
      data.components.clear();
      for (std::size_t i = 0; i < means.size(); ++i) {
        if (!(stds[i] > 0.0)) throw ConfigError("component std must be positive", "data.stds");
        const auto d = means[i].size();
        data.components.push_back({weights[i], means[i], stds[i] * stds[i] * Matrix::Identity(d, d)});
      }
      break;
    }
    case flow::DataKind::checkerboard:
      e.optional("data.grid_size", data.grid_size, as_size);
      e.optional("data.cell_size", data.cell_size, parse_double);
      break;
    case flow::DataKind::ring:
      e.optional("data.ring_modes", data.ring_modes, as_size);
      e.optional("data.ring_radius", data.ring_radius, parse_double);
      e.optional("data.ring_std", data.ring_std, parse_double);
      break;
  }
}

void read_reward(Entries& e, rewards::RewardSpec& reward) {
  reward.kind = rewards::reward_kind_from_string(e.take("reward.kind"));
  switch (reward.kind) {
    case rewards::RewardKind::mode_density:
      reward.mean = to_vector(parse_doubles(e.take("reward.mean"), "reward.mean"));
      reward.cov = parse_matrix(e.take("reward.cov"), "reward.cov");
      break;
    case rewards::RewardKind::linear:
      reward.direction = to_vector(parse_doubles(e.take("reward.direction"), "reward.direction"));
      break;
    case rewards::RewardKind::region:
      reward.lo = to_vector(parse_doubles(e.take("reward.lo"), "reward.lo"));
      reward.hi = to_vector(parse_doubles(e.take("reward.hi"), "reward.hi"));
      e.optional("reward.width", reward.width, parse_double);
      break;
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  data.validate();
  if (net.hidden.empty()) throw ConfigError("need at least one hidden layer", "net.hidden");
  for (std::size_t h : net.hidden)
    if (h == 0) throw ConfigError("hidden layer sizes must be positive", "net.hidden");
  if (net.time_freqs < 1) throw ConfigError("need at least one time frequency", "net.time_freqs");
  if (pretrain.batch < 1) throw ConfigError("must be >= 1", "pretrain.batch");
  if (!(pretrain.lr > 0.0)) throw ConfigError("must be positive", "pretrain.lr");
  const stochastic::NoiseSchedule sched = make_schedule();
  grpo.validate(sched.num_transitions());
  reward.validate();
  const auto reward_dim = reward.kind == rewards::RewardKind::mode_density ? reward.mean.size()
                          : reward.kind == rewards::RewardKind::linear   ? reward.direction.size()
                                                                         : reward.lo.size();
  if (static_cast<std::size_t>(reward_dim) != data.dim)
    throw ConfigError("reward dimension does not match data.dim", "reward.kind");
  if (run.eval_samples < 1) throw ConfigError("must be >= 1", "run.eval_samples");
  if (run.output_dir.empty()) throw ConfigError("must not be empty", "run.output_dir");
  if (analysis.conditions < 1) throw ConfigError("must be >= 1", "analysis.conditions");
  if (analysis.group_size < 8) throw ConfigError("must be >= 8", "analysis.group_size");
  if (analysis.num_groups < 1) throw ConfigError("must be >= 1", "analysis.num_groups");
  if (analysis.seeds < 1) throw ConfigError("must be >= 1", "analysis.seeds");
  if (analysis.samples < 1000) throw ConfigError("must be >= 1000", "analysis.samples");
  if (!(analysis.noise_scale > 0.0)) throw ConfigError("must be positive", "analysis.noise_scale");
  if (analysis.shifts.empty()) throw ConfigError("need at least one shift", "analysis.shifts");
  for (double s : analysis.shifts)
    if (!(s >= 1.0)) throw ConfigError("shifts must be >= 1", "analysis.shifts");
  for (std::size_t k : analysis.direction_steps)
    if (k >= sched.num_transitions()) throw ConfigError("step index outside the grid", "analysis.direction_steps");
  if (static_cast<std::size_t>(analysis.direction.size()) != data.dim || !(analysis.direction.norm() > 0.0))
    throw ConfigError("must be a nonzero vector of dimension data.dim", "analysis.direction");
}

ad::Network ExperimentConfig::make_network() const {
  return ad::Network(data.dim, net.hidden, net.activation, net.time_freqs);
}

stochastic::NoiseSchedule ExperimentConfig::make_schedule() const { return stochastic::NoiseSchedule(schedule); }

ExperimentConfig parse_config(std::string_view text) {
  Entries e;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected 'key = value' on line " + std::to_string(line_no));
    const std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw ConfigError("empty key on line " + std::to_string(line_no));
    e.add(key, trim(std::string_view(body).substr(eq + 1)), line_no);
  }

  ExperimentConfig c;
  c.seed = parse_uint(e.take("seed"), "seed");
  read_data(e, c.data);
  read_reward(e, c.reward);

  e.optional("net.hidden", c.net.hidden, parse_sizes);
  if (e.has("net.activation")) {
    try {
      c.net.activation = ad::activation_from_string(e.take("net.activation"));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& err) {
      throw ConfigError(err.what(), "net.activation");
    }
  }
  e.optional("net.time_freqs", c.net.time_freqs, as_size);

  e.optional("pretrain.steps", c.pretrain.steps, as_size);
  e.optional("pretrain.batch", c.pretrain.batch, as_size);
  e.optional("pretrain.lr", c.pretrain.lr, parse_double);
  e.optional("pretrain.cosine_decay", c.pretrain.cosine_decay, parse_bool);

  e.optional("schedule.num_steps", c.schedule.num_steps, as_size);
  e.optional("schedule.a", c.schedule.a, parse_double);
  e.optional("schedule.shift", c.schedule.shift, parse_double);
  e.optional("schedule.delta_clamp", c.schedule.delta_clamp, parse_double);

  auto& g = c.grpo;
  e.optional("grpo.group_size", g.group_size, as_size);
  e.optional("grpo.num_groups", g.num_groups, as_size);
  e.optional("grpo.clip_eps", g.clip_eps, parse_double);
  e.optional("grpo.beta", g.beta, parse_double);
  if (e.has("grpo.adv_mode")) g.adv_mode = grpo::advantage_mode_from_string(e.take("grpo.adv_mode"));
  if (e.has("grpo.weight_mode")) g.weight_mode = grpo::weight_mode_from_string(e.take("grpo.weight_mode"));
  if (e.has("grpo.branch_mode")) g.branch_mode = grpo::branch_training_from_string(e.take("grpo.branch_mode"));
  e.optional("grpo.step_subset", g.step_subset, parse_sizes);
  e.optional("grpo.early_bias", g.early_bias, parse_bool);
  e.optional("grpo.lr", g.lr, parse_double);
  e.optional("grpo.inner_epochs", g.inner_epochs, as_size);
  e.optional("grpo.std_guard", g.std_guard, parse_double);

  e.optional("run.iterations", c.run.iterations, as_size);
  e.optional("run.checkpoint_every", c.run.checkpoint_every, as_size);
  e.optional("run.output_dir", c.run.output_dir, as_string);
  e.optional("run.eval_samples", c.run.eval_samples, as_size);

  auto& a = c.analysis;
  e.optional("analysis.conditions", a.conditions, as_size);
  e.optional("analysis.group_size", a.group_size, as_size);
  e.optional("analysis.num_groups", a.num_groups, as_size);
  e.optional("analysis.seeds", a.seeds, as_size);
  e.optional("analysis.samples", a.samples, as_size);
  e.optional("analysis.noise_scale", a.noise_scale, parse_double);
  e.optional("analysis.shifts", a.shifts, parse_doubles);
  e.optional("analysis.direction_steps", a.direction_steps, parse_sizes);
  if (e.has("analysis.direction"))
    a.direction = to_vector(parse_doubles(e.take("analysis.direction"), "analysis.direction"));
  else
    a.direction = Vector::Ones(static_cast<Eigen::Index>(c.data.dim));

  e.reject_leftovers();
  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& err) {
    throw ConfigError(err.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string to_text(const ExperimentConfig& c) {
  std::map<std::string, std::string> kv;
  kv["seed"] = std::to_string(c.seed);

  kv["data.kind"] = flow::to_string(c.data.kind);
  kv["data.dim"] = std::to_string(c.data.dim);
  switch (c.data.kind) {
    case flow::DataKind::gaussian_mixture: {
      std::string means;
      std::vector<double> stds;
      std::vector<double> weights;
      for (std::size_t i = 0; i < c.data.components.size(); ++i) {
        const auto& comp = c.data.components[i];
        const double var = comp.cov(0, 0);
        if (!comp.cov.isApprox(var * Matrix::Identity(comp.cov.rows(), comp.cov.cols()), 0.0))
          throw ContractError("to_text: only isotropic mixture components are serializable");
        means += (i ? "; " : "") + join(comp.mean);
        stds.push_back(std::sqrt(var));
        weights.push_back(comp.weight);
      }
      kv["data.means"] = means;
      kv["data.stds"] = join(stds);
      kv["data.weights"] = join(weights);
      break;
    }
    case flow::DataKind::checkerboard:
      kv["data.grid_size"] = std::to_string(c.data.grid_size);
      kv["data.cell_size"] = format_shortest(c.data.cell_size);
      break;
    case flow::DataKind::ring:
      kv["data.ring_modes"] = std::to_string(c.data.ring_modes);
      kv["data.ring_radius"] = format_shortest(c.data.ring_radius);
      kv["data.ring_std"] = format_shortest(c.data.ring_std);
      break;
  }

  kv["reward.kind"] = rewards::to_string(c.reward.kind);
  switch (c.reward.kind) {
    case rewards::RewardKind::mode_density:
      kv["reward.mean"] = join(c.reward.mean);
      kv["reward.cov"] = join_rows(c.reward.cov);
      break;
    case rewards::RewardKind::linear:
      kv["reward.direction"] = join(c.reward.direction);
      break;
    case rewards::RewardKind::region:
      kv["reward.lo"] = join(c.reward.lo);
      kv["reward.hi"] = join(c.reward.hi);
      kv["reward.width"] = format_shortest(c.reward.width);
      break;
  }

  kv["net.hidden"] = join(c.net.hidden);
  kv["net.activation"] = ad::to_string(c.net.activation);
  kv["net.time_freqs"] = std::to_string(c.net.time_freqs);

  kv["pretrain.steps"] = std::to_string(c.pretrain.steps);
  kv["pretrain.batch"] = std::to_string(c.pretrain.batch);
  kv["pretrain.lr"] = format_shortest(c.pretrain.lr);
  kv["pretrain.cosine_decay"] = c.pretrain.cosine_decay ? "true" : "false";

  kv["schedule.num_steps"] = std::to_string(c.schedule.num_steps);
  kv["schedule.a"] = format_shortest(c.schedule.a);
  kv["schedule.shift"] = format_shortest(c.schedule.shift);
  kv["schedule.delta_clamp"] = format_shortest(c.schedule.delta_clamp);

  const auto& g = c.grpo;
  kv["grpo.group_size"] = std::to_string(g.group_size);
  kv["grpo.num_groups"] = std::to_string(g.num_groups);
  kv["grpo.clip_eps"] = format_shortest(g.clip_eps);
  kv["grpo.beta"] = format_shortest(g.beta);
  kv["grpo.adv_mode"] = grpo::to_string(g.adv_mode);
  kv["grpo.weight_mode"] = grpo::to_string(g.weight_mode);
  kv["grpo.branch_mode"] = grpo::to_string(g.branch_mode);
  kv["grpo.step_subset"] = join(g.step_subset);
  kv["grpo.early_bias"] = g.early_bias ? "true" : "false";
  kv["grpo.lr"] = format_shortest(g.lr);
  kv["grpo.inner_epochs"] = std::to_string(g.inner_epochs);
  kv["grpo.std_guard"] = format_shortest(g.std_guard);

  kv["run.iterations"] = std::to_string(c.run.iterations);
  kv["run.checkpoint_every"] = std::to_string(c.run.checkpoint_every);
  kv["run.output_dir"] = c.run.output_dir;
  kv["run.eval_samples"] = std::to_string(c.run.eval_samples);

  const auto& a = c.analysis;
  kv["analysis.conditions"] = std::to_string(a.conditions);
  kv["analysis.group_size"] = std::to_string(a.group_size);
  kv["analysis.num_groups"] = std::to_string(a.num_groups);
  kv["analysis.seeds"] = std::to_string(a.seeds);
  kv["analysis.samples"] = std::to_string(a.samples);
  kv["analysis.noise_scale"] = format_shortest(a.noise_scale);
  kv["analysis.shifts"] = join(a.shifts);
  kv["analysis.direction_steps"] = join(a.direction_steps);
  kv["analysis.direction"] = join(a.direction);

  std::string out;
  for (const auto& [key, value] : kv) out += key + " = " + value + "\n";
  return out;
}

std::uint64_t config_hash(const ExperimentConfig& config) { return fnv1a64(to_text(config)); }

}  // namespace tempflow::harness
