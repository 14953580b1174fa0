#include "tempflow/flowmodel/flow.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "tempflow/autodiff/adam.hpp"
#include "tempflow/common/errors.hpp"

namespace tempflow::flow {

namespace {

constexpr double kTimeSlack = 1e-12;

void check_step(double t, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ContractError("ode_step: dt must be positive");
  if (!(t <= 1.0 + kTimeSlack) || !(t - dt >= -kTimeSlack))
    throw ContractError("ode_step: step leaves [0, 1]");
}

}  // namespace

FlowModel::FlowModel(const ad::Network& net, const ad::ParamSet& params) : dim_(net.state_dim()) {
  net.check_params(params);
  fn_ = [&net, &params](const Matrix& x, double t) { return net.forward(params, x, t); };
}

FlowModel::FlowModel(VelocityFn fn, std::size_t state_dim) : fn_(std::move(fn)), dim_(state_dim) {
  if (!fn_) throw ContractError("FlowModel: empty velocity function");
  if (state_dim == 0) throw ContractError("FlowModel: state dimension must be positive");
}

Matrix FlowModel::velocity(const Matrix& x, double t) const {
  if (static_cast<std::size_t>(x.cols()) != dim_) throw ContractError("FlowModel: state dimension mismatch");
  Matrix v = fn_(x, t);
  if (v.rows() != x.rows() || v.cols() != x.cols()) throw ContractError("FlowModel: velocity shape mismatch");
  return v;
}

Vector FlowModel::velocity(const Vector& x, double t) const {
  Matrix row = x.transpose();
  return velocity(row, t).row(0).transpose();
}

Matrix ode_step(const FlowModel& model, const Matrix& x, double t, double dt) {
  check_step(t, dt);
  Matrix out = x - model.velocity(x, t) * dt;
  if (!out.allFinite()) throw NumericError("ode_step produced a non-finite state", "t=" + std::to_string(t));
  return out;
}

Vector ode_step(const FlowModel& model, const Vector& x, double t, double dt) {
  Matrix row = x.transpose();
  return ode_step(model, row, t, dt).row(0).transpose();
}

Trajectory ode_sample(const FlowModel& model, const Vector& x_T, const stochastic::NoiseSchedule& schedule) {
  if (!x_T.allFinite()) throw ContractError("ode_sample: x_T must be finite");
  Trajectory traj;
  traj.times = schedule.times();
  traj.states.reserve(traj.times.size());
  traj.states.push_back(x_T);
  for (std::size_t i = 0; i < schedule.num_transitions(); ++i) {
    traj.states.push_back(ode_step(model, traj.states.back(), schedule.t(i), schedule.dt(i)));
    traj.steps.push_back(StepMeta{});
  }
  return traj;
}

Matrix ode_sample_batch(const FlowModel& model, Matrix x, const stochastic::NoiseSchedule& schedule,
                        std::size_t first) {
  if (first > schedule.num_transitions()) throw ContractError("ode_sample_batch: start index out of range");
  for (std::size_t i = first; i < schedule.num_transitions(); ++i)
    x = ode_step(model, x, schedule.t(i), schedule.dt(i));
  return x;
}

PretrainResult cfm_pretrain(const ad::Network& net, const DataSpec& data, const PretrainOptions& opt) {
  if (opt.batch < 1) throw ContractError("cfm_pretrain: batch must be >= 1");
  if (!(opt.lr > 0.0)) throw ContractError("cfm_pretrain: lr must be positive");
  data.validate();
  if (data.dim != net.state_dim()) throw ContractError("cfm_pretrain: data dimension does not match network");

  const Rng root(opt.seed);
  Rng init_rng = root.derive("init");
  PretrainResult result{net.init_params(init_rng), {}};
  result.losses.reserve(opt.steps);
  ad::AdamState state = ad::AdamState::for_params(result.params);
  ad::AdamOptions adam{.lr = opt.lr};
  const auto n = static_cast<Eigen::Index>(opt.batch);
  const auto d = static_cast<Eigen::Index>(net.state_dim());

  for (std::size_t step = 0; step < opt.steps; ++step) {
    Rng rng = root.derive("cfm-step", step);
    const Matrix x0 = sample_data(data, opt.batch, rng);
    const Matrix x1 = rng.normal_matrix(n, d);
    std::vector<double> t(opt.batch);
    for (double& ti : t) ti = rng.uniform();
    Matrix xt(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double ti = t[static_cast<std::size_t>(i)];
      xt.row(i) = (1.0 - ti) * x0.row(i) + ti * x1.row(i);
    }
    const Matrix target = x1 - x0;

    ad::Tape tape;
    const auto bound = net.bind(tape, result.params);
    const ad::Var v = net.forward(tape, bound, xt, t);
    const ad::Var loss = (1.0 / static_cast<double>(n)) * ad::sum(ad::square(ad::cadd(v, -target)));
    const double value = loss.value()(0, 0);
    if (!std::isfinite(value)) throw TrainingError("cfm_pretrain: loss is not finite", step);
    tape.backward(loss);
    const ad::GradSet grads = net.gradients(bound, result.params);
    try {
      ad::check_gradients_finite(grads);
    } catch (const NumericError&) {
      throw TrainingError("cfm_pretrain: gradient is not finite", step);
    }
    if (opt.cosine_decay)
      adam.lr = 0.5 * opt.lr * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(opt.steps)));
    ad::adam_step(result.params, grads, state, adam);
    result.losses.push_back(value);
  }
  return result;
}

}  // namespace tempflow::flow
