#include "tempflow/flowmodel/trajectory.hpp"

#include <string>

#include "tempflow/common/csv.hpp"

namespace tempflow::flow {

bool Trajectory::valid() const {
  if (states.empty() || states.size() != times.size() || steps.size() + 1 != states.size()) return false;
  for (std::size_t i = 0; i + 1 < times.size(); ++i)
    if (!(times[i] > times[i + 1])) return false;
  for (const StepMeta& m : steps) {
    if (m.kind == StepKind::ode && (m.eps || m.logp)) return false;
    if (m.kind == StepKind::sde && !m.eps) return false;
  }
  return true;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  const auto d = traj.states.empty() ? 0 : traj.states.front().size();
  std::vector<std::string> header{"step", "t"};
  for (Eigen::Index k = 0; k < d; ++k) header.push_back("x" + std::to_string(k));
  CsvWriter csv(path, header);
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    std::vector<double> row{traj.times[i]};
    for (Eigen::Index k = 0; k < d; ++k) row.push_back(traj.states[i][k]);
    csv.row(static_cast<long long>(i), row);
  }
}

}  // namespace tempflow::flow
