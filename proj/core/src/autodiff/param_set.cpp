#include "tempflow/autodiff/param_set.hpp"

#include <cmath>
#include <set>

#include "tempflow/common/errors.hpp"

namespace tempflow::ad {

Matrix ParamEntry::as_matrix() const {
  const auto rows = static_cast<Eigen::Index>(shape.at(0));
  const auto cols = static_cast<Eigen::Index>(shape.size() > 1 ? shape[1] : 1);
  return Eigen::Map<const RowMatrix>(values.data(), rows, cols);
}

void ParamSet::add(std::string name, std::vector<std::size_t> shape, std::vector<double> values) {
  std::size_t expected = 1;
  for (std::size_t s : shape) expected *= s;
  if (shape.empty() || expected != values.size())
    throw ContractError("param entry '" + name + "': shape does not match value count");
  for (const ParamEntry& e : entries_)
    if (e.name == name) throw ContractError("duplicate param entry '" + name + "'");
  entries_.push_back(ParamEntry{std::move(name), std::move(shape), std::move(values)});
}

const ParamEntry& ParamSet::find(const std::string& name) const {
  for (const ParamEntry& e : entries_)
    if (e.name == name) return e;
  throw ContractError("no param entry named '" + name + "'");
}

std::size_t ParamSet::total_count() const {
  std::size_t n = 0;
  for (const ParamEntry& e : entries_) n += e.size();
  return n;
}

bool ParamSet::all_finite() const {
  for (const ParamEntry& e : entries_)
    for (double v : e.values)
      if (!std::isfinite(v)) return false;
  return true;
}

bool ParamSet::congruent(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name) return false;
    if (entries_[i].shape != other.entries_[i].shape) return false;
  }
  return true;
}

void ParamSet::validate() const {
  if (total_count() == 0) throw ContractError("param set is empty");
  std::set<std::string> names;
  for (const ParamEntry& e : entries_) {
    if (!names.insert(e.name).second) throw ContractError("duplicate param entry '" + e.name + "'");
    for (double v : e.values)
      if (!std::isfinite(v)) throw ContractError("param entry '" + e.name + "' holds a non-finite value");
  }
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const ParamEntry& e : entries_) out.add(e.name, e.shape, std::vector<double>(e.size(), 0.0));
  return out;
}

double ParamSet::squared_norm() const {
  double s = 0.0;
  for (const ParamEntry& e : entries_)
    for (double v : e.values) s += v * v;
  return s;
}

double ParamSet::norm() const { return std::sqrt(squared_norm()); }

std::vector<double> ParamSet::flatten() const {
  std::vector<double> flat;
  flat.reserve(total_count());
  for (const ParamEntry& e : entries_) flat.insert(flat.end(), e.values.begin(), e.values.end());
  return flat;
}

void ParamSet::assign_flat(const std::vector<double>& flat) {
  if (flat.size() != total_count()) throw ContractError("assign_flat: size mismatch");
  std::size_t k = 0;
  for (ParamEntry& e : entries_)
    for (double& v : e.values) v = flat[k++];
}

void check_gradients_finite(const GradSet& grads) {
  for (const ParamEntry& e : grads.entries())
    for (double v : e.values)
      if (!std::isfinite(v)) throw NumericError("non-finite gradient", e.name);
}

}  // namespace tempflow::ad
