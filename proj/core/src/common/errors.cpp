#include "tempflow/common/errors.hpp"

#include <utility>

namespace tempflow {

NumericError::NumericError(const std::string& what, std::string where)
    : Error(what + " [" + where + "]"), where_(std::move(where)) {}

TrainingError::TrainingError(const std::string& what, std::size_t index)
    : NumericError(what, "step " + std::to_string(index)), index_(index) {}

ConfigError::ConfigError(const std::string& what, std::string key)
    : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

}  // namespace tempflow
