#pragma once

#include <stdexcept>
#include <string>

namespace fogd2d {

/// Invalid parameters, malformed configuration files, unknown keys.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Quadrature non-convergence, truncation overflow, non-finite objective.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fogd2d
