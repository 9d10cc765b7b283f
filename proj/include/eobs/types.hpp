#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace eobs {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Thrown when arguments or configuration fail validation (bad dimensions,
// probabilities outside [0,1], malformed model descriptors, ...).  The CLI
// maps this to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// Thrown when a computation cannot continue for numerical reasons
// (singular innovation covariance, non-finite state, ...).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// State norms beyond this are treated as divergence in simulations.
inline constexpr double divergence_threshold = 1e12;

}  // namespace eobs
