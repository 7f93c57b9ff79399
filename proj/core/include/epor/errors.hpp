#pragma once

#include <stdexcept>
#include <string>

namespace epor {

// Thrown when an iterative calibration (IRLS, MLE) fails to converge or the
// data make the model unidentifiable (e.g. perfect separation).
class CalibrationError : public std::runtime_error {
public:
    explicit CalibrationError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a hedge optimizer exhausts its iteration budget without
// meeting its convergence criterion. The caller may still ask for the best
// iterate found so far.
class OptimizerError : public std::runtime_error {
public:
    explicit OptimizerError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace epor
