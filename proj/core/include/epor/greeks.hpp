#pragma once

#include <Eigen/Dense>

namespace epor {

// First and second order sensitivities with respect to the calibrating
// par quotes of a curve, in value per unit rate (and per unit rate^2).
struct GreekProfile {
    Eigen::VectorXd delta;
    Eigen::MatrixXd gamma;

    static GreekProfile zero(Eigen::Index n) {
        return {Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Zero(n, n)};
    }
};

} // namespace epor
