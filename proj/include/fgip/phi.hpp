#pragma once

#include <cmath>
#include <string>

#include "fgip/common.hpp"

namespace fgip {

// Step-remapping function for contrast enhancement: odd, concave on the
// positive axis, with slope greater than 1 at the origin, so small level
// steps are amplified more than large ones. Two families:
//
//   gamma: phi(u) = lambda^(gamma-1) * u        for |u| <  lambda
//          phi(u) = sgn(u) * |u|^gamma          for |u| >= lambda
//   tanh:  phi(u) = alpha * tanh(beta * u)
//
// The shape requirements are verified numerically at construction.
class PhiSpec {
public:
    static PhiSpec gamma_form(double lambda, double gamma) {
        if (!(lambda > 0.0 && lambda <= 1.0))
            throw ContractError("PhiSpec: lambda must lie in (0, 1]");
        if (!(gamma > 0.0 && gamma <= 1.0)) throw ContractError("PhiSpec: gamma must lie in (0, 1]");
        return PhiSpec(Kind::gamma, lambda, gamma);
    }

    static PhiSpec tanh_form(double alpha, double beta) {
        if (!(alpha > 0.0) || !std::isfinite(alpha))
            throw ContractError("PhiSpec: alpha must be positive and finite");
        if (!(beta > 1.0) || !std::isfinite(beta))
            throw ContractError("PhiSpec: beta must exceed 1");
        return PhiSpec(Kind::tanh, alpha, beta);
    }

    // Odd by construction: the positive branch is mirrored.
    double operator()(double u) const {
        if (u == 0.0) return 0.0;
        const double mag = positive_branch(std::abs(u));
        return u > 0.0 ? mag : -mag;
    }

private:
    enum class Kind { gamma, tanh };

    PhiSpec(Kind kind, double a, double b) : kind_(kind), a_(a), b_(b) { check_shape(); }

    double positive_branch(double u) const {
        if (kind_ == Kind::gamma)
            return u < a_ ? std::pow(a_, b_ - 1.0) * u : std::pow(u, b_);
        return a_ * std::tanh(b_ * u);
    }

    void check_shape() const {
        const double h = 1e-6;
        if (!(positive_branch(h) / h > 1.0))
            throw ContractError("PhiSpec: slope at the origin must exceed 1");
        // Concavity on (0, 1]: difference quotients must not increase.
        const int n = 256;
        double prev_q = 0.0;
        for (int k = 0; k < n; ++k) {
            const double u0 = static_cast<double>(k) / n;
            const double u1 = static_cast<double>(k + 1) / n;
            const double q = (positive_branch(u1) - positive_branch(u0)) * n;
            if (k > 0 && q > prev_q + 1e-9)
                throw ContractError("PhiSpec: function is not concave on (0, 1]");
            prev_q = q;
        }
    }

    Kind kind_;
    double a_, b_;
};

}  // namespace fgip
