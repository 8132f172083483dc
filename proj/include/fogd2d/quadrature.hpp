#pragma once

#include <functional>
#include <string>

namespace fogd2d {

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    int panels = 0;
};

/// Globally adaptive 21-point Gauss-Kronrod integration on a finite interval.
/// The panel with the largest error estimate is bisected until the summed
/// estimate satisfies max(abs_tol, rel_tol*|value|). Throws NumericalError
/// naming `label` once max_panels is exhausted.
QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                    double rel_tol, double abs_tol, int max_panels,
                                    const std::string& label);

/// Integral over [a, inf) through u = a + scale * t / (1 - t), t in [0, 1).
/// `scale` should be the width over which f decays.
QuadratureResult integrate_to_infinity(const std::function<double(double)>& f, double a, double scale,
                                       double rel_tol, double abs_tol, int max_panels,
                                       const std::string& label);

}  // namespace fogd2d
