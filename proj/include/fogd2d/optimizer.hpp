#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "fogd2d/analytics.hpp"
#include "fogd2d/content.hpp"

namespace fogd2d {

struct OptimizerConfig {
    double sigma = 1e-6;           // stop when |tau(t+1) - tau(t)| < sigma
    int max_iterations = 500;
    double line_search_tol = 1e-6; // golden-section bracket width

    void validate() const;
};

struct OptimizerStep {
    int iteration = 0;
    double tau = 0.0;
    double step = 0.0;
    double max_step = 0.0;
    double gradient_norm = 0.0;  // norm of the face-projected ascent direction
};

struct OptimizerTrace {
    std::vector<OptimizerStep> steps;
    bool converged = false;
    std::string stop_reason;
    /// Norm of the projected gradient over the coordinates not held at zero,
    /// evaluated at the returned policy.
    double stationarity = 0.0;
    double initial_tau = 0.0;
    double final_tau = 0.0;
};

/// (I - 11^T/J) v: removes the component along the all-ones direction.
std::vector<double> projection_matrix_apply(const std::vector<double>& v);

/// Projects the gradient onto the face of the simplex that keeps every
/// coordinate sitting at zero with an outward-pointing component at zero.
std::vector<double> face_projected_direction(const std::vector<double>& c, const std::vector<double>& gradient,
                                             double zero_tol = 1e-12);

/// Largest s with c + s d inside [0,1]^J. Returns 0 for a zero direction.
double stepsize_bounds(const std::vector<double>& c, const std::vector<double>& d);

/// Golden-section maximisation of f on [0, s_max]. Returns a step whose value
/// is at least f(0), or 0 when no improvement is found.
double line_search(const std::function<double(double)>& f, double s_max, double tol);

struct OptimizationResult {
    CachingPolicy policy;
    OptimizerTrace trace;
};

OptimizationResult optimize_caching(const ScdpModel& model, const OptimizerConfig& config,
                                    GradientMode mode = GradientMode::Analytic,
                                    const CachingPolicy* start = nullptr);

OptimizationResult optimize_caching(const NetworkParams& net, const ContentParams& content, const Popularity& pop,
                                    const OptimizerConfig& config, GradientMode mode = GradientMode::Analytic,
                                    const QuadratureConfig& quad = {});

}  // namespace fogd2d
