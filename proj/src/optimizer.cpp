#include "fogd2d/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fogd2d {
namespace {

constexpr double kInvPhi = 0.6180339887498949;  // 1/golden ratio
constexpr double kFdStep = 1e-5;

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw NumericalError(std::string("optimizer: non-finite ") + what);
}

/// Snaps tiny excursions outside [0,1] and restores the unit sum.
void snap_to_simplex(std::vector<double>& c) {
    for (double& x : c) x = std::clamp(x, 0.0, 1.0);
    const double total = std::accumulate(c.begin(), c.end(), 0.0);
    if (total > 0.0)
        for (double& x : c) x /= total;
}

/// Finite-difference directional derivatives along e_i - 1/J, one-sided where
/// the central stencil would leave the simplex.
std::vector<double> fd_direction_gradient(const ScdpModel& model, const CachingPolicy& policy) {
    const std::size_t J = policy.size();
    std::vector<double> out(J, 0.0);
    if (J == 1) return out;
    const double share = 1.0 / static_cast<double>(J);
    auto shifted = [&](std::size_t i, double h, bool& ok) {
        CachingPolicy p = policy;
        ok = true;
        for (std::size_t j = 0; j < J; ++j) {
            p.c[j] += h * ((j == i ? 1.0 : 0.0) - share);
            if (p.c[j] < 0.0 || p.c[j] > 1.0) ok = false;
        }
        return p;
    };
    const double base = model.tau(policy);
    for (std::size_t i = 0; i < J; ++i) {
        bool up_ok = false, down_ok = false;
        const CachingPolicy up = shifted(i, kFdStep, up_ok);
        const CachingPolicy down = shifted(i, -kFdStep, down_ok);
        if (up_ok && down_ok)
            out[i] = (model.tau(up) - model.tau(down)) / (2.0 * kFdStep);
        else if (up_ok)
            out[i] = (model.tau(up) - base) / kFdStep;
        else if (down_ok)
            out[i] = (base - model.tau(down)) / kFdStep;
    }
    return out;
}

std::vector<double> ascent_gradient(const ScdpModel& model, const CachingPolicy& policy, GradientMode mode) {
    std::vector<double> g =
        mode == GradientMode::Analytic ? model.gradient(policy) : fd_direction_gradient(model, policy);
    for (double v : g) require_finite(v, "gradient component");
    return g;
}

}  // namespace

void OptimizerConfig::validate() const {
    if (!(sigma > 0.0)) throw ConfigError("optimizer.sigma must be positive");
    if (max_iterations < 1) throw ConfigError("optimizer.max_iterations must be at least 1");
    if (!(line_search_tol > 0.0)) throw ConfigError("optimizer.line_search_tol must be positive");
}

std::vector<double> projection_matrix_apply(const std::vector<double>& v) {
    if (v.empty()) return {};
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - mean;
    return out;
}

std::vector<double> face_projected_direction(const std::vector<double>& c, const std::vector<double>& gradient,
                                             double zero_tol) {
    const std::size_t J = c.size();
    std::vector<char> held(J, 0);
    std::vector<double> d(J, 0.0);
    for (;;) {
        double sum = 0.0;
        std::size_t free = 0;
        for (std::size_t i = 0; i < J; ++i)
            if (!held[i]) {
                sum += gradient[i];
                ++free;
            }
        if (free == 0) return std::vector<double>(J, 0.0);
        const double mean = sum / static_cast<double>(free);
        bool changed = false;
        for (std::size_t i = 0; i < J; ++i) {
            d[i] = held[i] ? 0.0 : gradient[i] - mean;
            if (!held[i] && c[i] <= zero_tol && d[i] < 0.0) {
                held[i] = 1;
                changed = true;
            }
        }
        if (!changed) return d;
    }
}

double stepsize_bounds(const std::vector<double>& c, const std::vector<double>& d) {
    double up = std::numeric_limits<double>::infinity();
    double down = std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (d[i] > 0.0) {
            up = std::min(up, (1.0 - c[i]) / d[i]);
            any = true;
        } else if (d[i] < 0.0) {
            down = std::min(down, -c[i] / d[i]);
            any = true;
        }
    }
    if (!any) return 0.0;
    return std::max(0.0, std::min(up, down));
}

double line_search(const std::function<double(double)>& f, double s_max, double tol) {
    if (!(s_max > 0.0)) return 0.0;
    const double f0 = f(0.0);
    double a = 0.0, b = s_max;
    double x1 = b - kInvPhi * (b - a), x2 = a + kInvPhi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > tol) {
        if (f1 >= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - kInvPhi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + kInvPhi * (b - a);
            f2 = f(x2);
        }
    }
    // The bracket ends are candidates too: a boundary maximum is common.
    double best_s = 0.0, best_f = f0;
    for (const auto& [s, v] : {std::pair{x1, f1}, std::pair{x2, f2}}) {
        if (v > best_f) {
            best_s = s;
            best_f = v;
        }
    }
    const double fe = f(s_max);
    if (fe > best_f) best_s = s_max;
    return best_s;
}

OptimizationResult optimize_caching(const ScdpModel& model, const OptimizerConfig& config, GradientMode mode,
                                    const CachingPolicy* start) {
    config.validate();
    const std::size_t J = model.J();
    OptimizationResult result;
    result.policy = start ? *start : uniform_policy(J);
    result.policy.validate();
    auto& trace = result.trace;

    double tau = model.tau(result.policy);
    require_finite(tau, "objective");
    trace.initial_tau = tau;

    if (J == 1) {
        trace.steps.push_back({1, tau, 0.0, 0.0, 0.0});
        trace.converged = true;
        trace.stop_reason = "single combination";
        trace.final_tau = tau;
        return result;
    }

    std::vector<double> direction;
    for (int it = 1; it <= config.max_iterations; ++it) {
        const std::vector<double> grad = ascent_gradient(model, result.policy, mode);
        direction = face_projected_direction(result.policy.c, grad);
        const double gnorm = norm2(direction);
        const double s_max = stepsize_bounds(result.policy.c, direction);

        auto along = [&](double s) {
            CachingPolicy p = result.policy;
            for (std::size_t i = 0; i < J; ++i) p.c[i] += s * direction[i];
            snap_to_simplex(p.c);
            const double v = model.tau(p);
            require_finite(v, "objective");
            return v;
        };
        // Scale the bracket tolerance to the step range so tiny ranges still resolve.
        const double step = line_search(along, s_max, config.line_search_tol * std::max(1.0, s_max));

        CachingPolicy next = result.policy;
        for (std::size_t i = 0; i < J; ++i) next.c[i] += step * direction[i];
        snap_to_simplex(next.c);
        const double next_tau = step > 0.0 ? model.tau(next) : tau;
        require_finite(next_tau, "objective");

        trace.steps.push_back({it, next_tau, step, s_max, gnorm});
        const double delta = next_tau - tau;
        if (step > 0.0 && next_tau >= tau) {
            result.policy = next;
            tau = next_tau;
        }
        if (gnorm == 0.0 || s_max == 0.0) {
            trace.converged = true;
            trace.stop_reason = "stationary";
            break;
        }
        if (step == 0.0) {
            trace.converged = true;
            trace.stop_reason = "no ascent along projected gradient";
            break;
        }
        if (std::abs(delta) < config.sigma) {
            trace.converged = true;
            trace.stop_reason = "objective change below sigma";
            break;
        }
    }
    if (!trace.converged) trace.stop_reason = "iteration limit";

    const std::vector<double> final_grad = ascent_gradient(model, result.policy, mode);
    trace.stationarity = norm2(face_projected_direction(result.policy.c, final_grad));
    trace.final_tau = tau;
    return result;
}

OptimizationResult optimize_caching(const NetworkParams& net, const ContentParams& content, const Popularity& pop,
                                    const OptimizerConfig& config, GradientMode mode, const QuadratureConfig& quad) {
    const ScdpModel model(net, content, pop, quad);
    return optimize_caching(model, config, mode);
}

}  // namespace fogd2d
