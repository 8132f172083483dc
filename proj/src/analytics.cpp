#include "fogd2d/analytics.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "fogd2d/quadrature.hpp"

namespace fogd2d {
namespace {

constexpr double kPi = std::numbers::pi;

void require_file(int n, std::size_t N, const char* where) {
    if (n < 0 || static_cast<std::size_t>(n) >= N) {
        std::ostringstream os;
        os << where << ": file index " << n << " out of range [0, " << N << ")";
        throw ConfigError(os.str());
    }
}

/// Weighted sum over subsets of the other cached files:
///   sum_D w(|D|) * prod_{m in D} in_set[m] * prod_{m not in D} out_set[m]
/// with w(q) = 1/(q+1). Built as a polynomial in |D| so the cost is O(K^2).
double tie_weighted_sum(const std::vector<double>& in_set, const std::vector<double>& out_set) {
    std::vector<double> poly(in_set.size() + 1, 0.0);
    poly[0] = 1.0;
    for (std::size_t m = 0; m < in_set.size(); ++m) {
        for (std::size_t q = m + 1; q > 0; --q) poly[q] = poly[q] * out_set[m] + poly[q - 1] * in_set[m];
        poly[0] *= out_set[m];
    }
    double total = 0.0;
    for (std::size_t q = 0; q < poly.size(); ++q) total += poly[q] / static_cast<double>(q + 1);
    return total;
}

double log_poisson_pmf(int k, double mean) {
    if (mean == 0.0) return k == 0 ? 0.0 : -INFINITY;
    return k * std::log(mean) - mean - std::lgamma(k + 1.0);
}

}  // namespace

void NetworkParams::validate() const {
    auto positive = [](double v, const char* name) {
        if (!std::isfinite(v) || v <= 0.0) throw ConfigError(std::string("network.") + name + " must be finite and > 0");
    };
    auto non_negative = [](double v, const char* name) {
        if (!std::isfinite(v) || v < 0.0) throw ConfigError(std::string("network.") + name + " must be finite and >= 0");
    };
    non_negative(lambda_g, "lambda_g");
    non_negative(lambda_u, "lambda_u");
    positive(P_g, "P_g");
    positive(P_u, "P_u");
    positive(theta_u, "theta_u");
    positive(I_th, "I_th");
    positive(alpha, "alpha");
    positive(R_d, "R_d");
    positive(R_s, "R_s");
    if (alpha <= 2.0) throw ConfigError("network.alpha must be > 2");
    if (R_s < 10.0 * R_d) throw ConfigError("network.R_s must be at least 10 * R_d");
}

double NetworkParams::d2d_area() const { return kPi * R_d * R_d; }

void QuadratureConfig::validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0) || !(mrfs_tail_tol > 0.0))
        throw ConfigError("quadrature tolerances must be > 0");
    if (max_subdivisions < 1) throw ConfigError("quadrature.max_subdivisions must be >= 1");
}

// --- selection ---------------------------------------------------------------

double rfs_selection_coefficient(const std::vector<int>& combo, int n, const NetworkParams& net,
                                 const Popularity& pop) {
    const double area = net.d2d_area();
    bool cached = false;
    std::vector<double> requested, silent;
    for (int m : combo) {
        const double mean = net.lambda_u * pop[static_cast<std::size_t>(m)] * area;
        if (m == n) {
            cached = true;
            continue;
        }
        requested.push_back(-std::expm1(-mean));
        silent.push_back(std::exp(-mean));
    }
    if (!cached) return 0.0;
    const double own = -std::expm1(-net.lambda_u * pop[static_cast<std::size_t>(n)] * area);
    return own * tie_weighted_sum(requested, silent);
}

double mrfs_selection_coefficient(const std::vector<int>& combo, int n, const NetworkParams& net,
                                  const Popularity& pop, const QuadratureConfig& quad) {
    const double area = net.d2d_area();
    bool cached = false;
    std::vector<double> others;
    for (int m : combo) {
        if (m == n) {
            cached = true;
            continue;
        }
        others.push_back(net.lambda_u * pop[static_cast<std::size_t>(m)] * area);
    }
    if (!cached) return 0.0;
    const double own = net.lambda_u * pop[static_cast<std::size_t>(n)] * area;
    if (own == 0.0) return 0.0;

    // cdf_below[m] = P(N_m <= k-1), accumulated as k advances.
    std::vector<double> cdf_below(others.size());
    for (std::size_t m = 0; m < others.size(); ++m) cdf_below[m] = std::exp(-others[m]);
    std::vector<double> tie(others.size());

    double total = 0.0;
    for (int k = 1;; ++k) {
        if (k > kMrfsMaxTerms) {
            std::ostringstream os;
            os << "mrfs_selection_coefficient: tie-count series for mean " << own << " did not reach tail "
               << quad.mrfs_tail_tol << " within " << kMrfsMaxTerms << " terms";
            throw NumericalError(os.str());
        }
        for (std::size_t m = 0; m < others.size(); ++m) tie[m] = std::exp(log_poisson_pmf(k, others[m]));
        const double own_pmf = std::exp(log_poisson_pmf(k, own));
        total += own_pmf * tie_weighted_sum(tie, cdf_below);
        for (std::size_t m = 0; m < others.size(); ++m) cdf_below[m] += tie[m];

        // Every later term is bounded by P(N_n = j); bound the tail of N_n
        // geometrically once the pmf is decreasing.
        if (k + 2 > own) {
            const double next = std::exp(log_poisson_pmf(k + 1, own));
            const double tail_bound = next / (1.0 - own / (k + 2));
            if (tail_bound < quad.mrfs_tail_tol) break;
        }
    }
    return total;
}

namespace {

void check_zeta_inputs(std::size_t i, int n, const ContentParams& content, const Popularity& pop,
                       const CachingPolicy& policy, std::size_t J) {
    content.validate();
    if (pop.size() != static_cast<std::size_t>(content.N)) throw ConfigError("popularity length differs from content.N");
    if (policy.size() != J) throw ConfigError("caching policy length differs from C(N,K)");
    if (i >= J) throw ConfigError("combination index out of range");
    require_file(n, pop.size(), "zeta");
}

}  // namespace

double zeta_rfs(std::size_t i, int n, const NetworkParams& net, const ContentParams& content, const Popularity& pop,
                const CachingPolicy& policy) {
    const CombinationSet combos = enumerate_combinations(content.N, content.K);
    check_zeta_inputs(i, n, content, pop, policy, combos.size());
    return policy[i] * rfs_selection_coefficient(combos[i], n, net, pop);
}

double zeta_mrfs(std::size_t i, int n, const NetworkParams& net, const ContentParams& content, const Popularity& pop,
                 const CachingPolicy& policy, const QuadratureConfig& quad) {
    const CombinationSet combos = enumerate_combinations(content.N, content.K);
    check_zeta_inputs(i, n, content, pop, policy, combos.size());
    return policy[i] * mrfs_selection_coefficient(combos[i], n, net, pop, quad);
}

double osa_probability(int n, const NetworkParams& net, const Popularity& pop) {
    require_file(n, pop.size(), "osa_probability");
    const double two_over_alpha = 2.0 / net.alpha;
    const double reach = std::tgamma(two_over_alpha) * std::pow(net.P_u / net.I_th, two_over_alpha) / net.alpha;
    return std::exp(-2.0 * kPi * net.lambda_u * (1.0 - pop[static_cast<std::size_t>(n)]) * reach);
}

ActivationTable activation_table(const NetworkParams& net, const ContentParams& content, const Popularity& pop,
                                 const CachingPolicy& policy, const QuadratureConfig& quad) {
    return ScdpModel(net, content, pop, quad).activation(policy);
}

DensityReport active_densities(const ActivationTable& act, const NetworkParams& net) {
    DensityReport d;
    d.lambda_g_n.resize(act.N);
    for (std::size_t n = 0; n < act.N; ++n) d.lambda_g_n[n] = net.lambda_g * act.xi_n[n];
    d.lambda_g_a = 0.0;
    for (double v : d.lambda_g_n) d.lambda_g_a += v;
    d.lambda_g_bar_n.resize(act.N);
    for (std::size_t n = 0; n < act.N; ++n) {
        // Summing the other files directly keeps the complement non-negative.
        double others = 0.0;
        for (std::size_t m = 0; m < act.N; ++m)
            if (m != n) others += d.lambda_g_n[m];
        d.lambda_g_bar_n[n] = others;
    }
    return d;
}

double conditional_active_density(int m, int n, double r, const DensityReport& dens, const NetworkParams& net) {
    require_file(m, dens.lambda_g_n.size(), "conditional_active_density");
    require_file(n, dens.lambda_g_n.size(), "conditional_active_density");
    if (r < 0.0) throw ConfigError("conditional_active_density: r must be >= 0");
    const double base = dens.lambda_g_n[static_cast<std::size_t>(m)];
    if (m == n) return base;
    return base * -std::expm1(-net.I_th * std::pow(r, net.alpha) / net.P_u);
}

double cache_hit(int n, const DensityReport& dens, const NetworkParams& net) {
    require_file(n, dens.lambda_g_n.size(), "cache_hit");
    return -std::expm1(-dens.lambda_g_n[static_cast<std::size_t>(n)] * net.d2d_area());
}

double assoc_distance_pdf(int n, double l, const DensityReport& dens, const NetworkParams& net) {
    require_file(n, dens.lambda_g_n.size(), "assoc_distance_pdf");
    const double lambda = dens.lambda_g_n[static_cast<std::size_t>(n)];
    if (lambda <= 0.0) throw NumericalError("assoc_distance_pdf: no active F-UE carries this file, the conditional is undefined");
    if (l < 0.0 || l > net.R_d) return 0.0;
    return 2.0 * lambda * kPi * l * std::exp(-lambda * kPi * l * l) / -std::expm1(-lambda * net.d2d_area());
}

// --- coverage ----------------------------------------------------------------

CoverageKernel::CoverageKernel(const NetworkParams& net, const QuadratureConfig& quad) : net_(net), quad_(quad) {
    net_.validate();
    quad_.validate();
    const double a = net_.alpha;
    const double theta = net_.theta_u;

    // int_1^inf v / (1 + v^a / theta) dv, with u = l v.
    const double decay = std::max(1.0, std::pow(theta, 1.0 / a));
    same_file_scale_ = integrate_to_infinity(
                           [&](double v) { return v * theta / (theta + std::pow(v, a)); }, 1.0, decay,
                           quad_.rel_tol, quad_.abs_tol, quad_.max_subdivisions,
                           "coverage: same-file interference integral")
                           .value;

    far_field_coeff_ = 2.0 * kPi * kPi / (a * std::sin(2.0 * kPi / a)) * std::pow(theta, 2.0 / a);
    const double ratio = net_.P_u / net_.I_th;
    exclusion_credit_ = 2.0 * kPi / a * std::pow(ratio, 2.0 / a) * std::tgamma(2.0 / a);
    sensing_scale_ = std::pow(ratio, 1.0 / a);
}

double CoverageKernel::compute_truncated_fading(double l) const {
    const double a = net_.alpha;
    const double link = net_.theta_u * std::pow(l, a);
    const double prefactor = std::exp(-link * net_.I_th / net_.P_u);
    if (prefactor == 0.0) return 0.0;
    const double s = sensing_scale_;
    auto integrand = [&](double u) {
        const double ua = std::pow(u, a);
        const double decay = std::exp(-std::pow(u / s, a));
        if (decay == 0.0) return 0.0;
        return ua / (ua + link) * decay * u;
    };
    std::ostringstream label;
    label << "coverage: truncated-fading interference integral at l=" << l;
    const auto r = integrate_to_infinity(integrand, 0.0, s, quad_.rel_tol, quad_.abs_tol * s * s,
                                         quad_.max_subdivisions, label.str());
    return prefactor * r.value;
}

double CoverageKernel::truncated_fading(double l) const {
    {
        std::lock_guard<std::mutex> lock(memo_mutex_);
        auto it = memo_.find(l);
        if (it != memo_.end()) return it->second;
    }
    const double v = compute_truncated_fading(l);
    std::lock_guard<std::mutex> lock(memo_mutex_);
    memo_.emplace(l, v);
    return v;
}

double CoverageKernel::cross_file_exponent(double l, bool osa) const {
    const double far = far_field_coeff_ * l * l;
    if (!osa) return far;
    return far - exclusion_credit_ + 2.0 * kPi * truncated_fading(l);
}

double CoverageKernel::delivery_probability(double lambda_n, double lambda_bar, bool osa) const {
    if (lambda_n <= 0.0) return 0.0;
    const double same = kPi * (1.0 + 2.0 * same_file_scale_);
    auto integrand = [&](double l) {
        const double cross = lambda_bar > 0.0 ? lambda_bar * cross_file_exponent(l, osa) : 0.0;
        return 2.0 * kPi * lambda_n * l * std::exp(-lambda_n * same * l * l - cross);
    };
    return integrate_adaptive(integrand, 0.0, net_.R_d, quad_.rel_tol, quad_.abs_tol, quad_.max_subdivisions,
                              osa ? "coverage: outer link-distance integral" : "coverage_baseline: outer link-distance integral")
        .value;
}

double CoverageKernel::coverage(double lambda_n, double lambda_bar, bool osa) const {
    if (lambda_n <= 0.0) return 0.0;
    return delivery_probability(lambda_n, lambda_bar, osa) / -std::expm1(-lambda_n * net_.d2d_area());
}

std::pair<double, double> CoverageKernel::delivery_gradient(double lambda_n, double lambda_bar) const {
    const double same = kPi * (1.0 + 2.0 * same_file_scale_);
    auto d_lambda = [&](double l) {
        const double cross = lambda_bar > 0.0 ? lambda_bar * cross_file_exponent(l, true) : 0.0;
        const double s = same * l * l;
        return 2.0 * kPi * l * (1.0 - lambda_n * s) * std::exp(-lambda_n * s - cross);
    };
    auto d_lambda_bar = [&](double l) {
        const double x = cross_file_exponent(l, true);
        return -2.0 * kPi * lambda_n * l * x * std::exp(-lambda_n * same * l * l - lambda_bar * x);
    };
    const double g1 = integrate_adaptive(d_lambda, 0.0, net_.R_d, quad_.rel_tol, quad_.abs_tol, quad_.max_subdivisions,
                                         "gradient: d/d lambda_n integral")
                          .value;
    const double g2 = lambda_n <= 0.0 ? 0.0
                                      : integrate_adaptive(d_lambda_bar, 0.0, net_.R_d, quad_.rel_tol, quad_.abs_tol,
                                                           quad_.max_subdivisions, "gradient: d/d lambda_bar integral")
                                            .value;
    return {g1, g2};
}

double coverage(int n, const DensityReport& dens, const NetworkParams& net, const QuadratureConfig& quad) {
    require_file(n, dens.lambda_g_n.size(), "coverage");
    const auto idx = static_cast<std::size_t>(n);
    return CoverageKernel(net, quad).coverage(dens.lambda_g_n[idx], dens.lambda_g_bar_n[idx], true);
}

double coverage_baseline(int n, const DensityReport& dens, const NetworkParams& net, const QuadratureConfig& quad) {
    require_file(n, dens.lambda_g_n.size(), "coverage_baseline");
    const auto idx = static_cast<std::size_t>(n);
    return CoverageKernel(net, quad).coverage(dens.lambda_g_n[idx], dens.lambda_g_bar_n[idx], false);
}

// --- SCDP ----------------------------------------------------------------------

ScdpModel::ScdpModel(const NetworkParams& net, const ContentParams& content, const Popularity& pop,
                     const QuadratureConfig& quad)
    : net_(net), content_(content), quad_(quad), pop_(pop) {
    net_.validate();
    content_.validate();
    quad_.validate();
    if (pop_.size() != static_cast<std::size_t>(content_.N)) throw ConfigError("popularity length differs from content.N");
    combos_ = enumerate_combinations(content_.N, content_.K);
    N_ = pop_.size();

    coeff_.assign(combos_.size() * N_, 0.0);
    for (std::size_t i = 0; i < combos_.size(); ++i) {
        for (int n : combos_[i]) {
            coeff_[i * N_ + static_cast<std::size_t>(n)] =
                content_.scheme == Scheme::RFS ? rfs_selection_coefficient(combos_[i], n, net_, pop_)
                                               : mrfs_selection_coefficient(combos_[i], n, net_, pop_, quad_);
        }
    }
    vartheta_.resize(N_);
    for (std::size_t n = 0; n < N_; ++n) vartheta_[n] = osa_probability(static_cast<int>(n), net_, pop_);
    kernel_ = std::make_shared<CoverageKernel>(net_, quad_);
}

ActivationTable ScdpModel::activation(const CachingPolicy& policy) const {
    if (policy.size() != combos_.size()) throw ConfigError("caching policy length differs from C(N,K)");
    ActivationTable t;
    t.J = combos_.size();
    t.N = N_;
    t.zeta_in.assign(t.J * N_, 0.0);
    t.xi_in.assign(t.J * N_, 0.0);
    t.vartheta_n = vartheta_;
    t.xi_n.assign(N_, 0.0);
    for (std::size_t i = 0; i < t.J; ++i) {
        for (std::size_t n = 0; n < N_; ++n) {
            t.zeta_in[i * N_ + n] = policy[i] * coeff_[i * N_ + n];
            t.xi_in[i * N_ + n] = t.zeta_in[i * N_ + n] * vartheta_[n];
        }
    }
    for (std::size_t n = 0; n < N_; ++n)
        for (std::size_t i : combos_.containing(static_cast<int>(n))) t.xi_n[n] += t.xi_in[i * N_ + n];
    for (double v : t.xi_n) t.xi += v;
    return t;
}

AnalyticalReport ScdpModel::report(const CachingPolicy& policy) const {
    AnalyticalReport r;
    r.popularity = pop_;
    r.activation = activation(policy);
    r.densities = active_densities(r.activation, net_);
    r.sigma_n.resize(N_);
    r.C_n.resize(N_);
    for (std::size_t n = 0; n < N_; ++n) {
        const int file = static_cast<int>(n);
        r.sigma_n[n] = cache_hit(file, r.densities, net_);
        const double delivered =
            kernel_->delivery_probability(r.densities.lambda_g_n[n], r.densities.lambda_g_bar_n[n], true);
        r.C_n[n] = r.sigma_n[n] > 0.0 ? delivered / r.sigma_n[n] : 0.0;
        r.sigma += pop_[n] * r.sigma_n[n];
        r.C += pop_[n] * r.C_n[n];
        r.tau += pop_[n] * delivered;
    }
    r.throughput = net_.lambda_u * r.tau;
    return r;
}

double ScdpModel::tau(const CachingPolicy& policy) const {
    const DensityReport d = active_densities(activation(policy), net_);
    double total = 0.0;
    for (std::size_t n = 0; n < N_; ++n)
        total += pop_[n] * kernel_->delivery_probability(d.lambda_g_n[n], d.lambda_g_bar_n[n], true);
    return total;
}

std::vector<double> ScdpModel::gradient(const CachingPolicy& policy) const {
    const DensityReport d = active_densities(activation(policy), net_);
    const std::size_t J = combos_.size();

    // Activation of a file-n transmitter per unit caching probability of combination i.
    std::vector<double> unit(J * N_), unit_total(J, 0.0);
    for (std::size_t i = 0; i < J; ++i) {
        for (std::size_t n = 0; n < N_; ++n) {
            unit[i * N_ + n] = coeff_[i * N_ + n] * vartheta_[n];
            unit_total[i] += unit[i * N_ + n];
        }
    }

    std::vector<double> grad(J, 0.0);
    for (std::size_t n = 0; n < N_; ++n) {
        const auto [d_own, d_other] = kernel_->delivery_gradient(d.lambda_g_n[n], d.lambda_g_bar_n[n]);
        for (std::size_t i = 0; i < J; ++i) {
            const double own = unit[i * N_ + n];
            grad[i] += pop_[n] * net_.lambda_g * (own * d_own + (unit_total[i] - own) * d_other);
        }
    }
    return grad;
}

std::vector<double> ScdpModel::projected_gradient_fd(const CachingPolicy& policy, double h) const {
    const std::size_t J = combos_.size();
    const double share = 1.0 / static_cast<double>(J);
    std::vector<double> out(J, 0.0);
    if (J == 1) return out;
    for (std::size_t i = 0; i < J; ++i) {
        CachingPolicy plus = policy, minus = policy;
        for (std::size_t j = 0; j < J; ++j) {
            const double dir = (j == i ? 1.0 : 0.0) - share;
            plus.c[j] += h * dir;
            minus.c[j] -= h * dir;
            if (plus.c[j] < 0.0 || minus.c[j] < 0.0 || plus.c[j] > 1.0 || minus.c[j] > 1.0)
                throw ConfigError("finite-difference gradient needs a policy strictly inside the simplex");
        }
        out[i] = (tau(plus) - tau(minus)) / (2.0 * h);
    }
    return out;
}

AnalyticalReport scdp(const NetworkParams& net, const ContentParams& content, const Popularity& pop,
                      const CachingPolicy& policy, const QuadratureConfig& quad) {
    return ScdpModel(net, content, pop, quad).report(policy);
}

GradientResult scdp_gradient(const NetworkParams& net, const ContentParams& content, const Popularity& pop,
                             const CachingPolicy& policy, const QuadratureConfig& quad, GradientMode mode) {
    const ScdpModel model(net, content, pop, quad);
    GradientResult result;
    if (mode == GradientMode::FiniteDifference) {
        result.projected = model.projected_gradient_fd(policy);
        return result;
    }
    std::vector<double> raw = model.gradient(policy);
    double mean = 0.0;
    for (double v : raw) mean += v;
    mean /= static_cast<double>(raw.size());
    result.projected.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) result.projected[i] = raw[i] - mean;
    result.raw = std::move(raw);
    return result;
}

}  // namespace fogd2d
