#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "fogd2d/content.hpp"

namespace fogd2d {

/// Physical layer and geometry. Powers in watts, densities in points/m^2,
/// distances in metres. Only the ratio P_u/I_th enters any closed form.
struct NetworkParams {
    double lambda_g = 0.01;
    double lambda_u = 0.01;
    double P_g = 1.0;
    double P_u = 1.0;
    double theta_u = 1.0;
    double I_th = 0.05;
    double alpha = 4.0;
    double R_d = 10.0;
    double R_s = 500.0;

    void validate() const;
    /// Area of the D2D disk, pi * R_d^2.
    double d2d_area() const;
};

struct QuadratureConfig {
    double rel_tol = 1e-8;
    double abs_tol = 1e-12;
    double mrfs_tail_tol = 1e-12;
    int max_subdivisions = 400;

    void validate() const;
};

/// Hard ceiling on the MRFS tie-count series.
inline constexpr int kMrfsMaxTerms = 10'000;

/// Per-combination, per-file selection and activation probabilities.
/// Matrices are J x N, row-major, zero for files outside the combination.
struct ActivationTable {
    std::size_t J = 0;
    std::size_t N = 0;
    std::vector<double> zeta_in;
    std::vector<double> xi_in;
    std::vector<double> vartheta_n;
    std::vector<double> xi_n;
    double xi = 0.0;

    double zeta(std::size_t i, std::size_t n) const { return zeta_in[i * N + n]; }
    double xi_of(std::size_t i, std::size_t n) const { return xi_in[i * N + n]; }
};

struct DensityReport {
    std::vector<double> lambda_g_n;
    double lambda_g_a = 0.0;
    std::vector<double> lambda_g_bar_n;
};

struct AnalyticalReport {
    Popularity popularity;
    ActivationTable activation;
    DensityReport densities;
    std::vector<double> sigma_n;  // conditional cache-hit
    double sigma = 0.0;
    std::vector<double> C_n;      // conditional coverage
    double C = 0.0;
    double tau = 0.0;             // successful content delivery probability
    double throughput = 0.0;      // deliveries per m^2 per slot
};

// --- selection and access -------------------------------------------------

/// zeta_i^n / c_i for RFS: independent of the caching probability itself.
double rfs_selection_coefficient(const std::vector<int>& combo, int n, const NetworkParams& net,
                                 const Popularity& pop);
/// zeta_i^n / c_i for MRFS, summing the tie-count series to mrfs_tail_tol.
double mrfs_selection_coefficient(const std::vector<int>& combo, int n, const NetworkParams& net,
                                  const Popularity& pop, const QuadratureConfig& quad);

double zeta_rfs(std::size_t i, int n, const NetworkParams& net, const ContentParams& content,
                const Popularity& pop, const CachingPolicy& policy);
double zeta_mrfs(std::size_t i, int n, const NetworkParams& net, const ContentParams& content,
                 const Popularity& pop, const CachingPolicy& policy, const QuadratureConfig& quad);

/// Probability that no request from another file's requesters is received
/// above I_th (Rayleigh fading, HPPP requesters).
double osa_probability(int n, const NetworkParams& net, const Popularity& pop);

ActivationTable activation_table(const NetworkParams& net, const ContentParams& content, const Popularity& pop,
                                 const CachingPolicy& policy, const QuadratureConfig& quad);

DensityReport active_densities(const ActivationTable& act, const NetworkParams& net);

/// Density of active file-m transmitters at distance r from a file-n requester.
double conditional_active_density(int m, int n, double r, const DensityReport& dens, const NetworkParams& net);

double cache_hit(int n, const DensityReport& dens, const NetworkParams& net);

/// Density of the distance to the nearest active file-n F-UE given one lies
/// within R_d. Throws NumericalError when lambda_g^n = 0.
double assoc_distance_pdf(int n, double l, const DensityReport& dens, const NetworkParams& net);

// --- coverage ----------------------------------------------------------------

/// Density-independent pieces of the coverage integrand for one NetworkParams.
/// The truncated-fading inner integral depends only on the link distance and
/// is memoised; the cache is internally synchronised.
class CoverageKernel {
public:
    CoverageKernel(const NetworkParams& net, const QuadratureConfig& quad);

    /// int_l^inf u / (1 + u^a/(theta l^a)) du = l^2 * same_file_scale()
    double same_file_scale() const { return same_file_scale_; }
    /// 2 pi^2 / (a sin(2 pi / a)) * theta^(2/a)
    double far_field_coeff() const { return far_field_coeff_; }
    /// (2 pi / a) (P_u/I_th)^(2/a) Gamma(2/a)
    double exclusion_credit() const { return exclusion_credit_; }
    /// e^{-theta I_th l^a / P_u} * int_0^inf s/(1+s) e^{-I_th u^a / P_u} u du with s = u^a/(theta l^a)
    double truncated_fading(double l) const;

    /// Cross-file exponent per unit density: far field - exclusion credit + truncated fading.
    double cross_file_exponent(double l, bool osa) const;

    /// tau_n = varsigma_n * C_n written as one integral over [0, R_d]
    /// (the pdf denominator cancels the cache-hit probability).
    double delivery_probability(double lambda_n, double lambda_bar, bool osa) const;
    double coverage(double lambda_n, double lambda_bar, bool osa) const;
    /// Partial derivatives of delivery_probability with respect to lambda_n and lambda_bar.
    std::pair<double, double> delivery_gradient(double lambda_n, double lambda_bar) const;

    const NetworkParams& network() const { return net_; }
    const QuadratureConfig& quadrature() const { return quad_; }

private:
    double compute_truncated_fading(double l) const;

    NetworkParams net_;
    QuadratureConfig quad_;
    double same_file_scale_ = 0.0;
    double far_field_coeff_ = 0.0;
    double exclusion_credit_ = 0.0;
    double sensing_scale_ = 0.0;
    mutable std::mutex memo_mutex_;
    mutable std::map<double, double> memo_;
};

double coverage(int n, const DensityReport& dens, const NetworkParams& net, const QuadratureConfig& quad);
/// Coverage with the same densities but without the OSA exclusion around
/// the requester (plain Rayleigh interference from all active F-UEs).
double coverage_baseline(int n, const DensityReport& dens, const NetworkParams& net, const QuadratureConfig& quad);

// --- SCDP ----------------------------------------------------------------------

enum class GradientMode { Analytic, FiniteDifference };

struct GradientResult {
    /// d tau / d c_i, analytic mode only.
    std::optional<std::vector<double>> raw;
    /// Component of the gradient in the simplex tangent space, (I - 11^T/J) grad.
    std::vector<double> projected;
};

/// Evaluates tau and its gradient for many caching policies on one network.
/// The selection coefficients zeta_i^n / c_i and the OSA probabilities do not
/// depend on the policy and are computed once.
class ScdpModel {
public:
    ScdpModel(const NetworkParams& net, const ContentParams& content, const Popularity& pop,
              const QuadratureConfig& quad = {});

    const CombinationSet& combinations() const { return combos_; }
    const Popularity& popularity() const { return pop_; }
    const NetworkParams& network() const { return net_; }
    const ContentParams& content() const { return content_; }
    const CoverageKernel& kernel() const { return *kernel_; }
    std::size_t J() const { return combos_.size(); }

    /// zeta_i^n / c_i
    double selection_coefficient(std::size_t i, std::size_t n) const { return coeff_[i * N_ + n]; }

    ActivationTable activation(const CachingPolicy& policy) const;
    AnalyticalReport report(const CachingPolicy& policy) const;
    double tau(const CachingPolicy& policy) const;
    std::vector<double> gradient(const CachingPolicy& policy) const;
    /// Simplex-preserving central differences along e_i - 1/J.
    std::vector<double> projected_gradient_fd(const CachingPolicy& policy, double h = 1e-5) const;

private:
    NetworkParams net_;
    ContentParams content_;
    QuadratureConfig quad_;
    Popularity pop_;
    CombinationSet combos_;
    std::size_t N_ = 0;
    std::vector<double> coeff_;     // J x N
    std::vector<double> vartheta_;  // N
    std::shared_ptr<CoverageKernel> kernel_;
};

AnalyticalReport scdp(const NetworkParams& net, const ContentParams& content, const Popularity& pop,
                      const CachingPolicy& policy, const QuadratureConfig& quad);

GradientResult scdp_gradient(const NetworkParams& net, const ContentParams& content, const Popularity& pop,
                             const CachingPolicy& policy, const QuadratureConfig& quad, GradientMode mode);

}  // namespace fogd2d
