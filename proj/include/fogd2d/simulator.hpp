#pragma once

#include <cstddef>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "fogd2d/analytics.hpp"
#include "fogd2d/content.hpp"
#include "fogd2d/rng.hpp"

namespace fogd2d {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct SimulatorOptions {
    /// Sensing pairs are evaluated out to the distance where I_th d^alpha / P_u
    /// reaches this value; a farther requester breaches the threshold with
    /// probability below e^{-sensing_tail}.
    double sensing_tail = 40.0;
    /// Whether the typical requester's own beacon counts toward candidate
    /// selection at nearby F-UEs. Its beacon always counts toward sensing.
    bool typical_feeds_selection = true;
};

/// Uniform bucket grid over C-UE positions for fixed-radius neighbour queries.
class PointGrid {
public:
    PointGrid() = default;
    PointGrid(const std::vector<Point>& points, double half_width, double cell);

    template <class F>
    void for_each_within(const std::vector<Point>& points, Point centre, double radius, F&& f) const;

private:
    int cell_of(double v) const;

    double origin_ = 0.0;
    double cell_ = 1.0;
    int side_ = 0;
    std::vector<std::uint32_t> start_;
    std::vector<std::uint32_t> items_;
};

/// One sampled slot. The typical C-UE sits at the origin and is the last
/// entry of cue_points.
struct NetworkRealization {
    std::uint64_t slot_key = 0;
    std::vector<Point> fue_points;
    std::vector<Point> cue_points;
    std::vector<std::uint32_t> fue_cache;   // combination index per F-UE
    std::vector<int> cue_request;           // file index per C-UE, typical last
    PointGrid cue_grid;

    std::size_t typical_index() const { return cue_points.size() - 1; }
    int typical_request() const { return cue_request.back(); }
    void set_typical_request(int n) { cue_request.back() = n; }

    /// Reciprocal unit-mean exponential power gain of the (F-UE, C-UE) link in
    /// this slot. Derived from the slot key, never stored.
    double link_fading(std::size_t fue, std::size_t cue) const;
};

struct SlotOutcome {
    std::vector<int> fue_candidate;  // -1 when the F-UE stays silent
    std::vector<char> fue_active;
    std::optional<std::size_t> typical_server;
    std::optional<double> typical_distance;
    std::optional<double> typical_sir;
    bool typical_success = false;
};

struct SimulationEstimate {
    double mean = 0.0;
    double half_width_95 = 0.0;
    std::size_t replications = 0;
    std::size_t conditioning_count = 0;
    /// No slot realised the conditioning event; mean is meaningless.
    bool missing = false;

    bool covers(double value) const { return !missing && std::abs(value - mean) <= half_width_95; }
};

struct MonteCarloConfig {
    std::size_t replications = 2000;
    std::uint64_t master_seed = 1;
    unsigned threads = 0;  // 0: hardware concurrency
    /// Evaluate the typical requester once per file per slot (forced request)
    /// rather than only for its sampled request.
    bool stratified = true;
    SimulatorOptions options{};
};

struct MonteCarloReport {
    std::vector<SimulationEstimate> xi_n;
    SimulationEstimate xi;
    /// Active fraction among F-UEs holding file n as candidate.
    std::vector<SimulationEstimate> osa_n;
    std::vector<SimulationEstimate> sigma_n;
    std::vector<SimulationEstimate> C_n;
    SimulationEstimate tau;         // sum_n p_n * (hit and covered | request n)
    SimulationEstimate tau_direct;  // success frequency at the sampled request
    SimulationEstimate throughput;
    /// Serving distances per file across slots, for distribution checks.
    std::vector<std::vector<double>> association_distances;
    std::size_t replications = 0;
};

/// Slot-level protocol simulator over a disk of radius R_s.
class NetworkSimulator {
public:
    NetworkSimulator(const NetworkParams& net, const ContentParams& content, const Popularity& pop,
                     const CachingPolicy& policy, const SimulatorOptions& options = {});

    NetworkRealization sample_network(Rng& rng, std::uint64_t slot_key) const;

    int select_candidate(std::size_t fue, const NetworkRealization& real, bool include_typical) const;
    bool sense_osa(std::size_t fue, int candidate, const NetworkRealization& real, bool include_typical) const;
    /// Full protocol. If roi_radius is set only F-UEs within it of the origin
    /// are evaluated (the rest report no candidate) and no SIR is computed.
    SlotOutcome run_slot(const NetworkRealization& real, std::optional<double> roi_radius = std::nullopt) const;

    /// Association and SIR at the typical C-UE given per-F-UE decisions.
    void resolve_typical(const NetworkRealization& real, SlotOutcome& out) const;

    const NetworkParams& network() const { return net_; }
    const ContentParams& content() const { return content_; }
    const Popularity& popularity() const { return pop_; }
    const CombinationSet& combinations() const { return combos_; }
    double sensing_radius() const { return sensing_radius_; }

private:
    void decide(std::size_t fue, const NetworkRealization& real, SlotOutcome& out) const;

    NetworkParams net_;
    ContentParams content_;
    Popularity pop_;
    CachingPolicy policy_;
    SimulatorOptions options_;
    CombinationSet combos_;
    std::vector<double> request_cdf_;
    double sensing_radius_ = 0.0;
};

// Spec-shaped entry points.
NetworkRealization sample_network(const NetworkParams& net, const ContentParams& content, const Popularity& pop,
                                  const CachingPolicy& policy, std::uint64_t seed);

SlotOutcome run_slot(const NetworkSimulator& sim, const NetworkRealization& real);

MonteCarloReport monte_carlo(const NetworkParams& net, const ContentParams& content, const Popularity& pop,
                             const CachingPolicy& policy, const MonteCarloConfig& config);

/// Density (points/m^2) of active F-UEs with candidate `m` in annuli around a
/// typical C-UE forced to request file `n`.
std::vector<SimulationEstimate> radial_density_profile(const NetworkParams& net, const ContentParams& content,
                                                       const Popularity& pop, const CachingPolicy& policy, int n,
                                                       int m, const std::vector<double>& bin_edges,
                                                       std::size_t replications, std::uint64_t seed,
                                                       const MonteCarloConfig& base = {});

/// Mean and normal-approximation 95% half-width of i.i.d. samples.
SimulationEstimate estimate_mean(const std::vector<double>& samples);
/// Ratio of sums with a delta-method 95% half-width.
SimulationEstimate estimate_ratio(const std::vector<double>& numer, const std::vector<double>& denom);

// --- grid template ------------------------------------------------------------

template <class F>
void PointGrid::for_each_within(const std::vector<Point>& points, Point centre, double radius, F&& f) const {
    if (side_ == 0) return;
    const int x0 = cell_of(centre.x - radius), x1 = cell_of(centre.x + radius);
    const int y0 = cell_of(centre.y - radius), y1 = cell_of(centre.y + radius);
    const double r2 = radius * radius;
    for (int cy = y0; cy <= y1; ++cy) {
        for (int cx = x0; cx <= x1; ++cx) {
            const std::size_t cell = static_cast<std::size_t>(cy) * static_cast<std::size_t>(side_) + static_cast<std::size_t>(cx);
            for (std::uint32_t k = start_[cell]; k < start_[cell + 1]; ++k) {
                const std::uint32_t idx = items_[k];
                const double dx = points[idx].x - centre.x, dy = points[idx].y - centre.y;
                const double d2 = dx * dx + dy * dy;
                if (d2 <= r2) f(static_cast<std::size_t>(idx), d2);
            }
        }
    }
}

}  // namespace fogd2d
