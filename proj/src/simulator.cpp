#include "fogd2d/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

namespace fogd2d {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kZ95 = 1.959963984540054;

// Stream tags for counter-based draws within a slot.
constexpr std::uint64_t kTagFading = 0xfad1;
constexpr std::uint64_t kTagSelect = 0x5e1ec7;
constexpr std::uint64_t kTagSlot = 0x5107;
constexpr std::uint64_t kTagServer = 0x5e7e;

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            try {
                for (std::size_t i = next++; i < count; i = next++) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = count;
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

Point uniform_in_disk(Rng& rng, double radius) {
    const double r = radius * std::sqrt(rng.uniform());
    const double phi = 2.0 * kPi * rng.uniform();
    return Point{r * std::cos(phi), r * std::sin(phi)};
}

}  // namespace

// --- grid ------------------------------------------------------------------------

PointGrid::PointGrid(const std::vector<Point>& points, double half_width, double cell)
    : origin_(-half_width), cell_(cell) {
    side_ = std::max(1, static_cast<int>(std::ceil(2.0 * half_width / cell)));
    const std::size_t cells = static_cast<std::size_t>(side_) * static_cast<std::size_t>(side_);
    std::vector<std::uint32_t> counts(cells + 1, 0);
    std::vector<std::uint32_t> owner(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        const std::size_t c = static_cast<std::size_t>(cell_of(points[i].y)) * static_cast<std::size_t>(side_) +
                              static_cast<std::size_t>(cell_of(points[i].x));
        owner[i] = static_cast<std::uint32_t>(c);
        ++counts[c + 1];
    }
    for (std::size_t c = 0; c < cells; ++c) counts[c + 1] += counts[c];
    start_ = counts;
    items_.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) items_[counts[owner[i]]++] = static_cast<std::uint32_t>(i);
}

int PointGrid::cell_of(double v) const {
    const int c = static_cast<int>(std::floor((v - origin_) / cell_));
    return std::clamp(c, 0, side_ - 1);
}

// --- realization -------------------------------------------------------------------

double NetworkRealization::link_fading(std::size_t fue, std::size_t cue) const {
    return -std::log(bits_to_unit(mix_keys(slot_key ^ kTagFading, fue, cue)));
}

// --- simulator ---------------------------------------------------------------------

NetworkSimulator::NetworkSimulator(const NetworkParams& net, const ContentParams& content, const Popularity& pop,
                                   const CachingPolicy& policy, const SimulatorOptions& options)
    : net_(net), content_(content), pop_(pop), policy_(policy), options_(options) {
    net_.validate();
    content_.validate();
    if (pop_.size() != static_cast<std::size_t>(content_.N)) throw ConfigError("popularity length differs from content.N");
    combos_ = enumerate_combinations(content_.N, content_.K);
    if (policy_.size() != combos_.size()) throw ConfigError("caching policy length differs from C(N,K)");
    policy_.validate();
    double acc = 0.0;
    for (double p : pop_.p) request_cdf_.push_back(acc += p);
    sensing_radius_ = std::pow(options_.sensing_tail * net_.P_u / net_.I_th, 1.0 / net_.alpha);
}

NetworkRealization NetworkSimulator::sample_network(Rng& rng, std::uint64_t slot_key) const {
    NetworkRealization real;
    real.slot_key = slot_key;
    const double disk = kPi * net_.R_s * net_.R_s;

    const std::uint64_t n_fue = rng.poisson(net_.lambda_g * disk);
    real.fue_points.reserve(n_fue);
    real.fue_cache.reserve(n_fue);
    for (std::uint64_t k = 0; k < n_fue; ++k) {
        real.fue_points.push_back(uniform_in_disk(rng, net_.R_s));
        real.fue_cache.push_back(static_cast<std::uint32_t>(sample_cache(policy_, rng.uniform())));
    }

    auto draw_request = [&] {
        const double u = rng.uniform();
        const auto it = std::upper_bound(request_cdf_.begin(), request_cdf_.end(), u);
        return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(it - request_cdf_.begin()), pop_.size() - 1));
    };
    const std::uint64_t n_cue = rng.poisson(net_.lambda_u * disk);
    real.cue_points.reserve(n_cue + 1);
    real.cue_request.reserve(n_cue + 1);
    for (std::uint64_t k = 0; k < n_cue; ++k) {
        real.cue_points.push_back(uniform_in_disk(rng, net_.R_s));
        real.cue_request.push_back(draw_request());
    }
    real.cue_points.push_back(Point{0.0, 0.0});
    real.cue_request.push_back(draw_request());

    real.cue_grid = PointGrid(real.cue_points, net_.R_s, net_.R_d);
    return real;
}

int NetworkSimulator::select_candidate(std::size_t fue, const NetworkRealization& real, bool include_typical) const {
    const auto& combo = combos_[real.fue_cache[fue]];
    std::vector<int> counts(combo.size(), 0);
    const std::size_t typical = real.typical_index();
    real.cue_grid.for_each_within(real.cue_points, real.fue_points[fue], net_.R_d, [&](std::size_t cue, double) {
        if (cue == typical && !include_typical) return;
        const int req = real.cue_request[cue];
        for (std::size_t k = 0; k < combo.size(); ++k)
            if (combo[k] == req) ++counts[k];
    });

    std::vector<int> eligible;
    if (content_.scheme == Scheme::RFS) {
        for (std::size_t k = 0; k < combo.size(); ++k)
            if (counts[k] > 0) eligible.push_back(combo[k]);
    } else {
        const int top = *std::max_element(counts.begin(), counts.end());
        if (top > 0)
            for (std::size_t k = 0; k < combo.size(); ++k)
                if (counts[k] == top) eligible.push_back(combo[k]);
    }
    if (eligible.empty()) return -1;
    if (eligible.size() == 1) return eligible.front();
    const double u = bits_to_unit(mix_keys(real.slot_key ^ kTagSelect, fue));
    const auto pick = std::min(eligible.size() - 1, static_cast<std::size_t>(u * static_cast<double>(eligible.size())));
    return eligible[pick];
}

bool NetworkSimulator::sense_osa(std::size_t fue, int candidate, const NetworkRealization& real,
                                 bool include_typical) const {
    const std::size_t typical = real.typical_index();
    const double half_alpha = 0.5 * net_.alpha;
    bool clear = true;
    real.cue_grid.for_each_within(real.cue_points, real.fue_points[fue], sensing_radius_, [&](std::size_t cue, double d2) {
        if (!clear || real.cue_request[cue] == candidate) return;
        if (cue == typical && !include_typical) return;
        const double received = net_.P_u * real.link_fading(fue, cue) * std::pow(d2, -half_alpha);
        if (received > net_.I_th) clear = false;
    });
    return clear;
}

void NetworkSimulator::decide(std::size_t fue, const NetworkRealization& real, SlotOutcome& out) const {
    const int cand = select_candidate(fue, real, options_.typical_feeds_selection);
    out.fue_candidate[fue] = cand;
    out.fue_active[fue] = cand >= 0 && sense_osa(fue, cand, real, true) ? 1 : 0;
}

SlotOutcome NetworkSimulator::run_slot(const NetworkRealization& real, std::optional<double> roi_radius) const {
    SlotOutcome out;
    const std::size_t nf = real.fue_points.size();
    out.fue_candidate.assign(nf, -1);
    out.fue_active.assign(nf, 0);
    const double roi2 = roi_radius ? *roi_radius * *roi_radius : std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < nf; ++f) {
        const Point p = real.fue_points[f];
        if (p.x * p.x + p.y * p.y > roi2) continue;
        decide(f, real, out);
    }
    if (!roi_radius) resolve_typical(real, out);
    return out;
}

void NetworkSimulator::resolve_typical(const NetworkRealization& real, SlotOutcome& out) const {
    out.typical_server.reset();
    out.typical_distance.reset();
    out.typical_sir.reset();
    out.typical_success = false;

    const int want = real.typical_request();
    const double rd2 = net_.R_d * net_.R_d;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < real.fue_points.size(); ++f) {
        if (!out.fue_active[f] || out.fue_candidate[f] != want) continue;
        const Point p = real.fue_points[f];
        const double d2 = p.x * p.x + p.y * p.y;
        if (d2 <= rd2 && d2 < best) {
            best = d2;
            out.typical_server = f;
        }
    }
    if (!out.typical_server) return;

    const std::size_t typical = real.typical_index();
    const double half_alpha = 0.5 * net_.alpha;
    double interference = 0.0;
    for (std::size_t f = 0; f < real.fue_points.size(); ++f) {
        if (!out.fue_active[f] || f == *out.typical_server) continue;
        const Point p = real.fue_points[f];
        interference += net_.P_g * real.link_fading(f, typical) * std::pow(p.x * p.x + p.y * p.y, -half_alpha);
    }
    // The server sensed only other-file requesters, so its downlink fading is
    // independent of any sensing coefficient.
    const double h0 = -std::log(bits_to_unit(mix_keys(real.slot_key ^ kTagServer, *out.typical_server)));
    const double signal = net_.P_g * h0 * std::pow(best, -half_alpha);
    const double sir = interference > 0.0 ? signal / interference : std::numeric_limits<double>::infinity();
    out.typical_distance = std::sqrt(best);
    out.typical_sir = sir;
    out.typical_success = sir >= net_.theta_u;
}

// --- estimators ----------------------------------------------------------------------

SimulationEstimate estimate_mean(const std::vector<double>& samples) {
    SimulationEstimate e;
    e.replications = samples.size();
    e.conditioning_count = samples.size();
    if (samples.empty()) {
        e.missing = true;
        return e;
    }
    double sum = 0.0;
    for (double v : samples) sum += v;
    e.mean = sum / static_cast<double>(samples.size());
    if (samples.size() < 2) {
        e.half_width_95 = std::numeric_limits<double>::infinity();
        return e;
    }
    double ss = 0.0;
    for (double v : samples) ss += (v - e.mean) * (v - e.mean);
    const double var = ss / static_cast<double>(samples.size() - 1);
    e.half_width_95 = kZ95 * std::sqrt(var / static_cast<double>(samples.size()));
    return e;
}

SimulationEstimate estimate_ratio(const std::vector<double>& numer, const std::vector<double>& denom) {
    SimulationEstimate e;
    e.replications = numer.size();
    double a = 0.0, b = 0.0;
    for (std::size_t r = 0; r < numer.size(); ++r) {
        a += numer[r];
        b += denom[r];
    }
    e.conditioning_count = static_cast<std::size_t>(std::llround(b));
    if (b <= 0.0) {
        e.missing = true;
        return e;
    }
    e.mean = a / b;
    const std::size_t n = numer.size();
    if (n < 2) {
        e.half_width_95 = std::numeric_limits<double>::infinity();
        return e;
    }
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const double resid = numer[r] - e.mean * denom[r];
        ss += resid * resid;
    }
    const double mean_denom = b / static_cast<double>(n);
    const double var = ss / (static_cast<double>(n) * static_cast<double>(n - 1)) / (mean_denom * mean_denom);
    e.half_width_95 = kZ95 * std::sqrt(var);
    return e;
}

// --- drivers ---------------------------------------------------------------------------

NetworkRealization sample_network(const NetworkParams& net, const ContentParams& content, const Popularity& pop,
                                  const CachingPolicy& policy, std::uint64_t seed) {
    NetworkSimulator sim(net, content, pop, policy);
    Rng rng(seed);
    return sim.sample_network(rng, mix_keys(seed, kTagSlot));
}

SlotOutcome run_slot(const NetworkSimulator& sim, const NetworkRealization& real) { return sim.run_slot(real); }

namespace {

struct SlotRecord {
    double fue_total = 0.0;
    std::vector<double> active, candidates;
    // Per forced typical request; NaN where not evaluated.
    std::vector<double> hit, success, distance;
    double direct_success = 0.0;
};

}  // namespace

MonteCarloReport monte_carlo(const NetworkParams& net, const ContentParams& content, const Popularity& pop,
                             const CachingPolicy& policy, const MonteCarloConfig& config) {
    if (config.replications < 1) throw ConfigError("monte_carlo: replications must be >= 1");
    const NetworkSimulator sim(net, content, pop, policy, config.options);
    const std::size_t N = pop.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double reach = std::max(net.R_d, sim.sensing_radius());

    std::vector<SlotRecord> records(config.replications);
    parallel_for(config.replications, config.threads, [&](std::size_t r) {
        Rng rng(mix_keys(config.master_seed, r));
        NetworkRealization real = sim.sample_network(rng, mix_keys(config.master_seed, r, kTagSlot));
        SlotOutcome out = sim.run_slot(real);

        SlotRecord rec;
        rec.fue_total = static_cast<double>(real.fue_points.size());
        rec.active.assign(N, 0.0);
        rec.candidates.assign(N, 0.0);
        for (std::size_t f = 0; f < real.fue_points.size(); ++f) {
            if (out.fue_candidate[f] < 0) continue;
            const auto n = static_cast<std::size_t>(out.fue_candidate[f]);
            rec.candidates[n] += 1.0;
            if (out.fue_active[f]) rec.active[n] += 1.0;
        }
        rec.hit.assign(N, nan);
        rec.success.assign(N, nan);
        rec.distance.assign(N, nan);
        rec.direct_success = out.typical_success ? 1.0 : 0.0;

        auto record_typical = [&](const SlotOutcome& o, std::size_t n) {
            rec.hit[n] = o.typical_server ? 1.0 : 0.0;
            rec.success[n] = o.typical_success ? 1.0 : 0.0;
            if (o.typical_distance) rec.distance[n] = *o.typical_distance;
        };
        const int sampled = real.typical_request();
        record_typical(out, static_cast<std::size_t>(sampled));

        if (config.stratified) {
            // Only F-UEs that can hear the typical requester change their decision.
            std::vector<std::size_t> near;
            for (std::size_t f = 0; f < real.fue_points.size(); ++f) {
                const Point p = real.fue_points[f];
                if (p.x * p.x + p.y * p.y <= reach * reach) near.push_back(f);
            }
            std::vector<int> saved_cand(near.size());
            std::vector<char> saved_active(near.size());
            for (std::size_t k = 0; k < near.size(); ++k) {
                saved_cand[k] = out.fue_candidate[near[k]];
                saved_active[k] = out.fue_active[near[k]];
            }
            for (std::size_t n = 0; n < N; ++n) {
                if (static_cast<int>(n) == sampled) continue;
                real.set_typical_request(static_cast<int>(n));
                SlotOutcome forced = out;
                for (std::size_t f : near) {
                    forced.fue_candidate[f] = sim.select_candidate(f, real, config.options.typical_feeds_selection);
                    forced.fue_active[f] =
                        forced.fue_candidate[f] >= 0 && sim.sense_osa(f, forced.fue_candidate[f], real, true) ? 1 : 0;
                }
                sim.resolve_typical(real, forced);
                record_typical(forced, n);
            }
            real.set_typical_request(sampled);
        }
        records[r] = std::move(rec);
    });

    MonteCarloReport rep;
    rep.replications = config.replications;
    const std::size_t R = config.replications;
    std::vector<double> totals(R), active_all(R);
    for (std::size_t r = 0; r < R; ++r) {
        totals[r] = records[r].fue_total;
        for (double v : records[r].active) active_all[r] += v;
    }
    rep.xi = estimate_ratio(active_all, totals);

    rep.association_distances.assign(N, {});
    std::vector<double> tau_samples(R, 0.0), direct(R);
    for (std::size_t n = 0; n < N; ++n) {
        std::vector<double> act(R), cand(R), hits, hit_num, succ_num;
        for (std::size_t r = 0; r < R; ++r) {
            act[r] = records[r].active[n];
            cand[r] = records[r].candidates[n];
            if (!std::isnan(records[r].hit[n])) {
                hits.push_back(records[r].hit[n]);
                hit_num.push_back(records[r].hit[n]);
                succ_num.push_back(records[r].success[n]);
            }
            if (!std::isnan(records[r].distance[n])) rep.association_distances[n].push_back(records[r].distance[n]);
        }
        rep.xi_n.push_back(estimate_ratio(act, totals));
        rep.osa_n.push_back(estimate_ratio(act, cand));
        rep.sigma_n.push_back(estimate_mean(hits));
        rep.C_n.push_back(estimate_ratio(succ_num, hit_num));
        rep.C_n.back().replications = hits.size();
    }
    for (std::size_t r = 0; r < R; ++r) {
        direct[r] = records[r].direct_success;
        for (std::size_t n = 0; n < N; ++n)
            if (!std::isnan(records[r].success[n])) tau_samples[r] += pop[n] * records[r].success[n];
    }
    rep.tau_direct = estimate_mean(direct);
    rep.tau = config.stratified ? estimate_mean(tau_samples) : rep.tau_direct;
    rep.throughput = rep.tau;
    rep.throughput.mean *= net.lambda_u;
    rep.throughput.half_width_95 *= net.lambda_u;
    return rep;
}

std::vector<SimulationEstimate> radial_density_profile(const NetworkParams& net, const ContentParams& content,
                                                       const Popularity& pop, const CachingPolicy& policy, int n,
                                                       int m, const std::vector<double>& bin_edges,
                                                       std::size_t replications, std::uint64_t seed,
                                                       const MonteCarloConfig& base) {
    if (bin_edges.size() < 2) throw ConfigError("radial_density_profile: need at least two bin edges");
    for (std::size_t b = 1; b < bin_edges.size(); ++b)
        if (!(bin_edges[b] > bin_edges[b - 1])) throw ConfigError("radial_density_profile: bin edges must increase");
    if (bin_edges.front() < 0.0 || bin_edges.back() > 0.5 * net.R_s)
        throw ConfigError("radial_density_profile: bins must lie within [0, R_s/2]");
    if (n < 0 || m < 0 || static_cast<std::size_t>(n) >= pop.size() || static_cast<std::size_t>(m) >= pop.size())
        throw ConfigError("radial_density_profile: file index out of range");
    if (replications < 1) throw ConfigError("radial_density_profile: replications must be >= 1");

    const NetworkSimulator sim(net, content, pop, policy, base.options);
    const std::size_t bins = bin_edges.size() - 1;
    std::vector<double> area(bins);
    for (std::size_t b = 0; b < bins; ++b)
        area[b] = kPi * (bin_edges[b + 1] * bin_edges[b + 1] - bin_edges[b] * bin_edges[b]);

    std::vector<std::vector<double>> density(bins, std::vector<double>(replications, 0.0));
    parallel_for(replications, base.threads, [&](std::size_t r) {
        Rng rng(mix_keys(seed, r));
        NetworkRealization real = sim.sample_network(rng, mix_keys(seed, r, kTagSlot));
        real.set_typical_request(n);
        const SlotOutcome out = sim.run_slot(real, bin_edges.back());
        for (std::size_t f = 0; f < real.fue_points.size(); ++f) {
            if (!out.fue_active[f] || out.fue_candidate[f] != m) continue;
            const Point p = real.fue_points[f];
            const double d = std::hypot(p.x, p.y);
            const auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), d);
            if (it == bin_edges.begin() || it == bin_edges.end()) continue;
            const auto b = static_cast<std::size_t>(it - bin_edges.begin()) - 1;
            density[b][r] += 1.0 / area[b];
        }
    });

    std::vector<SimulationEstimate> profile;
    for (std::size_t b = 0; b < bins; ++b) profile.push_back(estimate_mean(density[b]));
    return profile;
}

}  // namespace fogd2d
