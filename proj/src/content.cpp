#include "fogd2d/content.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace fogd2d {

std::string_view to_string(Scheme s) {
    return s == Scheme::RFS ? "RFS" : "MRFS";
}

Scheme parse_scheme(std::string_view text) {
    if (text == "RFS" || text == "rfs") return Scheme::RFS;
    if (text == "MRFS" || text == "mrfs") return Scheme::MRFS;
    throw ConfigError("unknown selection scheme '" + std::string(text) + "' (expected RFS or MRFS)");
}

void ContentParams::validate() const {
    if (N < 1) throw ConfigError("content.N must be >= 1");
    if (K < 1 || K > N) throw ConfigError("content.K must satisfy 1 <= K <= N");
    if (!std::isfinite(gamma) || gamma < 0.0) throw ConfigError("content.gamma must be finite and >= 0");
}

Popularity zipf_popularity(int N, double gamma) {
    if (N < 1) throw ConfigError("zipf_popularity: N must be >= 1");
    if (!std::isfinite(gamma) || gamma < 0.0) throw ConfigError("zipf_popularity: gamma must be finite and >= 0");

    Popularity pop;
    pop.p.resize(static_cast<std::size_t>(N));
    for (int n = 1; n <= N; ++n) pop.p[static_cast<std::size_t>(n - 1)] = std::pow(static_cast<double>(n), -gamma);
    // Summing smallest-first keeps the harmonic-type sum accurate for large N.
    double total = 0.0;
    for (auto it = pop.p.rbegin(); it != pop.p.rend(); ++it) total += *it;
    for (double& v : pop.p) v /= total;
    // Second pass absorbs the drift left by the division.
    double again = 0.0;
    for (auto it = pop.p.rbegin(); it != pop.p.rend(); ++it) again += *it;
    for (double& v : pop.p) v /= again;
    return pop;
}

std::size_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    // Exact while the running value fits: r * (n-k+i) / i is always integral.
    unsigned __int128 r = 1;
    for (int i = 1; i <= k; ++i) {
        r = r * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
        if (r > std::numeric_limits<std::size_t>::max()) return std::numeric_limits<std::size_t>::max();
    }
    return static_cast<std::size_t>(r);
}

CombinationSet::CombinationSet(int N, int K, std::vector<std::vector<int>> combos)
    : N_(N), K_(K), combos_(std::move(combos)) {
    containing_.assign(static_cast<std::size_t>(N), {});
    member_.assign(combos_.size(), std::vector<char>(static_cast<std::size_t>(N), 0));
    for (std::size_t i = 0; i < combos_.size(); ++i) {
        for (int n : combos_[i]) {
            containing_[static_cast<std::size_t>(n)].push_back(i);
            member_[i][static_cast<std::size_t>(n)] = 1;
        }
    }
}

bool CombinationSet::contains(std::size_t i, int n) const {
    return n >= 0 && n < N_ && member_[i][static_cast<std::size_t>(n)] != 0;
}

CombinationSet enumerate_combinations(int N, int K, std::size_t cap) {
    if (N < 1 || K < 1) throw ConfigError("enumerate_combinations: N and K must be >= 1");
    if (K > N) throw ConfigError("enumerate_combinations: K > N");
    const std::size_t J = binomial(N, K);
    if (J > cap) {
        std::ostringstream os;
        os << "enumerate_combinations: C(" << N << "," << K << ") = " << J
           << " combinations exceeds the enumeration cap of " << cap
           << "; every policy, activation table and gradient is a vector of that length";
        throw ConfigError(os.str());
    }

    std::vector<std::vector<int>> combos;
    combos.reserve(J);
    std::vector<int> idx(static_cast<std::size_t>(K));
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
        combos.push_back(idx);
        int pos = K - 1;
        while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == N - K + pos) --pos;
        if (pos < 0) break;
        ++idx[static_cast<std::size_t>(pos)];
        for (int q = pos + 1; q < K; ++q) idx[static_cast<std::size_t>(q)] = idx[static_cast<std::size_t>(q - 1)] + 1;
    }
    return CombinationSet(N, K, std::move(combos));
}

void CachingPolicy::validate(double tol) const {
    if (c.empty()) throw ConfigError("caching policy is empty");
    double total = 0.0;
    for (double v : c) {
        if (!std::isfinite(v) || v < -tol || v > 1.0 + tol) throw ConfigError("caching policy entry outside [0,1]");
        total += v;
    }
    if (std::abs(total - 1.0) > tol) {
        std::ostringstream os;
        os << "caching policy sums to " << total << ", expected 1";
        throw ConfigError(os.str());
    }
}

CachingPolicy uniform_policy(std::size_t J) {
    if (J == 0) throw ConfigError("uniform_policy: J must be >= 1");
    return CachingPolicy{std::vector<double>(J, 1.0 / static_cast<double>(J))};
}

CachingPolicy mpc_policy(const CombinationSet& combos, const Popularity& pop) {
    std::size_t best = 0;
    double best_mass = -1.0;
    for (std::size_t i = 0; i < combos.size(); ++i) {
        double mass = 0.0;
        for (int n : combos[i]) mass += pop[static_cast<std::size_t>(n)];
        // Strict comparison keeps the lexicographically first maximizer. The
        // epsilon stops rounding noise from breaking exact popularity ties.
        if (mass > best_mass + 1e-15) {
            best_mass = mass;
            best = i;
        }
    }
    CachingPolicy policy{std::vector<double>(combos.size(), 0.0)};
    policy.c[best] = 1.0;
    return policy;
}

std::size_t sample_cache(const CachingPolicy& policy, double draw) {
    double cdf = 0.0;
    for (std::size_t i = 0; i < policy.size(); ++i) {
        cdf += policy[i];
        if (draw < cdf) return i;
    }
    // draw landed in the rounding gap above the final CDF value.
    for (std::size_t i = policy.size(); i-- > 0;)
        if (policy[i] > 0.0) return i;
    return policy.size() - 1;
}

}  // namespace fogd2d
