#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "fogd2d/errors.hpp"

namespace fogd2d {

/// Candidate-file selection rule applied by an F-UE over its locally
/// requested cached files.
enum class Scheme { RFS, MRFS };

std::string_view to_string(Scheme s);
Scheme parse_scheme(std::string_view text);

struct ContentParams {
    int N = 5;          // library size
    int K = 3;          // cache size (files)
    double gamma = 1.0; // Zipf exponent
    Scheme scheme = Scheme::RFS;

    void validate() const;
};

/// File popularity. Files are 0-based internally: index 0 is the most
/// popular file.
struct Popularity {
    std::vector<double> p;

    std::size_t size() const { return p.size(); }
    double operator[](std::size_t n) const { return p[n]; }
};

Popularity zipf_popularity(int N, double gamma);

inline constexpr std::size_t kDefaultEnumerationCap = 1'000'000;

/// All size-K subsets of {0..N-1} in lexicographic order. Every vector
/// indexed by a combination index (policies, activation tables, gradients)
/// uses this ordering.
class CombinationSet {
public:
    CombinationSet() = default;
    CombinationSet(int N, int K, std::vector<std::vector<int>> combos);

    int library_size() const { return N_; }
    int cache_size() const { return K_; }
    std::size_t size() const { return combos_.size(); }
    const std::vector<int>& operator[](std::size_t i) const { return combos_[i]; }
    const std::vector<std::vector<int>>& combos() const { return combos_; }

    bool contains(std::size_t i, int n) const;
    /// Indices of combinations holding file n.
    const std::vector<std::size_t>& containing(int n) const { return containing_[static_cast<std::size_t>(n)]; }

private:
    int N_ = 0;
    int K_ = 0;
    std::vector<std::vector<int>> combos_;
    std::vector<std::vector<std::size_t>> containing_;
    std::vector<std::vector<char>> member_;
};

/// Exact binomial coefficient, saturating at SIZE_MAX.
std::size_t binomial(int n, int k);

CombinationSet enumerate_combinations(int N, int K, std::size_t cap = kDefaultEnumerationCap);

/// Probability of caching each combination.
struct CachingPolicy {
    std::vector<double> c;

    std::size_t size() const { return c.size(); }
    double operator[](std::size_t i) const { return c[i]; }

    /// Throws ConfigError unless entries lie in [0,1] and sum to 1 within tol.
    void validate(double tol = 1e-9) const;
};

CachingPolicy uniform_policy(std::size_t J);

/// Deterministic placement on the combination with the largest total
/// popularity. Ties resolve to the lexicographically first combination.
CachingPolicy mpc_policy(const CombinationSet& combos, const Popularity& pop);

/// Inverse-CDF draw of a combination index (0-based) from a uniform draw in [0,1).
std::size_t sample_cache(const CachingPolicy& policy, double draw);

}  // namespace fogd2d
