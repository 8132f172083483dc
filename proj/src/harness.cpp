#include "fogd2d/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fogd2d {
namespace {

using nlohmann::json;

constexpr double kOrderingSlack = 1e-7;

// --- strict JSON reading -------------------------------------------------------

class ObjectReader {
public:
    ObjectReader(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
        if (!obj_.is_object()) throw ConfigError(where_ + ": expected an object");
    }
    ~ObjectReader() = default;

    template <class T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        if (it == obj_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where_ + "." + key + ": wrong type");
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (const auto& [key, value] : obj_.items())
            if (!seen_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }

private:
    const json& obj_;
    std::string where_;
    std::set<std::string> seen_;
};

bool is_registered_axis(std::string_view axis) {
    return std::find(std::begin(kSweepAxes), std::end(kSweepAxes), axis) != std::end(kSweepAxes);
}

std::string tagged(std::string metric, const std::string& tag) {
    return tag.empty() ? metric : metric + ":" + tag;
}

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

double parse_number(std::string_view text, const char* field) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw ConfigError(std::string("csv: malformed ") + field + " '" + std::string(text) + "'");
    return v;
}

template <class T>
T parse_integer(std::string_view text, const char* field) {
    T v{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw ConfigError(std::string("csv: malformed ") + field + " '" + std::string(text) + "'");
    return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) return out;
        start = pos + 1;
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << text;
    out.close();
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::string sanitize(std::string s) {
    for (char& ch : s)
        if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-' || ch == '_')) ch = '_';
    return s;
}

void add_row(std::vector<ResultRow>& rows, const ResultRow& proto, std::string metric, std::optional<int> file,
             std::optional<double> analytical, const SimulationEstimate* sim) {
    ResultRow r = proto;
    r.metric = std::move(metric);
    r.file_index = file;
    r.analytical = analytical;
    if (sim && !sim->missing) {
        r.sim_mean = sim->mean;
        r.sim_ci95 = sim->half_width_95;
    } else {
        r.replications = 0;
    }
    if (!r.analytical && !r.sim_mean) return;
    rows.push_back(std::move(r));
}

}  // namespace

// --- enums -----------------------------------------------------------------------

std::string_view to_string(PolicySource s) {
    switch (s) {
        case PolicySource::Uniform: return "uniform";
        case PolicySource::Mpc: return "mpc";
        case PolicySource::Explicit: return "explicit";
        case PolicySource::Optimizer: return "optimizer";
    }
    return "uniform";
}

PolicySource parse_policy_source(std::string_view text) {
    if (text == "uniform") return PolicySource::Uniform;
    if (text == "mpc") return PolicySource::Mpc;
    if (text == "explicit") return PolicySource::Explicit;
    if (text == "optimizer") return PolicySource::Optimizer;
    throw ConfigError("unknown policy source '" + std::string(text) + "' (uniform, mpc, explicit, optimizer)");
}

// --- config ----------------------------------------------------------------------

void apply_sweep_value(std::string_view axis, double value, NetworkParams& net, ContentParams& content) {
    if (axis == "lambda_u") net.lambda_u = value;
    else if (axis == "lambda_g") net.lambda_g = value;
    else if (axis == "gamma") content.gamma = value;
    else if (axis == "I_th") net.I_th = value;
    else if (axis == "theta_u") net.theta_u = value;
    else if (axis == "R_d") net.R_d = value;
    else throw ConfigError("unknown sweep axis '" + std::string(axis) + "'");
}

void ExperimentConfig::validate() const {
    network.validate();
    content.validate();
    quadrature.validate();
    optimizer.validate();
    if (simulation.replications < 1) throw ConfigError("simulation.replications must be at least 1");
    if (!(simulation.sensing_tail > 0.0)) throw ConfigError("simulation.sensing_tail must be positive");

    const std::size_t J = binomial(content.N, content.K);
    if (policy_source == PolicySource::Explicit) {
        if (explicit_policy.size() != J)
            throw ConfigError("policy.values has " + std::to_string(explicit_policy.size()) + " entries, C(N,K) = " +
                              std::to_string(J));
        CachingPolicy{explicit_policy}.validate();
    } else if (!explicit_policy.empty()) {
        throw ConfigError("policy.values is only allowed with policy.source = explicit");
    }

    if (sweep.axis.empty()) {
        if (!sweep.values.empty()) throw ConfigError("sweep.values given without sweep.axis");
    } else {
        if (!is_registered_axis(sweep.axis)) throw ConfigError("unknown sweep axis '" + sweep.axis + "'");
        if (sweep.values.empty()) throw ConfigError("sweep.values must not be empty");
        const bool up = sweep.values.size() < 2 || sweep.values[1] > sweep.values[0];
        for (std::size_t k = 1; k < sweep.values.size(); ++k) {
            const bool ok = up ? sweep.values[k] > sweep.values[k - 1] : sweep.values[k] < sweep.values[k - 1];
            if (!ok) throw ConfigError("sweep.values must be strictly monotone");
        }
        for (double v : sweep.values) {
            NetworkParams net = network;
            ContentParams content_at = content;
            apply_sweep_value(sweep.axis, v, net, content_at);
            net.validate();
            content_at.validate();
        }
    }
    for (const auto& f : outputs.formats)
        if (f != "csv" && f != "manifest" && f != "series")
            throw ConfigError("unknown output format '" + f + "' (csv, manifest, series)");
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["schema_version"] = kConfigSchemaVersion;
    j["network"] = {{"lambda_g", c.network.lambda_g}, {"lambda_u", c.network.lambda_u}, {"P_g", c.network.P_g},
                    {"P_u", c.network.P_u},           {"theta_u", c.network.theta_u},   {"I_th", c.network.I_th},
                    {"alpha", c.network.alpha},       {"R_d", c.network.R_d},           {"R_s", c.network.R_s}};
    j["content"] = {{"N", c.content.N},
                    {"K", c.content.K},
                    {"gamma", c.content.gamma},
                    {"scheme", std::string(to_string(c.content.scheme))}};
    j["quadrature"] = {{"rel_tol", c.quadrature.rel_tol},
                       {"abs_tol", c.quadrature.abs_tol},
                       {"mrfs_tail_tol", c.quadrature.mrfs_tail_tol},
                       {"max_subdivisions", c.quadrature.max_subdivisions}};
    j["policy"] = {{"source", std::string(to_string(c.policy_source))}, {"values", c.explicit_policy}};
    j["optimizer"] = {{"sigma", c.optimizer.sigma},
                      {"max_iterations", c.optimizer.max_iterations},
                      {"line_search_tol", c.optimizer.line_search_tol}};
    j["sweep"] = {{"axis", c.sweep.axis}, {"values", c.sweep.values}};
    j["simulation"] = {{"enabled", c.simulation.enabled},
                       {"replications", c.simulation.replications},
                       {"master_seed", c.simulation.master_seed},
                       {"threads", c.simulation.threads},
                       {"stratified", c.simulation.stratified},
                       {"typical_feeds_selection", c.simulation.typical_feeds_selection},
                       {"sensing_tail", c.simulation.sensing_tail}};
    j["outputs"] = {{"directory", c.outputs.directory}, {"formats", c.outputs.formats}};
    j["tag"] = c.metric_tag;
    return j;
}

ExperimentConfig config_from_json(const json& doc) {
    ExperimentConfig c;
    ObjectReader top(doc, "config");
    int schema = kConfigSchemaVersion;
    top.read("schema_version", schema);
    if (schema != kConfigSchemaVersion)
        throw ConfigError("unsupported schema_version " + std::to_string(schema));

    if (const json* s = top.child("network")) {
        ObjectReader r(*s, "network");
        r.read("lambda_g", c.network.lambda_g);
        r.read("lambda_u", c.network.lambda_u);
        r.read("P_g", c.network.P_g);
        r.read("P_u", c.network.P_u);
        r.read("theta_u", c.network.theta_u);
        r.read("I_th", c.network.I_th);
        r.read("alpha", c.network.alpha);
        r.read("R_d", c.network.R_d);
        r.read("R_s", c.network.R_s);
        r.finish();
    }
    if (const json* s = top.child("content")) {
        ObjectReader r(*s, "content");
        r.read("N", c.content.N);
        r.read("K", c.content.K);
        r.read("gamma", c.content.gamma);
        std::string scheme(to_string(c.content.scheme));
        r.read("scheme", scheme);
        c.content.scheme = parse_scheme(scheme);
        r.finish();
    }
    if (const json* s = top.child("quadrature")) {
        ObjectReader r(*s, "quadrature");
        r.read("rel_tol", c.quadrature.rel_tol);
        r.read("abs_tol", c.quadrature.abs_tol);
        r.read("mrfs_tail_tol", c.quadrature.mrfs_tail_tol);
        r.read("max_subdivisions", c.quadrature.max_subdivisions);
        r.finish();
    }
    if (const json* s = top.child("policy")) {
        ObjectReader r(*s, "policy");
        std::string source(to_string(c.policy_source));
        r.read("source", source);
        c.policy_source = parse_policy_source(source);
        r.read("values", c.explicit_policy);
        r.finish();
    }
    if (const json* s = top.child("optimizer")) {
        ObjectReader r(*s, "optimizer");
        r.read("sigma", c.optimizer.sigma);
        r.read("max_iterations", c.optimizer.max_iterations);
        r.read("line_search_tol", c.optimizer.line_search_tol);
        r.finish();
    }
    if (const json* s = top.child("sweep")) {
        ObjectReader r(*s, "sweep");
        r.read("axis", c.sweep.axis);
        r.read("values", c.sweep.values);
        r.finish();
    }
    if (const json* s = top.child("simulation")) {
        ObjectReader r(*s, "simulation");
        r.read("enabled", c.simulation.enabled);
        if (const json* reps = r.child("replications")) {
            if (!reps->is_number_integer() || reps->get<long long>() < 0)
                throw ConfigError("simulation.replications must be a non-negative integer");
            c.simulation.replications = reps->get<std::size_t>();
        }
        r.read("master_seed", c.simulation.master_seed);
        r.read("threads", c.simulation.threads);
        r.read("stratified", c.simulation.stratified);
        r.read("typical_feeds_selection", c.simulation.typical_feeds_selection);
        r.read("sensing_tail", c.simulation.sensing_tail);
        r.finish();
    }
    if (const json* s = top.child("outputs")) {
        ObjectReader r(*s, "outputs");
        r.read("directory", c.outputs.directory);
        r.read("formats", c.outputs.formats);
        r.finish();
    }
    top.read("tag", c.metric_tag);
    top.finish();
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "': " + e.what());
    }
    return config_from_json(doc);
}

ExperimentConfig apply_overrides(const ExperimentConfig& config, const std::vector<std::string>& overrides) {
    if (overrides.empty()) return config;
    json doc = to_json(config);
    for (const auto& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + item + "' is not key=value");
        const std::string key = item.substr(0, eq);
        const std::string text = item.substr(eq + 1);
        std::string pointer = "/" + key;
        std::replace(pointer.begin(), pointer.end(), '.', '/');
        const json::json_pointer ptr(pointer);
        if (!doc.contains(ptr) || doc.at(ptr).is_object()) throw ConfigError("unknown config key '" + key + "'");
        json value;
        try {
            value = json::parse(text);
        } catch (const json::parse_error&) {
            value = text;
        }
        if (doc.at(ptr).is_string() && !value.is_string()) value = text;
        doc[ptr] = value;
    }
    return config_from_json(doc);
}

// --- experiments -------------------------------------------------------------------

bool ExperimentResult::any_failed() const {
    return std::any_of(points.begin(), points.end(), [](const PointRecord& p) { return p.failed; });
}

std::uint64_t point_seed(std::uint64_t master_seed, std::size_t index) { return mix_keys(master_seed, index); }

CachingPolicy resolve_policy(const ExperimentConfig& config, const ScdpModel& model) {
    switch (config.policy_source) {
        case PolicySource::Uniform: return uniform_policy(model.J());
        case PolicySource::Mpc: return mpc_policy(model.combinations(), model.popularity());
        case PolicySource::Explicit: {
            CachingPolicy p{config.explicit_policy};
            p.validate();
            return p;
        }
        case PolicySource::Optimizer: return optimize_caching(model, config.optimizer).policy;
    }
    return uniform_policy(model.J());
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto started = std::chrono::steady_clock::now();
    ExperimentResult result;
    result.config = config;

    std::vector<double> values = config.sweep.values;
    const bool swept = !config.sweep.axis.empty();
    if (!swept) values = {0.0};
    const std::string scheme(to_string(config.content.scheme));
    const std::string& tag = config.metric_tag;

    for (std::size_t idx = 0; idx < values.size(); ++idx) {
        const auto point_started = std::chrono::steady_clock::now();
        PointRecord rec;
        rec.index = idx;
        rec.value = values[idx];
        rec.seed = point_seed(config.simulation.master_seed, idx);

        NetworkParams net = config.network;
        ContentParams content = config.content;
        if (swept) apply_sweep_value(config.sweep.axis, values[idx], net, content);

        std::vector<ResultRow> rows;
        try {
            const Popularity pop = zipf_popularity(content.N, content.gamma);
            const ScdpModel model(net, content, pop, config.quadrature);
            const CachingPolicy policy = resolve_policy(config, model);
            rec.policy = policy.c;
            const AnalyticalReport rep = model.report(policy);
            const CoverageKernel& kernel = model.kernel();

            std::optional<MonteCarloReport> sim;
            if (config.simulation.enabled) {
                MonteCarloConfig mc;
                mc.replications = config.simulation.replications;
                mc.master_seed = rec.seed;
                mc.threads = config.simulation.threads;
                mc.stratified = config.simulation.stratified;
                mc.options.typical_feeds_selection = config.simulation.typical_feeds_selection;
                mc.options.sensing_tail = config.simulation.sensing_tail;
                sim = monte_carlo(net, content, pop, policy, mc);
            }
            auto est = [&](const std::vector<SimulationEstimate>* v, std::size_t n) -> const SimulationEstimate* {
                return sim && v ? &(*v)[n] : nullptr;
            };

            ResultRow proto;
            proto.sweep_axis = config.sweep.axis;
            proto.sweep_value = swept ? values[idx] : 0.0;
            proto.scheme = scheme;
            proto.replications = config.simulation.enabled ? config.simulation.replications : 0;
            proto.seed = rec.seed;

            double tau_base = 0.0;
            const std::size_t N = pop.size();
            for (std::size_t n = 0; n < N; ++n) {
                const int file = static_cast<int>(n) + 1;
                const double lam = rep.densities.lambda_g_n[n];
                const double lam_bar = rep.densities.lambda_g_bar_n[n];
                const double c_base = kernel.coverage(lam, lam_bar, false);
                tau_base += pop[n] * kernel.delivery_probability(lam, lam_bar, false);
                add_row(rows, proto, tagged("popularity", tag), file, pop[n], nullptr);
                add_row(rows, proto, tagged("xi", tag), file, rep.activation.xi_n[n], est(sim ? &sim->xi_n : nullptr, n));
                add_row(rows, proto, tagged("osa", tag), file, rep.activation.vartheta_n[n],
                        est(sim ? &sim->osa_n : nullptr, n));
                add_row(rows, proto, tagged("sigma", tag), file, rep.sigma_n[n], est(sim ? &sim->sigma_n : nullptr, n));
                add_row(rows, proto, tagged("coverage", tag), file, rep.C_n[n], est(sim ? &sim->C_n : nullptr, n));
                add_row(rows, proto, tagged("coverage_baseline", tag), file, c_base, nullptr);
            }
            add_row(rows, proto, tagged("xi", tag), std::nullopt, rep.activation.xi, sim ? &sim->xi : nullptr);
            add_row(rows, proto, tagged("sigma", tag), std::nullopt, rep.sigma, nullptr);
            add_row(rows, proto, tagged("coverage", tag), std::nullopt, rep.C, nullptr);
            add_row(rows, proto, tagged("tau", tag), std::nullopt, rep.tau, sim ? &sim->tau : nullptr);
            add_row(rows, proto, tagged("tau_direct", tag), std::nullopt, std::nullopt, sim ? &sim->tau_direct : nullptr);
            add_row(rows, proto, tagged("tau_baseline", tag), std::nullopt, tau_base, nullptr);
            add_row(rows, proto, tagged("throughput", tag), std::nullopt, rep.throughput,
                    sim ? &sim->throughput : nullptr);
            result.rows.insert(result.rows.end(), rows.begin(), rows.end());
        } catch (const NumericalError& e) {
            rec.failed = true;
            rec.error = e.what();
        }
        rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - point_started).count();
        result.points.push_back(std::move(rec));
    }
    result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

// --- figure presets ------------------------------------------------------------------

std::size_t scale_replications(std::string_view scale) {
    if (scale == "desk") return 2000;
    if (scale == "full") return 20000;
    throw ConfigError("unknown scale '" + std::string(scale) + "' (desk, full)");
}

std::vector<double> log_grid(double lo, double hi, std::size_t points) {
    if (!(lo > 0.0) || !(hi > lo) || points < 2) throw ConfigError("log_grid: need 0 < lo < hi and at least 2 points");
    std::vector<double> out(points);
    const double a = std::log10(lo), b = std::log10(hi);
    for (std::size_t k = 0; k < points; ++k)
        out[k] = std::pow(10.0, a + (b - a) * static_cast<double>(k) / static_cast<double>(points - 1));
    out.front() = lo;
    out.back() = hi;
    return out;
}

std::vector<ExperimentConfig> figure_configs(std::string_view tag, std::string_view scale,
                                             std::optional<std::size_t> replications, std::uint64_t seed,
                                             unsigned threads) {
    ExperimentConfig base;
    base.simulation.replications = replications ? *replications : scale_replications(scale);
    base.simulation.master_seed = seed;
    base.simulation.threads = threads;
    const std::vector<double> lambda_u_grid = log_grid(1e-3, 1e-1, 13);

    auto with = [&](auto&& edit) {
        ExperimentConfig c = base;
        edit(c);
        return c;
    };
    auto lambda_u_sweep = [&](ExperimentConfig& c) {
        c.sweep.axis = "lambda_u";
        c.sweep.values = lambda_u_grid;
    };

    std::vector<ExperimentConfig> out;
    if (tag == "fig1a" || tag == "fig1b") {
        out.push_back(with([&](ExperimentConfig& c) {
            lambda_u_sweep(c);
            c.content.scheme = tag == "fig1a" ? Scheme::RFS : Scheme::MRFS;
        }));
    } else if (tag == "fig2" || tag == "fig3") {
        for (double lg : {0.005, 0.01}) {
            out.push_back(with([&](ExperimentConfig& c) {
                lambda_u_sweep(c);
                c.content.scheme = tag == "fig2" ? Scheme::RFS : Scheme::MRFS;
                c.network.lambda_g = lg;
                c.metric_tag = "lambda_g=" + format_number(lg);
            }));
        }
    } else if (tag == "fig4" || tag == "fig6") {
        for (Scheme s : {Scheme::RFS, Scheme::MRFS}) {
            out.push_back(with([&](ExperimentConfig& c) {
                lambda_u_sweep(c);
                c.content.scheme = s;
            }));
        }
    } else if (tag == "fig5") {
        out.push_back(with([&](ExperimentConfig& c) {
            c.sweep.axis = "I_th";
            c.sweep.values = log_grid(5e-3, 5e-1, 9);
        }));
    } else if (tag == "fig7") {
        out.push_back(with([&](ExperimentConfig& c) { lambda_u_sweep(c); }));
    } else if (tag == "fig8a" || tag == "fig8b") {
        std::vector<double> gammas;
        for (int k = 0; k <= 12; ++k) gammas.push_back(0.25 * k);
        for (PolicySource src : {PolicySource::Optimizer, PolicySource::Mpc, PolicySource::Uniform}) {
            out.push_back(with([&](ExperimentConfig& c) {
                c.sweep.axis = "gamma";
                c.sweep.values = gammas;
                c.content.scheme = tag == "fig8a" ? Scheme::RFS : Scheme::MRFS;
                c.policy_source = src;
                c.metric_tag = src == PolicySource::Optimizer ? "optimized" : std::string(to_string(src));
            }));
        }
    } else {
        throw ConfigError("unknown figure tag '" + std::string(tag) + "'");
    }
    for (auto& c : out) {
        c.outputs.formats = {"csv", "manifest", "series"};
        c.validate();
    }
    return out;
}

namespace {

/// Analytical values of one metric keyed by (sweep value, file index).
std::map<std::pair<double, int>, double> analytic_series(const std::vector<ResultRow>& rows, const std::string& metric,
                                                        const std::string& scheme = {}) {
    std::map<std::pair<double, int>, double> out;
    for (const auto& r : rows)
        if (r.metric == metric && r.analytical && (scheme.empty() || r.scheme == scheme))
            out[{r.sweep_value, r.file_index.value_or(0)}] = *r.analytical;
    return out;
}

void unimodality_checks(FigureResult& fig, int N) {
    for (int n = 1; n <= N; ++n) {
        std::vector<double> seq;
        for (const auto& [key, v] : analytic_series(fig.rows, "xi"))
            if (key.second == n) seq.push_back(v);
        int changes = 0, last = 0;
        for (std::size_t k = 1; k < seq.size(); ++k) {
            const double d = seq[k] - seq[k - 1];
            const int sign = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
            if (sign != 0 && last != 0 && sign != last) ++changes;
            if (sign != 0) last = sign;
        }
        const bool rises_first = seq.size() >= 2 && seq[1] > seq[0];
        fig.checks.push_back({"xi file " + std::to_string(n) + " rises then falls over lambda_u",
                              changes == 1 && rises_first, std::to_string(changes) + " sign change(s)"});
    }
}

}  // namespace

FigureResult reproduce_figure(std::string_view tag, std::string_view scale, std::optional<std::size_t> replications,
                              std::uint64_t seed, unsigned threads) {
    FigureResult fig;
    fig.tag = std::string(tag);
    fig.scale = std::string(scale);
    for (const auto& cfg : figure_configs(tag, scale, replications, seed, threads)) {
        fig.parts.push_back(run_experiment(cfg));
        const auto& rows = fig.parts.back().rows;
        fig.rows.insert(fig.rows.end(), rows.begin(), rows.end());
    }
    const int N = fig.parts.front().config.content.N;

    if (tag == "fig1a" || tag == "fig1b") {
        unimodality_checks(fig, N);
    } else if (tag == "fig5") {
        const auto osa = analytic_series(fig.rows, "coverage");
        const auto base = analytic_series(fig.rows, "coverage_baseline");
        bool ok = true;
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& [key, v] : base) {
            if (key.second == 0) continue;
            const double gap = osa.at(key) - v;
            worst = std::min(worst, gap);
            if (gap < -kOrderingSlack) ok = false;
        }
        fig.checks.push_back({"coverage with OSA >= baseline at matched densities", ok,
                              "smallest gap " + format_number(worst)});
    } else if (tag == "fig6") {
        const auto rfs = analytic_series(fig.rows, "tau", "RFS");
        const auto mrfs = analytic_series(fig.rows, "tau", "MRFS");
        bool ok = true;
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& [key, v] : rfs) {
            const double gap = mrfs.at(key) - v;
            worst = std::min(worst, gap);
            if (gap < -kOrderingSlack) ok = false;
        }
        fig.checks.push_back({"tau(MRFS) >= tau(RFS) across lambda_u", ok, "smallest gap " + format_number(worst)});
    } else if (tag == "fig7") {
        const auto osa = analytic_series(fig.rows, "tau");
        const auto base = analytic_series(fig.rows, "tau_baseline");
        bool ok = true;
        for (const auto& [key, v] : base)
            if (osa.at(key) - v < -kOrderingSlack) ok = false;
        fig.checks.push_back({"tau with OSA >= baseline across lambda_u", ok, ""});
    } else if (tag == "fig8a" || tag == "fig8b") {
        const auto opt = analytic_series(fig.rows, "tau:optimized");
        const auto mpc = analytic_series(fig.rows, "tau:mpc");
        const auto uni = analytic_series(fig.rows, "tau:uniform");
        bool dominates = true;
        std::vector<double> gaps;
        for (const auto& [key, v] : opt) {
            const double best = std::max(mpc.at(key), uni.at(key));
            if (v < best - 1e-9) dominates = false;
            gaps.push_back(v - best);
        }
        fig.checks.push_back({"optimized tau >= max(MPC, uniform) at every gamma", dominates, ""});
        if (gaps.size() >= 3) {
            const double peak = *std::max_element(gaps.begin() + 1, gaps.end() - 1);
            const bool narrows = gaps.front() < peak && gaps.back() < peak;
            fig.checks.push_back({"gap to the better baseline narrows at both ends of the gamma grid", narrows,
                                  "ends " + format_number(gaps.front()) + ", " + format_number(gaps.back()) +
                                      "; interior peak " + format_number(peak)});
        }
    }
    return fig;
}

// --- persistence -----------------------------------------------------------------------

std::string format_csv(const std::vector<ResultRow>& rows) {
    std::string out(kCsvHeader);
    out += '\n';
    for (const auto& r : rows) {
        out += r.sweep_axis;
        out += ',';
        out += format_number(r.sweep_value);
        out += ',';
        out += r.metric;
        out += ',';
        if (r.file_index) out += std::to_string(*r.file_index);
        out += ',';
        out += r.scheme;
        out += ',';
        out += format_optional(r.analytical);
        out += ',';
        out += format_optional(r.sim_mean);
        out += ',';
        out += format_optional(r.sim_ci95);
        out += ',';
        out += std::to_string(r.replications);
        out += ',';
        out += std::to_string(r.seed);
        out += '\n';
    }
    return out;
}

std::vector<ResultRow> parse_csv(std::string_view text) {
    std::vector<ResultRow> rows;
    std::size_t pos = 0;
    bool header = true;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        if (header) {
            if (line != kCsvHeader) throw ConfigError("csv: unexpected header");
            header = false;
            continue;
        }
        const auto f = split(line, ',');
        if (f.size() != 10) throw ConfigError("csv: expected 10 fields, got " + std::to_string(f.size()));
        ResultRow r;
        r.sweep_axis = std::string(f[0]);
        r.sweep_value = parse_number(f[1], "sweep_value");
        r.metric = std::string(f[2]);
        if (!f[3].empty()) r.file_index = parse_integer<int>(f[3], "file_index");
        r.scheme = std::string(f[4]);
        if (!f[5].empty()) r.analytical = parse_number(f[5], "analytical");
        if (!f[6].empty()) r.sim_mean = parse_number(f[6], "sim_mean");
        if (!f[7].empty()) r.sim_ci95 = parse_number(f[7], "sim_ci95");
        r.replications = parse_integer<std::size_t>(f[8], "replications");
        r.seed = parse_integer<std::uint64_t>(f[9], "seed");
        rows.push_back(std::move(r));
    }
    if (header) throw ConfigError("csv: missing header");
    return rows;
}

json manifest_json(const std::vector<ExperimentResult>& parts, std::string_view figure_tag) {
    json m;
    m["toolkit"] = "fogd2d";
    m["version"] = std::string(kToolkitVersion);
    m["schema_version"] = kConfigSchemaVersion;
    if (!figure_tag.empty()) m["figure"] = std::string(figure_tag);
    double wall = 0.0;
    json experiments = json::array();
    for (const auto& part : parts) {
        json e;
        e["config"] = to_json(part.config);
        e["master_seed"] = part.config.simulation.master_seed;
        e["wall_time_s"] = part.wall_time_s;
        json points = json::array();
        for (const auto& p : part.points) {
            json pj = {{"index", p.index}, {"value", p.value},         {"seed", p.seed},
                       {"failed", p.failed}, {"wall_time_s", p.wall_time_s}, {"policy", p.policy}};
            if (p.failed) pj["error"] = p.error;
            points.push_back(std::move(pj));
        }
        e["points"] = std::move(points);
        experiments.push_back(std::move(e));
        wall += part.wall_time_s;
    }
    m["master_seed"] = parts.empty() ? 0 : parts.front().config.simulation.master_seed;
    m["wall_time_s"] = wall;
    m["experiments"] = std::move(experiments);
    return m;
}

PersistedFiles persist_results(const std::vector<ExperimentResult>& parts, const std::filesystem::path& directory,
                               const std::vector<std::string>& formats, std::string_view figure_tag) {
    auto wants = [&](std::string_view f) { return std::find(formats.begin(), formats.end(), f) != formats.end(); };
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec) throw std::runtime_error("cannot create '" + directory.string() + "': " + ec.message());

    std::vector<ResultRow> rows;
    for (const auto& p : parts) rows.insert(rows.end(), p.rows.begin(), p.rows.end());

    PersistedFiles files;
    if (wants("csv")) {
        files.table = directory / "results.csv";
        write_text(files.table, format_csv(rows));
    }
    if (wants("manifest")) {
        files.manifest = directory / "manifest.json";
        write_text(files.manifest, manifest_json(parts, figure_tag).dump(2) + "\n");
    }
    if (wants("series")) {
        // One file per curve: metric x scheme x file, rows in sweep order.
        std::map<std::string, std::vector<const ResultRow*>> curves;
        std::vector<std::string> order;
        for (const auto& r : rows) {
            const std::string name = sanitize(r.metric + "_" + r.scheme + "_" +
                                              (r.file_index ? "file" + std::to_string(*r.file_index) : "all"));
            if (!curves.count(name)) order.push_back(name);
            curves[name].push_back(&r);
        }
        const auto dir = directory / "series";
        std::filesystem::create_directories(dir, ec);
        if (ec) throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());
        for (const auto& name : order) {
            std::string text = "x,analytical,sim_mean,sim_ci95\n";
            for (const ResultRow* r : curves[name]) {
                text += format_number(r->sweep_value) + "," + format_optional(r->analytical) + "," +
                        format_optional(r->sim_mean) + "," + format_optional(r->sim_ci95) + "\n";
            }
            const auto path = dir / (name + ".csv");
            write_text(path, text);
            files.series.push_back(path);
        }
    }
    return files;
}

}  // namespace fogd2d
