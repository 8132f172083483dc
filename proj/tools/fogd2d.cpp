#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fogd2d/analytics.hpp"
#include "fogd2d/harness.hpp"
#include "fogd2d/optimizer.hpp"
#include "fogd2d/simulator.hpp"

namespace {

using namespace fogd2d;

constexpr int kExitOk = 0;
constexpr int kExitNumerical = 1;
constexpr int kExitUsage = 2;

struct Options {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replications;
    std::optional<unsigned> threads;
    std::string output;
    std::string gradient = "analytic";
    std::string figure;
    std::string scale = "desk";
    bool quiet = false;
};

/// Pulls "--section.key=value" and "--section.key value" out of argv; CLI11
/// sees only the remaining arguments.
std::vector<std::string> extract_overrides(int argc, char** argv, std::vector<std::string>& rest) {
    std::vector<std::string> overrides;
    rest.push_back(argv[0]);
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        const auto eq = arg.find('=');
        const std::string key = arg.substr(0, eq);
        const bool dotted = key.rfind("--", 0) == 0 && key.find('.') != std::string::npos;
        if (!dotted) {
            rest.push_back(arg);
            continue;
        }
        if (eq != std::string::npos) {
            overrides.push_back(arg.substr(2));
        } else if (i + 1 < argc) {
            overrides.push_back(key.substr(2) + "=" + argv[++i]);
        } else {
            throw ConfigError("override '" + arg + "' has no value");
        }
    }
    return overrides;
}

ExperimentConfig build_config(const Options& opt) {
    ExperimentConfig cfg = opt.config_path.empty() ? ExperimentConfig{} : load_config(opt.config_path);
    std::vector<std::string> all = opt.overrides;
    if (opt.seed) all.push_back("simulation.master_seed=" + std::to_string(*opt.seed));
    if (opt.replications) all.push_back("simulation.replications=" + std::to_string(*opt.replications));
    if (opt.threads) all.push_back("simulation.threads=" + std::to_string(*opt.threads));
    if (!opt.output.empty()) all.push_back("outputs.directory=" + opt.output);
    cfg = apply_overrides(cfg, all);
    cfg.validate();
    return cfg;
}

std::string g9(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string combo_label(const std::vector<int>& combo) {
    std::string s = "{";
    for (std::size_t k = 0; k < combo.size(); ++k) s += (k ? "," : "") + std::to_string(combo[k] + 1);
    return s + "}";
}

void print_report(const ExperimentConfig& cfg) {
    const Popularity pop = zipf_popularity(cfg.content.N, cfg.content.gamma);
    const ScdpModel model(cfg.network, cfg.content, pop, cfg.quadrature);
    const CachingPolicy policy = resolve_policy(cfg, model);
    const AnalyticalReport rep = model.report(policy);
    const auto& combos = model.combinations();

    std::printf("scheme %s, N=%d, K=%d, gamma=%s, policy %s\n", std::string(to_string(cfg.content.scheme)).c_str(),
                cfg.content.N, cfg.content.K, g9(cfg.content.gamma).c_str(),
                std::string(to_string(cfg.policy_source)).c_str());
    std::printf("\n%-10s %-16s %-16s\n", "combo", "c_i", "xi_i");
    for (std::size_t i = 0; i < combos.size(); ++i) {
        double xi_i = 0.0;
        for (std::size_t n = 0; n < pop.size(); ++n) xi_i += rep.activation.xi_of(i, n);
        std::printf("%-10s %-16s %-16s\n", combo_label(combos[i]).c_str(), g9(policy[i]).c_str(), g9(xi_i).c_str());
    }
    std::printf("\n%-5s %-16s %-16s %-16s %-16s %-16s %-16s\n", "file", "p_n", "vartheta_n", "xi_n", "lambda_g_n",
                "sigma_n", "C_n");
    for (std::size_t n = 0; n < pop.size(); ++n) {
        std::printf("%-5zu %-16s %-16s %-16s %-16s %-16s %-16s\n", n + 1, g9(pop[n]).c_str(),
                    g9(rep.activation.vartheta_n[n]).c_str(), g9(rep.activation.xi_n[n]).c_str(),
                    g9(rep.densities.lambda_g_n[n]).c_str(), g9(rep.sigma_n[n]).c_str(), g9(rep.C_n[n]).c_str());
    }
    std::printf("\nxi          %s\n", g9(rep.activation.xi).c_str());
    std::printf("sigma       %s\n", g9(rep.sigma).c_str());
    std::printf("C           %s\n", g9(rep.C).c_str());
    std::printf("tau         %s\n", g9(rep.tau).c_str());
    std::printf("throughput  %s\n", g9(rep.throughput).c_str());
}

void print_rows(const std::vector<ResultRow>& rows, bool with_sim) {
    if (with_sim)
        std::printf("%-10s %-24s %-5s %-6s %-16s %-16s %-16s %s\n", "value", "metric", "file", "scheme", "analytical",
                    "sim_mean", "ci95", "agree");
    else
        std::printf("%-10s %-24s %-5s %-6s %-16s\n", "value", "metric", "file", "scheme", "analytical");
    for (const auto& r : rows) {
        const std::string file = r.file_index ? std::to_string(*r.file_index) : "-";
        const std::string a = r.analytical ? g9(*r.analytical) : "-";
        if (!with_sim) {
            if (r.analytical)
                std::printf("%-10s %-24s %-5s %-6s %-16s\n", g9(r.sweep_value).c_str(), r.metric.c_str(), file.c_str(),
                            r.scheme.c_str(), a.c_str());
            continue;
        }
        const std::string m = r.sim_mean ? g9(*r.sim_mean) : "-";
        const std::string ci = r.sim_ci95 ? g9(*r.sim_ci95) : "-";
        std::string agree = "-";
        if (r.analytical && r.sim_mean && r.sim_ci95)
            agree = std::abs(*r.analytical - *r.sim_mean) <= *r.sim_ci95 ? "PASS" : "FAIL";
        std::printf("%-10s %-24s %-5s %-6s %-16s %-16s %-16s %s\n", g9(r.sweep_value).c_str(), r.metric.c_str(),
                    file.c_str(), r.scheme.c_str(), a.c_str(), m.c_str(), ci.c_str(), agree.c_str());
    }
}

int report_failures(const std::vector<ExperimentResult>& parts) {
    int code = kExitOk;
    for (const auto& part : parts)
        for (const auto& p : part.points)
            if (p.failed) {
                std::fprintf(stderr, "point %zu (%s) failed: %s\n", p.index, g9(p.value).c_str(), p.error.c_str());
                code = kExitNumerical;
            }
    return code;
}

int cmd_analyze(const Options& opt) {
    ExperimentConfig cfg = build_config(opt);
    if (!cfg.sweep.axis.empty()) {
        cfg.simulation.enabled = false;
        const ExperimentResult res = run_experiment(cfg);
        print_rows(res.rows, false);
        if (!opt.output.empty()) persist_results({res}, cfg.outputs.directory, cfg.outputs.formats);
        return report_failures({res});
    }
    print_report(cfg);
    if (!opt.output.empty()) {
        cfg.simulation.enabled = false;
        const ExperimentResult res = run_experiment(cfg);
        persist_results({res}, cfg.outputs.directory, cfg.outputs.formats);
        return report_failures({res});
    }
    return kExitOk;
}

int cmd_simulate(const Options& opt) {
    ExperimentConfig cfg = build_config(opt);
    cfg.simulation.enabled = true;
    const ExperimentResult res = run_experiment(cfg);
    print_rows(res.rows, true);
    const auto files = persist_results({res}, cfg.outputs.directory, cfg.outputs.formats);
    if (!files.table.empty()) std::printf("\nwrote %s\n", files.table.string().c_str());
    return report_failures({res});
}

int cmd_sweep(const Options& opt) {
    const ExperimentConfig cfg = build_config(opt);
    if (cfg.sweep.axis.empty()) throw ConfigError("sweep: config has no sweep.axis");
    const ExperimentResult res = run_experiment(cfg);
    for (const auto& p : res.points)
        std::printf("point %zu %s=%s seed=%llu %s (%.2f s)\n", p.index, cfg.sweep.axis.c_str(), g9(p.value).c_str(),
                    static_cast<unsigned long long>(p.seed), p.failed ? "FAILED" : "ok", p.wall_time_s);
    const auto files = persist_results({res}, cfg.outputs.directory, cfg.outputs.formats);
    if (!files.table.empty()) std::printf("wrote %s\n", files.table.string().c_str());
    return report_failures({res});
}

int cmd_optimize(const Options& opt) {
    const ExperimentConfig cfg = build_config(opt);
    GradientMode mode;
    if (opt.gradient == "analytic") mode = GradientMode::Analytic;
    else if (opt.gradient == "fd") mode = GradientMode::FiniteDifference;
    else throw ConfigError("--gradient must be analytic or fd");

    const Popularity pop = zipf_popularity(cfg.content.N, cfg.content.gamma);
    const ScdpModel model(cfg.network, cfg.content, pop, cfg.quadrature);
    const OptimizationResult res = optimize_caching(model, cfg.optimizer, mode);

    std::printf("%-5s %-16s %-16s %-16s %-16s\n", "iter", "tau", "step", "max_step", "|direction|");
    std::printf("%-5d %-16s\n", 0, g9(res.trace.initial_tau).c_str());
    for (const auto& s : res.trace.steps)
        std::printf("%-5d %-16s %-16s %-16s %-16s\n", s.iteration, g9(s.tau).c_str(), g9(s.step).c_str(),
                    g9(s.max_step).c_str(), g9(s.gradient_norm).c_str());
    std::printf("stop: %s (stationarity %s)\n\n", res.trace.stop_reason.c_str(), g9(res.trace.stationarity).c_str());

    const auto& combos = model.combinations();
    std::printf("%-10s %s\n", "combo", "c_i");
    for (std::size_t i = 0; i < combos.size(); ++i)
        std::printf("%-10s %s\n", combo_label(combos[i]).c_str(), g9(res.policy[i]).c_str());

    const double tau_uniform = model.tau(uniform_policy(model.J()));
    const double tau_mpc = model.tau(mpc_policy(combos, pop));
    std::printf("\n%-10s %-16s %-16s %-16s\n", "", "optimized", "uniform", "mpc");
    std::printf("%-10s %-16s %-16s %-16s\n", "tau", g9(res.trace.final_tau).c_str(), g9(tau_uniform).c_str(),
                g9(tau_mpc).c_str());

    if (!opt.output.empty()) {
        const std::filesystem::path dir = cfg.outputs.directory;
        std::filesystem::create_directories(dir);
        std::string policy_csv = "combination,files,c\n";
        for (std::size_t i = 0; i < combos.size(); ++i) {
            std::string files;
            for (std::size_t k = 0; k < combos[i].size(); ++k) files += (k ? " " : "") + std::to_string(combos[i][k] + 1);
            policy_csv += std::to_string(i + 1) + "," + files + "," + g9(res.policy[i]) + "\n";
        }
        std::string trace_csv = "iteration,tau,step,max_step,direction_norm\n";
        trace_csv += "0," + g9(res.trace.initial_tau) + ",,,\n";
        for (const auto& s : res.trace.steps)
            trace_csv += std::to_string(s.iteration) + "," + g9(s.tau) + "," + g9(s.step) + "," + g9(s.max_step) +
                         "," + g9(s.gradient_norm) + "\n";
        for (const auto& [name, text] : {std::pair{"policy.csv", policy_csv}, std::pair{"trace.csv", trace_csv}}) {
            std::FILE* f = std::fopen((dir / name).string().c_str(), "wb");
            if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
            std::fputs(text.c_str(), f);
            std::fclose(f);
        }
        std::printf("\nwrote %s\n", (dir / "policy.csv").string().c_str());
    }
    return kExitOk;
}

int cmd_reproduce(const Options& opt) {
    if (!opt.overrides.empty() || !opt.config_path.empty())
        throw ConfigError("reproduce runs fixed presets; config files and overrides are not accepted");
    const FigureResult fig =
        reproduce_figure(opt.figure, opt.scale, opt.replications, opt.seed.value_or(1), opt.threads.value_or(0));
    const std::filesystem::path dir = std::filesystem::path(opt.output.empty() ? "results" : opt.output) / fig.tag;
    const auto files = persist_results(fig.parts, dir, {"csv", "manifest", "series"}, fig.tag);
    for (const auto& part : fig.parts)
        for (const auto& p : part.points)
            if (!opt.quiet)
                std::printf("%s %s=%s %s (%.2f s)\n", part.config.metric_tag.empty() ? "-" : part.config.metric_tag.c_str(),
                            part.config.sweep.axis.c_str(), g9(p.value).c_str(), p.failed ? "FAILED" : "ok",
                            p.wall_time_s);
    for (const auto& c : fig.checks)
        std::printf("[%s] %s%s%s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.empty() ? "" : ": ",
                    c.detail.c_str());
    std::printf("wrote %s (%zu series files)\n", files.table.string().c_str(), files.series.size());
    return report_failures(fig.parts);
}

}  // namespace

int main(int argc, char** argv) {
    Options opt;
    std::vector<std::string> rest;
    try {
        opt.overrides = extract_overrides(argc, argv, rest);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }

    CLI::App app{"Opportunistic content delivery in fog-aided D2D caching networks"};
    app.require_subcommand(0, 1);
    bool version = false;
    app.add_flag("--version", version, "Print toolkit and config schema versions");

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", opt.config_path, "JSON experiment config")->check(CLI::ExistingFile);
        sub->add_option("--seed", opt.seed, "Master seed");
        sub->add_option("--replications", opt.replications, "Monte Carlo replications");
        sub->add_option("--threads", opt.threads, "Worker thread cap (0: all cores)");
        sub->add_option("-o,--output", opt.output, "Output directory");
        sub->add_flag("-q,--quiet", opt.quiet, "Less progress output");
        sub->footer("Any config key can be overridden as --section.key=value, e.g. --network.lambda_u=0.02");
    };
    auto* analyze = app.add_subcommand("analyze", "Evaluate the analytical model");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo simulation against the analytical model");
    auto* optimize = app.add_subcommand("optimize", "Gradient-projection caching optimisation");
    auto* sweep = app.add_subcommand("sweep", "Run the configured parameter sweep");
    auto* reproduce = app.add_subcommand("reproduce", "Run a figure preset");
    for (auto* sub : {analyze, simulate, optimize, sweep, reproduce}) add_common(sub);
    optimize->add_option("--gradient", opt.gradient, "analytic or fd")->check(CLI::IsMember({"analytic", "fd"}));
    reproduce->add_option("figure", opt.figure, "Figure tag")
        ->required()
        ->check(CLI::IsMember(std::vector<std::string>(std::begin(kFigureTags), std::end(kFigureTags))));
    reproduce->add_option("--scale", opt.scale, "desk or full")->check(CLI::IsMember({"desk", "full"}));

    std::vector<char*> cargv;
    for (auto& s : rest) cargv.push_back(s.data());
    try {
        app.parse(static_cast<int>(cargv.size()), cargv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (version) {
        std::printf("fogd2d %s (config schema %d)\n", std::string(kToolkitVersion).c_str(), kConfigSchemaVersion);
        return kExitOk;
    }

    try {
        if (*analyze) return cmd_analyze(opt);
        if (*simulate) return cmd_simulate(opt);
        if (*optimize) return cmd_optimize(opt);
        if (*sweep) return cmd_sweep(opt);
        if (*reproduce) return cmd_reproduce(opt);
        std::fputs(app.help().c_str(), stdout);
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitUsage;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    }
}
