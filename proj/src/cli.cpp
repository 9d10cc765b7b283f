#include "eobs/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "eobs/config.hpp"
#include "eobs/csv.hpp"
#include "eobs/limits.hpp"
#include "eobs/lyapunov.hpp"
#include "eobs/model.hpp"
#include "eobs/observability.hpp"
#include "eobs/riccati.hpp"
#include "eobs/rng.hpp"
#include "eobs/simulate.hpp"
#include "eobs/types.hpp"

namespace eobs {

namespace {

constexpr int exit_ok = 0;
constexpr int exit_validation = 2;
constexpr int exit_divergence = 3;

std::vector<double> split_doubles(const std::string& text, const char* flag) {
    std::vector<double> values;
    std::stringstream stream(text);
    std::string item;
    while (std::getline(stream, item, ',')) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            std::ostringstream msg;
            msg << flag << ": '" << item << "' is not a number";
            throw ValidationError(msg.str());
        }
    }
    if (values.empty()) {
        std::ostringstream msg;
        msg << flag << ": empty list";
        throw ValidationError(msg.str());
    }
    return values;
}

struct ResolvedModel {
    SystemModel model;
    std::optional<ObserverGain> gain;
    std::string label;
};

ResolvedModel resolve_model(const ExperimentConfig& config) {
    if (!config.model) throw ValidationError("config field 'model' is required");
    ResolvedModel resolved;
    if (config.model->is_object()) {
        resolved.model = model_from_json(*config.model);
        resolved.label = resolved.model.description;
    } else {
        const auto name = config.model->get<std::string>();
        const auto& names = builtin_names();
        if (std::find(names.begin(), names.end(), name) != names.end()) {
            BuiltinSystem sys = builtin(name);
            resolved.model = std::move(sys.model);
            resolved.gain = std::move(sys.gain);
        } else {
            resolved.model = load_model(name);
        }
        resolved.label = name;
    }
    if (config.gain && *config.gain != "default") {
        throw ValidationError("config field 'gain': unknown choice '" + *config.gain +
                              "'; available: default");
    }
    return resolved;
}

const ObserverGain& require_gain(const ResolvedModel& resolved) {
    if (!resolved.gain)
        throw ValidationError("model '" + resolved.label +
                              "' has no observer gain; observer commands need a built-in model");
    return *resolved.gain;
}

Vec default_x0(const SystemModel& model, const std::string& label) {
    for (const auto& name : builtin_names()) {
        if (label == name) {
            Vec x0 = Vec::Constant(model.state_dim, 0.1);
            return x0;
        }
    }
    throw ValidationError("config field 'x0' is required for user-defined models");
}

Vec to_vec(const std::vector<double>& values) {
    Vec v(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i];
    return v;
}

// Initial state: --x0 wins; otherwise the built-in default, optionally
// nudged by the seed so repeated runs can probe different attractor points.
Vec resolve_x0(const ExperimentConfig& config, const ResolvedModel& resolved, bool jitter) {
    if (config.x0) {
        Vec x0 = to_vec(*config.x0);
        if (x0.size() != resolved.model.state_dim)
            throw ValidationError("config field 'x0' has the wrong dimension");
        return x0;
    }
    Vec x0 = default_x0(resolved.model, resolved.label);
    if (jitter && config.master_seed) {
        for (Eigen::Index i = 0; i < x0.size(); ++i)
            x0[i] += 1e-3 * (rng::uniform01(*config.master_seed, 0,
                                            static_cast<std::uint64_t>(i)) -
                             0.5);
    }
    return x0;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open output file '" + path + "'");
    out << content;
}

std::string short_num(double v) {
    std::ostringstream s;
    s << std::setprecision(6) << v;
    return s.str();
}

long steps_or(const ExperimentConfig& config, long fallback) {
    return config.steps ? *config.steps : fallback;
}

int cmd_lyapunov(const ExperimentConfig& config) {
    const ResolvedModel resolved = resolve_model(config);
    const Vec x0 = resolve_x0(config, resolved, true);
    const LyapunovSpectrum spec =
        spectrum(resolved.model, x0, steps_or(config, 1000000),
                 config.burn_in ? *config.burn_in : default_burn_in,
                 config.renorm_period ? *config.renorm_period : 1);
    if (config.out) write_text_file(*config.out, to_json(spec).dump(2) + "\n");
    std::ostringstream line;
    line << "exponents:";
    for (double e : spec.exponents) line << ' ' << short_num(e);
    line << " (residual " << short_num(spec.convergence_residual) << ", "
         << (spec.converged(default_convergence_threshold) ? "converged" : "not converged") << ")";
    std::cout << line.str() << "\n";
    return exit_ok;
}

int cmd_critical_p(const ExperimentConfig& config) {
    const ResolvedModel resolved = resolve_model(config);
    const Vec x0 = resolve_x0(config, resolved, true);
    const LyapunovSpectrum spec =
        spectrum(resolved.model, x0, steps_or(config, 1000000),
                 config.burn_in ? *config.burn_in : default_burn_in,
                 config.renorm_period ? *config.renorm_period : 1);
    const CriticalProbability limit = nonlinear_critical_p(spec, resolved.model.output_dim);

    nlohmann::json out;
    out["spectrum"] = to_json(spec);
    out["limit"] = to_json(limit);

    std::ostringstream line;
    line << "p* = " << short_num(limit.critical_p) << ", q* = " << short_num(limit.critical_q())
         << " (M=" << limit.output_dim << ", positive exponent sum "
         << short_num(limit.log_expansion) << ")";
    if (config.entropy && !config.p)
        throw ValidationError("config field 'entropy' needs 'p' to evaluate the condition");
    if (config.p) {
        const LimitVerdict v = config.entropy
                                   ? entropy_condition(*config.p, resolved.model.output_dim,
                                                       *config.entropy)
                                   : verdict_at(limit, *config.p);
        out["verdict"] = to_json(v);
        line << "; at p=" << short_num(*config.p) << (config.entropy ? " (entropy form)" : "")
             << ": lhs=" << short_num(v.lhs) << ", " << (v.satisfied ? "satisfied" : "violated");
    }
    if (config.out) write_text_file(*config.out, out.dump(2) + "\n");
    std::cout << line.str() << "\n";
    return exit_ok;
}

int cmd_riccati_check(const ExperimentConfig& config) {
    const ResolvedModel resolved = resolve_model(config);
    const Vec x0 = resolve_x0(config, resolved, false);
    if (!config.p) throw ValidationError("config field 'p' is required");
    RiccatiOptions options;
    options.epsilon = config.epsilon ? *config.epsilon : 0.0;
    const RiccatiTrace trace =
        condition_trace(resolved.model, x0, steps_or(config, 100000), *config.p, options);
    if (config.out) {
        std::ostringstream csv;
        write_csv(trace, csv);
        write_text_file(*config.out, csv.str());
    }
    if (trace.flagged) {
        std::cout << "stopped at step " << trace.flag_step << ": " << trace.flag_reason << "\n";
        return exit_divergence;
    }
    std::cout << "necessary condition " << (trace.satisfied() ? "satisfiable" : "VIOLATED")
              << " at p=" << short_num(trace.p) << " (mean log condition "
              << short_num(trace.final_log_mean()) << " over "
              << trace.condition_values.size() << " steps)\n";
    return exit_ok;
}

int cmd_observability(const ExperimentConfig& config) {
    const ResolvedModel resolved = resolve_model(config);
    const Vec x0 = resolve_x0(config, resolved, true);
    const long samples = config.samples ? *config.samples : 10000;
    if (samples < 1) throw ValidationError("config field 'samples' must be >= 1");
    const double tol = config.tol ? *config.tol : default_rank_tol;

    // Land on the attractor, then take consecutive iterates as samples.
    const Trajectory warmup = trajectory(resolved.model, x0, 1000 + samples, 0.0, 0);
    std::vector<Vec> points(warmup.states.begin() + 1000, warmup.states.end() - 1);
    const BoundsScan scan = bounds_scan(resolved.model, points, tol);

    if (config.out) write_text_file(*config.out, to_json(scan).dump(2) + "\n");
    std::ostringstream line;
    if (scan.all_satisfied)
        line << "rank condition satisfied at all " << points.size() << " samples";
    else
        line << "rank condition FAILED first at sample " << scan.first_failed;
    line << "; alpha_theta=" << short_num(scan.alpha_theta)
         << ", beta_theta=" << short_num(scan.beta_theta);
    std::cout << line.str() << "\n";
    return exit_ok;
}

int cmd_simulate(const ExperimentConfig& config) {
    const ResolvedModel resolved = resolve_model(config);
    const ObserverGain& gain = require_gain(resolved);
    if (!config.p) throw ValidationError("config field 'p' is required");
    if (!config.master_seed)
        throw ValidationError("config field 'master_seed' is required for stochastic commands");
    const Vec x0 = resolve_x0(config, resolved, false);
    Vec xhat0 = config.xhat0 ? to_vec(*config.xhat0) : Vec(Vec::Zero(resolved.model.state_dim));
    if (xhat0.size() != resolved.model.state_dim)
        throw ValidationError("config field 'xhat0' has the wrong dimension");

    const MonteCarloReport report = monte_carlo(
        resolved.model, gain, x0, xhat0, *config.p, steps_or(config, 10000),
        config.realizations ? *config.realizations : 50, config.noise ? *config.noise : 1e-6,
        *config.master_seed);
    if (config.out) {
        std::ostringstream csv;
        write_csv(report, csv);
        write_text_file(*config.out, csv.str());
    }

    std::ostringstream line;
    line << "peak mean-square error " << short_num(report.peak_mean_sq_error) << " at t="
         << report.peak_step << "; realizations diverged: " << report.diverged_realizations.size()
         << "/" << report.realizations;
    const long horizon = static_cast<long>(report.mean_sq_error.size()) - 1;
    try {
        const EnvelopeFit fit = fit_exponential_envelope(report.mean_sq_error, horizon / 2,
                                                         horizon + 1);
        line << "; tail envelope rate " << short_num(std::exp(fit.log_rate)) << "/step";
    } catch (const NumericalError&) {
        // All-zero tail (deadbeat, no noise): no envelope to fit.
    }
    std::cout << line.str() << "\n";
    return report.diverged_realizations.empty() ? exit_ok : exit_divergence;
}

int cmd_sweep(const ExperimentConfig& config) {
    const ResolvedModel resolved = resolve_model(config);
    const ObserverGain& gain = require_gain(resolved);
    if (!config.master_seed)
        throw ValidationError("config field 'master_seed' is required for stochastic commands");
    const Vec x0 = resolve_x0(config, resolved, false);

    SweepOptions options;
    if (config.mode) {
        if (*config.mode == "full")
            options.mode = SweepMode::full;
        else if (*config.mode == "linearized")
            options.mode = SweepMode::linearized;
        else
            throw ValidationError("config field 'mode' must be 'full' or 'linearized'");
    }
    if (config.noise) options.noise_amplitude = *config.noise;
    if (config.xhat0) {
        options.xhat0 = to_vec(*config.xhat0);
        if (options.xhat0.size() != resolved.model.state_dim)
            throw ValidationError("config field 'xhat0' has the wrong dimension");
    }
    const std::vector<double> grid =
        config.p_grid ? *config.p_grid
                      : std::vector<double>{0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.8, 0.9};

    const SweepResult result =
        sweep_p(resolved.model, gain, x0, grid, steps_or(config, 10000),
                config.realizations ? *config.realizations : 50, *config.master_seed, options);
    if (config.out) {
        std::ostringstream csv;
        write_csv(result, csv);
        write_text_file(*config.out, csv.str());
    }

    std::ostringstream line;
    line << result.points.size() << " grid points, critical p* = " << short_num(result.critical_p)
         << "; divergence flags:";
    bool any = false;
    for (const auto& point : result.points) {
        if (point.diverged) {
            line << ' ' << short_num(point.p);
            any = true;
        }
    }
    if (!any) line << " none";
    std::cout << line.str() << "\n";
    return exit_ok;
}

struct FlagVars {
    std::string model, gain, mode, out, config_path, x0, xhat0, p_grid;
    double p = 0, noise = 0, epsilon = 0, tol = 0, entropy = 0;
    long steps = 0, realizations = 0, samples = 0, burn_in = 0, renorm_period = 0;
    std::uint64_t seed = 0;
};

using OptionMap = std::map<std::string, CLI::Option*>;

// Registers the flags a command accepts (same key set as its JSON config).
OptionMap add_flags(CLI::App* cmd, FlagVars& vars) {
    OptionMap opts;
    for (const auto& key : allowed_keys(cmd->get_name())) {
        if (key == "model")
            opts[key] = cmd->add_option("--model", vars.model,
                                        "built-in name or JSON descriptor path");
        else if (key == "gain")
            opts[key] = cmd->add_option("--gain", vars.gain, "observer gain choice (default)");
        else if (key == "p")
            opts[key] = cmd->add_option("--p", vars.p, "non-erasure probability in (0,1)");
        else if (key == "p_grid")
            opts[key] = cmd->add_option("--p-grid", vars.p_grid,
                                        "comma-separated probabilities, e.g. 0.5,0.6,0.7");
        else if (key == "steps")
            opts[key] = cmd->add_option("--steps", vars.steps, "time horizon T");
        else if (key == "realizations")
            opts[key] = cmd->add_option("--realizations", vars.realizations,
                                        "Monte Carlo realization count");
        else if (key == "noise")
            opts[key] = cmd->add_option("--noise", vars.noise, "plant noise amplitude");
        else if (key == "master_seed")
            opts[key] = cmd->add_option("--seed", vars.seed, "master seed for all random streams");
        else if (key == "mode")
            opts[key] = cmd->add_option("--mode", vars.mode, "sweep mode: full | linearized");
        else if (key == "out")
            opts[key] = cmd->add_option("--out", vars.out, "output file (CSV or JSON)");
        else if (key == "x0")
            opts[key] = cmd->add_option("--x0", vars.x0, "initial state, comma-separated");
        else if (key == "xhat0")
            opts[key] = cmd->add_option("--xhat0", vars.xhat0,
                                        "initial observer state, comma-separated");
        else if (key == "epsilon")
            opts[key] = cmd->add_option("--epsilon", vars.epsilon,
                                        "Riccati regularization (0 = exact determinant tracking)");
        else if (key == "samples")
            opts[key] = cmd->add_option("--samples", vars.samples, "number of sample points");
        else if (key == "burn_in")
            opts[key] = cmd->add_option("--burn-in", vars.burn_in, "transient steps to discard");
        else if (key == "renorm_period")
            opts[key] = cmd->add_option("--renorm-period", vars.renorm_period,
                                        "steps between re-orthonormalizations");
        else if (key == "tol")
            opts[key] = cmd->add_option("--tol", vars.tol, "rank tolerance");
        else if (key == "entropy")
            opts[key] = cmd->add_option("--entropy", vars.entropy,
                                        "entropy value for the entropy-form condition");
    }
    opts["config"] = cmd->add_option("--config", vars.config_path, "JSON config file");
    return opts;
}

ExperimentConfig config_from_flags(const std::string& command, const FlagVars& vars,
                                   const OptionMap& opts) {
    ExperimentConfig config;
    config.command = command;
    auto given = [&](const char* key) {
        auto it = opts.find(key);
        return it != opts.end() && it->second->count() > 0;
    };
    if (given("model")) config.model = vars.model;
    if (given("gain")) config.gain = vars.gain;
    if (given("p")) config.p = vars.p;
    if (given("p_grid")) config.p_grid = split_doubles(vars.p_grid, "--p-grid");
    if (given("steps")) config.steps = vars.steps;
    if (given("realizations")) config.realizations = vars.realizations;
    if (given("noise")) config.noise = vars.noise;
    if (given("master_seed")) config.master_seed = vars.seed;
    if (given("mode")) config.mode = vars.mode;
    if (given("out")) config.out = vars.out;
    if (given("x0")) config.x0 = split_doubles(vars.x0, "--x0");
    if (given("xhat0")) config.xhat0 = split_doubles(vars.xhat0, "--xhat0");
    if (given("epsilon")) config.epsilon = vars.epsilon;
    if (given("samples")) config.samples = vars.samples;
    if (given("burn_in")) config.burn_in = vars.burn_in;
    if (given("renorm_period")) config.renorm_period = vars.renorm_period;
    if (given("tol")) config.tol = vars.tol;
    if (given("entropy")) config.entropy = vars.entropy;
    return config;
}

int dispatch(const ExperimentConfig& config) {
    if (config.command == "lyapunov") return cmd_lyapunov(config);
    if (config.command == "critical-p") return cmd_critical_p(config);
    if (config.command == "riccati-check") return cmd_riccati_check(config);
    if (config.command == "observability") return cmd_observability(config);
    if (config.command == "simulate") return cmd_simulate(config);
    if (config.command == "sweep") return cmd_sweep(config);
    throw ValidationError("unknown command '" + config.command + "'");
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"State observation over Bernoulli erasure channels: Lyapunov spectra, "
                 "Riccati necessary conditions, critical probabilities, and Monte Carlo "
                 "experiments"};
    app.require_subcommand(1);

    FlagVars vars;
    std::map<std::string, OptionMap> options;
    const char* commands[] = {"lyapunov",      "critical-p", "riccati-check",
                              "observability", "simulate",   "sweep"};
    const char* briefs[] = {"estimate the Lyapunov spectrum",
                            "closed-form critical erasure probability",
                            "Riccati necessary-condition trace along a trajectory",
                            "observability rank condition over sampled states",
                            "Monte Carlo observer error under erasures",
                            "peak error statistic across an erasure-probability grid"};
    for (std::size_t i = 0; i < 6; ++i) {
        CLI::App* sub = app.add_subcommand(commands[i], briefs[i]);
        options[commands[i]] = add_flags(sub, vars);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: " << e.what() << "\n";
        return exit_validation;
    }

    try {
        CLI::App* active = app.get_subcommands().at(0);
        const std::string command = active->get_name();
        const OptionMap& opts = options.at(command);

        ExperimentConfig config;
        config.command = command;
        if (opts.at("config")->count() > 0) {
            std::ifstream in(vars.config_path);
            if (!in) throw ValidationError("cannot open config file '" + vars.config_path + "'");
            nlohmann::json j;
            try {
                in >> j;
            } catch (const nlohmann::json::exception& e) {
                throw ValidationError(std::string("failed to parse config JSON: ") + e.what());
            }
            config = config_from_json(command, j);
        }
        config = merge(config, config_from_flags(command, vars, opts));
        return dispatch(config);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_validation;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return exit_divergence;
    }
}

}  // namespace eobs
