#include "eobs/config.hpp"

#include <algorithm>
#include <sstream>

namespace eobs {

namespace {

const std::vector<std::string>& key_set(const std::string& command) {
    static const std::vector<std::string> lyapunov = {"model", "steps", "burn_in",
                                                      "renorm_period", "master_seed", "x0", "out"};
    static const std::vector<std::string> critical_p = {
        "model", "steps", "burn_in", "renorm_period", "master_seed", "x0", "p", "entropy", "out"};
    static const std::vector<std::string> riccati = {"model", "p", "steps", "epsilon", "x0", "out"};
    static const std::vector<std::string> observability = {"model", "samples", "tol",
                                                           "master_seed", "x0", "out"};
    static const std::vector<std::string> simulate = {"model", "gain",  "p",  "steps", "realizations",
                                                      "noise", "master_seed", "x0", "xhat0", "out"};
    static const std::vector<std::string> sweep = {"model", "gain",        "p_grid", "steps",
                                                   "realizations", "mode", "noise",  "master_seed",
                                                   "x0",    "xhat0",       "out"};
    if (command == "lyapunov") return lyapunov;
    if (command == "critical-p") return critical_p;
    if (command == "riccati-check") return riccati;
    if (command == "observability") return observability;
    if (command == "simulate") return simulate;
    if (command == "sweep") return sweep;
    throw ValidationError("unknown command '" + command + "'");
}

template <typename T>
T get_checked(const nlohmann::json& j, const char* key, bool (nlohmann::json::*is_type)() const,
              const char* type_name) {
    if (!(j.*is_type)()) {
        std::ostringstream msg;
        msg << "config field '" << key << "' must be " << type_name;
        throw ValidationError(msg.str());
    }
    return j.get<T>();
}

std::vector<double> number_list(const nlohmann::json& j, const char* key) {
    if (!j.is_array()) {
        std::ostringstream msg;
        msg << "config field '" << key << "' must be an array of numbers";
        throw ValidationError(msg.str());
    }
    std::vector<double> values;
    for (const auto& v : j) {
        if (!v.is_number()) {
            std::ostringstream msg;
            msg << "config field '" << key << "' must be an array of numbers";
            throw ValidationError(msg.str());
        }
        values.push_back(v.get<double>());
    }
    return values;
}

}  // namespace

const std::vector<std::string>& allowed_keys(const std::string& command) {
    return key_set(command);
}

ExperimentConfig config_from_json(const std::string& command, const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    const auto& allowed = key_set(command);
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
            std::ostringstream msg;
            msg << "config field '" << it.key() << "' is not recognized for command '" << command
                << "'";
            throw ValidationError(msg.str());
        }
    }

    ExperimentConfig config;
    config.command = command;
    if (j.contains("model")) {
        const auto& m = j["model"];
        if (!m.is_string() && !m.is_object())
            throw ValidationError(
                "config field 'model' must be a name, a descriptor path, or a descriptor object");
        config.model = m;
    }
    if (j.contains("gain"))
        config.gain = get_checked<std::string>(j["gain"], "gain", &nlohmann::json::is_string,
                                               "a string");
    if (j.contains("p"))
        config.p = get_checked<double>(j["p"], "p", &nlohmann::json::is_number, "a number");
    if (j.contains("p_grid")) config.p_grid = number_list(j["p_grid"], "p_grid");
    if (j.contains("steps"))
        config.steps = get_checked<long>(j["steps"], "steps", &nlohmann::json::is_number_integer,
                                         "an integer");
    if (j.contains("realizations"))
        config.realizations = get_checked<long>(j["realizations"], "realizations",
                                                &nlohmann::json::is_number_integer, "an integer");
    if (j.contains("noise"))
        config.noise =
            get_checked<double>(j["noise"], "noise", &nlohmann::json::is_number, "a number");
    if (j.contains("master_seed")) {
        const auto& seed = j["master_seed"];
        if (!seed.is_number_integer() ||
            (!seed.is_number_unsigned() && seed.get<long long>() < 0))
            throw ValidationError("config field 'master_seed' must be a non-negative integer");
        config.master_seed = seed.get<std::uint64_t>();
    }
    if (j.contains("mode"))
        config.mode =
            get_checked<std::string>(j["mode"], "mode", &nlohmann::json::is_string, "a string");
    if (j.contains("out"))
        config.out =
            get_checked<std::string>(j["out"], "out", &nlohmann::json::is_string, "a string");
    if (j.contains("x0")) config.x0 = number_list(j["x0"], "x0");
    if (j.contains("xhat0")) config.xhat0 = number_list(j["xhat0"], "xhat0");
    if (j.contains("epsilon"))
        config.epsilon =
            get_checked<double>(j["epsilon"], "epsilon", &nlohmann::json::is_number, "a number");
    if (j.contains("samples"))
        config.samples = get_checked<long>(j["samples"], "samples",
                                           &nlohmann::json::is_number_integer, "an integer");
    if (j.contains("burn_in"))
        config.burn_in = get_checked<long>(j["burn_in"], "burn_in",
                                           &nlohmann::json::is_number_integer, "an integer");
    if (j.contains("renorm_period"))
        config.renorm_period = get_checked<long>(j["renorm_period"], "renorm_period",
                                                 &nlohmann::json::is_number_integer, "an integer");
    if (j.contains("tol"))
        config.tol = get_checked<double>(j["tol"], "tol", &nlohmann::json::is_number, "a number");
    if (j.contains("entropy"))
        config.entropy =
            get_checked<double>(j["entropy"], "entropy", &nlohmann::json::is_number, "a number");
    return config;
}

nlohmann::json to_json(const ExperimentConfig& config) {
    nlohmann::json j = nlohmann::json::object();
    if (config.model) j["model"] = *config.model;
    if (config.gain) j["gain"] = *config.gain;
    if (config.p) j["p"] = *config.p;
    if (config.p_grid) j["p_grid"] = *config.p_grid;
    if (config.steps) j["steps"] = *config.steps;
    if (config.realizations) j["realizations"] = *config.realizations;
    if (config.noise) j["noise"] = *config.noise;
    if (config.master_seed) j["master_seed"] = *config.master_seed;
    if (config.mode) j["mode"] = *config.mode;
    if (config.out) j["out"] = *config.out;
    if (config.x0) j["x0"] = *config.x0;
    if (config.xhat0) j["xhat0"] = *config.xhat0;
    if (config.epsilon) j["epsilon"] = *config.epsilon;
    if (config.samples) j["samples"] = *config.samples;
    if (config.burn_in) j["burn_in"] = *config.burn_in;
    if (config.renorm_period) j["renorm_period"] = *config.renorm_period;
    if (config.tol) j["tol"] = *config.tol;
    if (config.entropy) j["entropy"] = *config.entropy;
    return j;
}

ExperimentConfig merge(ExperimentConfig base, const ExperimentConfig& overrides) {
    if (!overrides.command.empty()) base.command = overrides.command;
    if (overrides.model) base.model = overrides.model;
    if (overrides.gain) base.gain = overrides.gain;
    if (overrides.p) base.p = overrides.p;
    if (overrides.p_grid) base.p_grid = overrides.p_grid;
    if (overrides.steps) base.steps = overrides.steps;
    if (overrides.realizations) base.realizations = overrides.realizations;
    if (overrides.noise) base.noise = overrides.noise;
    if (overrides.master_seed) base.master_seed = overrides.master_seed;
    if (overrides.mode) base.mode = overrides.mode;
    if (overrides.out) base.out = overrides.out;
    if (overrides.x0) base.x0 = overrides.x0;
    if (overrides.xhat0) base.xhat0 = overrides.xhat0;
    if (overrides.epsilon) base.epsilon = overrides.epsilon;
    if (overrides.samples) base.samples = overrides.samples;
    if (overrides.burn_in) base.burn_in = overrides.burn_in;
    if (overrides.renorm_period) base.renorm_period = overrides.renorm_period;
    if (overrides.tol) base.tol = overrides.tol;
    if (overrides.entropy) base.entropy = overrides.entropy;
    return base;
}

}  // namespace eobs
