#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "eobs/types.hpp"

namespace eobs {

// Parameter record for one CLI invocation, merged from --config JSON and
// command-line flags (flags win).  Only keys meaningful for the given
// command are accepted; anything else is rejected by name.
struct ExperimentConfig {
    std::string command;

    // Built-in name, descriptor file path (JSON string), or inline
    // descriptor object.
    std::optional<nlohmann::json> model;
    std::optional<std::string> gain;
    std::optional<double> p;
    std::optional<std::vector<double>> p_grid;
    std::optional<long> steps;
    std::optional<long> realizations;
    std::optional<double> noise;
    std::optional<std::uint64_t> master_seed;
    std::optional<std::string> mode;  // "full" | "linearized"
    std::optional<std::string> out;
    std::optional<std::vector<double>> x0;
    std::optional<std::vector<double>> xhat0;
    std::optional<double> epsilon;
    std::optional<long> samples;
    std::optional<long> burn_in;
    std::optional<long> renorm_period;
    std::optional<double> tol;
    std::optional<double> entropy;

    bool operator==(const ExperimentConfig&) const = default;
};

// Keys a command accepts in its JSON config (same names as the struct).
[[nodiscard]] const std::vector<std::string>& allowed_keys(const std::string& command);

[[nodiscard]] ExperimentConfig config_from_json(const std::string& command,
                                                const nlohmann::json& j);
[[nodiscard]] nlohmann::json to_json(const ExperimentConfig& config);

// Overlays every field set in `overrides` onto `base`.
[[nodiscard]] ExperimentConfig merge(ExperimentConfig base, const ExperimentConfig& overrides);

}  // namespace eobs
