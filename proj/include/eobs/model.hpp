#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eobs/types.hpp"

namespace eobs {

enum class JacobianMode { analytic, finite_difference };

// Discrete-time system x_{t+1} = f(x_t), y_t = h(x_t).
//
// map_jacobian / output_jacobian may be left empty, in which case central
// finite differences are used.  Models are value types: all members are
// copyable and evaluation has no shared mutable state, so a model can be
// used from many threads at once.
struct SystemModel {
    int state_dim = 0;
    int output_dim = 0;
    std::function<Vec(const Vec&)> map;
    std::function<Vec(const Vec&)> output;
    std::function<Mat(const Vec&)> map_jacobian;
    std::function<Mat(const Vec&)> output_jacobian;
    JacobianMode jacobian_mode = JacobianMode::analytic;
    std::string description;
};

// Observer gain K: Y -> X with K(0) = 0.  gain_jacobian (dK/dy, N×M) is
// optional and falls back to finite differences; it is only needed for
// linearized error propagation.
struct ObserverGain {
    std::function<Vec(const Vec&)> gain;
    std::function<Mat(const Vec&)> gain_jacobian;
    std::string description;
};

struct Trajectory {
    std::vector<Vec> states;  // x_0 .. x_T
    double noise_amplitude = 0.0;
    std::uint64_t seed = 0;
};

struct BuiltinSystem {
    SystemModel model;
    ObserverGain gain;
};

[[nodiscard]] Vec step(const SystemModel& model, const Vec& x);
[[nodiscard]] Vec output(const SystemModel& model, const Vec& x);

// A(x) = df/dx and C(x) = dh/dx, analytic when the model provides them.
[[nodiscard]] Mat jacobian(const SystemModel& model, const Vec& x);
[[nodiscard]] Mat output_jacobian(const SystemModel& model, const Vec& x);

// dK/dy at y, analytic when the gain provides it.
[[nodiscard]] Mat gain_jacobian(const ObserverGain& gain, const Vec& y, int state_dim);

// Iterates the map for `horizon` steps, adding per-component noise uniform
// in [0, noise_amplitude] at each step.  Deterministic in (seed); throws
// NumericalError naming the step if the state leaves finite range.
[[nodiscard]] Trajectory trajectory(const SystemModel& model, const Vec& x0, long horizon,
                                    double noise_amplitude, std::uint64_t seed);

// Built-in models: "henon", "linear-scalar", "linear-diagonal", "logistic".
// Each ships with a default gain making the no-erasure error dynamics
// asymptotically stable (deadbeat for all four).
[[nodiscard]] BuiltinSystem builtin(const std::string& name);
[[nodiscard]] const std::vector<std::string>& builtin_names();

// User-defined polynomial models; see README for the descriptor grammar.
[[nodiscard]] SystemModel model_from_json(const nlohmann::json& descriptor);

// Resolves a builtin name or a path to a JSON descriptor file.
[[nodiscard]] SystemModel load_model(const std::string& name_or_path);

}  // namespace eobs
