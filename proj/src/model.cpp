#include "eobs/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "eobs/rng.hpp"

namespace eobs {

namespace {

void check_dim(const Vec& x, int expected, const char* where) {
    if (x.size() != expected) {
        std::ostringstream msg;
        msg << where << ": state has dimension " << x.size() << ", model expects " << expected;
        throw ValidationError(msg.str());
    }
    if (!x.allFinite()) {
        std::ostringstream msg;
        msg << where << ": state contains non-finite entries";
        throw ValidationError(msg.str());
    }
}

// Central differences with per-coordinate step h_i = max(1e-6, 1e-6*|x_i|).
Mat fd_jacobian(const std::function<Vec(const Vec&)>& fn, const Vec& x, int out_dim) {
    const auto n = x.size();
    Mat J(out_dim, n);
    Vec xp = x, xm = x;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double h = std::max(1e-6, 1e-6 * std::abs(x[i]));
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        J.col(i) = (fn(xp) - fn(xm)) / (2.0 * h);
        xp[i] = x[i];
        xm[i] = x[i];
    }
    return J;
}

}  // namespace

Vec step(const SystemModel& model, const Vec& x) {
    check_dim(x, model.state_dim, "step");
    return model.map(x);
}

Vec output(const SystemModel& model, const Vec& x) {
    check_dim(x, model.state_dim, "output");
    return model.output(x);
}

Mat jacobian(const SystemModel& model, const Vec& x) {
    check_dim(x, model.state_dim, "jacobian");
    if (model.jacobian_mode == JacobianMode::analytic && model.map_jacobian)
        return model.map_jacobian(x);
    return fd_jacobian(model.map, x, model.state_dim);
}

Mat output_jacobian(const SystemModel& model, const Vec& x) {
    check_dim(x, model.state_dim, "output_jacobian");
    if (model.jacobian_mode == JacobianMode::analytic && model.output_jacobian)
        return model.output_jacobian(x);
    return fd_jacobian(model.output, x, model.output_dim);
}

Mat gain_jacobian(const ObserverGain& gain, const Vec& y, int state_dim) {
    if (gain.gain_jacobian) return gain.gain_jacobian(y);
    return fd_jacobian(gain.gain, y, state_dim);
}

Trajectory trajectory(const SystemModel& model, const Vec& x0, long horizon,
                      double noise_amplitude, std::uint64_t seed) {
    check_dim(x0, model.state_dim, "trajectory");
    if (horizon < 1) throw ValidationError("trajectory: horizon must be >= 1");
    if (noise_amplitude < 0) throw ValidationError("trajectory: noise_amplitude must be >= 0");

    Trajectory traj;
    traj.noise_amplitude = noise_amplitude;
    traj.seed = seed;
    traj.states.reserve(static_cast<std::size_t>(horizon) + 1);
    traj.states.push_back(x0);

    Vec x = x0;
    for (long t = 0; t < horizon; ++t) {
        Vec next = model.map(x);
        if (noise_amplitude > 0) {
            for (int i = 0; i < model.state_dim; ++i)
                next[i] += noise_amplitude *
                           rng::uniform01(seed, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(i));
        }
        if (!next.allFinite()) {
            std::ostringstream msg;
            msg << "trajectory diverged to non-finite values at step " << t + 1;
            throw NumericalError(msg.str());
        }
        traj.states.push_back(next);
        x = std::move(next);
    }
    return traj;
}

namespace {

BuiltinSystem make_henon() {
    static constexpr double a = 1.4, b = 0.3;
    BuiltinSystem sys;
    sys.model.state_dim = 2;
    sys.model.output_dim = 1;
    sys.model.description = "Henon map (a=1.4, b=0.3), output y = x1";
    sys.model.map = [](const Vec& x) {
        Vec r(2);
        r << 1.0 - a * x[0] * x[0] + x[1], b * x[0];
        return r;
    };
    sys.model.output = [](const Vec& x) {
        Vec y(1);
        y << x[0];
        return y;
    };
    sys.model.map_jacobian = [](const Vec& x) {
        Mat J(2, 2);
        J << -2.0 * a * x[0], 1.0, b, 0.0;
        return J;
    };
    sys.model.output_jacobian = [](const Vec&) {
        Mat C(1, 2);
        C << 1.0, 0.0;
        return C;
    };
    // Output injection K(y) = (-a y^2, b y): cancels the nonlinearity, so a
    // received measurement maps the error (e1,e2) to (e2,0) -- the error is
    // exactly zero after two consecutive receptions.
    sys.gain.description = "deadbeat output injection K(y) = (-a y^2, b y)";
    sys.gain.gain = [](const Vec& y) {
        Vec k(2);
        k << -a * y[0] * y[0], b * y[0];
        return k;
    };
    sys.gain.gain_jacobian = [](const Vec& y) {
        Mat K(2, 1);
        K << -2.0 * a * y[0], b;
        return K;
    };
    return sys;
}

BuiltinSystem make_linear_scalar() {
    BuiltinSystem sys;
    sys.model.state_dim = 1;
    sys.model.output_dim = 1;
    sys.model.description = "scalar linear system x' = 2x, y = x";
    sys.model.map = [](const Vec& x) { return Vec(2.0 * x); };
    sys.model.output = [](const Vec& x) { return x; };
    sys.model.map_jacobian = [](const Vec&) { return Mat::Constant(1, 1, 2.0); };
    sys.model.output_jacobian = [](const Vec&) { return Mat::Constant(1, 1, 1.0); };
    sys.gain.description = "deadbeat gain K(y) = 2y (k = a/c)";
    sys.gain.gain = [](const Vec& y) { return Vec(2.0 * y); };
    sys.gain.gain_jacobian = [](const Vec&) { return Mat::Constant(1, 1, 2.0); };
    return sys;
}

BuiltinSystem make_linear_diagonal() {
    BuiltinSystem sys;
    sys.model.state_dim = 2;
    sys.model.output_dim = 1;
    sys.model.description = "linear system x' = diag(2,3) x, y = x1 + x2";
    Mat A(2, 2);
    A << 2.0, 0.0, 0.0, 3.0;
    sys.model.map = [A](const Vec& x) { return Vec(A * x); };
    sys.model.output = [](const Vec& x) {
        Vec y(1);
        y << x[0] + x[1];
        return y;
    };
    sys.model.map_jacobian = [A](const Vec&) { return A; };
    sys.model.output_jacobian = [](const Vec&) {
        Mat C(1, 2);
        C << 1.0, 1.0;
        return C;
    };
    // Pole placement: K = (-4, 9)' puts both eigenvalues of A - KC at zero,
    // so (A - KC)^2 = 0 (deadbeat).
    sys.gain.description = "deadbeat gain K(y) = (-4y, 9y)";
    sys.gain.gain = [](const Vec& y) {
        Vec k(2);
        k << -4.0 * y[0], 9.0 * y[0];
        return k;
    };
    sys.gain.gain_jacobian = [](const Vec&) {
        Mat K(2, 1);
        K << -4.0, 9.0;
        return K;
    };
    return sys;
}

BuiltinSystem make_logistic() {
    // Logistic map 4u(1-u) conjugated by u = z + 3/4, which moves the
    // interior fixed point u* = 3/4 to the origin: z' = -2z - 4z^2.  The
    // origin is then a fixed point on the attractor with multiplier -2.
    BuiltinSystem sys;
    sys.model.state_dim = 1;
    sys.model.output_dim = 1;
    sys.model.description = "logistic map centered at its interior fixed point: z' = -2z - 4z^2 (z = u - 3/4)";
    sys.model.map = [](const Vec& z) { return Vec(-2.0 * z - 4.0 * z.cwiseProduct(z)); };
    sys.model.output = [](const Vec& z) { return z; };
    sys.model.map_jacobian = [](const Vec& z) { return Mat::Constant(1, 1, -2.0 - 8.0 * z[0]); };
    sys.model.output_jacobian = [](const Vec&) { return Mat::Constant(1, 1, 1.0); };
    sys.gain.description = "deadbeat output injection K(y) = -2y - 4y^2 (= f(y))";
    sys.gain.gain = [](const Vec& y) { return Vec(-2.0 * y - 4.0 * y.cwiseProduct(y)); };
    sys.gain.gain_jacobian = [](const Vec& y) { return Mat::Constant(1, 1, -2.0 - 8.0 * y[0]); };
    return sys;
}

}  // namespace

const std::vector<std::string>& builtin_names() {
    static const std::vector<std::string> names = {"henon", "linear-scalar", "linear-diagonal",
                                                   "logistic"};
    return names;
}

BuiltinSystem builtin(const std::string& name) {
    if (name == "henon") return make_henon();
    if (name == "linear-scalar") return make_linear_scalar();
    if (name == "linear-diagonal") return make_linear_diagonal();
    if (name == "logistic") return make_logistic();
    std::ostringstream msg;
    msg << "unknown built-in model '" << name << "'; available:";
    for (const auto& n : builtin_names()) msg << " " << n;
    throw ValidationError(msg.str());
}

namespace {

struct PolyTerm {
    double coef = 0.0;
    std::vector<int> exps;
};

using Polynomial = std::vector<PolyTerm>;

double poly_eval(const Polynomial& poly, const Vec& x) {
    double v = 0.0;
    for (const auto& term : poly) {
        double m = term.coef;
        for (std::size_t i = 0; i < term.exps.size(); ++i) {
            for (int k = 0; k < term.exps[i]; ++k) m *= x[static_cast<Eigen::Index>(i)];
        }
        v += m;
    }
    return v;
}

// d/dx_j of a single term: e_j * c * x_j^(e_j-1) * prod_{i != j} x_i^e_i.
double poly_partial(const Polynomial& poly, const Vec& x, int j) {
    double v = 0.0;
    for (const auto& term : poly) {
        const int ej = term.exps[static_cast<std::size_t>(j)];
        if (ej == 0) continue;
        double m = term.coef * ej;
        for (std::size_t i = 0; i < term.exps.size(); ++i) {
            const int e = term.exps[i] - (i == static_cast<std::size_t>(j) ? 1 : 0);
            for (int k = 0; k < e; ++k) m *= x[static_cast<Eigen::Index>(i)];
        }
        v += m;
    }
    return v;
}

void reject_unknown_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                         const char* where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* key : allowed)
            if (it.key() == key) known = true;
        if (!known) {
            std::ostringstream msg;
            msg << where << ": unknown field '" << it.key() << "'";
            throw ValidationError(msg.str());
        }
    }
}

std::vector<Polynomial> parse_poly_block(const nlohmann::json& block, int count, int state_dim,
                                         const char* name) {
    if (!block.is_array() || static_cast<int>(block.size()) != count) {
        std::ostringstream msg;
        msg << "model descriptor: '" << name << "' must be an array of " << count
            << " coordinate term lists";
        throw ValidationError(msg.str());
    }
    std::vector<Polynomial> polys;
    for (const auto& coord : block) {
        if (!coord.is_array())
            throw ValidationError(std::string("model descriptor: each '") + name +
                                  "' coordinate must be an array of terms");
        Polynomial poly;
        for (const auto& term : coord) {
            if (!term.is_object())
                throw ValidationError("model descriptor: each term must be an object");
            reject_unknown_keys(term, {"coef", "exps"}, "model descriptor term");
            if (!term.contains("coef") || !term["coef"].is_number())
                throw ValidationError("model descriptor: term missing numeric 'coef'");
            if (!term.contains("exps") || !term["exps"].is_array() ||
                static_cast<int>(term["exps"].size()) != state_dim)
                throw ValidationError(
                    "model descriptor: term 'exps' must list one exponent per state coordinate");
            PolyTerm pt;
            pt.coef = term["coef"].get<double>();
            for (const auto& e : term["exps"]) {
                if (!e.is_number_integer() || e.get<int>() < 0)
                    throw ValidationError("model descriptor: exponents must be non-negative integers");
                pt.exps.push_back(e.get<int>());
            }
            poly.push_back(std::move(pt));
        }
        polys.push_back(std::move(poly));
    }
    return polys;
}

}  // namespace

SystemModel model_from_json(const nlohmann::json& descriptor) {
    if (!descriptor.is_object()) throw ValidationError("model descriptor: expected a JSON object");
    reject_unknown_keys(descriptor, {"name", "state_dim", "output_dim", "map", "output"},
                        "model descriptor");
    for (const char* key : {"state_dim", "output_dim", "map", "output"}) {
        if (!descriptor.contains(key)) {
            std::ostringstream msg;
            msg << "model descriptor: missing field '" << key << "'";
            throw ValidationError(msg.str());
        }
    }
    if (!descriptor["state_dim"].is_number_integer() || descriptor["state_dim"].get<int>() < 1)
        throw ValidationError("model descriptor: 'state_dim' must be a positive integer");
    if (!descriptor["output_dim"].is_number_integer() || descriptor["output_dim"].get<int>() < 1)
        throw ValidationError("model descriptor: 'output_dim' must be a positive integer");

    const int n = descriptor["state_dim"].get<int>();
    const int m = descriptor["output_dim"].get<int>();
    auto map_polys = parse_poly_block(descriptor["map"], n, n, "map");
    auto out_polys = parse_poly_block(descriptor["output"], m, n, "output");

    SystemModel model;
    model.state_dim = n;
    model.output_dim = m;
    model.description = descriptor.value("name", std::string("polynomial model"));
    model.map = [map_polys, n](const Vec& x) {
        Vec r(n);
        for (int i = 0; i < n; ++i) r[i] = poly_eval(map_polys[static_cast<std::size_t>(i)], x);
        return r;
    };
    model.output = [out_polys, m](const Vec& x) {
        Vec y(m);
        for (int i = 0; i < m; ++i) y[i] = poly_eval(out_polys[static_cast<std::size_t>(i)], x);
        return y;
    };
    model.map_jacobian = [map_polys, n](const Vec& x) {
        Mat J(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                J(i, j) = poly_partial(map_polys[static_cast<std::size_t>(i)], x, j);
        return J;
    };
    model.output_jacobian = [out_polys, m, n](const Vec& x) {
        Mat C(m, n);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                C(i, j) = poly_partial(out_polys[static_cast<std::size_t>(i)], x, j);
        return C;
    };
    return model;
}

SystemModel load_model(const std::string& name_or_path) {
    for (const auto& n : builtin_names())
        if (name_or_path == n) return builtin(name_or_path).model;
    std::ifstream in(name_or_path);
    if (!in) {
        std::ostringstream msg;
        msg << "'" << name_or_path << "' is neither a built-in model nor a readable file; built-ins:";
        for (const auto& n : builtin_names()) msg << " " << n;
        throw ValidationError(msg.str());
    }
    nlohmann::json descriptor;
    try {
        in >> descriptor;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("failed to parse model descriptor: ") + e.what());
    }
    return model_from_json(descriptor);
}

}  // namespace eobs
