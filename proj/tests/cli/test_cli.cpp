// End-to-end tests against the installed command-line binary.  The test
// runner passes the binary location as:  cli_tests --binary <path>

#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

namespace {

std::string g_binary;
std::filesystem::path g_workdir;

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout and stderr interleaved
};

// Runs `<binary> <args>` through the shell, capturing output and exit code.
RunResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    const std::string command = env_prefix + "'" + g_binary + "' " + args + " 2>&1";
    RunResult result;
    FILE* pipe = popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buffer{};
    std::size_t got = 0;
    while ((got = fread(buffer.data(), 1, buffer.size(), pipe)) > 0)
        result.output.append(buffer.data(), got);
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::filesystem::path workfile(const std::string& name) { return g_workdir / name; }

std::string q(const std::filesystem::path& path) { return "'" + path.string() + "'"; }

}  // namespace

TEST_CASE("running without a subcommand fails as a usage error") {
    const RunResult r = run_cli("");
    CHECK(r.exit_code == 2);
}

TEST_CASE("--help succeeds and lists every subcommand") {
    const RunResult r = run_cli("--help");
    CHECK(r.exit_code == 0);
    for (const char* name :
         {"lyapunov", "critical-p", "riccati-check", "observability", "simulate", "sweep"})
        CHECK(r.output.find(name) != std::string::npos);
}

TEST_CASE("lyapunov on a constant-Jacobian model prints the exact exponents") {
    const RunResult r = run_cli("lyapunov --model linear-diagonal --steps 100 --burn-in 0");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("exponents: 1.09861 0.693147") != std::string::npos);
    CHECK(r.output.find("converged") != std::string::npos);
}

TEST_CASE("lyapunov writes a JSON report when asked") {
    const auto out = workfile("spectrum.json");
    const RunResult r = run_cli("lyapunov --model linear-scalar --steps 100 --burn-in 0 --out " +
                                q(out));
    CHECK(r.exit_code == 0);
    const nlohmann::json j = nlohmann::json::parse(slurp(out));
    CHECK(j["exponents"].size() == 1);
    CHECK(j["horizon"] == 100);
}

TEST_CASE("unknown models are a validation error naming the alternatives") {
    const RunResult r = run_cli("lyapunov --model lorenz --steps 100");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("neither a built-in model") != std::string::npos);
    CHECK(r.output.find("henon") != std::string::npos);
}

TEST_CASE("critical-p reports the closed-form boundary for scalar doubling") {
    const RunResult r = run_cli("critical-p --model linear-scalar --steps 200 --burn-in 0");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("p* = 0.75") != std::string::npos);
    CHECK(r.output.find("q* = 0.25") != std::string::npos);
}

TEST_CASE("critical-p evaluates a verdict at a supplied probability") {
    const RunResult above =
        run_cli("critical-p --model linear-scalar --steps 200 --burn-in 0 --p 0.8");
    CHECK(above.exit_code == 0);
    CHECK(above.output.find("satisfied") != std::string::npos);
    const RunResult below =
        run_cli("critical-p --model linear-scalar --steps 200 --burn-in 0 --p 0.6");
    CHECK(below.exit_code == 0);
    CHECK(below.output.find("violated") != std::string::npos);
    // Entropy form needs the probability to evaluate at.
    const RunResult bad =
        run_cli("critical-p --model linear-scalar --steps 200 --burn-in 0 --entropy 0.69");
    CHECK(bad.exit_code == 2);
}

TEST_CASE("riccati-check verdicts straddle the scalar boundary") {
    const RunResult ok = run_cli("riccati-check --model linear-scalar --p 0.8 --steps 500");
    CHECK(ok.exit_code == 0);
    CHECK(ok.output.find("satisfiable") != std::string::npos);
    const RunResult bad = run_cli("riccati-check --model linear-scalar --p 0.5 --steps 500");
    CHECK(bad.exit_code == 0);
    CHECK(bad.output.find("VIOLATED") != std::string::npos);
    const RunResult missing = run_cli("riccati-check --model linear-scalar --steps 10");
    CHECK(missing.exit_code == 2);
    CHECK(missing.output.find("'p'") != std::string::npos);
}

TEST_CASE("riccati-check reports unbounded growth as divergence") {
    const auto model = workfile("blind.json");
    {
        std::ofstream out(model);
        out << R"({"name":"blind","state_dim":1,"output_dim":1,)"
            << R"("map":[[{"coef":2.0,"exps":[1]}]],"output":[[]]})";
    }
    const RunResult r =
        run_cli("riccati-check --model " + q(model) + " --p 0.5 --steps 100 --x0 0.1");
    CHECK(r.exit_code == 3);
    CHECK(r.output.find("stopped at step") != std::string::npos);
    CHECK(r.output.find("unbounded") != std::string::npos);
}

TEST_CASE("riccati-check writes the pinned CSV columns") {
    const auto out = workfile("riccati.csv");
    const RunResult r =
        run_cli("riccati-check --model henon --p 0.55 --steps 50 --out " + q(out));
    CHECK(r.exit_code == 0);
    const std::string csv = slurp(out);
    CHECK(csv.rfind("t,det_Q0,condition_value,running_log_mean\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 51);
}

TEST_CASE("observability scans builtin attractors cleanly") {
    const RunResult r = run_cli("observability --model henon --samples 50");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("satisfied at all 50 samples") != std::string::npos);
    CHECK(r.output.find("alpha_theta=") != std::string::npos);
}

TEST_CASE("simulate prints a peak summary and honors --out") {
    const auto out = workfile("run.csv");
    const RunResult r = run_cli(
        "simulate --model henon --p 0.7 --steps 500 --realizations 8 --seed 42 --out " + q(out));
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("peak mean-square error") != std::string::npos);
    CHECK(r.output.find("diverged: 0/8") != std::string::npos);
    const std::string csv = slurp(out);
    CHECK(csv.rfind("t,mean_sq_error\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 502);  // header + 501 steps
}

TEST_CASE("simulate without required parameters names the missing field") {
    const RunResult no_p = run_cli("simulate --model henon --steps 10 --realizations 2 --seed 1");
    CHECK(no_p.exit_code == 2);
    CHECK(no_p.output.find("'p'") != std::string::npos);
    const RunResult no_seed = run_cli("simulate --model henon --p 0.7 --steps 10 --realizations 2");
    CHECK(no_seed.exit_code == 2);
    CHECK(no_seed.output.find("master_seed") != std::string::npos);
}

TEST_CASE("simulate flags runaway realizations with exit 3") {
    // Receptions are so rare that the doubling error crosses the divergence
    // threshold inside the horizon for at least one realization.
    const RunResult r = run_cli(
        "simulate --model linear-scalar --p 0.02 --steps 3000 --realizations 4 --seed 11");
    CHECK(r.exit_code == 3);
    CHECK(r.output.find("diverged:") != std::string::npos);
    CHECK(r.output.find("diverged: 0/4") == std::string::npos);
}

TEST_CASE("stochastic outputs are byte-identical across reruns and thread counts") {
    const auto a = workfile("det_a.csv");
    const auto b = workfile("det_b.csv");
    const auto c = workfile("det_c.csv");
    const std::string args = "simulate --model henon --p 0.6 --steps 400 --realizations 12 --seed 7 --out ";
    CHECK(run_cli(args + q(a), "ERASURE_OBS_THREADS=1 ").exit_code == 0);
    CHECK(run_cli(args + q(b), "ERASURE_OBS_THREADS=4 ").exit_code == 0);
    CHECK(run_cli(args + q(c)).exit_code == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(a) == slurp(c));

    const auto sa = workfile("sweep_a.csv");
    const auto sb = workfile("sweep_b.csv");
    const std::string sweep_args =
        "sweep --model henon --p-grid 0.55,0.7 --steps 400 --realizations 6 --seed 9 --out ";
    CHECK(run_cli(sweep_args + q(sa), "ERASURE_OBS_THREADS=1 ").exit_code == 0);
    CHECK(run_cli(sweep_args + q(sb), "ERASURE_OBS_THREADS=4 ").exit_code == 0);
    CHECK(slurp(sa) == slurp(sb));
}

TEST_CASE("sweep writes the pinned columns with peaks falling in p") {
    const auto out = workfile("sweep.csv");
    const RunResult r = run_cli(
        "sweep --model henon --p-grid 0.55,0.7 --steps 400 --realizations 6 --seed 7 --out " +
        q(out));
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("2 grid points") != std::string::npos);
    std::istringstream csv(slurp(out));
    std::string header, row_low, row_high;
    REQUIRE(std::getline(csv, header));
    CHECK(header == "p,peak,diverged_flag,critical_p");
    REQUIRE(std::getline(csv, row_low));
    REQUIRE(std::getline(csv, row_high));
    auto peak_of = [](const std::string& row) {
        const auto first = row.find(',');
        const auto second = row.find(',', first + 1);
        return std::stod(row.substr(first + 1, second - first - 1));
    };
    CHECK(peak_of(row_low) > peak_of(row_high));
}

TEST_CASE("flags override the config file and agree with all-flag runs") {
    const auto cfg = workfile("sim.json");
    {
        std::ofstream out(cfg);
        out << R"({"model":"henon","p":0.6,"steps":300,"realizations":4,"master_seed":5})";
    }
    const auto a = workfile("cfg_a.csv");
    const auto b = workfile("cfg_b.csv");
    CHECK(run_cli("simulate --config " + q(cfg) + " --p 0.7 --out " + q(a)).exit_code == 0);
    CHECK(run_cli("simulate --model henon --p 0.7 --steps 300 --realizations 4 --seed 5 --out " +
                  q(b))
              .exit_code == 0);
    CHECK(slurp(a) == slurp(b));
}

TEST_CASE("malformed configs are rejected with the offending field") {
    const auto cfg = workfile("bad.json");
    {
        std::ofstream out(cfg);
        out << R"({"model":"henon","stepz":100})";
    }
    const RunResult r = run_cli("simulate --config " + q(cfg));
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("'stepz'") != std::string::npos);

    {
        std::ofstream out(cfg);
        out << "{ definitely not json";
    }
    const RunResult bad = run_cli("simulate --config " + q(cfg));
    CHECK(bad.exit_code == 2);
    CHECK(bad.output.find("parse") != std::string::npos);
}

TEST_CASE("user-defined polynomial models work where a gain is not needed") {
    const auto model = workfile("henon_poly.json");
    {
        std::ofstream out(model);
        out << R"({"name":"henon-poly","state_dim":2,"output_dim":1,)"
            << R"("map":[[{"coef":1.0,"exps":[0,0]},{"coef":-1.4,"exps":[2,0]},)"
            << R"({"coef":1.0,"exps":[0,1]}],[{"coef":0.3,"exps":[1,0]}]],)"
            << R"("output":[[{"coef":1.0,"exps":[1,0]}]]})";
    }
    const RunResult lyap =
        run_cli("lyapunov --model " + q(model) + " --steps 5000 --burn-in 100 --x0 0.1,0.1");
    CHECK(lyap.exit_code == 0);
    CHECK(lyap.output.find("exponents:") != std::string::npos);

    // Without --x0 a user model cannot pick a default initial state.
    const RunResult no_x0 = run_cli("lyapunov --model " + q(model) + " --steps 5000");
    CHECK(no_x0.exit_code == 2);
    CHECK(no_x0.output.find("'x0'") != std::string::npos);

    // Observer commands need a shipped gain.
    const RunResult sim = run_cli("simulate --model " + q(model) +
                                  " --p 0.7 --steps 10 --realizations 2 --seed 1 --x0 0.1,0.1");
    CHECK(sim.exit_code == 2);
    CHECK(sim.output.find("gain") != std::string::npos);
}

TEST_CASE("bad numeric lists in flags are validation errors") {
    const RunResult r = run_cli("simulate --model henon --p 0.7 --steps 10 --realizations 2 "
                                "--seed 1 --x0 0.1,zebra");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("zebra") != std::string::npos);
    const RunResult grid = run_cli("sweep --model henon --p-grid 0.5,,0.7 --steps 10 "
                                   "--realizations 2 --seed 1");
    CHECK(grid.exit_code == 2);
}

TEST_CASE("unknown gain choices are refused") {
    const RunResult r = run_cli("simulate --model henon --gain fancy --p 0.7 --steps 10 "
                                "--realizations 2 --seed 1");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("fancy") != std::string::npos);
}

int main(int argc, char** argv) {
    std::vector<const char*> passthrough;
    for (int i = 0; i < argc; ++i) {
        if (std::string(argv[i]) == "--binary" && i + 1 < argc) {
            g_binary = argv[++i];
            continue;
        }
        passthrough.push_back(argv[i]);
    }
    if (g_binary.empty()) {
        std::fprintf(stderr, "usage: cli_tests --binary <path-to-erasure-obs>\n");
        return 1;
    }
    g_workdir = std::filesystem::temp_directory_path() / "eobs-cli-tests";
    std::filesystem::create_directories(g_workdir);
    doctest::Context context(static_cast<int>(passthrough.size()),
                             const_cast<char**>(passthrough.data()));
    const int rc = context.run();
    std::error_code ec;
    std::filesystem::remove_all(g_workdir, ec);
    return rc;
}
