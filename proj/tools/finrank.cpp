// finrank: batch front end for the finite-rank perturbation toolkit.
//
//   finrank verify <scenario> [--suite S] [--out report.json] [--json]
//   finrank sweep <scenario> --t-min a --t-max b --steps n [--out file.csv]
//   finrank average <scenario> --kernel poisson --z 0.5+1i
//   finrank a2 <scenario> [--eps-min 1e-6]
//   finrank random --d D --N N --seed S [--out scenario.json]
//
// Exit codes: 0 all checks pass, 1 a check failed, 2 invalid input or usage.
// FINRANK_THREADS and FINRANK_TOL_SCALE set defaults; flags win.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <regex>

#include "finrank/verify.hpp"

using namespace finrank;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitInvalid = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

double env_double(const char* name, double fallback) {
    const char* v = std::getenv(name);
    if (!v || !*v) return fallback;
    char* end = nullptr;
    const double x = std::strtod(v, &end);
    if (*end != '\0' || !(x > 0.0)) throw UsageError(std::string(name) + " must be a positive number, got '" + v + "'");
    return x;
}

unsigned env_threads() {
    const double t = env_double("FINRANK_THREADS", 1.0);
    if (t != std::floor(t) || t > 256) throw UsageError("FINRANK_THREADS must be an integer in [1, 256]");
    return static_cast<unsigned>(t);
}

/// "a+bi", "a-bi", "bi", "i", "a".
Complex parse_complex(const std::string& text) {
    static const std::regex full(R"(^\s*([+-]?[0-9.]+(?:[eE][+-]?\d+)?)?\s*(?:([+-])\s*([0-9.]+(?:[eE][+-]?\d+)?)?\s*i)?\s*$)");
    static const std::regex pure(R"(^\s*([+-]?)([0-9.]+(?:[eE][+-]?\d+)?)?\s*i\s*$)");
    std::smatch m;
    try {
        if (std::regex_match(text, m, pure)) {
            const double im = m[2].matched ? std::stod(m[2]) : 1.0;
            return {0.0, m[1] == "-" ? -im : im};
        }
        if (std::regex_match(text, m, full) && (m[1].matched || m[2].matched)) {
            const double re = m[1].matched ? std::stod(m[1]) : 0.0;
            double im = 0.0;
            if (m[2].matched) {
                im = m[3].matched ? std::stod(m[3]) : 1.0;
                if (m[2] == "-") im = -im;
            }
            return {re, im};
        }
    } catch (const std::logic_error&) {
    }
    throw UsageError("cannot parse complex number '" + text + "' (expected e.g. 0.5+1i)");
}

void write_or_print(const std::string& path, const std::string& content) {
    if (path.empty()) {
        std::cout << content;
        return;
    }
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write '" + path + "'");
    out << content;
}

/// Two copies of one full-rank atom: maximal overlap at a named location.
std::pair<MatrixMeasure, MatrixMeasure> broken_pair(const Scenario& s) {
    const MatrixMeasure m = spectral_measure(s.model());
    const double x = m.atoms().front().location;
    const Atom atom{x, HermitianMatrix::identity(s.d)};
    return {MatrixMeasure(s.d, {atom}), MatrixMeasure(s.d, {atom})};
}

int run_verify(const std::string& scenario, const std::string& suite, const std::string& out, bool json,
               const VerifyOptions& options, bool inject) {
    const Scenario s = load_scenario(scenario);
    VerifyOptions o = options;
    if (inject) o.ad_pair_override = broken_pair(s);
    const Report report = run_verification(s, suite, o);
    if (!out.empty()) write_or_print(out, report_to_json(report).dump(2) + "\n");
    std::cout << (json ? report_to_json(report).dump(2) + "\n" : report_to_text(report));
    return report.passed() ? kExitPass : kExitFail;
}

int run_sweep(const std::string& scenario, double t_min, double t_max, int steps, const std::string& out) {
    if (steps < 2) throw UsageError("--steps must be at least 2");
    if (!(t_max > t_min)) throw UsageError("--t-max must exceed --t-min");
    const Scenario s = load_scenario(scenario);
    const OperatorModel model = s.model();
    const PerturbationFamily family = s.family();
    const MatrixMeasure m = spectral_measure(model);
    std::ostringstream csv;
    csv << "t";
    for (Eigen::Index k = 0; k < s.n; ++k) csv << ",lambda_" << k + 1;
    csv << ",max_overlap_at_common_atoms,a2_max\n";
    csv << std::setprecision(12);
    bool ok = true;
    double last_t = 0.0;
    Eigen::VectorXd last;
    for (int j = 0; j < steps; ++j) {
        const double t = t_min + (t_max - t_min) * j / (steps - 1);
        const HermitianMatrix g = family.at(t);
        const EigenSystem es = hermitian_eig(perturb(model, g));
        const MutualSingularityResult ms =
            vector_mutual_singularity(m, perturbed_measure_direct(model, g).congruence(g.matrix()));
        const A2BoundCheck a2 = a2_bound_check(model, g);
        csv << t;
        Eigen::VectorXd now(s.n);
        for (std::size_t k = 0; k < es.values.size(); ++k) {
            csv << "," << es.values[k];
            now(static_cast<Eigen::Index>(k)) = es.values[k];
        }
        csv << "," << ms.max_overlap << "," << a2.max_value << "\n";
        ok = ok && ms.singular && a2.holds;
        if (j > 0 && (last - now).maxCoeff() > 1e-9 * (1.0 + last.cwiseAbs().maxCoeff())) {
            std::cerr << "eigenvalue trajectory decreases between t=" << last_t << " and t=" << t << "\n";
            ok = false;
        }
        last = now;
        last_t = t;
    }
    write_or_print(out, csv.str());
    return ok ? kExitPass : kExitFail;
}

int run_average(const std::string& scenario, const std::string& kernel, const std::string& z_text, double tol_scale) {
    if (kernel != "poisson") throw UsageError("--kernel: only 'poisson' is supported");
    const Complex z = parse_complex(z_text);
    if (!(z.imag() > 0.0)) throw UsageError("--z must lie in the upper half-plane");
    const Scenario s = load_scenario(scenario);
    const PerturbationFamily family = s.family();
    const LineAverageResult r = line_average(family, PoissonKernelSum::single(z));
    const CMatrix gamma_inv = family.gamma().matrix().inverse();
    const double dev = (r.value - gamma_inv).cwiseAbs().maxCoeff();
    const double tol = s.tolerance("averaging.line_average", 1e-5 * tol_scale);
    std::cout << std::setprecision(12) << "average over t of int p_z dM^G(t), z = " << z.real() << "+" << z.imag()
              << "i\n"
              << r.value.real() << "\nGamma^-1\n"
              << gamma_inv.real() << "\nmax entry deviation " << dev << " (tolerance " << tol << ")\n"
              << "quadrature error estimate " << r.quadrature_error_estimate << ", t range [" << r.t_range_used.first
              << ", " << r.t_range_used.second << "]\n";
    return dev <= tol ? kExitPass : kExitFail;
}

int run_random(Eigen::Index d, Eigen::Index n, std::uint64_t seed, const std::string& out) {
    if (!(d >= 1 && d <= n && n <= 64)) throw UsageError("random requires 1 <= d <= N <= 64");
    write_or_print(out, scenario_to_json(random_scenario(d, n, seed)).dump(2) + "\n");
    return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-rank perturbation toolkit: verification, sweeps and averaging"};
    app.require_subcommand(1);

    VerifyOptions options;
    double tol_scale = 0.0;
    unsigned threads = 0;
    app.add_option("--tol-scale", tol_scale, "Multiply default tolerances (env FINRANK_TOL_SCALE)")
        ->check(CLI::PositiveNumber);
    app.add_option("--threads", threads, "Worker threads (env FINRANK_THREADS)")->check(CLI::Range(1u, 256u));

    std::string scenario, suite = "all", out;
    bool json = false, inject = false;
    auto* verify = app.add_subcommand("verify", "Run verification suites on a scenario");
    verify->add_option("scenario", scenario, "Scenario file or inline JSON")->required();
    verify->add_option("--suite", suite, "ak, averaging, ad, a2, representation, bounds, dyadic, boundary, all");
    verify->add_option("--out", out, "Write the JSON report here");
    verify->add_flag("--json", json, "Print JSON instead of text");
    verify->add_option("--mc-samples", options.mc_samples, "Samples for orthogonal-complement averaging")
        ->check(CLI::PositiveNumber);
    verify->add_flag("--inject-broken-pair", inject)->group("");  // test hook

    double t_min = 0.0, t_max = 0.0;
    int steps = 0;
    auto* sweep = app.add_subcommand("sweep", "Eigenvalue trajectories and A2 samples along the coupling line");
    sweep->add_option("scenario", scenario)->required();
    sweep->add_option("--t-min", t_min)->required();
    sweep->add_option("--t-max", t_max)->required();
    sweep->add_option("--steps", steps)->required();
    sweep->add_option("--out", out, "CSV output file");

    std::string kernel = "poisson", z_text;
    auto* average = app.add_subcommand("average", "Average a Poisson kernel over the coupling line");
    average->add_option("scenario", scenario)->required();
    average->add_option("--kernel", kernel);
    average->add_option("--z", z_text, "Kernel point, e.g. 0.5+1i")->required();

    auto* a2 = app.add_subcommand("a2", "Sampled matrix A2 characteristic against 8/pi");
    a2->add_option("scenario", scenario)->required();
    a2->add_option("--eps-min", options.a2_eps_min, "Smallest Im z sampled")->check(CLI::Range(1e-12, 9.99));

    Eigen::Index d = 0, n = 0;
    std::uint64_t seed = 0;
    auto* random = app.add_subcommand("random", "Generate a reproducible random scenario");
    random->add_option("--d", d)->required();
    random->add_option("--N", n)->required();
    random->add_option("--seed", seed)->required();
    random->add_option("--out", out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInvalid;
    }

    try {
        options.tolerance_scale = tol_scale > 0.0 ? tol_scale : env_double("FINRANK_TOL_SCALE", 1.0);
        options.threads = threads > 0 ? threads : env_threads();
        if (*verify) return run_verify(scenario, suite, out, json, options, inject);
        if (*sweep) return run_sweep(scenario, t_min, t_max, steps, out);
        if (*average) return run_average(scenario, kernel, z_text, options.tolerance_scale);
        if (*a2) {
            const Scenario s = load_scenario(scenario);
            Report report;
            report.scenario_digest = scenario_digest(s);
            report.records = a2_suite(s, options);
            std::cout << report_to_text(report);
            return report.passed() ? kExitPass : kExitFail;
        }
        if (*random) return run_random(d, n, seed, out);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const Error& e) {
        std::cerr << "check failed: " << e.what() << "\n";
        return kExitFail;
    }
    return kExitInvalid;
}
