#pragma once

// Verification suites over one scenario. Each suite is a pure function
// returning check records; run_verification assembles them into a Report.

#include <future>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "finrank/averaging.hpp"
#include "finrank/report.hpp"
#include "finrank/representation.hpp"
#include "finrank/scenario_io.hpp"
#include "finrank/singularity.hpp"

namespace finrank {

inline const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{"ak",   "averaging", "ad",       "a2",
                                                "representation", "bounds", "dyadic", "boundary"};
    return names;
}

struct VerifyOptions {
    double tolerance_scale = 1.0;       // multiplies default tolerances, not scenario overrides
    unsigned threads = 1;
    std::size_t mc_samples = 10000;     // orthogonal-complement averaging
    double a2_eps_min = 1e-6;
    /// Replaces the pair (M, G M^G G) in the ad suite; used to check that a
    /// violation is reported.
    std::optional<std::pair<MatrixMeasure, MatrixMeasure>> ad_pair_override;
};

namespace detail {

/// Tolerance for a check: scenario override, else default * scale.
inline double tolerance_for(const Scenario& s, const VerifyOptions& o, const std::string& key, double fallback) {
    auto it = s.tolerances.find(key);
    return it != s.tolerances.end() ? it->second : fallback * o.tolerance_scale;
}

/// Couplings G0 + t G along the scenario's line.
inline const std::vector<double>& coupling_parameters() {
    static const std::vector<double> t{-1.0, 0.0, 0.5, 1.0, 2.0};
    return t;
}

inline std::pair<double, double> spectral_hull(const MatrixMeasure& m) {
    if (m.atoms().empty()) return {-1.0, 1.0};
    return {m.atoms().front().location, m.atoms().back().location};
}

/// 20 points in the upper half-plane over the atom hull, Im z from 1e-2 to 10.
inline std::vector<Complex> upper_samples(const MatrixMeasure& m) {
    const auto [lo, hi] = spectral_hull(m);
    std::vector<Complex> z;
    for (int k = 0; k < 20; ++k) {
        const double x = lo - 1.0 + (hi - lo + 2.0) * (k % 5) / 4.0;
        const double y = std::pow(10.0, -2.0 + 3.0 * (k / 5) / 3.0);
        z.emplace_back(x + 0.013 * k, y);
    }
    return z;
}

inline nlohmann::json complex_json(Complex z) { return nlohmann::json::array({z.real(), z.imag()}); }

inline double max_entry(const CMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace detail

inline std::vector<CheckRecord> ak_suite(const Scenario& s, const VerifyOptions& o) {
    const OperatorModel model = s.model();
    const PerturbationFamily family = s.family();
    const MatrixMeasure m = spectral_measure(model);
    const auto zs = detail::upper_samples(m);
    const char* anchor = "Aronszajn-Krein formula";
    std::vector<CheckRecord> out;

    double route = 0.0, forms = 0.0, herglotz = 0.0, im_identity = 0.0;
    nlohmann::json route_at, forms_at, herglotz_at, im_at;
    std::size_t skipped = 0;
    bool cyclic = true;
    const auto start = std::chrono::steady_clock::now();
    for (double t : detail::coupling_parameters()) {
        const HermitianMatrix g = family.at(t);
        const OperatorModel perturbed = perturbed_model(model, g);
        cyclic = cyclic && perturbed.cyclicity().cyclic;
        for (const Complex& z : zs) {
            const HerglotzEval f = model_transform(model, z);
            const CMatrix direct = model_transform(perturbed, z).value;
            const double scale = 1.0 + operator_norm(direct);
            try {
                const HerglotzEval left = aronszajn_krein(f, g);
                const HerglotzEval right = aronszajn_krein_right(f, g);
                const double r = operator_norm(direct - left.value) / scale;
                const double fr = operator_norm(left.value - right.value) / scale;
                if (r > route || route_at.is_null()) route = r, route_at = {{"t", t}, {"z", detail::complex_json(z)}};
                if (fr > forms || forms_at.is_null()) forms = fr, forms_at = {{"t", t}, {"z", detail::complex_json(z)}};
                const double h = -herglotz_margin(left);
                if (h > herglotz || herglotz_at.is_null()) {
                    herglotz = h;
                    herglotz_at = {{"t", t}, {"z", detail::complex_json(z)}};
                }
            } catch (const IllConditionedError&) {
                ++skipped;
            }
            const double im = im_transform_identity_residual(model, g, z);
            if (im > im_identity || im_at.is_null()) im_identity = im, im_at = {{"t", t}, {"z", detail::complex_json(z)}};
        }
    }
    // One shared sweep feeds five records; each is charged an equal share.
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 5.0;
    const std::string note = std::to_string(detail::coupling_parameters().size() * zs.size()) + " samples, " +
                               std::to_string(skipped) + " ill-conditioned skipped";

    auto add = [&](const char* name, const char* anc, double value, double tol, const nlohmann::json& at) {
        CheckRecord r;
        r.name = name;
        r.anchor = anc;
        judge_at_most(r, value, tol);
        r.detail = note;
        r.repro = at;
        r.runtime_seconds = elapsed;
        out.push_back(std::move(r));
    };
    add("ak.agreement", anchor, route, detail::tolerance_for(s, o, "ak.agreement", 1e-9), route_at);
    add("ak.left_right", anchor, forms, detail::tolerance_for(s, o, "ak.left_right", 1e-10), forms_at);
    add("ak.herglotz", "Herglotz property of perturbed transforms", herglotz,
        detail::tolerance_for(s, o, "ak.herglotz", 1e-12), herglotz_at);
    add("ak.im_identity", "imaginary-part transform identity", im_identity,
        detail::tolerance_for(s, o, "ak.im_identity", 1e-9), im_at);
    CheckRecord c;
    c.name = "ak.cyclicity_preserved";
    c.anchor = "cyclicity is preserved under perturbation";
    c.status = cyclic ? CheckStatus::Pass : CheckStatus::Fail;
    c.value = cyclic ? 1.0 : 0.0;
    c.tolerance = 1.0;
    c.runtime_seconds = elapsed;
    out.push_back(std::move(c));
    return out;
}

inline std::vector<CheckRecord> averaging_suite(const Scenario& s, const VerifyOptions& o) {
    const PerturbationFamily family = s.family();
    const CMatrix gamma_inv = family.gamma().matrix().inverse();
    const char* anchor = "Aleksandrov spectral averaging";
    std::vector<CheckRecord> out;

    out.push_back(timed_check("averaging.residue_total", anchor, [&](CheckRecord& r) {
        double worst = 0.0;
        for (const Complex z : {Complex(0.0, 1.0), Complex(0.0, 2.0), Complex(1.0, 1.0)}) {
            const double dev = detail::max_entry(residue_total(family, z).value - gamma_inv);
            if (dev >= worst) worst = dev, r.repro = {{"z", detail::complex_json(z)}};
        }
        judge_at_most(r, worst, detail::tolerance_for(s, o, "averaging.residue_total", 1e-6));
        r.detail = "max entry of residue total - Gamma^-1 over z in {i, 2i, 1+i}";
    }));
    out.push_back(timed_check("averaging.line_average", anchor, [&](CheckRecord& r) {
        const LineAverageResult a = line_average(family, PoissonKernelSum::single(kI));
        judge_at_most(r, detail::max_entry(a.value - gamma_inv),
                      detail::tolerance_for(s, o, "averaging.line_average", 1e-5));
        r.detail = "f = Poisson kernel at i";
    }));
    out.push_back(timed_check("averaging.homogeneity", anchor, [&](CheckRecord& r) {
        const PerturbationFamily doubled = family.with_gamma(HermitianMatrix::symmetrized(2.0 * family.gamma().matrix()));
        const CMatrix a = residue_total(family, kI, 1e-12).value;
        const CMatrix b = residue_total(doubled, kI, 1e-12).value;
        judge_at_most(r, detail::max_entry(a - 2.0 * b) / std::max(detail::max_entry(a), 1e-300),
                      detail::tolerance_for(s, o, "averaging.homogeneity", 1e-10));
        r.detail = "Gamma -> 2 Gamma halves the average";
    }));
    out.push_back(timed_check("averaging.poisson_bound", "uniform Poisson boundedness", [&](CheckRecord& r) {
        std::vector<HermitianMatrix> gs;
        std::vector<double> ts;
        for (int k = 0; k <= 40; ++k) {
            ts.push_back(-10.0 + 0.5 * k);
            gs.push_back(family.at(ts.back()));
        }
        const PoissonMassBound b = poisson_mass_bound(s.model(), gs);
        judge_at_most(r, b.max_value, b.bound + detail::tolerance_for(s, o, "averaging.poisson_bound", 1e-8));
        r.repro = {{"t", ts[b.argmax]}};
        r.detail = "sup over t in [-10, 10] of ||int dM^G / (1 + x^2)||";
    }));
    out.push_back(timed_check("averaging.growth_exponent", "uniform Poisson boundedness", [&](CheckRecord& r) {
        judge_at_most(r, poisson_mass_growth_exponent(family), detail::tolerance_for(s, o, "averaging.growth_exponent", 2.1));
        r.detail = "log-log slope over t in [10, 1e4]";
    }));

    const GaussianWeight phi{1.0, 1.0};
    WeightedAverageResult w;
    double w_time = 0.0;
    {
        const auto start = std::chrono::steady_clock::now();
        w = orthogonal_weighted_average(family, PoissonKernelSum::single(kI), phi, o.mc_samples,
                                        s.seed ^ 0x9e3779b97f4a7c15ULL,
                                        detail::tolerance_for(s, o, "averaging.weighted_stderr", 0.05));
        w_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    const CMatrix expected = w.total_weight * gamma_inv;
    CheckRecord mean;
    mean.name = "averaging.weighted_mean";
    mean.anchor = "averaging over the orthogonal complement of Gamma";
    mean.runtime_seconds = w_time;
    CheckRecord spread = mean;
    spread.name = "averaging.weighted_stderr";
    if (w.samples <= 1) {
        judge_at_most(mean, detail::max_entry(w.value - expected) / std::max(detail::max_entry(expected), 1e-300),
                      detail::tolerance_for(s, o, "averaging.weighted_mean", 1e-6));
        mean.detail = "d = 1: counting measure, relative deviation";
        judge_at_most(spread, 0.0, 0.05);
        spread.detail = "d = 1: exact";
    } else {
        double z_score = 0.0;
        for (Eigen::Index i = 0; i < w.value.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.value.cols(); ++j) {
                const double dev = std::abs(w.value(i, j) - expected(i, j));
                const double se = std::abs(w.standard_error(i, j));
                z_score = std::max(z_score, se > 0.0 ? dev / se : (dev > 1e-12 ? 1e300 : 0.0));
            }
        }
        judge_at_most(mean, z_score, detail::tolerance_for(s, o, "averaging.weighted_mean", 3.0));
        mean.detail = std::to_string(w.samples) + " samples; max |estimate - a Gamma^-1| in standard errors";
        mean.repro = {{"seed", s.seed}, {"samples", w.samples}};
        judge_at_most(spread, w.relative_standard_error, detail::tolerance_for(s, o, "averaging.weighted_stderr", 0.05));
        spread.detail = "relative standard error";
    }
    out.push_back(std::move(mean));
    out.push_back(std::move(spread));

    out.push_back(timed_check("averaging.exceptional_set", "exceptional couplings form a null set", [&](CheckRecord& r) {
        std::vector<double> points;
        for (const Atom& a : spectral_measure(s.model()).atoms()) points.push_back(a.location);
        std::vector<double> grid;
        for (int k = 0; k <= 200; ++k) grid.push_back(-5.0 + 0.05 * k);
        const ExceptionalScan scan = null_set_scan(family, points, grid);
        r.value = static_cast<double>(scan.t_values.size());
        r.tolerance = static_cast<double>(s.n * points.size());
        r.status = scan.finite ? CheckStatus::Pass : CheckStatus::Fail;
        r.detail = "t in [-5, 5] where M^G(t) has an atom at an atom of M";
    }));
    return out;
}

inline std::vector<CheckRecord> ad_suite(const Scenario& s, const VerifyOptions& o) {
    const char* anchor = "matrix Aronszajn-Donoghue theorem";
    const double tol = detail::tolerance_for(s, o, "ad.overlap", 1e-8);
    std::vector<std::pair<nlohmann::json, std::pair<MatrixMeasure, MatrixMeasure>>> pairs;
    if (o.ad_pair_override) {
        pairs.push_back({{{"source", "override"}}, *o.ad_pair_override});
    } else {
        const OperatorModel model = s.model();
        for (double t : detail::coupling_parameters()) {
            const HermitianMatrix g = s.family().at(t);
            pairs.push_back({{{"t", t}},
                             {spectral_measure(model), perturbed_measure_direct(model, g).congruence(g.matrix())}});
        }
    }
    std::vector<CheckRecord> out;
    out.push_back(timed_check("ad.mutual_singularity", anchor, [&](CheckRecord& r) {
        double worst = 0.0;
        std::size_t common = 0;
        bool singular = true;
        for (const auto& [where, pair] : pairs) {
            const MutualSingularityResult res = vector_mutual_singularity(pair.first, pair.second);
            common += res.common_atoms;
            if (!res.singular && singular) {
                singular = false;
                r.repro = where;
                if (!res.violations.empty()) {
                    r.repro["atom"] = res.violations.front().location;
                    r.detail = "overlap at atom x=" + std::to_string(res.violations.front().location);
                }
            }
            if (res.max_overlap > worst) {
                worst = res.max_overlap;
                if (singular) r.repro = where;
            }
        }
        judge_at_most(r, worst, tol);
        if (!singular) r.status = CheckStatus::Fail;
        if (r.detail.empty()) r.detail = std::to_string(common) + " common atoms; max subspace overlap";
    }));
    out.push_back(timed_check("ad.witness", anchor, [&](CheckRecord& r) {
        double worst = 0.0;
        for (const auto& [where, pair] : pairs) {
            const MutualSingularityResult res = vector_mutual_singularity(pair.first, pair.second);
            const double w = witness_residual(res.witness, pair.first, pair.second);
            if (w >= worst) worst = w, r.repro = where;
        }
        judge_at_most(r, worst, detail::tolerance_for(s, o, "ad.witness", 1e-8));
        r.detail = "||Pi M Pi|| + ||(I - Pi) N (I - Pi)|| relative to the weights";
    }));
    return out;
}

inline std::vector<CheckRecord> a2_suite(const Scenario& s, const VerifyOptions& o) {
    const char* anchor = "matrix A2 bound 8/pi";
    const OperatorModel model = s.model();
    std::vector<CheckRecord> out;
    double bound = 0.0, identity = 0.0, order = 0.0;
    nlohmann::json bound_at, identity_at, order_at;
    const auto start = std::chrono::steady_clock::now();
    std::size_t samples = 0;
    for (double t : detail::coupling_parameters()) {
        const HermitianMatrix g = s.family().at(t);
        const MatrixMeasure m = spectral_measure(model);
        const MatrixMeasure mg = perturbed_measure_direct(model, g);
        const std::vector<Complex> zs = default_a2_samples(m, mg, {}, o.a2_eps_min);
        const A2BoundCheck b = a2_bound_check(model, g, zs);
        samples += b.samples;
        if (b.max_value >= bound) bound = b.max_value, bound_at = {{"t", t}, {"z", detail::complex_json(b.argmax)}};
        if (b.identity_residual >= identity) identity = b.identity_residual, identity_at = {{"t", t}};
        const A2Value v = a2_characteristic(m, mg.congruence(g.matrix()), zs);
        if (v.order_residual >= order) order = v.order_residual, order_at = {{"t", t}};
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 3.0;
    auto add = [&](const char* name, double value, double tol, const nlohmann::json& at, const std::string& det) {
        CheckRecord r;
        r.name = name;
        r.anchor = anchor;
        judge_at_most(r, value, tol);
        r.repro = at;
        r.detail = det;
        r.runtime_seconds = elapsed;
        out.push_back(std::move(r));
    };
    add("a2.bound", bound, kA2Bound + detail::tolerance_for(s, o, "a2.bound", 1e-8), bound_at,
        std::to_string(samples) + " samples; sup ||M(z)^1/2 (G M^G(z) G)^1/2||");
    add("a2.order_symmetry", order, detail::tolerance_for(s, o, "a2.order_symmetry", 1e-10), order_at,
        "| ||M^1/2 N^1/2|| - ||N^1/2 M^1/2|| |");
    add("a2.identity", identity, detail::tolerance_for(s, o, "a2.identity", 1e-10), identity_at,
        "vs ||M^1/2 G (M^G)^1/2||, relative to max(1, value)");
    return out;
}

inline std::vector<CheckRecord> representation_suite(const Scenario& s, const VerifyOptions& o) {
    const char* anchor = "spectral representation";
    const OperatorModel model = s.model();
    const HermitianMatrix g = s.family().at(1.0);
    std::vector<CheckRecord> out;
    std::optional<SpectralMap> v;
    out.push_back(timed_check("representation.unitarity", anchor, [&](CheckRecord& r) {
        v = build_spectral_map(model, g);
        judge_at_most(r, unitarity_residual(*v), detail::tolerance_for(s, o, "representation.unitarity", 1e-8));
        r.detail = "tag Gram preservation and isometry defects; tag condition " + std::to_string(v->tag_condition);
    }));
    out.push_back(timed_check("representation.intertwining", anchor, [&](CheckRecord& r) {
        const double scale = 1.0 + operator_norm(model.a()) + operator_norm(g);
        judge_at_most(r, intertwining_residual(v->op, g) / scale,
                      detail::tolerance_for(s, o, "representation.intertwining", 1e-8));
        r.detail = "||V A_G - M_s V|| / (1 + ||A|| + ||G||)";
    }));
    out.push_back(timed_check("representation.direct_agreement", anchor, [&](CheckRecord& r) {
        judge_at_most(r, operator_norm(v->op.isometric() - spectral_map_direct(model, g).isometric()),
                      detail::tolerance_for(s, o, "representation.direct_agreement", 1e-8));
        r.detail = "resolvent-tag construction vs eigenvector construction";
    }));
    out.push_back(timed_check("representation.tag_independence", anchor, [&](CheckRecord& r) {
        const MatrixMeasure m = spectral_measure(model);
        judge_at_most(r, tag_independence_residual(model, g, default_tags(m, 1.0), default_tags(m, 2.5)),
                      detail::tolerance_for(s, o, "representation.tag_independence", 1e-8));
        r.detail = "tags on Im z = +-1 vs +-2.5";
    }));
    out.push_back(timed_check("representation.divided_difference", anchor, [&](CheckRecord& r) {
        const auto [lo, hi] = detail::spectral_hull(spectral_measure(model));
        const Polynomial h{{0.3, -1.0, 0.5, 0.2}, 0.5 * (lo + hi), std::max(1.0, hi - lo)};
        double worst = 0.0;
        for (Eigen::Index j = 0; j < s.d; ++j) {
            worst = std::max(worst, divided_difference_residual(v->op, g, h, CVector::Unit(s.d, j)));
        }
        judge_at_most(r, worst, detail::tolerance_for(s, o, "representation.divided_difference", 1e-8));
        r.detail = "cubic h, every basis vector e";
    }));
    return out;
}

inline std::vector<CheckRecord> bounds_suite(const Scenario& s, const VerifyOptions& o) {
    const OperatorModel model = s.model();
    const MatrixMeasure m = spectral_measure(model);
    const auto [lo, hi] = detail::spectral_hull(m);
    std::vector<CheckRecord> out;
    std::vector<double> ts{0.0, 1.0};
    out.push_back(timed_check("bounds.t_epsilon", "T_eps norm at most 2", [&](CheckRecord& r) {
        double worst = 0.0;
        for (double t : ts) {
            const HermitianMatrix g = s.family().at(t);
            for (double eps : {1.0, 0.1, 0.01, 1e-4}) {
                for (double sign : {1.0, -1.0}) {
                    const double n = t_epsilon_operator(model, g, sign * eps).norm();
                    if (n >= worst) worst = n, r.repro = {{"t", t}, {"eps", sign * eps}};
                }
            }
        }
        judge_at_most(r, worst, kTEpsilonBound + detail::tolerance_for(s, o, "bounds.t_epsilon", 1e-8));
        r.detail = "eps in {+-1, +-0.1, +-0.01, +-1e-4}";
    }));
    std::vector<Complex> alphas{{0.0, 1.0}, {0.5 * (lo + hi), 0.1}, {lo, 1e-3}, {hi + 1.0, 3.0}, {lo - 2.0, 0.01}};
    for (const Atom& a : m.atoms()) alphas.emplace_back(a.location, 1e-2);
    double bound_ratio = 0.0;
    nlohmann::json bound_at;
    out.push_back(timed_check("bounds.p_alpha", "P_alpha norm at most 4", [&](CheckRecord& r) {
        double worst = 0.0;
        for (double t : ts) {
            const HermitianMatrix g = s.family().at(t);
            const MatrixMeasure n = perturbed_measure_direct(model, g).congruence(g.matrix());
            for (const Complex& alpha : alphas) {
                const double p = p_alpha_operator(model, g, alpha).norm();
                if (p >= worst) worst = p, r.repro = {{"t", t}, {"alpha", detail::complex_json(alpha)}};
                const auto k = [alpha](double x) { return std::sqrt(2.0 * alpha.imag()) / (Complex(x) - alpha); };
                const KernelBound kb = kernel_a2_lower_bound(k, k, m, n, p);
                // 2 pi ||M(alpha)^1/2 (G M^G(alpha) G)^1/2|| through the Poisson factors.
                const double chain = 2.0 * kPi * operator_norm(PoissonFactor(m)(alpha).adjoint() * PoissonFactor(n)(alpha));
                const double ratio = std::max(kb.lhs, chain) / std::max(p, 1e-300);
                if (ratio >= bound_ratio) {
                    bound_ratio = ratio;
                    bound_at = {{"t", t}, {"alpha", detail::complex_json(alpha)}};
                }
            }
        }
        judge_at_most(r, worst, kPAlphaBound + detail::tolerance_for(s, o, "bounds.p_alpha", 1e-8));
        r.detail = std::to_string(alphas.size()) + " alphas";
    }));
    CheckRecord lower;
    lower.name = "bounds.kernel_lower_bound";
    lower.anchor = "factorized-kernel lower bound";
    judge_at_most(lower, bound_ratio, 1.0 + detail::tolerance_for(s, o, "bounds.kernel_lower_bound", 1e-10));
    lower.repro = bound_at;
    lower.detail = "max of 2 pi A2(alpha)^1/2 / ||P_alpha||";
    out.push_back(std::move(lower));
    return out;
}

/// The scenario's trace measure plus unit Lebesgue density around it, on E =
/// the gaps between atoms shrunk by a quarter on each side.
inline std::vector<CheckRecord> dyadic_suite(const Scenario& s, const VerifyOptions& o) {
    (void)o;
    std::vector<CheckRecord> out;
    out.push_back(timed_check("dyadic.density_bound", "dyadic density bound", [&](CheckRecord& r) {
        const ScalarMeasure tr = trace_measure(spectral_measure(s.model()));
        const auto& atoms = tr.atoms();
        const double lo = atoms.front().location - 1.0;
        const double hi = atoms.back().location + 1.0;
        const ScalarMeasure mu(atoms, ScalarAcDensity{lo, hi, {1.0, 1.0}});
        std::vector<Interval> e;
        std::vector<double> edges{lo};
        for (const ScalarAtom& a : atoms) edges.push_back(a.location);
        edges.push_back(hi);
        for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
            const double gap = edges[k + 1] - edges[k];
            if (gap > 1e-6) e.push_back({edges[k] + 0.25 * gap, edges[k + 1] - 0.25 * gap});
        }
        const DyadicCheck c = dyadic_density_bound_check(mu, e, 2.0, 14);
        r.status = c.status;
        r.value = c.mass;
        r.tolerance = c.bound;
        r.repro = {{"worst_point", c.worst_point}};
        r.detail = c.status == CheckStatus::Skip ? "lower dyadic density reaches alpha = 2; hypothesis not met"
                                                 : "mu(E) vs alpha |E|, alpha = 2";
    }));
    return out;
}

/// Boundary values: the singular blow-up at every atom of tr M, and, when
/// the scenario carries an a.c. grid, density recovery and the density
/// transformation under G0 + G.
inline std::vector<CheckRecord> boundary_suite(const Scenario& s, const VerifyOptions& o) {
    std::vector<CheckRecord> out;
    out.push_back(timed_check("boundary.singular_blowup", "boundary values: singular blow-up", [&](CheckRecord& r) {
        const ScalarMeasure tr = trace_measure(spectral_measure(s.model()));
        double worst = 0.0;
        for (const ScalarAtom& a : tr.atoms()) {
            const double eps = 1e-4;
            const double ratio = kPi * eps * poisson_extension(tr, Complex(a.location, eps)) / a.mass;
            if (std::abs(ratio - 1.0) >= worst) worst = std::abs(ratio - 1.0), r.repro = {{"atom", a.location}, {"eps", eps}};
        }
        judge_at_most(r, worst, detail::tolerance_for(s, o, "boundary.singular_blowup", 5e-3));
        r.detail = "|pi eps mu(x + i eps) / mass - 1| at eps = 1e-4";
    }));
    if (!s.ac) {
        for (const char* name : {"boundary.density_recovery", "boundary.density_transform"}) {
            CheckRecord r;
            r.name = name;
            r.anchor = "boundary values: absolutely continuous part";
            r.status = CheckStatus::Skip;
            r.detail = "scenario has no a.c. grid";
            out.push_back(std::move(r));
        }
        return out;
    }
    const MatrixMeasure ac(s.d, {}, s.ac);
    const AcDensity& grid = *s.ac;
    std::vector<double> xs;
    const double margin = 0.1 * (grid.end - grid.start);
    for (std::size_t k = 0; k < grid.nodes(); ++k) {
        const double x = grid.start + grid.spacing() * static_cast<double>(k);
        if (x > grid.start + margin && x < grid.end - margin) xs.push_back(x);
    }
    out.push_back(timed_check("boundary.density_recovery", "boundary values: absolutely continuous part",
                              [&](CheckRecord& r) {
        double sup = 0.0;
        for (const HermitianMatrix& w : grid.densities) sup = std::max(sup, operator_norm(w));
        double worst = 0.0;
        for (std::size_t k = 0; k < grid.nodes(); ++k) {
            const double x = grid.start + grid.spacing() * static_cast<double>(k);
            if (!(x > grid.start + margin && x < grid.end - margin)) continue;
            const BoundaryValue bv = boundary_density(ac, x);
            const double err = bv.converged ? operator_norm(bv.value.matrix() - grid.densities[k].matrix()) /
                                                  std::max(sup, 1e-300)
                                            : 1e300;
            if (err >= worst) worst = err, r.repro = {{"x", x}};
        }
        judge_at_most(r, worst, detail::tolerance_for(s, o, "boundary.density_recovery", 1e-2));
        r.detail = std::to_string(xs.size()) + " interior nodes; error relative to sup density";
    }));
    out.push_back(timed_check("boundary.density_transform", "density transformation under perturbation",
                              [&](CheckRecord& r) {
        const HermitianMatrix g = s.family().at(1.0);
        const double tol = detail::tolerance_for(s, o, "boundary.density_transform", 1e-4);
        double worst = 0.0;
        std::size_t exceptional = 0;
        bool rank_ok = true;
        for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
            const double x = 0.5 * (xs[k] + xs[k + 1]);
            const DensityTransformResult d = ac_density_transform(ac, g, x, default_eps_ladder(), tol);
            if (d.status == CheckStatus::Skip) {
                ++exceptional;
                continue;
            }
            if (d.rank_before != d.rank_after) rank_ok = false, r.repro = {{"x", x}};
            if (d.residual >= worst && rank_ok) worst = d.residual, r.repro = {{"x", x}};
        }
        judge_at_most(r, worst, tol);
        if (!rank_ok) r.status = CheckStatus::Fail;
        r.detail = "congruence residual and rank equality; " + std::to_string(exceptional) + " exceptional points skipped";
    }));
    return out;
}

inline std::vector<CheckRecord> run_suite(const std::string& name, const Scenario& s, const VerifyOptions& o) {
    if (name == "ak") return ak_suite(s, o);
    if (name == "averaging") return averaging_suite(s, o);
    if (name == "ad") return ad_suite(s, o);
    if (name == "a2") return a2_suite(s, o);
    if (name == "representation") return representation_suite(s, o);
    if (name == "bounds") return bounds_suite(s, o);
    if (name == "dyadic") return dyadic_suite(s, o);
    if (name == "boundary") return boundary_suite(s, o);
    throw ArgumentError("unknown suite '" + name + "'");
}

/// Expands "all" and comma-separated lists, keeping the canonical order.
inline std::vector<std::string> select_suites(const std::string& selector) {
    std::set<std::string> wanted;
    std::stringstream ss(selector);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "all") {
            wanted.insert(suite_names().begin(), suite_names().end());
        } else if (std::find(suite_names().begin(), suite_names().end(), item) != suite_names().end()) {
            wanted.insert(item);
        } else {
            throw ArgumentError("unknown suite '" + item + "'");
        }
    }
    std::vector<std::string> out;
    for (const std::string& n : suite_names()) {
        if (wanted.count(n)) out.push_back(n);
    }
    return out;
}

/// Runs the selected suites (concurrently when threads > 1) and collects the
/// records in suite order. An exception inside a suite becomes a failing
/// record naming the suite.
inline Report run_verification(const Scenario& s, const std::string& selector, const VerifyOptions& o) {
    const std::vector<std::string> suites = select_suites(selector);
    auto guarded = [&s, &o](const std::string& name) {
        try {
            return run_suite(name, s, o);
        } catch (const Error& e) {
            CheckRecord r;
            r.name = name + ".error";
            r.anchor = name;
            r.status = CheckStatus::Fail;
            r.detail = e.what();
            return std::vector<CheckRecord>{r};
        }
    };
    std::vector<std::vector<CheckRecord>> results(suites.size());
    if (o.threads <= 1) {
        for (std::size_t k = 0; k < suites.size(); ++k) results[k] = guarded(suites[k]);
    } else {
        std::size_t next = 0;
        while (next < suites.size()) {
            std::vector<std::future<std::vector<CheckRecord>>> batch;
            const std::size_t first = next;
            for (; next < suites.size() && next - first < o.threads; ++next) {
                batch.push_back(std::async(std::launch::async, guarded, suites[next]));
            }
            for (std::size_t k = 0; k < batch.size(); ++k) results[first + k] = batch[k].get();
        }
    }
    Report report;
    report.scenario_digest = scenario_digest(s);
    report.timestamp = utc_timestamp();
    for (auto& r : results) {
        for (auto& rec : r) report.records.push_back(std::move(rec));
    }
    return report;
}

}  // namespace finrank
