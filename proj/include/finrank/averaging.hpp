#pragma once

// Averaging of perturbed spectral measures over the coupling line
// G(t) = G0 + t G, G > 0.
//
// For the Poisson kernel p_z the inner integral is
//   h_z(t) = (1/pi) Im F_{G(t)}(z) = (1/pi) Im [F(z)^{-1} + G0 + t G]^{-1},
// a rational function of t decaying like C / t^2 with
//   C = -(1/pi) G^{-1} Im(F(z)^{-1}) G^{-1}.
// The tails |t| > T are integrated after the substitution u = 1/t, where
// h(1/u)/u^2 is smooth up to u = 0 (limit C), so no truncation error is left.

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

#include "finrank/herglotz.hpp"
#include "finrank/perturbation.hpp"
#include "finrank/quadrature.hpp"
#include "finrank/random.hpp"

namespace finrank {

/// p_w(x) = Im w / (pi |x - w|^2); integrates to 1 for Im w > 0.
inline double poisson_kernel(Complex w, double x) {
    return w.imag() / (kPi * std::norm(Complex(x) - w));
}

/// Finite linear combination sum_j c_j p_{w_j}.
struct PoissonKernelSum {
    std::vector<std::pair<Complex, double>> terms;

    static PoissonKernelSum single(Complex w, double c = 1.0) { return PoissonKernelSum{{{w, c}}}; }

    double operator()(double x) const {
        double v = 0.0;
        for (const auto& [w, c] : terms) v += c * poisson_kernel(w, x);
        return v;
    }
    double integral() const {
        double v = 0.0;
        for (const auto& term : terms) v += term.second;
        return v;
    }
};

struct LineAverageResult {
    CMatrix value;
    double quadrature_error_estimate = 0.0;
    std::pair<double, double> t_range_used{0.0, 0.0};
    CMatrix tail_correction;
};

/// h_z(t) for one z, caching F(z) and its inverse.
class HzProfile {
public:
    HzProfile(const PerturbationFamily& family, Complex z) : family_(family), z_(z) {
        if (!(z.imag() > 0.0)) throw DomainError("h_z profile requires Im z > 0");
        f_ = model_transform(family.model(), z).value;
        residue_form_ = condition_number(f_) < 1e12;
        if (residue_form_) f_inv_ = f_.inverse();
    }

    Complex z() const noexcept { return z_; }
    bool uses_residue_form() const noexcept { return residue_form_; }

    /// (2 pi i)^{-1}([F^{-1}(z) + G(t)]^{-1} - [F^{-1}(conj z) + G(t)]^{-1}).
    /// F(conj z) = F(z)^*, so the second resolvent is the adjoint of the first.
    CMatrix residue(double t) const {
        if (!residue_form_) throw IllConditionedError("h_z residue form: F(z) is not invertible", 1e12);
        const CMatrix k = f_inv_ + family_.at(t).matrix();
        const CMatrix r = k.partialPivLu().inverse();
        return (r - r.adjoint()) / (2.0 * kPi * kI);
    }

    /// (1/pi) Im (I + F G(t))^{-1} F.
    CMatrix aronszajn_krein_form(double t) const {
        return imag_part(aronszajn_krein({z_, f_}, family_.at(t)).value) / kPi;
    }

    CMatrix operator()(double t) const { return residue_form_ ? residue(t) : aronszajn_krein_form(t); }

    /// Leading tail coefficient C with h_z(t) ~ C / t^2.
    CMatrix tail_coefficient() const {
        const CMatrix g_inv = family_.gamma().matrix().inverse();
        const CMatrix f_inv = residue_form_ ? f_inv_ : CMatrix(f_.inverse());
        return -(g_inv * imag_part(f_inv) * g_inv) / kPi;
    }

    /// Complex t where G0 + F(z)^{-1} + t G is singular; h_z peaks near
    /// their real parts with widths given by the imaginary parts.
    std::vector<Complex> poles() const {
        const CMatrix f_inv = residue_form_ ? f_inv_ : CMatrix(f_.inverse());
        const HermitianMatrix root_inv = psd_pinv_sqrt(family_.gamma());
        const CMatrix x = -(root_inv.matrix() * (family_.gamma0().matrix() + f_inv) * root_inv.matrix());
        Eigen::ComplexEigenSolver<CMatrix> solver(x, false);
        std::vector<Complex> out;
        for (Eigen::Index k = 0; k < solver.eigenvalues().size(); ++k) out.push_back(solver.eigenvalues()(k));
        return out;
    }

private:
    PerturbationFamily family_;
    Complex z_;
    CMatrix f_;
    CMatrix f_inv_;
    bool residue_form_ = true;
};

inline CMatrix h_z_profile(const PerturbationFamily& family, Complex z, double t) {
    return HzProfile(family, z)(t);
}

namespace detail {

/// Breakpoints: pole real parts with their half-widths, plus a geometric
/// ladder so that the algebraic tails get panels of matching scale.
inline std::vector<double> averaging_breakpoints(const std::vector<Complex>& poles, double t_max) {
    std::vector<double> cuts{0.0};
    for (const Complex& p : poles) {
        for (double shift : {-1.0, 0.0, 1.0}) cuts.push_back(p.real() + shift * std::abs(p.imag()));
    }
    for (double s = 1.0; s < t_max; s *= 4.0) {
        cuts.push_back(s);
        cuts.push_back(-s);
    }
    return cuts;
}

/// int_{|t| > T} g(t) dt for g = O(t^-2), as int_0^{1/T} (g(1/u) + g(-1/u)) / u^2 du.
template <class G>
QuadratureResult mapped_tails(G&& g, double t_max, double abs_tol) {
    return integrate_adaptive(
        [&](double u) {
            const double t = 1.0 / u;
            return decltype(g(t))((g(t) + g(-t)) * (t * t));
        },
        0.0, 1.0 / t_max, abs_tol);
}

inline double pole_scale(const std::vector<Complex>& poles) {
    double s = 1.0;
    for (const Complex& p : poles) s = std::max(s, std::abs(p));
    return s;
}

}  // namespace detail

inline constexpr double kAveragingTolerance = 1e-8;

/// int_R (1/pi) Im F_{G(t)}(z) dt over [-T, T] plus the analytic tail 2C/T.
/// Equals G^{-1} for every z in the upper half-plane.
inline LineAverageResult residue_total(const PerturbationFamily& family, Complex z,
                                       double abs_tol = kAveragingTolerance) {
    const HzProfile h(family, z);
    const auto poles = h.poles();
    const double t_max = std::max(100.0 * detail::pole_scale(poles), 100.0);
    auto g = [&](double t) { return h(t); };
    const QuadratureResult q =
        integrate_adaptive(g, -t_max, t_max, abs_tol, detail::averaging_breakpoints(poles, t_max));
    const QuadratureResult tail = detail::mapped_tails(g, t_max, 0.1 * abs_tol);
    if (!q.converged || !tail.converged) {
        const double err = q.error_estimate + tail.error_estimate;
        std::ostringstream os;
        os << "residue_total: quadrature did not converge (error estimate " << err << ")";
        throw ConvergenceError(os.str(), err);
    }
    LineAverageResult out;
    out.tail_correction = tail.value;
    out.value = q.value + out.tail_correction;
    out.quadrature_error_estimate = q.error_estimate + tail.error_estimate;
    out.t_range_used = {-t_max, t_max};
    return out;
}

/// int_R (int f dM^{G(t)}) dt for a combination of Poisson kernels, using
/// int p_w dM^G = (1/pi) Im F_G(w).
inline LineAverageResult line_average(const PerturbationFamily& family, const PoissonKernelSum& f,
                                      double abs_tol = kAveragingTolerance) {
    const Eigen::Index d = family.model().rank();
    LineAverageResult out;
    out.value = CMatrix::Zero(d, d);
    out.tail_correction = CMatrix::Zero(d, d);
    if (f.terms.empty()) return out;
    std::vector<HzProfile> profiles;
    std::vector<Complex> poles;
    for (const auto& term : f.terms) {
        profiles.emplace_back(family, term.first);
        const auto p = profiles.back().poles();
        poles.insert(poles.end(), p.begin(), p.end());
    }
    const double t_max = std::max(100.0 * detail::pole_scale(poles), 100.0);
    auto inner = [&](double t) {
        CMatrix v = CMatrix::Zero(d, d);
        for (std::size_t j = 0; j < profiles.size(); ++j) v += f.terms[j].second * profiles[j](t);
        return v;
    };
    const QuadratureResult q =
        integrate_adaptive(inner, -t_max, t_max, abs_tol, detail::averaging_breakpoints(poles, t_max));
    const QuadratureResult tail = detail::mapped_tails(inner, t_max, 0.1 * abs_tol);
    if (!q.converged || !tail.converged) {
        throw ConvergenceError("line_average: quadrature did not converge", q.error_estimate + tail.error_estimate);
    }
    out.tail_correction = tail.value;
    out.value = q.value + out.tail_correction;
    out.quadrature_error_estimate = q.error_estimate + tail.error_estimate;
    out.t_range_used = {-t_max, t_max};
    return out;
}

/// Generic scalar f through the eigendecomposition of A_{G(t)} at every t.
inline LineAverageResult line_average(const PerturbationFamily& family, const std::function<double(double)>& f,
                                      double abs_tol = 1e-7, double t_max = 0.0) {
    const OperatorModel& model = family.model();
    auto inner = [&](double t) {
        const MatrixMeasure m = perturbed_measure_direct(model, family.at(t));
        return CMatrix(integrate(m, [&](double x) {
            const double v = f(x);
            if (!std::isfinite(v)) {
                std::ostringstream os;
                os << "line_average: inner integrand not finite at t=" << t;
                throw EvaluationError(os.str(), t);
            }
            return Complex(v);
        }));
    };
    if (!(t_max > 0.0)) {
        const double spread = spectral_radius(model.eig()) + operator_norm(model.b()) *
                                                                   operator_norm(model.b()) *
                                                                   operator_norm(family.gamma0());
        const Eigen::VectorXd sb = singular_values(model.b());
        const double lift = lambda_min(family.gamma()) * sb(sb.size() - 1) * sb(sb.size() - 1);
        t_max = std::max(100.0 * (1.0 + spread) / lift, 100.0);
    }
    const QuadratureResult q =
        integrate_adaptive(inner, -t_max, t_max, abs_tol, detail::averaging_breakpoints({}, t_max));
    const QuadratureResult tail = detail::mapped_tails(inner, t_max, 0.1 * abs_tol);
    if (!q.converged || !tail.converged) {
        throw ConvergenceError("line_average: quadrature did not converge", q.error_estimate + tail.error_estimate);
    }
    LineAverageResult out;
    out.tail_correction = tail.value;
    out.value = q.value + out.tail_correction;
    out.quadrature_error_estimate = q.error_estimate + tail.error_estimate;
    out.t_range_used = {-t_max, t_max};
    return out;
}

struct PoissonMassBound {
    bool holds = false;
    double max_value = 0.0;   // max_G || int dM^G / (1 + x^2) ||
    double bound = 0.0;       // 2 || (Im F(i)^{-1})^{-1} ||
    std::size_t argmax = 0;
};

/// || int dM^G / (1 + x^2) || over sampled couplings, from the directly
/// computed perturbed measures.
inline PoissonMassBound poisson_mass_bound(const OperatorModel& model, const std::vector<HermitianMatrix>& g_samples) {
    PoissonMassBound out;
    const CMatrix f_i = model.resolvent_compression(kI);
    out.bound = 2.0 * operator_norm(imag_part(f_i.inverse()).inverse());
    for (std::size_t k = 0; k < g_samples.size(); ++k) {
        const MatrixMeasure m = perturbed_measure_direct(model, g_samples[k]);
        const double v = operator_norm(integrate(m, [](double x) { return Complex(1.0 / (1.0 + x * x)); }));
        if (v > out.max_value || k == 0) {
            out.max_value = v;
            out.argmax = k;
        }
    }
    out.holds = out.max_value <= out.bound + 1e-8;
    return out;
}

/// Least-squares slope of log || int dM^{G(t)} / (1 + x^2) || against log t
/// over log-spaced t in [t_lo, t_hi].
inline double poisson_mass_growth_exponent(const PerturbationFamily& family, double t_lo = 10.0,
                                           double t_hi = 1e4, int points = 16) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (int k = 0; k < points; ++k) {
        const double t = t_lo * std::pow(t_hi / t_lo, static_cast<double>(k) / (points - 1));
        const MatrixMeasure m = perturbed_measure_direct(family.model(), family.at(t));
        const double v = operator_norm(integrate(m, [](double x) { return Complex(1.0 / (1.0 + x * x)); }));
        const double lx = std::log(t);
        const double ly = std::log(std::max(v, std::numeric_limits<double>::min()));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double n = points;
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Frobenius-orthonormal basis of {S Hermitian : Re tr(S^* G) = 0}
/// (real dimension d^2 - 1), by Gram-Schmidt of the standard Hermitian basis
/// against G.
inline std::vector<CMatrix> orthogonal_complement_basis(const HermitianMatrix& g) {
    const Eigen::Index d = g.dim();
    auto inner = [](const CMatrix& s, const CMatrix& t) { return (t.adjoint() * s).trace().real(); };
    std::vector<CMatrix> standard;
    for (Eigen::Index i = 0; i < d; ++i) {
        CMatrix e = CMatrix::Zero(d, d);
        e(i, i) = 1.0;
        standard.push_back(e);
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = i + 1; j < d; ++j) {
            CMatrix re = CMatrix::Zero(d, d);
            re(i, j) = re(j, i) = 1.0 / std::sqrt(2.0);
            CMatrix im = CMatrix::Zero(d, d);
            im(i, j) = kI / std::sqrt(2.0);
            im(j, i) = -kI / std::sqrt(2.0);
            standard.push_back(re);
            standard.push_back(im);
        }
    }
    std::vector<CMatrix> span{g.matrix() / std::sqrt(inner(g.matrix(), g.matrix()))};
    for (const CMatrix& e : standard) {
        CMatrix v = e;
        for (const CMatrix& u : span) v -= inner(v, u) * u;
        for (const CMatrix& u : span) v -= inner(v, u) * u;  // second pass for stability
        const double norm = std::sqrt(inner(v, v));
        if (norm > 1e-8) span.push_back(v / norm);
    }
    return {span.begin() + 1, span.end()};
}

/// Isotropic Gaussian weight amp * exp(-|x|^2 / (2 sigma^2)) in Frobenius
/// coordinates of the complement.
struct GaussianWeight {
    double amplitude = 1.0;
    double sigma = 1.0;

    double operator()(const Eigen::VectorXd& x) const {
        return amplitude * std::exp(-x.squaredNorm() / (2.0 * sigma * sigma));
    }
    double total(Eigen::Index dim) const {
        return amplitude * std::pow(2.0 * kPi * sigma * sigma, 0.5 * static_cast<double>(dim));
    }
};

struct WeightedAverageResult {
    CheckStatus status = CheckStatus::Pass;  // Fail: stderr above tolerance (budget exceeded)
    CMatrix value;
    CMatrix standard_error;                  // entrywise
    double relative_standard_error = 0.0;    // max entry / || a G^{-1} int f ||
    double total_weight = 0.0;               // a
    std::size_t samples = 0;
};

/// Monte-Carlo estimate of int_{G-perp} (int_R int f dM^{G0 + tG} dt) Phi(G0) dG0.
/// Samples G0 from a Gaussian proposal of width 1.25 sigma (importance
/// weights Phi/q keep a finite variance) and averages weight * line_average.
inline WeightedAverageResult orthogonal_weighted_average(const PerturbationFamily& family, const PoissonKernelSum& f,
                                                         const GaussianWeight& phi, std::size_t mc_samples,
                                                         std::uint64_t seed, double rel_tolerance = 0.05,
                                                         double abs_tol = 1e-7) {
    const Eigen::Index d = family.model().rank();
    const auto basis = orthogonal_complement_basis(family.gamma());
    const auto k = static_cast<Eigen::Index>(basis.size());
    WeightedAverageResult out;
    out.total_weight = phi.total(k);
    out.value = CMatrix::Zero(d, d);
    out.standard_error = CMatrix::Zero(d, d);
    const double reference = std::abs(out.total_weight * f.integral()) *
                             operator_norm(family.gamma().matrix().inverse());

    if (k == 0) {
        // Zero-dimensional complement: counting measure at G0 = 0.
        out.value = phi(Eigen::VectorXd()) * line_average(family.with_gamma0(HermitianMatrix::zero(d)), f, abs_tol).value;
        out.samples = 1;
        return out;
    }
    if (phi.amplitude == 0.0 || mc_samples == 0) {
        out.samples = mc_samples;
        return out;
    }
    const double sigma_q = 1.25 * phi.sigma;
    const double log_q_norm = -0.5 * static_cast<double>(k) * std::log(2.0 * kPi * sigma_q * sigma_q);
    const CounterRng rng(seed);
    CMatrix sum = CMatrix::Zero(d, d);
    Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(d, d);
    // Samples are independent pure functions of (seed, index); the reduction
    // runs in index order so the result is reproducible.
    for (std::size_t s = 0; s < mc_samples; ++s) {
        const CounterRng draw = rng.split(s);
        Eigen::VectorXd x(k);
        CMatrix g0 = CMatrix::Zero(d, d);
        for (Eigen::Index j = 0; j < k; ++j) {
            x(j) = sigma_q * draw.normal(static_cast<std::uint64_t>(j));
            g0 += x(j) * basis[static_cast<std::size_t>(j)];
        }
        const double log_q = log_q_norm - x.squaredNorm() / (2.0 * sigma_q * sigma_q);
        const double weight = phi(x) * std::exp(-log_q);
        const CMatrix sample =
            weight * line_average(family.with_gamma0(HermitianMatrix::symmetrized(g0)), f, abs_tol).value;
        sum += sample;
        sum_sq += sample.cwiseAbs2();
    }
    const double n = static_cast<double>(mc_samples);
    out.samples = mc_samples;
    out.value = sum / n;
    const Eigen::MatrixXd variance = (sum_sq / n - out.value.cwiseAbs2()).cwiseMax(0.0) * (n / std::max(n - 1.0, 1.0));
    out.standard_error = (variance / n).cwiseSqrt().cast<Complex>();
    out.relative_standard_error =
        reference > 0.0 ? out.standard_error.cwiseAbs().maxCoeff() / reference : 0.0;
    out.status = out.relative_standard_error <= rel_tolerance ? CheckStatus::Pass : CheckStatus::Fail;
    return out;
}

/// Eigenvalues of A_{G(t)} (ascending) at each t: row k holds trajectory k.
inline Eigen::MatrixXd eigenvalue_trajectories(const PerturbationFamily& family, const std::vector<double>& t_grid) {
    const Eigen::Index n = family.model().ambient_dim();
    Eigen::MatrixXd out(n, static_cast<Eigen::Index>(t_grid.size()));
    for (std::size_t j = 0; j < t_grid.size(); ++j) {
        const EigenSystem es = hermitian_eig(perturb(family.model(), family.at(t_grid[j])));
        for (Eigen::Index k = 0; k < n; ++k) out(k, static_cast<Eigen::Index>(j)) = es.values[static_cast<std::size_t>(k)];
    }
    return out;
}

/// Largest decrease of any trajectory between consecutive grid points
/// (0 when every eigenvalue is nondecreasing in t).
inline double trajectory_monotonicity_violation(const Eigen::MatrixXd& trajectories) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j + 1 < trajectories.cols(); ++j) {
        worst = std::max(worst, (trajectories.col(j) - trajectories.col(j + 1)).maxCoeff());
    }
    return worst;
}

inline constexpr double kExceptionalProximity = 1e-9;

struct ExceptionalScan {
    std::vector<double> t_values;
    bool finite = true;   // |t_values| <= N |points| on the scanned window
};

/// Parameters t in [t_grid.front(), t_grid.back()] at which an atom of
/// M^{G(t)} sits at one of the given points. Eigenvalue trajectories are
/// monotone in t, so each crossing is bracketed between consecutive grid
/// points and refined by bisection; grid points already within 1e-9 count
/// directly.
inline ExceptionalScan null_set_scan(const PerturbationFamily& family, const std::vector<double>& points,
                                     const std::vector<double>& t_grid) {
    if (t_grid.size() < 2 || !std::is_sorted(t_grid.begin(), t_grid.end())) {
        throw ArgumentError("exceptional scan: t grid must be sorted with at least 2 points");
    }
    const Eigen::Index n = family.model().ambient_dim();
    const Eigen::MatrixXd traj = eigenvalue_trajectories(family, t_grid);
    auto eigenvalue = [&](Eigen::Index k, double t) {
        return hermitian_eig(perturb(family.model(), family.at(t))).values[static_cast<std::size_t>(k)];
    };
    ExceptionalScan out;
    for (double c : points) {
        for (Eigen::Index k = 0; k < n; ++k) {
            for (std::size_t j = 0; j < t_grid.size(); ++j) {
                const double v = traj(k, static_cast<Eigen::Index>(j)) - c;
                if (std::abs(v) <= kExceptionalProximity) {
                    out.t_values.push_back(t_grid[j]);
                    continue;
                }
                if (j + 1 == t_grid.size()) continue;
                const double w = traj(k, static_cast<Eigen::Index>(j + 1)) - c;
                if (std::abs(w) <= kExceptionalProximity || !(v < 0.0 && w > 0.0)) continue;
                double lo = t_grid[j];
                double hi = t_grid[j + 1];
                for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + std::abs(lo)); ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (eigenvalue(k, mid) < c ? lo : hi) = mid;
                }
                out.t_values.push_back(0.5 * (lo + hi));
            }
        }
    }
    std::sort(out.t_values.begin(), out.t_values.end());
    std::vector<double> unique;
    for (double t : out.t_values) {
        if (unique.empty() || t - unique.back() > 1e-10 * (1.0 + std::abs(t))) unique.push_back(t);
    }
    out.t_values = std::move(unique);
    out.finite = out.t_values.size() <= static_cast<std::size_t>(n) * points.size();
    return out;
}

}  // namespace finrank
