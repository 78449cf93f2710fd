#pragma once

// Cauchy and Poisson transforms of matrix measures, boundary values along
// vertical rays, and Stieltjes inversion.
//
// The a.c. part is integrated exactly: on each grid cell the density is linear,
// and  int_{t0}^{t1} D(t)/(t-z) dt = D(z) [log(t1-z) - log(t0-z)] + (D1 - D0)
// with D(z) the linear interpolant continued to z. Collecting terms gives one
// complex coefficient per grid node.

#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

#include "finrank/measure.hpp"

namespace finrank {

inline constexpr double kMinImaginaryPart = 1e-8;

/// A value F(z) of a matrix function at an off-axis point.
struct HerglotzEval {
    Complex z;
    CMatrix value;
};

namespace detail {

/// Coefficients c_k with  int D(t)/(t-z) dt = sum_k c_k D_k  for the
/// piecewise-linear interpolant of nodal values D_k on a uniform grid.
inline std::vector<Complex> linear_cauchy_weights(double start, double end, std::size_t nodes, Complex z) {
    std::vector<Complex> c(nodes, Complex(0.0));
    const double h = (end - start) / static_cast<double>(nodes - 1);
    Complex log_prev = std::log(Complex(start) - z);
    for (std::size_t k = 0; k + 1 < nodes; ++k) {
        const double t0 = start + h * static_cast<double>(k);
        const double t1 = (k + 2 == nodes) ? end : t0 + h;
        const Complex log_next = std::log(Complex(t1) - z);
        const Complex l = log_next - log_prev;
        const Complex u = (z - t0) / (t1 - t0);
        c[k] += (1.0 - u) * l - 1.0;
        c[k + 1] += u * l + 1.0;
        log_prev = log_next;
    }
    return c;
}

inline void check_off_axis(Complex z, const char* what) {
    if (!(std::abs(z.imag()) >= kMinImaginaryPart)) {
        std::ostringstream os;
        os << what << ": |Im z| = " << std::abs(z.imag()) << " is below " << kMinImaginaryPart
           << "; use boundary_density for limits on the real axis";
        throw PrecisionError(os.str());
    }
}

}  // namespace detail

/// F(z) = int dM(t) / (t - z).
inline HerglotzEval cauchy_transform(const MatrixMeasure& m, Complex z) {
    detail::check_off_axis(z, "cauchy_transform");
    CMatrix f = CMatrix::Zero(m.dim(), m.dim());
    for (const Atom& a : m.atoms()) f += a.weight.matrix() / (a.location - z);
    if (const auto& ac = m.ac()) {
        const auto c = detail::linear_cauchy_weights(ac->start, ac->end, ac->nodes(), z);
        for (std::size_t k = 0; k < c.size(); ++k) f += c[k] * ac->densities[k].matrix();
    }
    return {z, f};
}

/// M(z) = (1/pi) int Im z / |z - s|^2 dM(s) for Im z > 0.
inline HermitianMatrix poisson_extension(const MatrixMeasure& m, Complex z) {
    if (!(z.imag() > 0.0)) {
        std::ostringstream os;
        os << "poisson_extension requires Im z > 0, got " << z.imag();
        throw DomainError(os.str());
    }
    const double y = z.imag();
    CMatrix p = CMatrix::Zero(m.dim(), m.dim());
    for (const Atom& a : m.atoms()) {
        const double dx = a.location - z.real();
        p += (y / (dx * dx + y * y)) * a.weight.matrix();
    }
    if (const auto& ac = m.ac()) {
        const auto c = detail::linear_cauchy_weights(ac->start, ac->end, ac->nodes(), z);
        for (std::size_t k = 0; k < c.size(); ++k) p += c[k].imag() * ac->densities[k].matrix();
    }
    return HermitianMatrix::symmetrized(p / kPi);
}

/// Scalar Poisson extension of mu at z (Im z > 0).
inline double poisson_extension(const ScalarMeasure& mu, Complex z) {
    if (!(z.imag() > 0.0)) throw DomainError("poisson_extension requires Im z > 0");
    const double y = z.imag();
    double p = 0.0;
    for (const ScalarAtom& a : mu.atoms()) {
        const double dx = a.location - z.real();
        p += a.mass * y / (dx * dx + y * y);
    }
    if (const auto& ac = mu.ac()) {
        const auto c = detail::linear_cauchy_weights(ac->start, ac->end, ac->densities.size(), z);
        for (std::size_t k = 0; k < c.size(); ++k) p += c[k].imag() * ac->densities[k];
    }
    return p / kPi;
}

/// lambda_min(Im F) / (1 + ||F||); nonnegative up to rounding for Herglotz F
/// in the upper half-plane.
inline double herglotz_margin(const HerglotzEval& f) {
    const double lmin = lambda_min(HermitianMatrix::symmetrized(imag_part(f.value)));
    const double sign = f.z.imag() > 0.0 ? 1.0 : -1.0;
    return sign * lmin / (1.0 + operator_norm(f.value));
}

inline bool is_herglotz_value(const HerglotzEval& f, double tol = 1e-12) {
    return herglotz_margin(f) >= -tol;
}

struct Extrapolation {
    CMatrix value;
    double error_estimate = 0.0;
};

/// Polynomial (Neville) extrapolation of samples taken at eps_j to eps = 0.
/// The error estimate is the change contributed by the last sample.
inline Extrapolation richardson_to_zero(const std::vector<double>& eps, const std::vector<CMatrix>& values) {
    const std::size_t n = eps.size();
    if (n == 0 || values.size() != n) throw ArgumentError("richardson_to_zero: mismatched samples");
    std::vector<CMatrix> p = values;
    Extrapolation out;
    std::vector<CMatrix> diagonal{p[0]};
    for (std::size_t level = 1; level < n; ++level) {
        for (std::size_t i = 0; i + level < n; ++i) {
            // interpolant through eps_i..eps_{i+level}, evaluated at 0
            p[i] = (eps[i] * p[i + 1] - eps[i + level] * p[i]) / (eps[i] - eps[i + level]);
        }
        diagonal.push_back(p[0]);
    }
    out.value = p[0];
    out.error_estimate = n >= 2 ? (diagonal[n - 1] - diagonal[n - 2]).cwiseAbs().maxCoeff() : 0.0;
    return out;
}

struct BoundaryValue {
    bool converged = false;
    HermitianMatrix value;                 // meaningful only when converged
    double error_estimate = 0.0;
    std::vector<double> successive_differences;
};

inline void check_ladder(const std::vector<double>& eps_ladder) {
    if (eps_ladder.size() < 3) throw ArgumentError("eps ladder needs at least 3 rungs");
    for (std::size_t k = 0; k < eps_ladder.size(); ++k) {
        if (!(eps_ladder[k] > 0.0) || (k > 0 && !(eps_ladder[k] < eps_ladder[k - 1]))) {
            throw ArgumentError("eps ladder must be positive and strictly decreasing");
        }
    }
}

/// Extrapolates samples of an eps-dependent Hermitian quantity to eps = 0.
/// The limit is declared divergent when every successive difference grows and
/// eps * |value| fails to decay: a 1/eps blow-up keeps eps * |value| constant
/// while a finite limit makes it shrink like eps. The geometric mean of the
/// two ratios (1 and eps_last / eps_first) separates the cases.
template <class Sample>
BoundaryValue extrapolate_ladder(const std::vector<double>& eps_ladder, Sample&& sample) {
    check_ladder(eps_ladder);
    std::vector<CMatrix> values;
    for (double e : eps_ladder) values.push_back(sample(e));
    BoundaryValue out;
    bool growing = true;
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
        out.successive_differences.push_back((values[k + 1] - values[k]).cwiseAbs().maxCoeff());
        if (k > 0 && !(out.successive_differences[k] > out.successive_differences[k - 1])) growing = false;
    }
    const double first = eps_ladder.front() * values.front().cwiseAbs().maxCoeff();
    const double last = eps_ladder.back() * values.back().cwiseAbs().maxCoeff();
    const double q = eps_ladder.back() / eps_ladder.front();
    if (growing && last > 0.0 && last >= std::sqrt(q) * first) {
        out.converged = false;
        return out;
    }
    const Extrapolation ex = richardson_to_zero(eps_ladder, values);
    out.converged = true;
    out.value = HermitianMatrix::symmetrized(ex.value);
    out.error_estimate = ex.error_estimate;
    return out;
}

inline const std::vector<double>& default_eps_ladder() {
    static const std::vector<double> ladder{1e-2, 5e-3, 2.5e-3};
    return ladder;
}

/// a.c. density at x as the extrapolated limit of (1/pi) Im F(x + i eps).
inline BoundaryValue boundary_density(const MatrixMeasure& m, double x,
                                      const std::vector<double>& eps_ladder = default_eps_ladder()) {
    double guard = eps_ladder.empty() ? 0.0 : eps_ladder.front();
    if (m.ac()) guard = std::max(guard, m.ac()->spacing());
    for (const Atom& a : m.atoms()) {
        if (std::abs(a.location - x) < guard) {
            std::ostringstream os;
            os << "boundary_density: x=" << x << " is within " << guard << " of the atom at " << a.location;
            throw ArgumentError(os.str());
        }
    }
    return extrapolate_ladder(eps_ladder, [&](double e) { return poisson_extension(m, Complex(x, e)).matrix(); });
}

struct BlowupReport {
    bool holds = false;
    double mass = 0.0;                 // atom mass at x
    std::vector<double> scaled_values; // eps * mu(x + i eps), tends to mass / pi
};

/// Checks that the Poisson extension at an atom grows at least like
/// mass / (2 pi eps) along the ladder.
inline BlowupReport singular_blowup_check(const ScalarMeasure& mu, double x,
                                          const std::vector<double>& eps_ladder) {
    check_ladder(eps_ladder);
    BlowupReport out;
    bool found = false;
    for (const ScalarAtom& a : mu.atoms()) {
        if (std::abs(a.location - x) <= 1e-9) {
            out.mass += a.mass;
            found = true;
        }
    }
    if (!found || !(out.mass > 0.0)) {
        std::ostringstream os;
        os << "singular_blowup_check: x=" << x << " is not an atom";
        throw ArgumentError(os.str());
    }
    out.holds = true;
    for (double e : eps_ladder) {
        const double v = e * poisson_extension(mu, Complex(x, e));
        out.scaled_values.push_back(v);
        if (!(v >= out.mass / (2.0 * kPi))) out.holds = false;
    }
    return out;
}

/// Nearest PSD matrix in the spectral sense (negative eigenvalues set to 0).
inline HermitianMatrix psd_part(const HermitianMatrix& h) {
    if (h.dim() == 0) return h;
    return HermitianMatrix::symmetrized(
        spectral_function(hermitian_eig(h), [](double l) { return std::max(l, 0.0); }));
}

struct Grid {
    double start = 0.0;
    double end = 1.0;
    std::size_t nodes = 2;
};

using MatrixFunction = std::function<CMatrix(Complex)>;

/// Rebuilds an a.c. measure from a Herglotz function: density at each node is
/// the extrapolated (1/pi) Im F(x + i eps).
inline MatrixMeasure stieltjes_reconstruct(const MatrixFunction& f, const Grid& grid,
                                           const std::vector<double>& eps_ladder = default_eps_ladder()) {
    check_ladder(eps_ladder);
    if (grid.nodes < 2 || !(grid.end > grid.start)) throw ArgumentError("stieltjes_reconstruct: bad grid");
    AcDensity ac{grid.start, grid.end, {}};
    Eigen::Index d = -1;
    for (std::size_t k = 0; k < grid.nodes; ++k) {
        const double x = grid.start + (grid.end - grid.start) * static_cast<double>(k) /
                                          static_cast<double>(grid.nodes - 1);
        std::vector<CMatrix> values;
        for (double e : eps_ladder) {
            const Complex z(x, e);
            const HerglotzEval v{z, f(z)};
            if (d < 0) d = v.value.rows();
            if (!is_herglotz_value(v)) {
                std::ostringstream os;
                os << "stieltjes_reconstruct: function is not Herglotz at z=" << x << "+" << e
                   << "i (margin " << herglotz_margin(v) << ")";
                throw EvaluationError(os.str(), x);
            }
            values.push_back(imag_part(v.value) / kPi);
        }
        const Extrapolation ex = richardson_to_zero(eps_ladder, values);
        ac.densities.push_back(psd_part(HermitianMatrix::symmetrized(ex.value)));
    }
    return MatrixMeasure(d, {}, std::move(ac));
}

}  // namespace finrank
