#pragma once

// Matrix-valued measures on the real line: finitely many atoms plus an
// optional absolutely continuous part given as a piecewise-linear density on a
// uniform grid.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include "finrank/linalg.hpp"
#include "finrank/model.hpp"

namespace finrank {

struct Atom {
    double location = 0.0;
    HermitianMatrix weight;
};

/// Piecewise-linear density on a uniform grid start = t_0 < ... < t_{n-1} = end.
struct AcDensity {
    double start = 0.0;
    double end = 1.0;
    std::vector<HermitianMatrix> densities;

    std::size_t nodes() const noexcept { return densities.size(); }
    double spacing() const noexcept {
        return (end - start) / static_cast<double>(densities.size() - 1);
    }
    double node(std::size_t k) const noexcept {
        return start + spacing() * static_cast<double>(k);
    }
};

namespace detail {

inline void require_psd(const HermitianMatrix& w, const char* what, double where) {
    if (w.dim() == 0) return;
    const EigenSystem es = hermitian_eig(w);
    const double norm = spectral_radius(es);
    if (es.values.front() < -kPsdTolerance * norm) {
        std::ostringstream os;
        os << what << " at " << where << " is not positive semidefinite: eigenvalue "
           << es.values.front();
        throw NotPsdError(os.str(), es.values.front());
    }
}

}  // namespace detail

class MatrixMeasure {
public:
    MatrixMeasure() = default;

    /// Atoms are sorted; locations within kAtomMergeThreshold are merged with
    /// summed weight.
    MatrixMeasure(Eigen::Index d, std::vector<Atom> atoms, std::optional<AcDensity> ac = std::nullopt)
        : d_(d), ac_(std::move(ac)) {
        if (d < 1) throw ArgumentError("measure dimension d must be positive");
        std::sort(atoms.begin(), atoms.end(),
                  [](const Atom& x, const Atom& y) { return x.location < y.location; });
        for (Atom& a : atoms) {
            if (!std::isfinite(a.location)) throw ValidationError("atom location is not finite");
            if (a.weight.dim() != d) {
                std::ostringstream os;
                os << "atom weight at " << a.location << " is " << a.weight.dim() << "x"
                   << a.weight.dim() << ", expected " << d << "x" << d;
                throw ArgumentError(os.str());
            }
            detail::require_psd(a.weight, "atom weight", a.location);
            if (!atoms_.empty() && a.location - atoms_.back().location <= kAtomMergeThreshold) {
                atoms_.back().weight =
                    HermitianMatrix::symmetrized(atoms_.back().weight.matrix() + a.weight.matrix());
            } else {
                atoms_.push_back(std::move(a));
            }
        }
        if (ac_) {
            if (ac_->densities.size() < 2) throw ArgumentError("a.c. grid needs at least 2 nodes");
            if (!(ac_->end > ac_->start)) throw ArgumentError("a.c. grid must satisfy start < end");
            for (std::size_t k = 0; k < ac_->nodes(); ++k) {
                if (ac_->densities[k].dim() != d) throw ArgumentError("a.c. density has wrong dimension");
                detail::require_psd(ac_->densities[k], "a.c. density", ac_->node(k));
            }
        }
    }

    static MatrixMeasure zero(Eigen::Index d) { return MatrixMeasure(d, {}); }

    Eigen::Index dim() const noexcept { return d_; }
    const std::vector<Atom>& atoms() const noexcept { return atoms_; }
    const std::optional<AcDensity>& ac() const noexcept { return ac_; }
    bool is_atomic() const noexcept { return !ac_.has_value(); }

    /// The atomic (= singular, in this model) part.
    MatrixMeasure singular_part() const { return MatrixMeasure(d_, atoms_); }

    /// Index of the atom within tol of x, or -1.
    std::ptrdiff_t find_atom(double x, double tol) const {
        auto it = std::lower_bound(atoms_.begin(), atoms_.end(), x - tol,
                                   [](const Atom& a, double v) { return a.location < v; });
        if (it != atoms_.end() && std::abs(it->location - x) <= tol) return it - atoms_.begin();
        return -1;
    }

    /// Piecewise-linear interpolated density at x (zero off the grid).
    CMatrix density_at(double x) const {
        if (!ac_ || x < ac_->start || x > ac_->end) return CMatrix::Zero(d_, d_);
        const double h = ac_->spacing();
        const double pos = (x - ac_->start) / h;
        auto k = static_cast<std::size_t>(std::floor(pos));
        if (k >= ac_->nodes() - 1) k = ac_->nodes() - 2;
        const double s = pos - static_cast<double>(k);
        return (1.0 - s) * ac_->densities[k].matrix() + s * ac_->densities[k + 1].matrix();
    }

    /// Total mass: atoms plus the exact integral of the piecewise-linear density.
    CMatrix total_mass() const {
        CMatrix m = CMatrix::Zero(d_, d_);
        for (const Atom& a : atoms_) m += a.weight.matrix();
        if (ac_) {
            const double h = ac_->spacing();
            for (std::size_t k = 0; k < ac_->nodes(); ++k) {
                const double w = (k == 0 || k + 1 == ac_->nodes()) ? 0.5 : 1.0;
                m += w * h * ac_->densities[k].matrix();
            }
        }
        return m;
    }

    /// X^* dM X for a d x d' matrix X (atomwise and nodewise congruence).
    MatrixMeasure congruence(const CMatrix& x) const {
        if (x.rows() != d_) throw ArgumentError("congruence matrix has wrong row count");
        std::vector<Atom> atoms;
        atoms.reserve(atoms_.size());
        for (const Atom& a : atoms_) {
            atoms.push_back({a.location, HermitianMatrix::symmetrized(x.adjoint() * a.weight.matrix() * x)});
        }
        std::optional<AcDensity> ac;
        if (ac_) {
            ac = AcDensity{ac_->start, ac_->end, {}};
            for (const HermitianMatrix& w : ac_->densities) {
                ac->densities.push_back(HermitianMatrix::symmetrized(x.adjoint() * w.matrix() * x));
            }
        }
        return MatrixMeasure(x.cols(), std::move(atoms), std::move(ac));
    }

    MatrixMeasure scaled(double c) const {
        if (c < 0.0) throw ArgumentError("measures can only be scaled by nonnegative factors");
        return congruence(std::sqrt(c) * CMatrix::Identity(d_, d_));
    }

private:
    Eigen::Index d_ = 0;
    std::vector<Atom> atoms_;
    std::optional<AcDensity> ac_;
};

struct ScalarAtom {
    double location = 0.0;
    double mass = 0.0;
};

struct ScalarAcDensity {
    double start = 0.0;
    double end = 1.0;
    std::vector<double> densities;

    double spacing() const noexcept {
        return (end - start) / static_cast<double>(densities.size() - 1);
    }
    double node(std::size_t k) const noexcept {
        return start + spacing() * static_cast<double>(k);
    }
};

/// Nonnegative scalar measure with the same atoms + grid layout.
class ScalarMeasure {
public:
    ScalarMeasure() = default;
    explicit ScalarMeasure(std::vector<ScalarAtom> atoms, std::optional<ScalarAcDensity> ac = std::nullopt)
        : ac_(std::move(ac)) {
        std::sort(atoms.begin(), atoms.end(),
                  [](const ScalarAtom& x, const ScalarAtom& y) { return x.location < y.location; });
        for (const ScalarAtom& a : atoms) {
            if (!(a.mass >= 0.0)) {
                std::ostringstream os;
                os << "scalar atom at " << a.location << " has negative mass " << a.mass;
                throw ValidationError(os.str());
            }
            if (!atoms_.empty() && a.location - atoms_.back().location <= kAtomMergeThreshold) {
                atoms_.back().mass += a.mass;
            } else {
                atoms_.push_back(a);
            }
        }
        if (ac_) {
            if (ac_->densities.size() < 2 || !(ac_->end > ac_->start)) {
                throw ArgumentError("scalar a.c. grid needs start < end and at least 2 nodes");
            }
            for (double v : ac_->densities) {
                if (!(v >= 0.0)) throw ValidationError("scalar a.c. density is negative");
            }
        }
    }

    /// Lebesgue measure times c on [a, b].
    static ScalarMeasure uniform(double a, double b, double c) {
        return ScalarMeasure({}, ScalarAcDensity{a, b, {c, c}});
    }

    const std::vector<ScalarAtom>& atoms() const noexcept { return atoms_; }
    const std::optional<ScalarAcDensity>& ac() const noexcept { return ac_; }
    bool is_atomic() const noexcept { return !ac_.has_value(); }

    double density_at(double x) const {
        if (!ac_ || x < ac_->start || x > ac_->end) return 0.0;
        const double h = ac_->spacing();
        const double pos = (x - ac_->start) / h;
        auto k = static_cast<std::size_t>(std::floor(pos));
        if (k >= ac_->densities.size() - 1) k = ac_->densities.size() - 2;
        const double s = pos - static_cast<double>(k);
        return (1.0 - s) * ac_->densities[k] + s * ac_->densities[k + 1];
    }

    /// Exact a.c. mass of [lo, hi] (piecewise-linear density integrated exactly).
    double ac_mass(double lo, double hi) const {
        if (!ac_) return 0.0;
        lo = std::max(lo, ac_->start);
        hi = std::min(hi, ac_->end);
        if (!(hi > lo)) return 0.0;
        const double h = ac_->spacing();
        double total = 0.0;
        for (std::size_t k = 0; k + 1 < ac_->densities.size(); ++k) {
            const double a = std::max(lo, ac_->node(k));
            const double b = std::min(hi, ac_->node(k) + h);
            if (b > a) total += 0.5 * (density_at(a) + density_at(b)) * (b - a);
        }
        return total;
    }

    /// Mass of the half-open interval [lo, hi).
    double mass(double lo, double hi) const {
        double total = ac_mass(lo, hi);
        for (const ScalarAtom& a : atoms_) {
            if (a.location >= lo && a.location < hi) total += a.mass;
        }
        return total;
    }

    double total_mass() const {
        double total = ac_ ? ac_mass(ac_->start, ac_->end) : 0.0;
        for (const ScalarAtom& a : atoms_) total += a.mass;
        return total;
    }

private:
    std::vector<ScalarAtom> atoms_;
    std::optional<ScalarAcDensity> ac_;
};

/// M(E) = B^* E(E) B: one atom per distinct eigenvalue of A with weight
/// B^* P_lambda B.
inline MatrixMeasure spectral_measure(const OperatorModel& model) {
    std::vector<Atom> atoms;
    for (const EigenCluster& c : eigen_clusters(model.eig())) {
        const CMatrix coupling = c.basis.adjoint() * model.b();
        atoms.push_back({c.value, HermitianMatrix::symmetrized(coupling.adjoint() * coupling)});
    }
    return MatrixMeasure(model.rank(), std::move(atoms));
}

/// mu = tr M.
inline ScalarMeasure trace_measure(const MatrixMeasure& m) {
    std::vector<ScalarAtom> atoms;
    for (const Atom& a : m.atoms()) atoms.push_back({a.location, std::max(a.weight.matrix().trace().real(), 0.0)});
    std::optional<ScalarAcDensity> ac;
    if (m.ac()) {
        ac = ScalarAcDensity{m.ac()->start, m.ac()->end, {}};
        for (const HermitianMatrix& w : m.ac()->densities) {
            ac->densities.push_back(std::max(w.matrix().trace().real(), 0.0));
        }
    }
    return ScalarMeasure(std::move(atoms), std::move(ac));
}

/// Sum_k f(x_k) W_k plus the trapezoid rule over the grid density.
template <class F>
CMatrix integrate(const MatrixMeasure& m, F&& f) {
    auto eval = [&](double x) -> Complex {
        const Complex v = f(x);
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
            std::ostringstream os;
            os << "integrand is not finite at x=" << x;
            throw EvaluationError(os.str(), x);
        }
        return v;
    };
    CMatrix total = CMatrix::Zero(m.dim(), m.dim());
    for (const Atom& a : m.atoms()) total += eval(a.location) * a.weight.matrix();
    if (const auto& ac = m.ac()) {
        const double h = ac->spacing();
        for (std::size_t k = 0; k < ac->nodes(); ++k) {
            const double w = (k == 0 || k + 1 == ac->nodes()) ? 0.5 * h : h;
            total += (w * eval(ac->node(k))) * ac->densities[k].matrix();
        }
    }
    return total;
}

/// Rank-pattern equivalence of two measures (matching supports with equal
/// pointwise rank). The dimensions d may differ.
inline bool unitarily_equivalent(const MatrixMeasure& m, const MatrixMeasure& n) {
    if (m.is_atomic() != n.is_atomic()) {
        throw UnsupportedInputError("unitarily_equivalent: cannot compare an atomic measure with one carrying an a.c. part");
    }
    constexpr double kLocationTol = 1e-10;
    auto support = [](const MatrixMeasure& x) {
        std::vector<const Atom*> out;
        for (const Atom& a : x.atoms()) {
            if (psd_rank(a.weight) > 0) out.push_back(&a);
        }
        return out;
    };
    const auto sm = support(m);
    const auto sn = support(n);
    if (sm.size() != sn.size()) return false;
    for (std::size_t k = 0; k < sm.size(); ++k) {
        if (std::abs(sm[k]->location - sn[k]->location) > kLocationTol) return false;
        if (psd_rank(sm[k]->weight) != psd_rank(sn[k]->weight)) return false;
    }
    if (m.ac()) {
        const AcDensity& a = *m.ac();
        const AcDensity& b = *n.ac();
        if (a.nodes() != b.nodes() || std::abs(a.start - b.start) > kLocationTol ||
            std::abs(a.end - b.end) > kLocationTol) {
            throw UnsupportedInputError("unitarily_equivalent: a.c. parts must share one grid");
        }
        for (std::size_t k = 0; k < a.nodes(); ++k) {
            if (psd_rank(a.densities[k]) != psd_rank(b.densities[k])) return false;
        }
    }
    return true;
}

/// || int dM(t) / (|t| + 1) ||.
inline double form_boundedness(const MatrixMeasure& m) {
    return operator_norm(integrate(m, [](double t) { return Complex(1.0 / (std::abs(t) + 1.0)); }));
}

/// The dyadic interval of level n containing x: [k 2^-n, (k+1) 2^-n).
inline std::pair<double, double> dyadic_interval(int n, double x) {
    const double len = std::ldexp(1.0, -n);
    const double k = std::floor(x / len);
    return {k * len, (k + 1.0) * len};
}

/// mu(I) / |I| for the level-n dyadic interval I containing x.
inline double dyadic_expectation(const ScalarMeasure& mu, int n, double x) {
    const auto [lo, hi] = dyadic_interval(n, x);
    return mu.mass(lo, hi) / (hi - lo);
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

enum class CheckStatus { Pass, Fail, Skip };

inline const char* to_string(CheckStatus s) {
    switch (s) {
        case CheckStatus::Pass: return "pass";
        case CheckStatus::Fail: return "fail";
        case CheckStatus::Skip: return "skip";
    }
    return "?";
}

struct DyadicCheck {
    CheckStatus status = CheckStatus::Skip;
    double mass = 0.0;            // mu(E)
    double bound = 0.0;           // alpha |E|
    double max_lower_density = 0.0;
    double worst_point = 0.0;     // sample attaining max_lower_density
};

/// Checks mu(E) <= alpha |E| when the lower dyadic density stays below alpha
/// on E. The liminf over levels is approximated by the minimum over the finest
/// half of the levels, n in [ceil(n_max/2), n_max]; coarse levels would
/// average in mass from outside E. Samples: a uniform grid in each interval,
/// the interval ends, grid nodes and atoms lying in E.
inline DyadicCheck dyadic_density_bound_check(const ScalarMeasure& mu, const std::vector<Interval>& e,
                                              double alpha, int n_max, int samples_per_interval = 257) {
    if (n_max < 0) throw ArgumentError("n_max must be nonnegative");
    DyadicCheck out;
    std::vector<double> points;
    double length = 0.0;
    for (const Interval& iv : e) {
        if (!(iv.hi > iv.lo)) throw ArgumentError("dyadic check: empty or reversed interval in E");
        length += iv.hi - iv.lo;
        out.mass += mu.ac_mass(iv.lo, iv.hi);
        for (int k = 0; k < samples_per_interval; ++k) {
            points.push_back(iv.lo + (iv.hi - iv.lo) * k / (samples_per_interval - 1));
        }
        for (const ScalarAtom& a : mu.atoms()) {
            if (a.location >= iv.lo && a.location <= iv.hi) {
                points.push_back(a.location);
                out.mass += a.mass;
            }
        }
        if (const auto& ac = mu.ac()) {
            for (std::size_t k = 0; k < ac->densities.size(); ++k) {
                if (ac->node(k) >= iv.lo && ac->node(k) <= iv.hi) points.push_back(ac->node(k));
            }
        }
    }
    out.bound = alpha * length;
    const int n_lo = (n_max + 1) / 2;
    out.max_lower_density = -std::numeric_limits<double>::infinity();
    for (double x : points) {
        double lower = std::numeric_limits<double>::infinity();
        for (int n = n_lo; n <= n_max; ++n) lower = std::min(lower, dyadic_expectation(mu, n, x));
        if (lower > out.max_lower_density) {
            out.max_lower_density = lower;
            out.worst_point = x;
        }
    }
    if (!(out.max_lower_density < alpha)) {
        out.status = CheckStatus::Skip;
        return out;
    }
    out.status = out.mass <= out.bound * (1.0 + 1e-12) ? CheckStatus::Pass : CheckStatus::Fail;
    return out;
}

}  // namespace finrank
