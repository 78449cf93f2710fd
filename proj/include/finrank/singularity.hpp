#pragma once

// Vector mutual singularity of atomic matrix measures, the perturbed-pair
// check M_s vs G M^G_s G, and the joint Poisson A2 characteristic
//   sup_z || M(z)^{1/2} N(z)^{1/2} ||^2.

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include "finrank/averaging.hpp"
#include "finrank/herglotz.hpp"
#include "finrank/measure.hpp"
#include "finrank/perturbation.hpp"

namespace finrank {

inline constexpr double kOrthogonalityTolerance = 1e-8;
inline constexpr double kCommonAtomTolerance = 1e-9;
/// Atoms with ||W|| below this fraction of the largest weight in either
/// measure are treated as absent (eigensolver noise after a congruence).
inline constexpr double kNegligibleWeight = 1e-12;

/// Pi(x) per atom of the joint support: M is carried by Ran(I - Pi), N by Ran Pi.
struct SingularityWitness {
    std::vector<double> points;
    std::vector<HermitianMatrix> projections;
};

struct SingularityViolation {
    double location = 0.0;
    double overlap = 0.0;
};

struct MutualSingularityResult {
    bool singular = true;
    SingularityWitness witness;
    std::vector<SingularityViolation> violations;
    std::size_t common_atoms = 0;   // shared locations where both weights are non-negligible
    double max_overlap = 0.0;       // over common atoms
};

namespace detail {

inline double max_weight_norm(const MatrixMeasure& m) {
    double w = 0.0;
    for (const Atom& a : m.atoms()) w = std::max(w, operator_norm(a.weight));
    return w;
}

inline void require_atomic(const MatrixMeasure& m, const char* what) {
    if (!m.is_atomic()) {
        std::ostringstream os;
        os << what << ": measure has an absolutely continuous part; only atomic measures are supported";
        throw UnsupportedInputError(os.str());
    }
}

}  // namespace detail

/// Checks Ran M({x}) perp Ran N({x}) at every common atom and builds Pi.
inline MutualSingularityResult vector_mutual_singularity(const MatrixMeasure& m, const MatrixMeasure& n) {
    detail::require_atomic(m, "vector_mutual_singularity");
    detail::require_atomic(n, "vector_mutual_singularity");
    if (m.dim() != n.dim()) throw ArgumentError("vector_mutual_singularity: dimension mismatch");
    const Eigen::Index d = m.dim();
    const double floor = kNegligibleWeight * std::max(detail::max_weight_norm(m), detail::max_weight_norm(n));
    auto present = [&](const HermitianMatrix& w) { return operator_norm(w) > floor; };

    MutualSingularityResult out;
    std::vector<bool> n_used(n.atoms().size(), false);
    for (const Atom& a : m.atoms()) {
        const std::ptrdiff_t j = n.find_atom(a.location, kCommonAtomTolerance);
        const bool in_m = present(a.weight);
        const bool in_n = j >= 0 && present(n.atoms()[static_cast<std::size_t>(j)].weight);
        if (j >= 0) n_used[static_cast<std::size_t>(j)] = true;
        if (!in_m && !in_n) continue;
        out.witness.points.push_back(a.location);
        if (!in_n) {
            out.witness.projections.push_back(HermitianMatrix::zero(d));
            continue;
        }
        const HermitianMatrix& v = n.atoms()[static_cast<std::size_t>(j)].weight;
        const HermitianMatrix pv = range_projection(v);
        if (!in_m) {
            out.witness.projections.push_back(HermitianMatrix::identity(d));
            continue;
        }
        ++out.common_atoms;
        const double overlap = subspace_overlap(range_projection(a.weight), pv);
        out.max_overlap = std::max(out.max_overlap, overlap);
        if (overlap > kOrthogonalityTolerance) out.violations.push_back({a.location, overlap});
        out.witness.projections.push_back(pv);
    }
    for (std::size_t j = 0; j < n.atoms().size(); ++j) {
        if (n_used[j] || !present(n.atoms()[j].weight)) continue;
        out.witness.points.push_back(n.atoms()[j].location);
        out.witness.projections.push_back(HermitianMatrix::identity(d));
    }
    out.singular = out.violations.empty();
    if (!out.singular) out.witness = {};
    return out;
}

/// Largest of ||Pi M({x}) Pi||, ||(I - Pi) N({x}) (I - Pi)|| and the
/// projection defect ||Pi^2 - Pi|| over the witness points.
inline double witness_residual(const SingularityWitness& w, const MatrixMeasure& m, const MatrixMeasure& n) {
    double worst = 0.0;
    for (std::size_t k = 0; k < w.points.size(); ++k) {
        const CMatrix& p = w.projections[k].matrix();
        const CMatrix q = CMatrix::Identity(p.rows(), p.cols()) - p;
        worst = std::max(worst, operator_norm(p * p - p));
        const std::ptrdiff_t i = m.find_atom(w.points[k], kCommonAtomTolerance);
        if (i >= 0) worst = std::max(worst, operator_norm(p * m.atoms()[static_cast<std::size_t>(i)].weight.matrix() * p));
        const std::ptrdiff_t j = n.find_atom(w.points[k], kCommonAtomTolerance);
        if (j >= 0) worst = std::max(worst, operator_norm(q * n.atoms()[static_cast<std::size_t>(j)].weight.matrix() * q));
    }
    return worst;
}

struct AdReport {
    bool holds = true;
    MutualSingularityResult singularity;
    bool gamma_invertible = true;   // singular G can make G W^G G vanish at common atoms
};

/// M vs G M^G G, both atomic for a finite model.
inline AdReport ad_check(const OperatorModel& model, const HermitianMatrix& g) {
    require_coupling_dim(model, g);
    const MatrixMeasure m = spectral_measure(model);
    const MatrixMeasure mg = perturbed_measure_direct(model, g).congruence(g.matrix());
    AdReport out;
    out.singularity = vector_mutual_singularity(m, mg);
    out.holds = out.singularity.singular;
    out.gamma_invertible = numerical_rank(g.matrix()) == g.dim();
    return out;
}

/// Low-rank factor L(z) with L L^* = M(z), assembled from rank-truncated
/// factors of every atom weight and a.c. node density. Norms of products
/// M(z)^{1/2} N(z)^{1/2} are then ||L_M^* L_N||, which stays accurate near
/// atoms where M(z) is huge and the product is small by cancellation; a
/// matrix square root would amplify rounding in the null directions.
class PoissonFactor {
public:
    explicit PoissonFactor(const MatrixMeasure& m) : d_(m.dim()) {
        for (const Atom& a : m.atoms()) {
            locations_.push_back(a.location);
            atom_factors_.push_back(psd_factor(a.weight));
        }
        if (const auto& ac = m.ac()) {
            ac_ = AcGrid{ac->start, ac->end, ac->nodes()};
            for (const HermitianMatrix& w : ac->densities) node_factors_.push_back(psd_factor(w));
        }
    }

    Eigen::Index dim() const noexcept { return d_; }

    CMatrix operator()(Complex z) const {
        if (!(z.imag() > 0.0)) throw DomainError("Poisson factor requires Im z > 0");
        std::vector<std::pair<double, const CMatrix*>> parts;
        Eigen::Index cols = 0;
        for (std::size_t k = 0; k < locations_.size(); ++k) {
            const double dx = locations_[k] - z.real();
            const double c = z.imag() / (kPi * (dx * dx + z.imag() * z.imag()));
            parts.emplace_back(c, &atom_factors_[k]);
            cols += atom_factors_[k].cols();
        }
        if (ac_) {
            const auto w = detail::linear_cauchy_weights(ac_->start, ac_->end, ac_->nodes, z);
            for (std::size_t k = 0; k < w.size(); ++k) {
                parts.emplace_back(std::max(w[k].imag(), 0.0) / kPi, &node_factors_[k]);
                cols += node_factors_[k].cols();
            }
        }
        CMatrix l(d_, cols);
        Eigen::Index at = 0;
        for (const auto& [c, f] : parts) {
            l.middleCols(at, f->cols()) = std::sqrt(c) * *f;
            at += f->cols();
        }
        if (cols <= d_) return l;
        // L^* = Q R  =>  L L^* = R^* R: a square factor with the same Gram matrix.
        const Eigen::HouseholderQR<CMatrix> qr(l.adjoint());
        const CMatrix r = qr.matrixQR().topRows(d_).triangularView<Eigen::Upper>();
        return r.adjoint();
    }

private:
    struct AcGrid {
        double start;
        double end;
        std::size_t nodes;
    };
    Eigen::Index d_;
    std::vector<double> locations_;
    std::vector<CMatrix> atom_factors_;
    std::optional<AcGrid> ac_;
    std::vector<CMatrix> node_factors_;
};

struct A2Value {
    double value = 0.0;           // sup over samples of ||M(z)^{1/2} N(z)^{1/2}||^2
    Complex argmax{0.0, 1.0};
    double order_residual = 0.0;  // max | ||M^{1/2} N^{1/2}|| - ||N^{1/2} M^{1/2}|| |
    std::size_t samples = 0;
};

/// Tensor grid of x in the hull of both atom sets (atoms, midpoints and 33
/// uniform points) with eps log-spaced over [eps_min, 10], plus extra points.
inline std::vector<Complex> default_a2_samples(const MatrixMeasure& m, const MatrixMeasure& n,
                                               const std::vector<Complex>& extra = {}, double eps_min = 1e-6,
                                               int eps_count = 29) {
    if (!(eps_min > 0.0 && eps_min < 10.0)) throw ArgumentError("A2 samples: eps_min must lie in (0, 10)");
    std::vector<double> atoms;
    for (const MatrixMeasure* mu : {&m, &n}) {
        for (const Atom& a : mu->atoms()) atoms.push_back(a.location);
        if (const auto& ac = mu->ac()) {
            atoms.push_back(ac->start);
            atoms.push_back(ac->end);
        }
    }
    std::sort(atoms.begin(), atoms.end());
    std::vector<double> xs = atoms;
    for (std::size_t k = 0; k + 1 < atoms.size(); ++k) xs.push_back(0.5 * (atoms[k] + atoms[k + 1]));
    const double lo = atoms.empty() ? -1.0 : atoms.front() - 1.0;
    const double hi = atoms.empty() ? 1.0 : atoms.back() + 1.0;
    for (int k = 0; k <= 32; ++k) xs.push_back(lo + (hi - lo) * k / 32.0);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    const double log_lo = std::log10(eps_min);
    std::vector<Complex> out;
    for (double x : xs) {
        for (int k = 0; k < eps_count; ++k) {
            out.emplace_back(x, std::pow(10.0, log_lo + (1.0 - log_lo) * k / (eps_count - 1)));
        }
    }
    out.insert(out.end(), extra.begin(), extra.end());
    return out;
}

inline A2Value a2_characteristic(const MatrixMeasure& m, const MatrixMeasure& n, const std::vector<Complex>& z_samples) {
    if (m.dim() != n.dim()) throw ArgumentError("a2_characteristic: dimension mismatch");
    const PoissonFactor fm(m);
    const PoissonFactor fn(n);
    A2Value out;
    for (const Complex& z : z_samples) {
        if (!(z.imag() > 0.0)) throw DomainError("a2_characteristic: samples must lie in the upper half-plane");
        const CMatrix lm = fm(z);
        const CMatrix ln = fn(z);
        const double mn = operator_norm(lm.adjoint() * ln);
        const double nm = operator_norm(ln.adjoint() * lm);
        out.order_residual = std::max(out.order_residual, std::abs(mn - nm));
        if (mn * mn > out.value || out.samples == 0) {
            out.value = mn * mn;
            out.argmax = z;
        }
        ++out.samples;
    }
    return out;
}

inline A2Value a2_characteristic(const MatrixMeasure& m, const MatrixMeasure& n) {
    return a2_characteristic(m, n, default_a2_samples(m, n));
}

/// ||M(x + i eps)^{1/2} N(x + i eps)^{1/2}|| along a vertical ray.
inline std::vector<double> a2_ray_profile(const MatrixMeasure& m, const MatrixMeasure& n, double x,
                                          const std::vector<double>& eps) {
    const PoissonFactor fm(m);
    const PoissonFactor fn(n);
    std::vector<double> out;
    for (double e : eps) {
        const Complex z(x, e);
        out.push_back(operator_norm(fm(z).adjoint() * fn(z)));
    }
    return out;
}

inline constexpr double kA2Bound = 8.0 / kPi;

struct A2BoundCheck {
    bool holds = true;
    double max_value = 0.0;          // sup ||M(z)^{1/2} (G M^G(z) G)^{1/2}||
    double margin = 0.0;             // 8/pi - max_value
    Complex argmax{0.0, 1.0};
    double identity_residual = 0.0;  // vs ||M(z)^{1/2} G M^G(z)^{1/2}||, relative to max(1, value)
    std::size_t samples = 0;
};

/// Sampled sup of ||M(z)^{1/2} (G M^G(z) G)^{1/2}|| against 8/pi. The
/// second factor comes from the atomwise congruence G W^G G; the Remark form
/// ||M^{1/2} G (M^G)^{1/2}|| is evaluated from the factors of W^G.
inline A2BoundCheck a2_bound_check(const OperatorModel& model, const HermitianMatrix& g,
                                   std::vector<Complex> z_samples = {}) {
    require_coupling_dim(model, g);
    const MatrixMeasure m = spectral_measure(model);
    const MatrixMeasure mg = perturbed_measure_direct(model, g);
    const MatrixMeasure gmg = mg.congruence(g.matrix());
    const PoissonFactor fm(m);
    const PoissonFactor fmg(mg);
    const PoissonFactor fgmg(gmg);
    if (z_samples.empty()) z_samples = default_a2_samples(m, mg);
    A2BoundCheck out;
    for (const Complex& z : z_samples) {
        if (!(z.imag() > 0.0)) throw DomainError("a2_bound_check: samples must lie in the upper half-plane");
        const CMatrix lm_adj = fm(z).adjoint();
        const double v = operator_norm(lm_adj * fgmg(z));
        const double alt = operator_norm(lm_adj * g.matrix() * fmg(z));
        out.identity_residual = std::max(out.identity_residual, std::abs(v - alt) / std::max(1.0, v));
        if (v > out.max_value || out.samples == 0) {
            out.max_value = v;
            out.argmax = z;
        }
        ++out.samples;
    }
    out.margin = kA2Bound - out.max_value;
    out.holds = out.max_value <= kA2Bound + 1e-8;
    return out;
}

/// Parameters t where tr M^{G(t)} shares an atom with nu.
inline ExceptionalScan exceptional_parameter_scan(const PerturbationFamily& family, const ScalarMeasure& nu,
                                                  const std::vector<double>& t_grid) {
    std::vector<double> points;
    for (const ScalarAtom& a : nu.atoms()) {
        if (a.mass > 0.0) points.push_back(a.location);
    }
    return null_set_scan(family, points, t_grid);
}

}  // namespace finrank
