#pragma once

// Finite-rank perturbations A_G = A + B G B^* computed two ways: by
// diagonalizing A_G directly, and through the Aronszajn-Krein transform
// F_G = (I + F G)^{-1} F of the unperturbed Cauchy transform.

#include <sstream>
#include <utility>
#include <vector>

#include "finrank/herglotz.hpp"
#include "finrank/measure.hpp"
#include "finrank/model.hpp"

namespace finrank {

inline constexpr double kAkMaxCondition = 1e12;

inline void require_coupling_dim(const OperatorModel& model, const HermitianMatrix& g) {
    if (g.dim() != model.rank()) {
        std::ostringstream os;
        os << "coupling matrix is " << g.dim() << "x" << g.dim() << " but the perturbation rank is "
           << model.rank();
        throw ArgumentError(os.str());
    }
}

/// A + B G B^*.
inline HermitianMatrix perturb(const OperatorModel& model, const HermitianMatrix& g) {
    require_coupling_dim(model, g);
    return HermitianMatrix::symmetrized(model.a().matrix() + model.b() * g.matrix() * model.b().adjoint());
}

inline OperatorModel perturbed_model(const OperatorModel& model, const HermitianMatrix& g) {
    return OperatorModel(perturb(model, g), model.b());
}

/// Spectral measure of (A_G, B) by direct diagonalization.
inline MatrixMeasure perturbed_measure_direct(const OperatorModel& model, const HermitianMatrix& g) {
    return spectral_measure(perturbed_model(model, g));
}

/// F(z) = B^*(A - z)^{-1}B from the model's eigendecomposition.
inline HerglotzEval model_transform(const OperatorModel& model, Complex z) {
    detail::check_off_axis(z, "model_transform");
    return {z, model.resolvent_compression(z)};
}

/// F_G = (I + F G)^{-1} F.
inline HerglotzEval aronszajn_krein(const HerglotzEval& f, const HermitianMatrix& g) {
    if (g.dim() != f.value.rows()) throw ArgumentError("aronszajn_krein: dimension mismatch");
    const Eigen::Index d = g.dim();
    const CMatrix m = CMatrix::Identity(d, d) + f.value * g.matrix();
    const double cond = condition_number(m);
    if (!(cond <= kAkMaxCondition)) {
        std::ostringstream os;
        os << "aronszajn_krein: I + F G has condition number " << cond << " at z=" << f.z;
        throw IllConditionedError(os.str(), cond);
    }
    return {f.z, m.fullPivLu().solve(f.value)};
}

/// F_G = F (I + G F)^{-1}.
inline HerglotzEval aronszajn_krein_right(const HerglotzEval& f, const HermitianMatrix& g) {
    if (g.dim() != f.value.rows()) throw ArgumentError("aronszajn_krein_right: dimension mismatch");
    const Eigen::Index d = g.dim();
    const CMatrix m = CMatrix::Identity(d, d) + g.matrix() * f.value;
    const double cond = condition_number(m);
    if (!(cond <= kAkMaxCondition)) {
        std::ostringstream os;
        os << "aronszajn_krein_right: I + G F has condition number " << cond << " at z=" << f.z;
        throw IllConditionedError(os.str(), cond);
    }
    // X (I + G F) = F  <=>  (I + G F)^* X^* = F^*
    return {f.z, m.adjoint().fullPivLu().solve(f.value.adjoint()).adjoint()};
}

/// ||Im F_G - (I + F^* G)^{-1} Im F (I + G F)^{-1}|| / (1 + ||Im F_G||).
inline double im_transform_identity_residual(const OperatorModel& model, const HermitianMatrix& g, Complex z) {
    require_coupling_dim(model, g);
    const Eigen::Index d = model.rank();
    const CMatrix f = model.resolvent_compression(z);
    const CMatrix im_fg = imag_part(model_transform(perturbed_model(model, g), z).value);
    const CMatrix left = (CMatrix::Identity(d, d) + f.adjoint() * g.matrix()).inverse();
    const CMatrix right = (CMatrix::Identity(d, d) + g.matrix() * f).inverse();
    const CMatrix predicted = left * imag_part(f) * right;
    return operator_norm(im_fg - predicted) / (1.0 + operator_norm(im_fg));
}

inline CyclicityReport cyclicity_check(const OperatorModel& model) { return model.cyclicity(); }

/// Cyclicity of Ran B for A_G, given that it holds for A.
inline bool cyclicity_preserved_check(const OperatorModel& model, const HermitianMatrix& g) {
    if (!model.cyclicity().cyclic) throw ArgumentError("cyclicity_preserved_check: model is not cyclic");
    return perturbed_model(model, g).cyclicity().cyclic;
}

inline constexpr double kBoundaryRankTolerance = 1e-6;
inline constexpr double kExceptionalCondition = 1e8;

struct DensityTransformResult {
    CheckStatus status = CheckStatus::Skip;  // Skip: exceptional point
    double residual = 0.0;
    Eigen::Index rank_before = 0;
    Eigen::Index rank_after = 0;
    double condition = 0.0;                  // of I + G F_+
    HermitianMatrix predicted;               // (I + F_+^* G)^{-1} W (I + G F_+)^{-1}
    HermitianMatrix observed;                // boundary density of M^G
};

/// Compares the a.c. density of M^G at x with the congruence of the density
/// of M by (I + G F_+)^{-1}, where F_+ is the boundary value of F at x.
/// The ladder is shrunk by factors of 4 (down to eps = 1e-6) until both
/// extrapolations settle below a tenth of the tolerance.
inline DensityTransformResult ac_density_transform(const MatrixMeasure& m, const HermitianMatrix& g, double x,
                                                   const std::vector<double>& eps_ladder = default_eps_ladder(),
                                                   double tolerance = 1e-4) {
    check_ladder(eps_ladder);
    if (!m.ac() || !(x > m.ac()->start && x < m.ac()->end)) {
        throw ArgumentError("ac_density_transform: x must be interior to the a.c. grid");
    }
    if (g.dim() != m.dim()) throw ArgumentError("ac_density_transform: dimension mismatch");
    const Eigen::Index d = m.dim();
    const CMatrix id = CMatrix::Identity(d, d);
    DensityTransformResult out;

    std::vector<double> ladder = eps_ladder;
    HermitianMatrix density;
    for (;;) {
        std::vector<CMatrix> f_samples;
        for (double e : ladder) f_samples.push_back(cauchy_transform(m, Complex(x, e)).value);
        const CMatrix f_plus = richardson_to_zero(ladder, f_samples).value;
        const CMatrix right = id + g.matrix() * f_plus;
        // det(I + G F_+) near zero: small smallest singular value or large condition
        const Eigen::VectorXd sv = singular_values(right);
        const double scale_gf = 1.0 + operator_norm(g.matrix() * f_plus);
        out.condition = std::max({condition_number(right), condition_number(id + g.matrix() * f_samples.back()),
                                  scale_gf / std::max(sv.minCoeff(), 1e-300)});
        if (!(out.condition <= kExceptionalCondition)) return out;

        const BoundaryValue w = boundary_density(m, x, ladder);
        const BoundaryValue wg = extrapolate_ladder(ladder, [&](double e) {
            const HerglotzEval fg = aronszajn_krein({Complex(x, e), cauchy_transform(m, Complex(x, e)).value}, g);
            return CMatrix(imag_part(fg.value) / kPi);
        });
        if (!w.converged || !wg.converged) return out;

        density = w.value;
        const CMatrix right_inv = right.inverse();
        out.predicted = HermitianMatrix::symmetrized(right_inv.adjoint() * w.value.matrix() * right_inv);
        out.observed = wg.value;
        const double scale = std::max(operator_norm(out.observed), operator_norm(out.predicted));
        out.residual = scale > 0.0 ? operator_norm(out.observed.matrix() - out.predicted.matrix()) / scale : 0.0;
        const double settled = 0.1 * tolerance * scale;
        const bool accurate = w.error_estimate <= settled && wg.error_estimate <= settled;
        if (accurate || ladder.back() / 4.0 < 1e-6) break;
        for (double& e : ladder) e /= 4.0;
    }
    out.rank_before = psd_rank(density, kBoundaryRankTolerance);
    out.rank_after = psd_rank(out.observed, kBoundaryRankTolerance);
    out.status = (out.residual <= tolerance && out.rank_before == out.rank_after) ? CheckStatus::Pass
                                                                                   : CheckStatus::Fail;
    return out;
}

/// The line G(t) = G0 + t G of couplings with G > 0.
class PerturbationFamily {
public:
    PerturbationFamily(OperatorModel model, HermitianMatrix gamma0, HermitianMatrix gamma)
        : model_(std::move(model)), gamma0_(std::move(gamma0)), gamma_(std::move(gamma)) {
        require_coupling_dim(model_, gamma0_);
        require_coupling_dim(model_, gamma_);
        const double lmin = lambda_min(gamma_);
        if (!(lmin > 1e-12)) {
            std::ostringstream os;
            os << "Gamma must be positive definite: lambda_min = " << lmin;
            throw NotPsdError(os.str(), lmin);
        }
    }

    const OperatorModel& model() const noexcept { return model_; }
    const HermitianMatrix& gamma0() const noexcept { return gamma0_; }
    const HermitianMatrix& gamma() const noexcept { return gamma_; }

    HermitianMatrix at(double t) const {
        return HermitianMatrix::symmetrized(gamma0_.matrix() + t * gamma_.matrix());
    }

    PerturbationFamily with_gamma(HermitianMatrix gamma) const {
        return PerturbationFamily(model_, gamma0_, std::move(gamma));
    }
    PerturbationFamily with_gamma0(HermitianMatrix gamma0) const {
        return PerturbationFamily(model_, std::move(gamma0), gamma_);
    }

private:
    OperatorModel model_;
    HermitianMatrix gamma0_;
    HermitianMatrix gamma_;
};

}  // namespace finrank
