#pragma once

// The spectral representation V_G : L^2(M) -> L^2(M^G) of a perturbed pair
// and the weighted integral operators T_eps, P_alpha : L^2(M) -> L^2(G M^G G).
//
// Functions on an atomic measure are stored by their values at the atoms
// ("atom-value coordinates", d numbers per atom). Writing every atom weight
// as W_k = F_k F_k^* with F_k of full column rank, y_k = F_k^* f(x_k) are
// isometric coordinates: ||f||_{L^2(M)} = ||y||. Operator norms and
// residuals are taken there, which also quotients out ker W_k.

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

#include "finrank/perturbation.hpp"
#include "finrank/singularity.hpp"

namespace finrank {

inline Complex resolvent_kernel(Complex z, double s) { return 1.0 / (Complex(s) - z); }

namespace detail {

/// L with L L^* = sum_k |k(x_k)|^2 W_k, compressed to at most d columns.
inline CMatrix mass_factor(const MatrixMeasure& m, const std::function<Complex(double)>& k) {
    std::vector<CMatrix> parts;
    Eigen::Index cols = 0;
    for (const Atom& a : m.atoms()) {
        parts.push_back(std::abs(k(a.location)) * psd_factor(a.weight));
        cols += parts.back().cols();
    }
    CMatrix l(m.dim(), cols);
    Eigen::Index at = 0;
    for (const CMatrix& f : parts) {
        l.middleCols(at, f.cols()) = f;
        at += f.cols();
    }
    if (cols <= m.dim()) return l;
    const Eigen::HouseholderQR<CMatrix> qr(l.adjoint());
    return qr.matrixQR().topRows(m.dim()).triangularView<Eigen::Upper>().toDenseMatrix().adjoint();
}

}  // namespace detail

/// k_z e.
struct Tag {
    Complex z;
    CVector e;
};

/// Isometric coordinates of an atomic measure: to_iso = blockdiag(F_k^*),
/// from_iso = blockdiag((F_k^*)^+) with to_iso * from_iso = I.
struct IsometricCoordinates {
    CMatrix to_iso;
    CMatrix from_iso;
    Eigen::Index dim = 0;  // dim L^2(M) = sum_k rank W_k
};

inline IsometricCoordinates isometric_coordinates(const MatrixMeasure& m) {
    detail::require_atomic(m, "isometric_coordinates");
    const Eigen::Index d = m.dim();
    const auto k = static_cast<Eigen::Index>(m.atoms().size());
    std::vector<CMatrix> factors;
    Eigen::Index total = 0;
    for (const Atom& a : m.atoms()) {
        factors.push_back(psd_factor(a.weight));
        total += factors.back().cols();
    }
    IsometricCoordinates out;
    out.dim = total;
    out.to_iso = CMatrix::Zero(total, d * k);
    out.from_iso = CMatrix::Zero(d * k, total);
    Eigen::Index row = 0;
    for (Eigen::Index j = 0; j < k; ++j) {
        const CMatrix& f = factors[static_cast<std::size_t>(j)];
        const Eigen::Index r = f.cols();
        if (r == 0) continue;
        out.to_iso.block(row, j * d, r, d) = f.adjoint();
        // (F^*)^+ = F (F^* F)^{-1}
        out.from_iso.block(j * d, row, d, r) = f * (f.adjoint() * f).inverse();
        row += r;
    }
    return out;
}

/// Resolvent-function tags spanning L^2(M) and their Gram matrix
/// <k_z e, k_w e'> = e'^* (int conj(k_w) k_z dM) e.
struct WeightedSpaceBasis {
    MatrixMeasure measure;
    std::vector<Tag> functions;
    HermitianMatrix gram;
    Eigen::Index rank = 0;

    /// Atom-value coordinates of the tags (d K x J).
    CMatrix values() const {
        const Eigen::Index d = measure.dim();
        const auto k = static_cast<Eigen::Index>(measure.atoms().size());
        CMatrix v(d * k, static_cast<Eigen::Index>(functions.size()));
        for (std::size_t j = 0; j < functions.size(); ++j) {
            for (Eigen::Index a = 0; a < k; ++a) {
                v.block(a * d, static_cast<Eigen::Index>(j), d, 1) =
                    resolvent_kernel(functions[j].z, measure.atoms()[static_cast<std::size_t>(a)].location) *
                    functions[j].e;
            }
        }
        return v;
    }

    static WeightedSpaceBasis build(MatrixMeasure measure, std::vector<Tag> tags) {
        detail::require_atomic(measure, "WeightedSpaceBasis");
        for (std::size_t i = 0; i < tags.size(); ++i) {
            if (std::abs(tags[i].z.imag()) < 1e-3) throw ArgumentError("tag points need |Im z| >= 1e-3");
            if (tags[i].e.size() != measure.dim()) throw ArgumentError("tag vector has the wrong dimension");
        }
        WeightedSpaceBasis b{std::move(measure), std::move(tags), HermitianMatrix(), 0};
        const IsometricCoordinates iso = isometric_coordinates(b.measure);
        const CMatrix y = iso.to_iso * b.values();
        b.gram = HermitianMatrix::symmetrized(y.adjoint() * y);
        b.rank = y.size() == 0 ? 0 : Eigen::ColPivHouseholderQR<CMatrix>(y).setThreshold(1e-12).rank();
        if (b.rank < iso.dim) {
            std::ostringstream os;
            os << "resolvent tags span a subspace of dimension " << b.rank << " but dim L2(M) = " << iso.dim
               << "; supply more (or better spread) tags";
            throw ValidationError(os.str());
        }
        return b;
    }
};

/// ceil(2 dim / d) points at Chebyshev-spread real parts over the atom hull,
/// alternating Im z = +im / -im, each paired with every standard basis vector.
inline std::vector<Tag> default_tags(const MatrixMeasure& m, double im = 1.0) {
    const Eigen::Index d = m.dim();
    const Eigen::Index dim = isometric_coordinates(m).dim;
    const Eigen::Index points = std::max<Eigen::Index>(1, (2 * dim + d - 1) / d);
    double lo = 0.0, hi = 0.0;
    if (!m.atoms().empty()) {
        lo = m.atoms().front().location;
        hi = m.atoms().back().location;
    }
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo) + 0.5;
    std::vector<Tag> tags;
    for (Eigen::Index p = 0; p < points; ++p) {
        const double x = mid + half * std::cos(kPi * (static_cast<double>(p) + 0.5) / static_cast<double>(points));
        const Complex z(x, p % 2 == 0 ? im : -im);
        for (Eigen::Index j = 0; j < d; ++j) tags.push_back({z, CVector::Unit(d, j)});
    }
    return tags;
}

/// Matrix in atom-value coordinates between two atomic measures.
struct WeightedOperator {
    MatrixMeasure domain;
    MatrixMeasure codomain;
    CMatrix matrix;

    CMatrix isometric() const {
        return isometric_coordinates(codomain).to_iso * matrix * isometric_coordinates(domain).from_iso;
    }
    double norm() const { return operator_norm(isometric()); }
};

struct SpectralMap {
    WeightedOperator op;
    WeightedSpaceBasis basis;      // tags in L^2(M)
    std::vector<std::size_t> used; // tags kept after thinning
    double tag_condition = 0.0;    // of the kept tags in isometric coordinates
};

/// Image tags k_z (I + G F(z)) e in atom-value coordinates of M^G.
inline CMatrix spectral_map_images(const MatrixMeasure& m, const MatrixMeasure& mg, const HermitianMatrix& g,
                                   const std::vector<Tag>& tags) {
    const Eigen::Index d = m.dim();
    const auto k = static_cast<Eigen::Index>(mg.atoms().size());
    CMatrix out(d * k, static_cast<Eigen::Index>(tags.size()));
    for (std::size_t j = 0; j < tags.size(); ++j) {
        const CMatrix f = cauchy_transform(m, tags[j].z).value;
        const CVector e = tags[j].e + g.matrix() * (f * tags[j].e);
        for (Eigen::Index a = 0; a < k; ++a) {
            out.block(a * d, static_cast<Eigen::Index>(j), d, 1) =
                resolvent_kernel(tags[j].z, mg.atoms()[static_cast<std::size_t>(a)].location) * e;
        }
    }
    return out;
}

/// V_G from k_z e -> k_z (I + G F(z)) e. The tags are thinned to a
/// well-conditioned spanning subset by column-pivoted QR.
inline SpectralMap build_spectral_map(const OperatorModel& model, const HermitianMatrix& g, std::vector<Tag> tags = {}) {
    require_coupling_dim(model, g);
    const MatrixMeasure m = spectral_measure(model);
    const MatrixMeasure mg = perturbed_measure_direct(model, g);
    if (tags.empty()) tags = default_tags(m);
    SpectralMap out{WeightedOperator{m, mg, CMatrix()}, WeightedSpaceBasis::build(m, std::move(tags)), {}, 0.0};

    const IsometricCoordinates in = isometric_coordinates(m);
    const IsometricCoordinates outc = isometric_coordinates(mg);
    if (in.dim != outc.dim) {
        std::ostringstream os;
        os << "dim L2(M) = " << in.dim << " but dim L2(M^G) = " << outc.dim << "; the model is not cyclic";
        throw ValidationError(os.str());
    }
    const CMatrix y_in = in.to_iso * out.basis.values();
    Eigen::ColPivHouseholderQR<CMatrix> qr(y_in);
    const auto& perm = qr.colsPermutation().indices();
    CMatrix kept_in(in.dim, in.dim);
    std::vector<Tag> kept_tags;
    for (Eigen::Index j = 0; j < in.dim; ++j) {
        const auto idx = static_cast<std::size_t>(perm(j));
        out.used.push_back(idx);
        kept_in.col(j) = y_in.col(perm(j));
        kept_tags.push_back(out.basis.functions[idx]);
    }
    const CMatrix kept_out = outc.to_iso * spectral_map_images(m, mg, g, kept_tags);
    out.tag_condition = condition_number(kept_in);
    const CMatrix v_iso = kept_in.transpose().partialPivLu().solve(kept_out.transpose()).transpose();
    out.op.matrix = outc.from_iso * v_iso * in.to_iso;
    return out;
}

/// V_G built from eigenvectors: f -> sum_lambda P_lambda B f(lambda) in C^N,
/// read back in L^2(M^G) as g(mu) = (W^G_mu)^+ B^* Q_mu (...).
inline WeightedOperator spectral_map_direct(const OperatorModel& model, const HermitianMatrix& g) {
    require_coupling_dim(model, g);
    const Eigen::Index d = model.rank();
    const Eigen::Index n = model.ambient_dim();
    const MatrixMeasure m = spectral_measure(model);
    const MatrixMeasure mg = perturbed_measure_direct(model, g);
    const auto before = eigen_clusters(model.eig());
    const auto after = eigen_clusters(perturbed_model(model, g).eig());
    const auto kin = static_cast<Eigen::Index>(m.atoms().size());
    const auto kout = static_cast<Eigen::Index>(mg.atoms().size());

    CMatrix embed = CMatrix::Zero(n, d * kin);  // f -> sum P_lambda B f(lambda)
    for (const EigenCluster& c : before) {
        const std::ptrdiff_t a = m.find_atom(c.value, kAtomMergeThreshold);
        if (a < 0) throw Error("spectral_map_direct: eigenvalue without atom");
        embed.middleCols(a * d, d) += c.basis * (c.basis.adjoint() * model.b());
    }
    CMatrix read = CMatrix::Zero(d * kout, n);
    for (const EigenCluster& c : after) {
        const std::ptrdiff_t a = mg.find_atom(c.value, kAtomMergeThreshold);
        if (a < 0) throw Error("spectral_map_direct: eigenvalue without atom");
        const HermitianMatrix& w = mg.atoms()[static_cast<std::size_t>(a)].weight;
        const CMatrix root = psd_pinv_sqrt(w, 1e-13).matrix();
        const CMatrix w_pinv = root * root;
        read.middleRows(a * d, d) += w_pinv * model.b().adjoint() * c.basis * c.basis.adjoint();
    }
    return WeightedOperator{m, mg, read * embed};
}

/// max of ||Gram of images - Gram of tags|| / (1 + ||Gram of tags||) over all
/// supplied tags and the isometry defects of V in both directions.
inline double unitarity_residual(const SpectralMap& v) {
    const IsometricCoordinates outc = isometric_coordinates(v.op.codomain);
    const CMatrix images = outc.to_iso * v.op.matrix * v.basis.values();
    const CMatrix gram_out = images.adjoint() * images;
    const double gram_norm = operator_norm(v.basis.gram);
    double r = operator_norm(gram_out - v.basis.gram.matrix()) / (1.0 + gram_norm);
    const CMatrix iso = v.op.isometric();
    r = std::max(r, operator_norm(iso.adjoint() * iso - CMatrix::Identity(iso.cols(), iso.cols())));
    r = std::max(r, operator_norm(iso * iso.adjoint() - CMatrix::Identity(iso.rows(), iso.rows())));
    return r;
}

/// A_G on L^2(M) in atom-value coordinates: (A_G f)(x_k) = x_k f_k + G sum_j W_j f_j.
inline CMatrix perturbed_multiplication(const MatrixMeasure& m, const HermitianMatrix& g) {
    const Eigen::Index d = m.dim();
    const auto k = static_cast<Eigen::Index>(m.atoms().size());
    CMatrix out = CMatrix::Zero(d * k, d * k);
    for (Eigen::Index a = 0; a < k; ++a) {
        out.block(a * d, a * d, d, d) += m.atoms()[static_cast<std::size_t>(a)].location * CMatrix::Identity(d, d);
        for (Eigen::Index j = 0; j < k; ++j) {
            out.block(a * d, j * d, d, d) += g.matrix() * m.atoms()[static_cast<std::size_t>(j)].weight.matrix();
        }
    }
    return out;
}

/// ||V A_G - M_s V|| as an operator L^2(M) -> L^2(M^G).
inline double intertwining_residual(const WeightedOperator& v, const HermitianMatrix& g) {
    const Eigen::Index d = v.domain.dim();
    const auto kout = static_cast<Eigen::Index>(v.codomain.atoms().size());
    CMatrix ms = CMatrix::Zero(d * kout, d * kout);
    for (Eigen::Index a = 0; a < kout; ++a) {
        ms.block(a * d, a * d, d, d) = v.codomain.atoms()[static_cast<std::size_t>(a)].location * CMatrix::Identity(d, d);
    }
    const WeightedOperator diff{v.domain, v.codomain,
                                v.matrix * perturbed_multiplication(v.domain, g) - ms * v.matrix};
    return diff.norm();
}

/// ||V_1 - V_2|| in isometric coordinates for maps built from two tag sets.
inline double tag_independence_residual(const OperatorModel& model, const HermitianMatrix& g,
                                        const std::vector<Tag>& first, const std::vector<Tag>& second) {
    const SpectralMap a = build_spectral_map(model, g, first);
    const SpectralMap b = build_spectral_map(model, g, second);
    return operator_norm(a.op.isometric() - b.op.isometric());
}

/// Polynomial h(x) = sum_n c_n u^n in u = (x - center) / scale.
struct Polynomial {
    std::vector<double> coefficients;
    double center = 0.0;
    double scale = 1.0;

    double operator()(double x) const {
        const double u = (x - center) / scale;
        double v = 0.0;
        for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) v = v * u + *it;
        return v;
    }
    /// (h(t) - h(s)) / (t - s), equal to h'(s) at t = s (sum_n c_n sum_j u^j v^{n-1-j} / scale).
    double divided_difference(double t, double s) const {
        const double u = (t - center) / scale;
        const double w = (s - center) / scale;
        double total = 0.0;
        for (std::size_t n = 1; n < coefficients.size(); ++n) {
            double inner = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                inner += std::pow(u, static_cast<double>(j)) * std::pow(w, static_cast<double>(n - 1 - j));
            }
            total += coefficients[n] * inner;
        }
        return total / scale;
    }
};

/// Compares V (h e) with h(s) e - G int (h(t) - h(s)) / (t - s) dM(t) e at the
/// atoms s of M^G, relative to ||h e||_{L^2(M)}.
inline double divided_difference_residual(const WeightedOperator& v, const HermitianMatrix& g, const Polynomial& h,
                                          const CVector& e) {
    const MatrixMeasure& m = v.domain;
    const MatrixMeasure& mg = v.codomain;
    const Eigen::Index d = m.dim();
    CVector f(d * static_cast<Eigen::Index>(m.atoms().size()));
    for (std::size_t a = 0; a < m.atoms().size(); ++a) {
        f.segment(static_cast<Eigen::Index>(a) * d, d) = h(m.atoms()[a].location) * e;
    }
    CVector expected(d * static_cast<Eigen::Index>(mg.atoms().size()));
    for (std::size_t b = 0; b < mg.atoms().size(); ++b) {
        const double s = mg.atoms()[b].location;
        CMatrix integral = CMatrix::Zero(d, d);
        for (const Atom& a : m.atoms()) integral += h.divided_difference(a.location, s) * a.weight.matrix();
        expected.segment(static_cast<Eigen::Index>(b) * d, d) = h(s) * e - g.matrix() * (integral * e);
    }
    const CVector diff = isometric_coordinates(mg).to_iso * (v.matrix * f - expected);
    const double norm_in = (isometric_coordinates(m).to_iso * f).norm();
    return diff.norm() / std::max(norm_in, 1e-300);
}

/// T^M f(s) = int K(s, t) dM(t) f(t) from L^2(M) to L^2(N).
inline WeightedOperator integral_operator(const MatrixMeasure& m, const MatrixMeasure& n,
                                          const std::function<Complex(double, double)>& kernel) {
    detail::require_atomic(m, "integral_operator");
    detail::require_atomic(n, "integral_operator");
    const Eigen::Index d = m.dim();
    const auto kin = static_cast<Eigen::Index>(m.atoms().size());
    const auto kout = static_cast<Eigen::Index>(n.atoms().size());
    CMatrix t(d * kout, d * kin);
    for (Eigen::Index b = 0; b < kout; ++b) {
        for (Eigen::Index a = 0; a < kin; ++a) {
            const Atom& atom = m.atoms()[static_cast<std::size_t>(a)];
            t.block(b * d, a * d, d, d) =
                kernel(n.atoms()[static_cast<std::size_t>(b)].location, atom.location) * atom.weight.matrix();
        }
    }
    return WeightedOperator{m, n, t};
}

/// Kernel 1 / (s - t + i eps); the sign of eps selects T_{+eps} or T_{-eps}.
/// Maps L^2(M) -> L^2(G M^G G).
inline WeightedOperator t_epsilon_operator(const OperatorModel& model, const HermitianMatrix& g, double eps) {
    if (eps == 0.0 || !std::isfinite(eps)) throw ArgumentError("t_epsilon_operator: eps must be finite and nonzero");
    require_coupling_dim(model, g);
    const MatrixMeasure m = spectral_measure(model);
    const MatrixMeasure n = perturbed_measure_direct(model, g).congruence(g.matrix());
    return integral_operator(m, n, [eps](double s, double t) { return 1.0 / Complex(s - t, eps); });
}

/// Kernel 2 Im(alpha) / ((s - alpha)(t - conj alpha)), L^2(M) -> L^2(G M^G G).
inline WeightedOperator p_alpha_operator(const OperatorModel& model, const HermitianMatrix& g, Complex alpha) {
    if (alpha.imag() == 0.0) throw ArgumentError("p_alpha_operator: alpha must be off the real axis");
    require_coupling_dim(model, g);
    const MatrixMeasure m = spectral_measure(model);
    const MatrixMeasure n = perturbed_measure_direct(model, g).congruence(g.matrix());
    return integral_operator(m, n, [alpha](double s, double t) {
        return 2.0 * alpha.imag() / ((Complex(s) - alpha) * (Complex(t) - std::conj(alpha)));
    });
}

inline constexpr double kTEpsilonBound = 2.0;
inline constexpr double kPAlphaBound = 4.0;

struct KernelBound {
    bool holds = true;
    double lhs = 0.0;  // ||(int |k1|^2 dN)^{1/2} (int |k2|^2 dM)^{1/2}||
    double rhs = 0.0;  // operator norm of the kernel operator
};

/// Lower bound ||(int |k1|^2 dN)^{1/2} (int |k2|^2 dM)^{1/2}|| <= ||T|| for an
/// operator whose kernel dominates k1(s) k2(t), via low-rank mass factors.
inline KernelBound kernel_a2_lower_bound(const std::function<Complex(double)>& k1,
                                         const std::function<Complex(double)>& k2, const MatrixMeasure& m,
                                         const MatrixMeasure& n, double t_norm) {
    detail::require_atomic(m, "kernel_a2_lower_bound");
    detail::require_atomic(n, "kernel_a2_lower_bound");
    KernelBound out;
    const CMatrix ln = detail::mass_factor(n, k1);
    const CMatrix lm = detail::mass_factor(m, k2);
    out.lhs = operator_norm(ln.adjoint() * lm);
    out.rhs = t_norm;
    out.holds = out.lhs <= t_norm * (1.0 + 1e-10) + 1e-12;
    return out;
}

}  // namespace finrank
