#pragma once

// Dense complex linear algebra for the small matrices (dimension <= ~64) that
// appear in finite-rank perturbation problems. Eigen supplies storage and
// products; the Hermitian eigensolver is a cyclic Jacobi iteration.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numeric>
#include <sstream>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "finrank/errors.hpp"

namespace finrank {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr Complex kI{0.0, 1.0};

/// Largest |H(i,j) - conj(H(j,i))| together with its position.
struct Asymmetry {
    double value = 0.0;
    Eigen::Index row = 0;
    Eigen::Index col = 0;
};

inline Asymmetry max_asymmetry(const CMatrix& h) {
    Asymmetry worst;
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
        for (Eigen::Index j = i; j < h.cols(); ++j) {
            const double dev = std::abs(h(i, j) - std::conj(h(j, i)));
            if (dev > worst.value) worst = {dev, i, j};
        }
    }
    return worst;
}

/// (H + H^*) / 2 -- the exact Hermitian part.
inline CMatrix hermitian_part(const CMatrix& h) { return (h + h.adjoint()) * 0.5; }

/// Im T := (T - T^*) / 2i, Hermitian for every square T.
inline CMatrix imag_part(const CMatrix& t) { return (t - t.adjoint()) / (2.0 * kI); }

/// Square complex matrix equal to its conjugate transpose.
///
/// Construction validates the invariant (absolute asymmetry <= 1e-12) and then
/// stores the exact Hermitian part, so downstream code can rely on H == H^*.
class HermitianMatrix {
public:
    static constexpr double kTolerance = 1e-12;

    HermitianMatrix() = default;

    explicit HermitianMatrix(const CMatrix& m, double tolerance = kTolerance) {
        if (m.rows() != m.cols()) {
            std::ostringstream os;
            os << "Hermitian matrix must be square, got " << m.rows() << "x" << m.cols();
            throw ValidationError(os.str());
        }
        const Asymmetry a = max_asymmetry(m);
        if (a.value > tolerance) {
            std::ostringstream os;
            os << "matrix is not Hermitian: max asymmetry " << a.value << " at (" << a.row
               << "," << a.col << ")";
            throw ValidationError(os.str());
        }
        m_ = hermitian_part(m);
    }

    /// Projects onto the Hermitian part without validation; for matrices that
    /// are Hermitian in exact arithmetic but carry rounding asymmetry.
    static HermitianMatrix symmetrized(const CMatrix& m) {
        HermitianMatrix h;
        h.m_ = hermitian_part(m);
        return h;
    }

    static HermitianMatrix identity(Eigen::Index n) {
        return symmetrized(CMatrix::Identity(n, n));
    }
    static HermitianMatrix zero(Eigen::Index n) { return symmetrized(CMatrix::Zero(n, n)); }
    static HermitianMatrix diagonal(const std::vector<double>& values) {
        CMatrix m = CMatrix::Zero(static_cast<Eigen::Index>(values.size()),
                                  static_cast<Eigen::Index>(values.size()));
        for (std::size_t i = 0; i < values.size(); ++i) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = values[i];
        }
        return symmetrized(m);
    }

    Eigen::Index dim() const noexcept { return m_.rows(); }
    const CMatrix& matrix() const noexcept { return m_; }
    operator const CMatrix&() const noexcept { return m_; }
    Complex operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

private:
    CMatrix m_;
};

/// Eigenvalues ascending with the matching orthonormal eigenvectors as columns.
struct EigenSystem {
    std::vector<double> values;
    CMatrix vectors;
};

namespace detail {

inline double off_diagonal_norm2(const CMatrix& a) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            if (i != j) s += std::norm(a(i, j));
        }
    }
    return s;
}

// One complex Jacobi rotation annihilating a(p,q). The 2x2 unitary is
// J = diag(1, e^{-i phi}) * [[c, s], [-s, c]] where a(p,q) = r e^{i phi}.
inline void jacobi_rotate(CMatrix& a, CMatrix& v, Eigen::Index p, Eigen::Index q) {
    const Complex apq = a(p, q);
    const double r = std::abs(apq);
    if (r == 0.0) return;
    const Complex phase = apq / r;  // e^{i phi}
    const double app = a(p, p).real();
    const double aqq = a(q, q).real();
    const double tau = (aqq - app) / (2.0 * r);
    const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
    const double c = 1.0 / std::sqrt(1.0 + t * t);
    const double s = t * c;

    const Complex j_pp = c;
    const Complex j_pq = s;
    const Complex j_qp = -s * std::conj(phase);
    const Complex j_qq = c * std::conj(phase);

    const Eigen::Index n = a.rows();
    // a <- a * J
    for (Eigen::Index k = 0; k < n; ++k) {
        const Complex akp = a(k, p);
        const Complex akq = a(k, q);
        a(k, p) = akp * j_pp + akq * j_qp;
        a(k, q) = akp * j_pq + akq * j_qq;
    }
    // a <- J^* * a
    for (Eigen::Index k = 0; k < n; ++k) {
        const Complex apk = a(p, k);
        const Complex aqk = a(q, k);
        a(p, k) = std::conj(j_pp) * apk + std::conj(j_qp) * aqk;
        a(q, k) = std::conj(j_pq) * apk + std::conj(j_qq) * aqk;
    }
    a(p, q) = 0.0;
    a(q, p) = 0.0;
    a(p, p) = a(p, p).real();
    a(q, q) = a(q, q).real();
    for (Eigen::Index k = 0; k < n; ++k) {
        const Complex vkp = v(k, p);
        const Complex vkq = v(k, q);
        v(k, p) = vkp * j_pp + vkq * j_qp;
        v(k, q) = vkp * j_pq + vkq * j_qq;
    }
}

}  // namespace detail

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix.
inline EigenSystem hermitian_eig(const HermitianMatrix& h) {
    const Eigen::Index n = h.dim();
    CMatrix a = h.matrix();
    CMatrix v = CMatrix::Identity(n, n);

    const double scale2 = a.squaredNorm();
    constexpr int kMaxSweeps = 60;
    double previous = std::numeric_limits<double>::infinity();
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        const double off = detail::off_diagonal_norm2(a);
        if (off <= 1e-34 * scale2) break;
        // Rounding floor reached: further sweeps no longer reduce the residue.
        if (off <= 1e-28 * scale2 && off > 0.25 * previous) break;
        previous = off;
        for (Eigen::Index p = 0; p < n - 1; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) detail::jacobi_rotate(a, v, p, q);
        }
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
        return a(x, x).real() < a(y, y).real();
    });

    EigenSystem out;
    out.values.reserve(static_cast<std::size_t>(n));
    out.vectors.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index src = order[static_cast<std::size_t>(k)];
        out.values.push_back(a(src, src).real());
        out.vectors.col(k) = v.col(src);
    }
    return out;
}

/// Validating overload for raw matrices.
inline EigenSystem hermitian_eig(const CMatrix& h) { return hermitian_eig(HermitianMatrix(h)); }

/// V diag(f(lambda)) V^* for a scalar function f of the eigenvalues.
template <class F>
CMatrix spectral_function(const EigenSystem& es, F&& f) {
    const Eigen::Index n = es.vectors.rows();
    CMatrix scaled = es.vectors;
    for (Eigen::Index k = 0; k < n; ++k) {
        scaled.col(k) *= f(es.values[static_cast<std::size_t>(k)]);
    }
    return scaled * es.vectors.adjoint();
}

inline double spectral_radius(const EigenSystem& es) {
    if (es.values.empty()) return 0.0;
    return std::max(std::abs(es.values.front()), std::abs(es.values.back()));
}

inline constexpr double kPsdTolerance = 1e-10;

/// Principal square root of a numerically PSD matrix. Eigenvalues in
/// [-1e-10 ||P||, 0) are treated as zero.
inline HermitianMatrix psd_sqrt(const HermitianMatrix& p) {
    if (p.dim() == 0) return p;
    const EigenSystem es = hermitian_eig(p);
    const double norm = spectral_radius(es);
    if (es.values.front() < -kPsdTolerance * norm) {
        std::ostringstream os;
        os << "matrix is not positive semidefinite: eigenvalue " << es.values.front();
        throw NotPsdError(os.str(), es.values.front());
    }
    return HermitianMatrix::symmetrized(
        spectral_function(es, [](double l) { return std::sqrt(std::max(l, 0.0)); }));
}

/// Moore-Penrose inverse of the PSD square root, restricted to eigenvalues
/// above rank_tol * lambda_max.
inline HermitianMatrix psd_pinv_sqrt(const HermitianMatrix& p, double rank_tol = 1e-10) {
    if (p.dim() == 0) return p;
    const EigenSystem es = hermitian_eig(p);
    const double cutoff = rank_tol * std::max(es.values.back(), 0.0);
    return HermitianMatrix::symmetrized(spectral_function(es, [&](double l) {
        return (l > cutoff && l > 0.0) ? 1.0 / std::sqrt(l) : 0.0;
    }));
}

/// Largest singular value.
inline double operator_norm(const CMatrix& t) {
    if (t.size() == 0) return 0.0;
    // The smaller Gram matrix has the same nonzero spectrum.
    const CMatrix gram = t.rows() < t.cols() ? CMatrix(t * t.adjoint()) : CMatrix(t.adjoint() * t);
    const EigenSystem es = hermitian_eig(HermitianMatrix::symmetrized(gram));
    return std::sqrt(std::max(es.values.back(), 0.0));
}

/// Singular values descending (Eigen SVD; used where small singular values
/// must be resolved to relative accuracy).
inline Eigen::VectorXd singular_values(const CMatrix& t) {
    if (t.size() == 0) return Eigen::VectorXd();
    Eigen::JacobiSVD<CMatrix> svd(t);
    return svd.singularValues();
}

/// sigma_max / sigma_min; +inf for singular input.
inline double condition_number(const CMatrix& t) {
    const Eigen::VectorXd s = singular_values(t);
    if (s.size() == 0) return 1.0;
    const double smin = s(s.size() - 1);
    return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

/// Numerical rank: singular values above rel_tol * sigma_max (and above abs_floor).
inline Eigen::Index numerical_rank(const CMatrix& t, double rel_tol = 1e-10, double abs_floor = 0.0) {
    const Eigen::VectorXd s = singular_values(t);
    if (s.size() == 0 || s(0) <= abs_floor) return 0;
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > rel_tol * s(0) && s(i) > abs_floor) ++r;
    }
    return r;
}

inline constexpr double kRankTolerance = 1e-10;

/// Orthogonal projection onto the span of eigenvectors whose eigenvalue
/// exceeds rank_tol * lambda_max.
inline HermitianMatrix range_projection(const HermitianMatrix& p, double rank_tol = kRankTolerance) {
    const Eigen::Index n = p.dim();
    if (n == 0) return p;
    const EigenSystem es = hermitian_eig(p);
    const double lmax = es.values.back();
    if (!(lmax > 0.0)) return HermitianMatrix::zero(n);
    CMatrix proj = CMatrix::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        if (es.values[static_cast<std::size_t>(k)] > rank_tol * lmax) {
            proj += es.vectors.col(k) * es.vectors.col(k).adjoint();
        }
    }
    return HermitianMatrix::symmetrized(proj);
}

/// F with F F^* = P, keeping eigenpairs above rel_tol * lambda_max; columns
/// are sqrt(lambda) times the eigenvectors, so F has full column rank.
inline CMatrix psd_factor(const HermitianMatrix& p, double rel_tol = 1e-13) {
    const EigenSystem es = hermitian_eig(p);
    const double lmax = es.values.empty() ? 0.0 : es.values.back();
    std::vector<Eigen::Index> keep;
    for (std::size_t k = 0; k < es.values.size(); ++k) {
        if (lmax > 0.0 && es.values[k] > rel_tol * lmax) keep.push_back(static_cast<Eigen::Index>(k));
    }
    CMatrix f(p.dim(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) {
        f.col(static_cast<Eigen::Index>(j)) =
            std::sqrt(es.values[static_cast<std::size_t>(keep[j])]) * es.vectors.col(keep[j]);
    }
    return f;
}

inline Eigen::Index psd_rank(const HermitianMatrix& p, double rank_tol = kRankTolerance) {
    if (p.dim() == 0) return 0;
    const EigenSystem es = hermitian_eig(p);
    const double lmax = es.values.back();
    if (!(lmax > 0.0)) return 0;
    return static_cast<Eigen::Index>(std::count_if(es.values.begin(), es.values.end(),
                                                   [&](double l) { return l > rank_tol * lmax; }));
}

inline bool is_orthogonal_projection(const CMatrix& p, double tol = 1e-8) {
    if (p.rows() != p.cols()) return false;
    if (max_asymmetry(p).value > tol) return false;
    return (p * p - p).cwiseAbs().maxCoeff() <= tol;
}

/// ||P1 P2||: cosine of the smallest principal angle between the ranges.
inline double subspace_overlap(const CMatrix& p1, const CMatrix& p2) {
    if (p1.rows() != p2.rows() || p1.cols() != p2.cols()) {
        throw ValidationError("subspace_overlap: projections of different dimensions");
    }
    if (p1.size() == 0) return 0.0;
    if (!is_orthogonal_projection(p1) || !is_orthogonal_projection(p2)) {
        throw ValidationError("subspace_overlap: input is not an orthogonal projection");
    }
    return std::clamp(operator_norm(p1 * p2), 0.0, 1.0);
}

inline double lambda_min(const HermitianMatrix& h) {
    if (h.dim() == 0) return 0.0;
    return hermitian_eig(h).values.front();
}

/// Solves X * M = R for X (right division) via LU, guarding conditioning.
inline CMatrix solve_checked(const CMatrix& m, const CMatrix& rhs, double max_condition,
                             const char* what) {
    const double cond = condition_number(m);
    if (!(cond <= max_condition)) {
        std::ostringstream os;
        os << what << ": condition number " << cond << " exceeds " << max_condition;
        throw IllConditionedError(os.str(), cond);
    }
    return m.fullPivLu().solve(rhs);
}

inline CMatrix inverse_checked(const CMatrix& m, double max_condition, const char* what) {
    return solve_checked(m, CMatrix::Identity(m.rows(), m.cols()), max_condition, what);
}

}  // namespace finrank
