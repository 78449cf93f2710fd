#pragma once

#include <sstream>
#include <utility>
#include <vector>

#include "finrank/linalg.hpp"

namespace finrank {

/// Eigenvalues closer than this are one atom (numerically coincident spectrum).
inline constexpr double kAtomMergeThreshold = 1e-12;

/// A group of (numerically) equal eigenvalues and an orthonormal basis of the
/// joint eigenspace.
struct EigenCluster {
    double value = 0.0;
    CMatrix basis;  // N x multiplicity
};

inline std::vector<EigenCluster> eigen_clusters(const EigenSystem& es,
                                                double threshold = kAtomMergeThreshold) {
    std::vector<EigenCluster> clusters;
    const auto n = static_cast<Eigen::Index>(es.values.size());
    Eigen::Index start = 0;
    while (start < n) {
        Eigen::Index end = start + 1;
        while (end < n && es.values[static_cast<std::size_t>(end)] -
                                  es.values[static_cast<std::size_t>(end - 1)] <=
                              threshold) {
            ++end;
        }
        double mean = 0.0;
        for (Eigen::Index k = start; k < end; ++k) mean += es.values[static_cast<std::size_t>(k)];
        mean /= static_cast<double>(end - start);
        clusters.push_back({mean, es.vectors.middleCols(start, end - start)});
        start = end;
    }
    return clusters;
}

struct CyclicityDeficiency {
    double eigenvalue = 0.0;
    Eigen::Index eigenspace_dim = 0;
    Eigen::Index range_rank = 0;
};

struct CyclicityReport {
    bool cyclic = true;
    std::vector<CyclicityDeficiency> deficiencies;
};

/// Ran B is cyclic for A iff rank(P_lambda B) = rank(P_lambda) for every
/// eigenprojection P_lambda.
inline CyclicityReport cyclicity_report(const EigenSystem& es, const CMatrix& b) {
    CyclicityReport report;
    const double bnorm = operator_norm(b);
    for (const EigenCluster& c : eigen_clusters(es)) {
        const CMatrix coupling = c.basis.adjoint() * b;  // multiplicity x d
        const Eigen::Index rank = numerical_rank(coupling, 1e-10, 1e-10 * bnorm);
        if (rank < c.basis.cols()) {
            report.cyclic = false;
            report.deficiencies.push_back({c.value, c.basis.cols(), rank});
        }
    }
    return report;
}

/// The pair (A, B): A an N x N Hermitian operator, B : C^d -> C^N of full
/// column rank. The eigendecomposition of A and the cyclicity certificate are
/// computed once at construction; the object is immutable afterwards.
class OperatorModel {
public:
    OperatorModel(HermitianMatrix a, CMatrix b) : a_(std::move(a)), b_(std::move(b)) {
        if (b_.rows() != a_.dim()) {
            std::ostringstream os;
            os << "B has " << b_.rows() << " rows but A is " << a_.dim() << "x" << a_.dim();
            throw ArgumentError(os.str());
        }
        if (b_.cols() < 1 || b_.cols() > b_.rows()) {
            std::ostringstream os;
            os << "perturbation rank d=" << b_.cols() << " must satisfy 1 <= d <= N=" << b_.rows();
            throw ArgumentError(os.str());
        }
        const Eigen::VectorXd s = singular_values(b_);
        if (!(s(s.size() - 1) > 1e-10 * s(0))) {
            std::ostringstream os;
            os << "B is not of full column rank: sigma_min=" << s(s.size() - 1)
               << " sigma_max=" << s(0);
            throw ValidationError(os.str());
        }
        eig_ = hermitian_eig(a_);
        cyclicity_ = cyclicity_report(eig_, b_);
    }

    Eigen::Index ambient_dim() const noexcept { return a_.dim(); }
    Eigen::Index rank() const noexcept { return b_.cols(); }
    const HermitianMatrix& a() const noexcept { return a_; }
    const CMatrix& b() const noexcept { return b_; }
    const EigenSystem& eig() const noexcept { return eig_; }
    const CyclicityReport& cyclicity() const noexcept { return cyclicity_; }

    /// B^* (A - z)^{-1} B through the eigendecomposition.
    CMatrix resolvent_compression(Complex z) const {
        const CMatrix vb = eig_.vectors.adjoint() * b_;
        CMatrix scaled = vb;
        for (Eigen::Index k = 0; k < vb.rows(); ++k) {
            scaled.row(k) /= (eig_.values[static_cast<std::size_t>(k)] - z);
        }
        return vb.adjoint() * scaled;
    }

private:
    HermitianMatrix a_;
    CMatrix b_;
    EigenSystem eig_;
    CyclicityReport cyclicity_;
};

}  // namespace finrank
