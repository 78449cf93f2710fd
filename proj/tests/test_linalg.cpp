#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "finrank/linalg.hpp"
#include "finrank/random.hpp"

using namespace finrank;

namespace {

double reconstruction_residual(const CMatrix& h, const EigenSystem& es) {
    Eigen::VectorXd lam(static_cast<Eigen::Index>(es.values.size()));
    for (std::size_t k = 0; k < es.values.size(); ++k) lam(static_cast<Eigen::Index>(k)) = es.values[k];
    const CMatrix rec = es.vectors * lam.cast<Complex>().asDiagonal() * es.vectors.adjoint();
    return (h - rec).norm();
}

CMatrix real_matrix(std::initializer_list<std::initializer_list<double>> rows) {
    CMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index i = 0;
    for (auto r : rows) {
        Eigen::Index j = 0;
        for (double v : r) m(i, j++) = v;
        ++i;
    }
    return m;
}

}  // namespace

TEST(HermitianEig, IdentityHasUnitEigenvalues) {
    const EigenSystem es = hermitian_eig(HermitianMatrix::identity(2));
    ASSERT_EQ(es.values.size(), 2u);
    EXPECT_NEAR(es.values[0], 1.0, 1e-14);
    EXPECT_NEAR(es.values[1], 1.0, 1e-14);
    EXPECT_LE((es.vectors.adjoint() * es.vectors - CMatrix::Identity(2, 2)).norm(), 1e-12);
}

TEST(HermitianEig, DiagonalKeepsAxes) {
    const EigenSystem es = hermitian_eig(HermitianMatrix::diagonal({0.0, 1.0}));
    EXPECT_NEAR(es.values[0], 0.0, 1e-15);
    EXPECT_NEAR(es.values[1], 1.0, 1e-15);
    EXPECT_NEAR(std::abs(es.vectors(0, 0)), 1.0, 1e-14);
    EXPECT_NEAR(std::abs(es.vectors(1, 1)), 1.0, 1e-14);
}

TEST(HermitianEig, SwapMatrixRootsOfCharacteristicPolynomial) {
    // lambda^2 - 1 = 0
    const EigenSystem es = hermitian_eig(real_matrix({{0, 1}, {1, 0}}));
    EXPECT_NEAR(es.values[0], -1.0, 1e-14);
    EXPECT_NEAR(es.values[1], 1.0, 1e-14);
}

TEST(HermitianEig, RejectsNonHermitianNamingPosition) {
    CMatrix m = CMatrix::Zero(3, 3);
    m(1, 2) = 0.5;
    try {
        (void)hermitian_eig(m);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("(1,2)"), std::string::npos) << e.what();
    }
}

TEST(HermitianEig, RandomMatricesAgainstEigenOracle) {
    RandomStream rs(7, 1);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Index n = 1 + trial % 8;
        const HermitianMatrix h = rs.gue(n);
        const EigenSystem es = hermitian_eig(h);
        const double hnorm = operator_norm(h);
        EXPECT_LE(reconstruction_residual(h, es), 1e-10 * (1 + hnorm));
        EXPECT_LE((es.vectors.adjoint() * es.vectors - CMatrix::Identity(n, n)).norm(), 1e-10);
        EXPECT_TRUE(std::is_sorted(es.values.begin(), es.values.end()));
        Eigen::SelfAdjointEigenSolver<CMatrix> oracle(h.matrix());
        for (Eigen::Index k = 0; k < n; ++k) {
            EXPECT_NEAR(es.values[static_cast<std::size_t>(k)], oracle.eigenvalues()(k), 1e-11 * (1 + hnorm));
        }
    }
}

TEST(HermitianEig, DegenerateSpectrum) {
    RandomStream rs(11, 2);
    const CMatrix u = rs.unitary(6);
    Eigen::VectorXd lam(6);
    lam << -1, -1, 0, 2, 2, 2;
    const CMatrix h = u * lam.cast<Complex>().asDiagonal() * u.adjoint();
    const EigenSystem es = hermitian_eig(HermitianMatrix::symmetrized(h));
    for (int k = 0; k < 6; ++k) EXPECT_NEAR(es.values[static_cast<std::size_t>(k)], lam(k), 1e-12);
    EXPECT_LE(reconstruction_residual(h, es), 1e-11);
}

TEST(PsdSqrt, IdentityAndDiagonal) {
    EXPECT_LE((psd_sqrt(HermitianMatrix::identity(3)).matrix() - CMatrix::Identity(3, 3)).norm(), 1e-14);
    const HermitianMatrix r = psd_sqrt(HermitianMatrix::diagonal({4.0, 9.0}));
    EXPECT_NEAR(r(0, 0).real(), 2.0, 1e-14);
    EXPECT_NEAR(r(1, 1).real(), 3.0, 1e-14);
    EXPECT_NEAR(std::abs(r(0, 1)), 0.0, 1e-14);
}

TEST(PsdSqrt, TwoByTwoMatchesEigenReconstruction) {
    // eigenvalues 1 (v=(1,-1)/sqrt2) and 3 (v=(1,1)/sqrt2)
    const HermitianMatrix p(real_matrix({{2, 1}, {1, 2}}));
    const HermitianMatrix r = psd_sqrt(p);
    const double a = (std::sqrt(3.0) + 1.0) / 2.0;
    const double b = (std::sqrt(3.0) - 1.0) / 2.0;
    EXPECT_LE((r.matrix() - real_matrix({{a, b}, {b, a}})).norm(), 1e-14);
}

TEST(PsdSqrt, RejectsNegativeEigenvalueAndReportsIt) {
    try {
        (void)psd_sqrt(HermitianMatrix::diagonal({1.0, -0.5}));
        FAIL() << "expected NotPsdError";
    } catch (const NotPsdError& e) {
        EXPECT_NEAR(e.eigenvalue(), -0.5, 1e-14);
    }
}

TEST(PsdSqrt, ClampsRoundingNegatives) {
    const HermitianMatrix r = psd_sqrt(HermitianMatrix::diagonal({1.0, -1e-12}));
    EXPECT_NEAR(r(1, 1).real(), 0.0, 1e-15);
}

TEST(PsdSqrt, RandomPsdSquaresBack) {
    RandomStream rs(3, 4);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Index n = 1 + trial % 6;
        const Eigen::Index rank = 1 + trial % static_cast<int>(n);
        const CMatrix x = rs.gaussian(n, rank);
        const HermitianMatrix p = HermitianMatrix::symmetrized(x * x.adjoint());
        const HermitianMatrix r = psd_sqrt(p);
        EXPECT_LE((r.matrix() * r.matrix() - p.matrix()).norm(), 1e-9 * (1 + operator_norm(p)));
        EXPECT_GE(lambda_min(r), -1e-12);
        // chain: sqrt(sqrt(P))^4 = P
        const HermitianMatrix rr = psd_sqrt(r);
        const CMatrix r4 = rr.matrix() * rr.matrix() * rr.matrix() * rr.matrix();
        EXPECT_LE((r4 - p.matrix()).norm(), 1e-9 * (1 + operator_norm(p)));
    }
}

TEST(OperatorNorm, Examples) {
    EXPECT_EQ(operator_norm(CMatrix::Zero(3, 2)), 0.0);
    EXPECT_NEAR(operator_norm(real_matrix({{1, 0}, {0, -3}})), 3.0, 1e-14);
    EXPECT_NEAR(operator_norm(real_matrix({{0, 2}, {0, 0}})), 2.0, 1e-14);
}

TEST(OperatorNorm, UnitaryInvariance) {
    RandomStream rs(5, 5);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index m = 1 + trial % 5;
        const Eigen::Index n = 1 + (trial / 5) % 5;
        const CMatrix t = rs.gaussian(m, n);
        const CMatrix u = rs.unitary(m);
        const CMatrix v = rs.unitary(n);
        const double base = operator_norm(t);
        EXPECT_NEAR(operator_norm(u * t * v), base, 1e-10 * base);
        Eigen::JacobiSVD<CMatrix> svd(t);
        EXPECT_NEAR(base, svd.singularValues()(0), 1e-10 * base);
    }
}

TEST(RangeProjection, Examples) {
    const HermitianMatrix p = range_projection(HermitianMatrix::diagonal({1.0, 0.0}));
    EXPECT_LE((p.matrix() - real_matrix({{1, 0}, {0, 0}})).norm(), 1e-14);
    EXPECT_EQ(range_projection(HermitianMatrix::zero(2)).matrix().norm(), 0.0);

    CVector v(2);
    v << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    const CMatrix vv = v * v.adjoint();
    EXPECT_LE((range_projection(HermitianMatrix::symmetrized(vv)).matrix() - vv).norm(), 1e-14);
}

TEST(RangeProjection, IdempotentOnRandomLowRank) {
    RandomStream rs(9, 9);
    for (int trial = 0; trial < 50; ++trial) {
        const CMatrix x = rs.gaussian(5, 1 + trial % 4);
        const HermitianMatrix p = range_projection(HermitianMatrix::symmetrized(x * x.adjoint()));
        EXPECT_LE((p.matrix() * p.matrix() - p.matrix()).norm(), 1e-10);
        EXPECT_EQ(psd_rank(p), x.cols());
    }
}

TEST(SubspaceOverlap, Examples) {
    const CMatrix e1 = real_matrix({{1, 0}, {0, 0}});
    const CMatrix e2 = real_matrix({{0, 0}, {0, 1}});
    EXPECT_EQ(subspace_overlap(e1, e2), 0.0);
    EXPECT_NEAR(subspace_overlap(e1, e1), 1.0, 1e-14);
    const CMatrix vv = real_matrix({{0.5, 0.5}, {0.5, 0.5}});
    EXPECT_NEAR(subspace_overlap(e1, vv), 1.0 / std::sqrt(2.0), 1e-14);
}

TEST(SubspaceOverlap, RejectsNonProjection) {
    EXPECT_THROW((void)subspace_overlap(real_matrix({{2, 0}, {0, 0}}), real_matrix({{1, 0}, {0, 0}})),
                 ValidationError);
}

TEST(SubspaceOverlap, SymmetricAndBounded) {
    RandomStream rs(13, 1);
    for (int trial = 0; trial < 100; ++trial) {
        const CMatrix x = rs.gaussian(4, 1 + trial % 3);
        const CMatrix y = rs.gaussian(4, 1 + (trial / 3) % 3);
        const CMatrix p = range_projection(HermitianMatrix::symmetrized(x * x.adjoint()));
        const CMatrix q = range_projection(HermitianMatrix::symmetrized(y * y.adjoint()));
        const double a = subspace_overlap(p, q);
        EXPECT_NEAR(a, subspace_overlap(q, p), 1e-12);
        EXPECT_GE(a, 0.0);
        EXPECT_LE(a, 1.0);
    }
}
