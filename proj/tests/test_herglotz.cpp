#include <gtest/gtest.h>

#include "finrank/herglotz.hpp"
#include "finrank/quadrature.hpp"
#include "finrank/random.hpp"

using namespace finrank;

namespace {

HermitianMatrix scalar(double v) { return HermitianMatrix::diagonal({v}); }

MatrixMeasure random_atomic(RandomStream& rs, Eigen::Index d, int atoms) {
    std::vector<Atom> list;
    for (int k = 0; k < atoms; ++k) {
        const CMatrix g = rs.gaussian(d, 1 + static_cast<Eigen::Index>(rs.uniform() * static_cast<double>(d)));
        list.push_back({rs.uniform(-3.0, 3.0), HermitianMatrix::symmetrized(g * g.adjoint())});
    }
    return MatrixMeasure(d, list);
}

// Smooth PSD density sampled on a grid: X(t) X(t)^* with X affine in cos/sin.
MatrixMeasure smooth_ac(RandomStream& rs, Eigen::Index d, double a, double b, std::size_t nodes) {
    const CMatrix x0 = rs.gaussian(d, d);
    const CMatrix x1 = rs.gaussian(d, d);
    AcDensity ac{a, b, {}};
    for (std::size_t k = 0; k < nodes; ++k) {
        const double t = a + (b - a) * static_cast<double>(k) / static_cast<double>(nodes - 1);
        const CMatrix x = std::cos(t) * x0 + std::sin(2.0 * t) * x1;
        ac.densities.push_back(HermitianMatrix::symmetrized(x * x.adjoint()));
    }
    return MatrixMeasure(d, {}, ac);
}

}  // namespace

TEST(CauchyTransform, Examples) {
    EXPECT_LE(std::abs(cauchy_transform(MatrixMeasure(1, {{0.0, scalar(1.0)}}), kI).value(0, 0) - kI), 1e-15);
    const CMatrix f = cauchy_transform(MatrixMeasure(2, {{0.0, HermitianMatrix::identity(2)}}), 2.0 * kI).value;
    EXPECT_LE((f - (kI / 2.0) * CMatrix::Identity(2, 2)).norm(), 1e-15);
}

TEST(CauchyTransform, ConjugateSymmetryAndHerglotz) {
    RandomStream rs(1, 1);
    int checked = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const Eigen::Index d = 1 + trial % 4;
        MatrixMeasure m = trial % 3 == 0 ? smooth_ac(rs, d, -1.0, 1.5, 17) : random_atomic(rs, d, 1 + trial % 6);
        const Complex z(rs.uniform(-4.0, 4.0), std::pow(10.0, rs.uniform(-6.0, 1.0)));
        const HerglotzEval up = cauchy_transform(m, z);
        const HerglotzEval down = cauchy_transform(m, std::conj(z));
        EXPECT_LE((down.value - up.value.adjoint()).cwiseAbs().maxCoeff(),
                  1e-13 * (1.0 + up.value.cwiseAbs().maxCoeff()));
        EXPECT_GE(herglotz_margin(up), -1e-12);
        ++checked;
    }
    EXPECT_EQ(checked, 500);
}

TEST(CauchyTransform, RejectsPointsOnTheAxis) {
    EXPECT_THROW((void)cauchy_transform(MatrixMeasure(1, {{0.0, scalar(1.0)}}), Complex(0.3, 1e-9)), PrecisionError);
}

TEST(CauchyTransform, PiecewiseLinearPartMatchesAdaptiveQuadrature) {
    RandomStream rs(2, 2);
    for (int trial = 0; trial < 20; ++trial) {
        const MatrixMeasure m = smooth_ac(rs, 2, -1.0, 2.0, 9);
        const Complex z(rs.uniform(-1.5, 2.5), rs.uniform(0.05, 1.0));
        const AcDensity& ac = *m.ac();
        std::vector<double> cuts;
        for (std::size_t k = 0; k < ac.nodes(); ++k) cuts.push_back(ac.node(k));
        const QuadratureResult q = integrate_adaptive(
            [&](double t) { return CMatrix(m.density_at(t) / (t - z)); }, ac.start, ac.end, 1e-12, cuts);
        EXPECT_LE((cauchy_transform(m, z).value - q.value).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(PoissonExtension, Examples) {
    const MatrixMeasure delta(1, {{0.0, scalar(1.0)}});
    EXPECT_NEAR(poisson_extension(delta, kI)(0, 0).real(), 1.0 / kPi, 1e-15);
    EXPECT_NEAR(poisson_extension(delta, Complex(1.0, 1.0))(0, 0).real(), 1.0 / (2.0 * kPi), 1e-15);
    EXPECT_NEAR(poisson_extension(delta.scaled(3.5), Complex(1.0, 1.0))(0, 0).real(), 3.5 / (2.0 * kPi), 1e-14);
    EXPECT_THROW((void)poisson_extension(delta, Complex(0.0, -1.0)), DomainError);
}

TEST(PoissonExtension, AgreesWithImaginaryPartOfCauchy) {
    RandomStream rs(3, 3);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Index d = 1 + trial % 3;
        const MatrixMeasure m = trial % 2 ? smooth_ac(rs, d, -2.0, 2.0, 33) : random_atomic(rs, d, 4);
        const Complex z(rs.uniform(-3.0, 3.0), std::pow(10.0, rs.uniform(-4.0, 1.0)));
        const CMatrix p = poisson_extension(m, z).matrix();
        const CMatrix via = imag_part(cauchy_transform(m, z).value) / kPi;
        EXPECT_LE((p - via).norm(), 1e-10 * (1.0 + p.norm()));
    }
}

TEST(BoundaryDensity, UniformHalfDensity) {
    const MatrixMeasure m(1, {}, AcDensity{-1.0, 1.0, {scalar(0.5), scalar(0.5), scalar(0.5)}});
    // closed form: (0.5/pi)(2 arctan(1/eps)) -> 0.5
    const double eps = 1e-2;
    EXPECT_NEAR(poisson_extension(m, Complex(0.0, eps))(0, 0).real(), (0.5 / kPi) * 2.0 * std::atan(1.0 / eps), 1e-14);
    const BoundaryValue bv = boundary_density(m, 0.0);
    ASSERT_TRUE(bv.converged);
    EXPECT_NEAR(bv.value(0, 0).real(), 0.5, 1e-6);
}

TEST(BoundaryDensity, PureAtomicBetweenAtomsIsZero) {
    const MatrixMeasure m(1, {{0.0, scalar(1.0)}, {1.0, scalar(2.0)}});
    const BoundaryValue bv = boundary_density(m, 0.5);
    ASSERT_TRUE(bv.converged);
    // quadratic extrapolation leaves the eps^3 / (pi delta^4) term of the atoms
    EXPECT_NEAR(bv.value(0, 0).real(), 0.0, 1e-5);
}

TEST(BoundaryDensity, RankDeficientDensity) {
    const HermitianMatrix w = HermitianMatrix::diagonal({1.0, 0.0});
    const MatrixMeasure m(2, {}, AcDensity{-1.0, 1.0, {w, w}});
    const BoundaryValue bv = boundary_density(m, 0.0);
    ASSERT_TRUE(bv.converged);
    EXPECT_LE((bv.value.matrix() - w.matrix()).norm(), 1e-6);
}

TEST(BoundaryDensity, AtomAtThePointDiverges) {
    const MatrixMeasure m(1, {{0.0, scalar(1.0)}});
    EXPECT_THROW((void)boundary_density(m, 0.0), ArgumentError);
    const BoundaryValue bv = extrapolate_ladder(
        default_eps_ladder(), [&](double e) { return poisson_extension(m, Complex(0.0, e)).matrix(); });
    EXPECT_FALSE(bv.converged);
}

TEST(BoundaryDensity, RecoversSmoothGridDensities) {
    RandomStream rs(4, 4);
    double worst = 0.0;
    for (int trial = 0; trial < 30; ++trial) {
        const MatrixMeasure m = smooth_ac(rs, 1 + trial % 3, -1.0, 1.0, 41);
        const AcDensity& ac = *m.ac();
        double sup = 0.0;
        for (const auto& w : ac.densities) sup = std::max(sup, operator_norm(w));
        for (std::size_t k = 1; k + 1 < ac.nodes(); ++k) {
            const BoundaryValue bv = boundary_density(m, ac.node(k));
            ASSERT_TRUE(bv.converged);
            worst = std::max(worst, operator_norm(bv.value.matrix() - ac.densities[k].matrix()) / sup);
        }
    }
    EXPECT_LE(worst, 0.01);
}

TEST(SingularBlowup, Examples) {
    const std::vector<double> ladder{0.1, 1e-2, 1e-3, 1e-4};
    const ScalarMeasure delta({{0.0, 1.0}});
    EXPECT_NEAR(poisson_extension(delta, Complex(0.0, 0.1)), 1.0 / (kPi * 0.1), 1e-12);
    const BlowupReport r = singular_blowup_check(delta, 0.0, ladder);
    EXPECT_TRUE(r.holds);
    EXPECT_NEAR(r.scaled_values[0], 1.0 / kPi, 1e-12);

    const BlowupReport r2 = singular_blowup_check(ScalarMeasure({{0.0, 2.0}}), 0.0, ladder);
    EXPECT_NEAR(r2.scaled_values[0], 2.0 / kPi, 1e-12);

    const BlowupReport r3 = singular_blowup_check(ScalarMeasure({{0.0, 1.0}, {1.0, 1.0}}), 1.0, ladder);
    EXPECT_TRUE(r3.holds);
    // atom at 0 contributes eps * eps/(pi(1+eps^2)) -> 0
    EXPECT_NEAR(r3.scaled_values.back() * kPi, 1.0, 1e-7);

    EXPECT_THROW((void)singular_blowup_check(delta, 0.5, ladder), ArgumentError);
}

TEST(StieltjesReconstruct, LogarithmHasUnitDensityOnTheCut) {
    const MatrixFunction f = [](Complex z) {
        CMatrix m(1, 1);
        m(0, 0) = std::log((z - 1.0) / (z + 1.0));
        return m;
    };
    const MatrixMeasure m = stieltjes_reconstruct(f, Grid{-0.9, 0.9, 19});
    for (std::size_t k = 0; k < 19; ++k) EXPECT_NEAR(m.ac()->densities[k](0, 0).real(), 1.0, 1e-4);
}

TEST(StieltjesReconstruct, AtomicAwayFromGridAndLinearity) {
    const MatrixMeasure atoms(1, {{-3.0, scalar(1.0)}, {3.0, scalar(0.5)}});
    const MatrixFunction fa = [&](Complex z) { return cauchy_transform(atoms, z).value; };
    const MatrixMeasure ra = stieltjes_reconstruct(fa, Grid{-1.0, 1.0, 11});
    for (const auto& w : ra.ac()->densities) EXPECT_NEAR(w(0, 0).real(), 0.0, 1e-8);

    const MatrixMeasure smooth(1, {}, AcDensity{-2.0, 2.0, std::vector<HermitianMatrix>(5, scalar(0.7))});
    const MatrixFunction fs = [&](Complex z) { return cauchy_transform(smooth, z).value; };
    const MatrixFunction sum = [&](Complex z) { return CMatrix(fa(z) + fs(z)); };
    const MatrixMeasure rs = stieltjes_reconstruct(fs, Grid{-1.0, 1.0, 11});
    const MatrixMeasure rsum = stieltjes_reconstruct(sum, Grid{-1.0, 1.0, 11});
    for (std::size_t k = 0; k < 11; ++k) {
        EXPECT_NEAR(rsum.ac()->densities[k](0, 0).real(),
                    rs.ac()->densities[k](0, 0).real() + ra.ac()->densities[k](0, 0).real(), 1e-8);
        EXPECT_NEAR(rs.ac()->densities[k](0, 0).real(), 0.7, 1e-6);
    }
}

TEST(StieltjesReconstruct, RoundTripThroughCauchyTransform) {
    RandomStream rs(6, 6);
    const MatrixMeasure m = smooth_ac(rs, 2, -1.0, 1.0, 41);
    const MatrixFunction f = [&](Complex z) { return cauchy_transform(m, z).value; };
    const MatrixMeasure back = stieltjes_reconstruct(f, Grid{-1.0, 1.0, 41});
    // Reconstruction is exact only away from the grid ends, where the density jumps to 0.
    for (Complex z : {Complex(0.0, 0.5), Complex(0.3, 1.0), Complex(-2.0, 0.2)}) {
        const CMatrix a = cauchy_transform(m, z).value;
        const CMatrix b = cauchy_transform(back, z).value;
        EXPECT_LE((a - b).norm() / a.norm(), 0.02);
    }
}

TEST(StieltjesReconstruct, RejectsNonHerglotz) {
    const MatrixFunction bad = [](Complex z) {
        CMatrix m(1, 1);
        m(0, 0) = -1.0 / (0.0 - z);
        return m;
    };
    EXPECT_THROW((void)stieltjes_reconstruct(bad, Grid{-1.0, 1.0, 5}), EvaluationError);
}

TEST(Richardson, ExactForPolynomials) {
    const std::vector<double> eps{0.4, 0.2, 0.1};
    std::vector<CMatrix> v;
    for (double e : eps) v.push_back(CMatrix::Constant(1, 1, Complex(3.0 - 2.0 * e + 5.0 * e * e)));
    const Extrapolation ex = richardson_to_zero(eps, v);
    EXPECT_NEAR(ex.value(0, 0).real(), 3.0, 1e-13);
}
