#include <gtest/gtest.h>

#include "finrank/measure.hpp"
#include "finrank/random.hpp"

using namespace finrank;

namespace {

HermitianMatrix scalar(double v) { return HermitianMatrix::diagonal({v}); }

HermitianMatrix axis(Eigen::Index d, Eigen::Index k) {
    CMatrix m = CMatrix::Zero(d, d);
    m(k, k) = 1.0;
    return HermitianMatrix::symmetrized(m);
}

}  // namespace

TEST(SpectralMeasure, SinglePoint) {
    const OperatorModel model(HermitianMatrix::diagonal({0.0}), CMatrix::Ones(1, 1));
    const MatrixMeasure m = spectral_measure(model);
    ASSERT_EQ(m.atoms().size(), 1u);
    EXPECT_EQ(m.atoms()[0].location, 0.0);
    EXPECT_NEAR(m.atoms()[0].weight(0, 0).real(), 1.0, 1e-15);
}

TEST(SpectralMeasure, DiagonalWithIdentityCoupling) {
    const OperatorModel model(HermitianMatrix::diagonal({0.0, 1.0}), CMatrix::Identity(2, 2));
    const MatrixMeasure m = spectral_measure(model);
    ASSERT_EQ(m.atoms().size(), 2u);
    EXPECT_LE((m.atoms()[0].weight.matrix() - axis(2, 0).matrix()).norm(), 1e-15);
    EXPECT_LE((m.atoms()[1].weight.matrix() - axis(2, 1).matrix()).norm(), 1e-15);
}

TEST(SpectralMeasure, RankOneSplitsMassByOverlap) {
    CMatrix b(2, 1);
    b << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    const MatrixMeasure m = spectral_measure(OperatorModel(HermitianMatrix::diagonal({0.0, 1.0}), b));
    ASSERT_EQ(m.atoms().size(), 2u);
    EXPECT_NEAR(m.atoms()[0].weight(0, 0).real(), 0.5, 1e-15);
    EXPECT_NEAR(m.atoms()[1].weight(0, 0).real(), 0.5, 1e-15);
}

TEST(SpectralMeasure, MassEqualsGramOfCouplingAndResolventMatches) {
    RandomStream rs(21, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index n = 2 + trial % 8;
        const Eigen::Index d = 1 + trial % std::min<Eigen::Index>(n, 4);
        const OperatorModel model(rs.gue(n), rs.gaussian(n, d));
        const MatrixMeasure m = spectral_measure(model);
        EXPECT_LE((m.total_mass() - model.b().adjoint() * model.b()).norm(), 1e-10 * (1 + model.b().squaredNorm()));
        const Complex z(rs.normal(), 0.5 + rs.uniform());
        const CMatrix direct = model.b().adjoint() *
                               (model.a().matrix() - z * CMatrix::Identity(n, n)).inverse() * model.b();
        const CMatrix via_measure = integrate(m, [&](double t) { return 1.0 / (t - z); });
        EXPECT_LE((direct - via_measure).norm(), 1e-10 * (1 + direct.norm()));
    }
}

TEST(SpectralMeasure, MergesDegenerateEigenvalues) {
    const OperatorModel model(HermitianMatrix::diagonal({0.0, 0.0, 1.0}), CMatrix::Identity(3, 3));
    const MatrixMeasure m = spectral_measure(model);
    ASSERT_EQ(m.atoms().size(), 2u);
    EXPECT_EQ(psd_rank(m.atoms()[0].weight), 2);
}

TEST(TraceMeasure, Examples) {
    const ScalarMeasure a = trace_measure(MatrixMeasure(2, {{0.0, HermitianMatrix::identity(2)}}));
    ASSERT_EQ(a.atoms().size(), 1u);
    EXPECT_NEAR(a.atoms()[0].mass, 2.0, 1e-15);

    const ScalarMeasure b = trace_measure(MatrixMeasure(2, {{0.0, axis(2, 0)}, {1.0, axis(2, 1)}}));
    EXPECT_NEAR(b.atoms()[0].mass, 1.0, 1e-15);
    EXPECT_NEAR(b.atoms()[1].mass, 1.0, 1e-15);

    const HermitianMatrix dens = HermitianMatrix::diagonal({0.5, 0.25});
    const ScalarMeasure c = trace_measure(MatrixMeasure(2, {}, AcDensity{-1.0, 1.0, {dens, dens, dens}}));
    EXPECT_NEAR(c.density_at(0.3), 0.75, 1e-15);
}

TEST(TraceMeasure, DominatesEntries) {
    RandomStream rs(4, 4);
    for (int trial = 0; trial < 100; ++trial) {
        const CMatrix x = rs.gaussian(3, 1 + trial % 3);
        const HermitianMatrix w = HermitianMatrix::symmetrized(x * x.adjoint());
        const double tr = w.matrix().trace().real();
        for (Eigen::Index j = 0; j < 3; ++j) {
            for (Eigen::Index k = 0; k < 3; ++k) {
                const double mid = 0.5 * (w(j, j).real() + w(k, k).real());
                EXPECT_LE(std::abs(w(j, k)), mid + 1e-12);
                EXPECT_LE(mid, tr + 1e-12);
            }
        }
    }
}

TEST(Integrate, Examples) {
    const CMatrix one = integrate(MatrixMeasure(2, {{0.0, HermitianMatrix::identity(2)}}),
                                  [](double) { return Complex(1.0); });
    EXPECT_LE((one - CMatrix::Identity(2, 2)).norm(), 1e-15);

    const MatrixMeasure half(1, {{0.0, scalar(0.5)}, {1.0, scalar(0.5)}});
    EXPECT_NEAR(integrate(half, [](double x) { return Complex(x); })(0, 0).real(), 0.5, 1e-15);

    const MatrixMeasure delta(1, {{0.0, scalar(1.0)}});
    const auto poisson_i = [](double t) { return Complex(1.0 / (kPi * (1.0 + t * t))); };
    EXPECT_NEAR(integrate(delta, poisson_i)(0, 0).real(), 1.0 / kPi, 1e-15);
}

TEST(Integrate, NonFiniteValueNamesLocation) {
    const MatrixMeasure m(1, {{2.0, scalar(1.0)}});
    try {
        (void)integrate(m, [](double x) { return Complex(1.0 / (x - 2.0)); });
        FAIL();
    } catch (const EvaluationError& e) {
        EXPECT_EQ(e.location(), 2.0);
    }
}

TEST(Integrate, TrapezoidIsSecondOrder) {
    // int_0^1 cos(t) dt with density 1
    auto error_at = [](std::size_t nodes) {
        AcDensity ac{0.0, 1.0, std::vector<HermitianMatrix>(nodes, scalar(1.0))};
        const MatrixMeasure m(1, {}, ac);
        return std::abs(integrate(m, [](double t) { return Complex(std::cos(t)); })(0, 0).real() - std::sin(1.0));
    };
    const double ratio = error_at(33) / error_at(65);
    EXPECT_NEAR(ratio, 4.0, 0.05);
}

TEST(Integrate, LinearAndAdditive) {
    RandomStream rs(8, 1);
    const CMatrix x = rs.gaussian(2, 2);
    const MatrixMeasure m1(2, {{0.3, HermitianMatrix::symmetrized(x * x.adjoint())}});
    const MatrixMeasure m2(2, {{-1.2, HermitianMatrix::identity(2)}});
    std::vector<Atom> both = m1.atoms();
    both.insert(both.end(), m2.atoms().begin(), m2.atoms().end());
    const MatrixMeasure sum(2, both);
    auto f = [](double t) { return Complex(std::exp(-t * t), t); };
    auto g = [](double t) { return Complex(t * t, 0.0); };
    EXPECT_LE((integrate(sum, f) - integrate(m1, f) - integrate(m2, f)).norm(), 1e-14);
    const CMatrix lin = integrate(m1, [&](double t) { return 2.0 * f(t) - 3.0 * g(t); });
    EXPECT_LE((lin - 2.0 * integrate(m1, f) + 3.0 * integrate(m1, g)).norm(), 1e-13);
}

TEST(UnitarilyEquivalent, Examples) {
    const MatrixMeasure a(2, {{0.0, axis(2, 0)}});
    const MatrixMeasure b(1, {{0.0, scalar(5.0)}});
    EXPECT_TRUE(unitarily_equivalent(a, b));
    EXPECT_FALSE(unitarily_equivalent(MatrixMeasure(2, {{0.0, HermitianMatrix::identity(2)}}), a));
    EXPECT_TRUE(unitarily_equivalent(a, a));
}

TEST(UnitarilyEquivalent, RejectsMixedComparison) {
    const MatrixMeasure atomic(1, {{0.0, scalar(1.0)}});
    const MatrixMeasure ac(1, {}, AcDensity{0.0, 1.0, {scalar(1.0), scalar(1.0)}});
    EXPECT_THROW((void)unitarily_equivalent(atomic, ac), UnsupportedInputError);
}

TEST(UnitarilyEquivalent, EquivalenceRelationOnRandomAtomic) {
    RandomStream rs(31, 0);
    std::vector<MatrixMeasure> pool;
    for (int k = 0; k < 12; ++k) {
        std::vector<Atom> atoms;
        for (double x : {-1.0, 0.0, 2.0}) {
            const CMatrix g = rs.gaussian(2, 1 + static_cast<Eigen::Index>(rs.uniform() * 2.0));
            atoms.push_back({x, HermitianMatrix::symmetrized(g * g.adjoint())});
        }
        pool.emplace_back(2, atoms);
    }
    for (const auto& p : pool) EXPECT_TRUE(unitarily_equivalent(p, p));
    for (const auto& p : pool) {
        for (const auto& q : pool) {
            EXPECT_EQ(unitarily_equivalent(p, q), unitarily_equivalent(q, p));
            for (const auto& r : pool) {
                if (unitarily_equivalent(p, q) && unitarily_equivalent(q, r)) {
                    EXPECT_TRUE(unitarily_equivalent(p, r));
                }
            }
        }
    }
}

TEST(FormBoundedness, Examples) {
    EXPECT_NEAR(form_boundedness(MatrixMeasure(2, {{0.0, HermitianMatrix::identity(2)}})), 1.0, 1e-15);
    EXPECT_NEAR(form_boundedness(MatrixMeasure(1, {{3.0, scalar(2.0)}})), 0.5, 1e-15);
    EXPECT_NEAR(form_boundedness(MatrixMeasure(1, {{0.0, scalar(1.0)}, {1.0, scalar(1.0)}})), 1.5, 1e-15);
}

TEST(DyadicExpectation, Examples) {
    const ScalarMeasure delta({{0.25, 1.0}});
    EXPECT_NEAR(dyadic_expectation(delta, 1, 0.3), 2.0, 1e-15);
    EXPECT_EQ(dyadic_expectation(delta, 1, 0.7), 0.0);
    EXPECT_NEAR(dyadic_expectation(ScalarMeasure::uniform(0.0, 1.0, 1.0), 3, 0.1), 1.0, 1e-15);
}

TEST(DyadicExpectation, LevelSumsRecoverMass) {
    RandomStream rs(17, 3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<ScalarAtom> atoms;
        for (int k = 0; k < 4; ++k) atoms.push_back({rs.uniform(0.0, 1.0), rs.uniform()});
        const ScalarMeasure mu(atoms, ScalarAcDensity{0.0, 1.0, {rs.uniform(), rs.uniform(), rs.uniform()}});
        const int n = trial % 7;
        const double len = std::ldexp(1.0, -n);
        double sum = 0.0;
        for (int k = 0; k < (1 << n); ++k) sum += dyadic_expectation(mu, n, (k + 0.5) * len) * len;
        EXPECT_NEAR(sum, mu.mass(0.0, 1.0), 1e-12);
    }
}

TEST(DyadicDensityBound, Examples) {
    const auto lebesgue = ScalarMeasure::uniform(0.0, 1.0, 1.0);
    EXPECT_EQ(dyadic_density_bound_check(lebesgue, {{0.0, 1.0}}, 2.0, 12).status, CheckStatus::Pass);

    const auto heavy = ScalarMeasure::uniform(0.0, 1.0, 3.0);
    EXPECT_EQ(dyadic_density_bound_check(heavy, {{0.0, 1.0}}, 2.0, 12).status, CheckStatus::Skip);

    const ScalarMeasure mixed({{0.5, 1.0}}, ScalarAcDensity{2.0, 3.0, {1.0, 1.0}});
    const DyadicCheck r = dyadic_density_bound_check(mixed, {{2.0, 3.0}}, 2.0, 12);
    EXPECT_EQ(r.status, CheckStatus::Pass);
    EXPECT_NEAR(r.mass, 1.0, 1e-14);
    EXPECT_NEAR(r.bound, 2.0, 1e-14);
}

TEST(DyadicDensityBound, CoarseLevelsDoNotMaskDenseSubintervals) {
    // Density 3 on [0, 0.5]: at level 0 the interval [0,1) averages to 1.5 < 2,
    // but mu(E) = 1.5 > 2 * 0.5. The fine levels see density 3 and skip.
    const auto mu = ScalarMeasure::uniform(0.0, 0.5, 3.0);
    EXPECT_EQ(dyadic_density_bound_check(mu, {{0.0, 0.5}}, 2.0, 12).status, CheckStatus::Skip);
}

TEST(DyadicDensityBound, AtomInsideSetTriggersSkip) {
    const ScalarMeasure mu({{0.3, 0.01}}, ScalarAcDensity{0.0, 1.0, {1.0, 1.0}});
    EXPECT_EQ(dyadic_density_bound_check(mu, {{0.0, 1.0}}, 2.0, 16).status, CheckStatus::Skip);
}
