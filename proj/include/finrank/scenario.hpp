#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "finrank/perturbation.hpp"
#include "finrank/random.hpp"

namespace finrank {

/// A complete problem instance: operator pair, coupling line, optional a.c.
/// measure for boundary-value checks, seed and tolerance overrides.
struct Scenario {
    Eigen::Index d = 1;
    Eigen::Index n = 1;
    HermitianMatrix a;
    CMatrix b;
    HermitianMatrix gamma0;
    HermitianMatrix gamma;
    std::optional<AcDensity> ac;
    std::uint64_t seed = 0;
    std::map<std::string, double> tolerances;

    OperatorModel model() const { return OperatorModel(a, b); }
    PerturbationFamily family() const { return PerturbationFamily(model(), gamma0, gamma); }

    /// Tolerance override or the given default.
    double tolerance(const std::string& key, double fallback) const {
        auto it = tolerances.find(key);
        return it == tolerances.end() ? fallback : it->second;
    }
};

inline constexpr int kScenarioRetryBudget = 32;

/// GUE-style A, complex Gaussian B, Hermitian Gamma0 and a shifted Wishart
/// Gamma; resampled until Ran B is cyclic for A.
inline Scenario random_scenario(Eigen::Index d, Eigen::Index n, std::uint64_t seed) {
    if (!(d >= 1 && d <= n && n <= 64)) {
        std::ostringstream os;
        os << "random_scenario requires 1 <= d <= N <= 64, got d=" << d << " N=" << n;
        throw ArgumentError(os.str());
    }
    for (int attempt = 0; attempt < kScenarioRetryBudget; ++attempt) {
        RandomStream rs(CounterRng(seed).split(static_cast<std::uint64_t>(attempt)));
        Scenario s;
        s.d = d;
        s.n = n;
        s.seed = seed;
        s.a = rs.gue(n);
        s.b = rs.gaussian(n, d);
        s.gamma0 = rs.gue(d);
        s.gamma = rs.wishart(d, 0.5);
        const Eigen::VectorXd sv = singular_values(s.b);
        if (!(sv(sv.size() - 1) > 1e-6 * sv(0))) continue;
        if (OperatorModel(s.a, s.b).cyclicity().cyclic) return s;
    }
    std::ostringstream os;
    os << "random_scenario: no cyclic draw within " << kScenarioRetryBudget << " attempts (seed " << seed << ")";
    throw Error(os.str());
}

}  // namespace finrank
