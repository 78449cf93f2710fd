#pragma once

// Globally adaptive Gauss-Kronrod (7/15) quadrature for matrix-valued
// integrands on finite intervals with optional interior breakpoints.

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <vector>

#include "finrank/linalg.hpp"

namespace finrank {

struct QuadratureResult {
    CMatrix value;
    double error_estimate = 0.0;
    int evaluations = 0;
    bool converged = false;
};

namespace detail {

inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
    double a = 0.0;
    double b = 0.0;
    CMatrix value;
    double error = 0.0;
    bool operator<(const Segment& other) const { return error < other.error; }
};

template <class F>
Segment gauss_kronrod_15(F& f, double a, double b) {
    const double centre = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const CMatrix fc = f(centre);
    CMatrix kronrod = fc * kKronrodWeights[7];
    CMatrix gauss = fc * kGaussWeights[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kKronrodNodes[static_cast<std::size_t>(j)];
        const CMatrix f1 = f(centre - dx);
        const CMatrix f2 = f(centre + dx);
        kronrod += (f1 + f2) * kKronrodWeights[static_cast<std::size_t>(j)];
        if (j % 2 == 1) gauss += (f1 + f2) * kGaussWeights[static_cast<std::size_t>(j / 2)];
    }
    Segment s;
    s.a = a;
    s.b = b;
    s.value = kronrod * half;
    s.error = ((kronrod - gauss) * half).cwiseAbs().maxCoeff();
    return s;
}

}  // namespace detail

/// Integrates f over [a, b], splitting first at the given breakpoints. The
/// error estimate is the sum of |Kronrod - Gauss| (max entry) over segments;
/// refinement bisects the worst segment until the estimate is below abs_tol.
template <class F>
QuadratureResult integrate_adaptive(F&& f, double a, double b, double abs_tol,
                                    std::vector<double> breakpoints = {}, int max_segments = 4000) {
    QuadratureResult out;
    std::vector<double> cuts{a};
    std::sort(breakpoints.begin(), breakpoints.end());
    for (double c : breakpoints) {
        if (c > cuts.back() && c < b) cuts.push_back(c);
    }
    cuts.push_back(b);

    std::priority_queue<detail::Segment> heap;
    double total_error = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        detail::Segment s = detail::gauss_kronrod_15(f, cuts[k], cuts[k + 1]);
        out.evaluations += 15;
        total_error += s.error;
        heap.push(std::move(s));
    }
    while (total_error > abs_tol && static_cast<int>(heap.size()) < max_segments) {
        detail::Segment worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            heap.push(std::move(worst));
            break;
        }
        detail::Segment left = detail::gauss_kronrod_15(f, worst.a, mid);
        detail::Segment right = detail::gauss_kronrod_15(f, mid, worst.b);
        out.evaluations += 30;
        total_error += left.error + right.error - worst.error;
        heap.push(std::move(left));
        heap.push(std::move(right));
    }
    // Sum in interval order so the result does not depend on heap layout.
    std::vector<detail::Segment> segments;
    segments.reserve(heap.size());
    total_error = 0.0;
    while (!heap.empty()) {
        segments.push_back(heap.top());
        heap.pop();
    }
    std::sort(segments.begin(), segments.end(),
              [](const detail::Segment& x, const detail::Segment& y) { return x.a < y.a; });
    out.value = segments.front().value;
    total_error = segments.front().error;
    for (std::size_t k = 1; k < segments.size(); ++k) {
        out.value += segments[k].value;
        total_error += segments[k].error;
    }
    out.error_estimate = total_error;
    out.converged = total_error <= abs_tol;
    return out;
}

}  // namespace finrank
