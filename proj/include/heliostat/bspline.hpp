#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "heliostat/error.hpp"

namespace helio {

/// Highest polynomial degree supported by the fixed-size evaluation buffers.
inline constexpr int kMaxDegree = 7;

/// Clamped knot vector with uniformly spaced interior knots on [0,1].
inline std::vector<double> clamped_uniform_knots(int n_ctrl, int degree) {
    if (degree < 1 || n_ctrl <= degree)
        throw Error(ErrorKind::config, "clamped knots need n_ctrl > degree >= 1");
    std::vector<double> knots(static_cast<std::size_t>(n_ctrl + degree + 1));
    const int spans = n_ctrl - degree;
    for (int i = 0; i < static_cast<int>(knots.size()); ++i) {
        if (i <= degree)
            knots[i] = 0.0;
        else if (i >= n_ctrl)
            knots[i] = 1.0;
        else
            knots[i] = static_cast<double>(i - degree) / spans;
    }
    return knots;
}

/// Greville abscissae: the parameter sites at which a clamped B-spline has linear precision,
/// sum_i N_i(t) * greville[i] == t.
inline std::vector<double> greville_abscissae(std::span<const double> knots, int degree) {
    const int n_ctrl = static_cast<int>(knots.size()) - degree - 1;
    std::vector<double> g(static_cast<std::size_t>(n_ctrl));
    for (int i = 0; i < n_ctrl; ++i) {
        double s = 0.0;
        for (int k = 1; k <= degree; ++k)
            s += knots[i + k];
        g[i] = s / degree;
    }
    return g;
}

inline void check_parameter(double t) {
    if (!(t >= 0.0 && t <= 1.0))
        throw Error(ErrorKind::domain, "spline parameter " + std::to_string(t) + " outside [0,1]");
}

/// Knot span index i with knots[i] <= t < knots[i+1]; t == 1 maps to the last non-empty span.
inline int find_span(std::span<const double> knots, int degree, double t) {
    const int n = static_cast<int>(knots.size()) - degree - 1;
    if (t >= knots[n])
        return n - 1;
    int lo = degree, hi = n;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        if (t < knots[mid])
            hi = mid;
        else
            lo = mid;
    }
    return lo;
}

/// Nonzero basis values and first derivatives on one knot span.
struct SpanBasis {
    int first = 0; // index of the first nonzero basis function (span - degree)
    std::array<double, kMaxDegree + 1> value{};
    std::array<double, kMaxDegree + 1> deriv{};
};

/// Degree-p basis functions N_{span-p..span} and their first derivatives at t
/// (triangular Cox-de Boor table, no domain check).
inline SpanBasis span_basis(std::span<const double> knots, int degree, double t) {
    SpanBasis out;
    const int span = find_span(knots, degree, t);
    out.first = span - degree;

    // ndu[j][r]: basis values of degree j (upper triangle) and knot differences (lower).
    double ndu[kMaxDegree + 1][kMaxDegree + 1];
    double left[kMaxDegree + 1], right[kMaxDegree + 1];
    ndu[0][0] = 1.0;
    for (int j = 1; j <= degree; ++j) {
        left[j] = t - knots[span + 1 - j];
        right[j] = knots[span + j] - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu[j][r] = right[r + 1] + left[j - r];
            const double temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    for (int j = 0; j <= degree; ++j)
        out.value[j] = ndu[j][degree];

    // First derivative: N'_{i,p} = p * (N_{i,p-1}/(u_{i+p}-u_i) - N_{i+1,p-1}/(u_{i+p+1}-u_{i+1})).
    for (int r = 0; r <= degree; ++r) {
        double d = 0.0;
        if (r >= 1)
            d += ndu[r - 1][degree - 1] / ndu[degree][r - 1];
        if (r <= degree - 1)
            d -= ndu[r][degree - 1] / ndu[degree][r];
        out.deriv[r] = degree * d;
    }
    return out;
}

/// All n_ctrl basis function values at t. Non-negative and summing to one.
inline std::vector<double> basis_eval(std::span<const double> knots, int degree, double t) {
    check_parameter(t);
    const int n_ctrl = static_cast<int>(knots.size()) - degree - 1;
    std::vector<double> out(static_cast<std::size_t>(n_ctrl), 0.0);
    const SpanBasis b = span_basis(knots, degree, t);
    for (int k = 0; k <= degree; ++k)
        out[b.first + k] = b.value[k];
    return out;
}

} // namespace helio
