#pragma once

// Test-side oracles, independent of the library's SDP path.

#include <Eigen/Dense>
#include <cmath>

namespace oracles {

// Containment of an axially symmetric spheroid (semi-axis a along the x-axis,
// b on the two transverse axes, center at x = t) inside a ball of radius R
// centered at x = e: maximizes ||w + diag(a,b,b) u|| over unit u with
// w = (t - e, 0, 0) and compares against R.
inline bool spheroid_in_ball(double t, double a, double b, double e, double R) {
    const double w = std::abs(t - e);
    if (w + a > R + 1e-15) return false; // axial endpoints
    if (b <= a + 1e-18) return true;     // endpoint case is binding
    // interior stationary point of (w + a u)^2 + b^2 (1 - u^2)
    const double u = w * a / (b * b - a * a);
    double worst2 = (w + a) * (w + a);
    if (u <= 1.0) {
        const double v = (w + a * u) * (w + a * u) + b * b * (1.0 - u * u);
        worst2 = std::max(worst2, v);
    }
    return worst2 <= R * R + 1e-14;
}

// Largest transverse semi-axis b for given (t, a), by bisection (containment
// is monotone in b).
inline double lens_bmax(double t, double a, double r1, double r2, double dist) {
    if (!(spheroid_in_ball(t, a, 0.0, 0.0, r1) && spheroid_in_ball(t, a, 0.0, dist, r2))) return -1.0;
    double lo = 0.0, hi = std::min(r1, r2);
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (spheroid_in_ball(t, mid <= a ? a : a, mid, 0.0, r1) &&
            spheroid_in_ball(t, a, mid, dist, r2))
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

// golden-section maximization of a scalar function on [lo, hi]
template <class F>
double golden_max(F&& f, double lo, double hi, int iters = 100) {
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < iters; ++i) {
        if (f1 >= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    return std::max(f1, f2);
}

// Maximum of a + 2b over axis-symmetric spheroids inscribed in the lens of
// two overlapping balls (radii r1, r2, centers distance `dist` apart, 3D).
// The optimal inscribed ellipsoid of a lens is such a spheroid by symmetry
// and convexity, so this is a sharp reference value.
inline double lens_max_trace(double r1, double r2, double dist) {
    if (dist >= r1 + r2) return 0.0;
    const double x_lo = dist - r2, x_hi = r1; // axial extent of the lens
    auto value_at_t = [&](double t) {
        const double a_hi = std::min(r1 - std::abs(t), r2 - std::abs(dist - t));
        if (a_hi <= 0) return 0.0;
        auto value_at_a = [&](double a) {
            const double b = lens_bmax(t, a, r1, r2, dist);
            return b < 0 ? 0.0 : a + 2.0 * b;
        };
        return golden_max(value_at_a, 0.0, a_hi);
    };
    // coarse scan then golden refinement around the best cell
    double best_t = 0.5 * (x_lo + x_hi), best_v = -1.0;
    const int grid = 64;
    for (int i = 0; i <= grid; ++i) {
        const double t = x_lo + (x_hi - x_lo) * i / grid;
        const double v = value_at_t(t);
        if (v > best_v) {
            best_v = v;
            best_t = t;
        }
    }
    const double cell = (x_hi - x_lo) / grid;
    return golden_max(value_at_t, std::max(x_lo, best_t - 2 * cell), std::min(x_hi, best_t + 2 * cell));
}

} // namespace oracles
