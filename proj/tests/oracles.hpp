#pragma once

// Brute-force reference computations used only by the test suites. None of
// these touch the library's solver code paths.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Minimizes a convex function on R^d (d <= 3) by repeatedly gridding a box
/// and shrinking it around the best grid point.
inline Vector zoom_grid_minimize(const std::function<double(const Vector&)>& f, Vector center,
                                 double radius, int points = 41, int levels = 40) {
    const auto d = center.size();
    Vector best = center;
    double best_val = f(center);
    for (int level = 0; level < levels; ++level) {
        const double step = 2.0 * radius / (points - 1);
        Vector x(d);
        const int total = static_cast<int>(std::pow(points, d));
        for (int idx = 0; idx < total; ++idx) {
            int rem = idx;
            for (Eigen::Index k = 0; k < d; ++k) {
                x[k] = center[k] - radius + step * (rem % points);
                rem /= points;
            }
            const double v = f(x);
            if (v < best_val) {
                best_val = v;
                best = x;
            }
        }
        center = best;
        radius *= 0.25;
    }
    return best;
}

/// max over unit directions d of g(d) for d in R^2 or R^3, by angular grid
/// search followed by zooming; returns the maximizing unit direction.
inline Vector sphere_maximize(const std::function<double(const Vector&)>& g, int dim) {
    auto dir = [dim](double a, double b) {
        Vector d(dim);
        if (dim == 2) {
            d << std::cos(a), std::sin(a);
        } else {
            d << std::sin(a) * std::cos(b), std::sin(a) * std::sin(b), std::cos(a);
        }
        return d;
    };
    const double pi = std::numbers::pi;
    double ca = pi / 2, cb = pi, ra = pi / 2 + 0.1, rb = pi + 0.1;
    if (dim == 2) {
        ca = pi;
        ra = pi + 0.1;
        rb = 0;
    }
    double best_a = ca, best_b = cb, best = -INFINITY;
    for (int level = 0; level < 30; ++level) {
        const int na = 201, nb = dim == 2 ? 1 : 201;
        for (int i = 0; i < na; ++i) {
            const double a = ca - ra + 2 * ra * i / (na - 1);
            for (int j = 0; j < nb; ++j) {
                const double b = nb == 1 ? 0.0 : cb - rb + 2 * rb * j / (nb - 1);
                const double v = g(dir(a, b));
                if (v > best) {
                    best = v;
                    best_a = a;
                    best_b = b;
                }
            }
        }
        ca = best_a;
        cb = best_b;
        ra *= 0.2;
        rb *= 0.2;
    }
    return dir(best_a, best_b);
}

/// Random symmetric PSD matrix A A' / p with A p x r Gaussian.
inline Matrix random_psd(std::mt19937_64& gen, int p, int r) {
    std::normal_distribution<double> z;
    Matrix a(p, r);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < r; ++j) a(i, j) = z(gen);
    return a * a.transpose() / p;
}

inline Vector random_vector(std::mt19937_64& gen, int p) {
    std::normal_distribution<double> z;
    Vector v(p);
    for (int i = 0; i < p; ++i) v[i] = z(gen);
    return v;
}

/// Standard normal CDF by adaptive Simpson quadrature of the density.
inline double normal_cdf_quadrature(double x) {
    const auto phi = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2 * std::numbers::pi); };
    std::function<double(double, double, double, double, double, int)> simpson =
        [&](double a, double b, double fa, double fm, double fb, int depth) -> double {
        const double m = 0.5 * (a + b);
        const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
        const double flm = phi(lm), frm = phi(rm);
        const double whole = (b - a) / 6 * (fa + 4 * fm + fb);
        const double left = (m - a) / 6 * (fa + 4 * flm + fm);
        const double right = (b - m) / 6 * (fm + 4 * frm + fb);
        if (depth > 40 || std::abs(left + right - whole) < 1e-17) return left + right;
        return simpson(a, m, fa, flm, fm, depth + 1) + simpson(m, b, fm, frm, fb, depth + 1);
    };
    // Integrate the tail from -12 (mass below is ~1e-33).
    const double a = -12.0;
    if (x <= a) return 0.0;
    return simpson(a, x, phi(a), phi(0.5 * (a + x)), phi(x), 0);
}

/// Minimizer of a convex function on [lo, hi] given its right derivative:
/// bisection for the smallest t with right_derivative(t) >= 0.
inline double convex_min_by_derivative(const std::function<double(double)>& right_derivative, double lo,
                                       double hi) {
    for (int i = 0; i < 200 && hi - lo > 0; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (right_derivative(mid) >= 0 ? hi : lo) = mid;
    }
    return hi;
}

/// Direct O(n^2) DFT, X_k = sum_t x_t exp(-2 pi i k t / n).
inline std::vector<std::complex<double>> naive_dft(const Vector& x) {
    const auto n = x.size();
    std::vector<std::complex<double>> out(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) {
        std::complex<double> acc = 0;
        for (Eigen::Index t = 0; t < n; ++t)
            acc += x[t] * std::polar(1.0, -2 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n));
        out[static_cast<std::size_t>(k)] = acc;
    }
    return out;
}

/// Orthonormal Haar pyramid written out directly: repeated pairwise
/// (a+b)/sqrt2, (a-b)/sqrt2. Output order: coarsest average, then details
/// from the coarsest level to the finest.
inline Vector naive_haar(const Vector& x) {
    Vector approx = x;
    std::vector<Vector> details;
    while (approx.size() > 1) {
        const auto h = approx.size() / 2;
        Vector a(h), d(h);
        for (Eigen::Index i = 0; i < h; ++i) {
            a[i] = (approx[2 * i] + approx[2 * i + 1]) / std::sqrt(2.0);
            d[i] = (approx[2 * i] - approx[2 * i + 1]) / std::sqrt(2.0);
        }
        details.push_back(d);
        approx = a;
    }
    Vector out(x.size());
    out[0] = approx[0];
    Eigen::Index pos = 1;
    for (auto it = details.rbegin(); it != details.rend(); ++it) {
        out.segment(pos, it->size()) = *it;
        pos += it->size();
    }
    return out;
}

}  // namespace oracle
