#pragma once

// Independent reference computations used by the tests. None of these call
// into the library's solvers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

namespace oracle {

using cdouble = std::complex<double>;

/// Stieltjes root for pi = delta_1: z m^2 + (z + 1 - 1/d) m + 1 = 0, Im m > 0.
inline cdouble mp_quadratic_root(double d, cdouble z)
{
    const cdouble a = z, b = z + 1.0 - 1.0 / d, c = 1.0;
    const cdouble disc = std::sqrt(b * b - 4.0 * a * c);
    const cdouble r1 = (-b + disc) / (2.0 * a), r2 = (-b - disc) / (2.0 * a);
    return r1.imag() > r2.imag() ? r1 : r2;
}

/// Roots of sum_k c[k] x^k (c.back() != 0) from the companion matrix, each
/// polished by Newton steps on the polynomial.
inline std::vector<cdouble> polynomial_roots(const std::vector<cdouble>& c)
{
    const int n = static_cast<int>(c.size()) - 1;
    Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(n, n);
    for (int i = 1; i < n; ++i) C(i, i - 1) = 1.0;
    for (int i = 0; i < n; ++i) C(i, n - 1) = -c[i] / c[n];
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(C);
    std::vector<cdouble> roots;
    for (int i = 0; i < n; ++i) {
        cdouble x = es.eigenvalues()(i);
        for (int it = 0; it < 8; ++it) {
            cdouble p = c[n], dp = 0.0;
            for (int k = n - 1; k >= 0; --k) {
                dp = dp * x + p;
                p = p * x + c[k];
            }
            if (std::abs(dp) == 0.0) break;
            x -= p / dp;
        }
        roots.push_back(x);
    }
    return roots;
}

inline std::vector<cdouble> poly_mul(const std::vector<cdouble>& a, const std::vector<cdouble>& b)
{
    std::vector<cdouble> r(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
    return r;
}

inline std::vector<cdouble> poly_add(std::vector<cdouble> a, const std::vector<cdouble>& b)
{
    if (a.size() < b.size()) a.resize(b.size(), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) a[i] += b[i];
    return a;
}

/// Admissible root for a two-atom spectrum, from the cleared-denominator cubic
/// (1 + m s1)(1 + m s2)(1 + z m) - (m/d)[w1 s1 (1 + m s2) + w2 s2 (1 + m s1)] = 0.
/// Admissible: Im m > 0 and Im(z m) >= 0; among several, the one with largest Im m.
inline cdouble two_atom_cubic_root(double s1, double w1, double s2, double w2, double d, cdouble z)
{
    const std::vector<cdouble> f1 = {1.0, s1}, f2 = {1.0, s2}, fz = {1.0, z};
    std::vector<cdouble> lhs = poly_mul(poly_mul(f1, f2), fz);
    std::vector<cdouble> inner = poly_add({w1 * s1, w1 * s1 * s2}, {w2 * s2, w2 * s2 * s1});
    std::vector<cdouble> rhs = poly_mul({0.0, 1.0 / d}, inner);
    for (auto& x : rhs) x = -x;
    const std::vector<cdouble> p = poly_add(lhs, rhs);
    cdouble best(0.0, -1.0);
    for (const cdouble& m : polynomial_roots(p))
        if (m.imag() > 0 && (z * m).imag() >= -1e-12 && m.imag() > best.imag()) best = m;
    return best;
}

/// Marcenko-Pastur law for pi = delta_1 in the Q2 normalization (ratio 1/d):
/// continuous part sqrt((l+ - E)(E - l-)) / (2 pi E) on [l-, l+], l+- = (1 +- d^{-1/2})^2,
/// total continuous mass min(1, 1/d).
inline std::pair<double, double> mp_edges(double d)
{
    const double r = std::sqrt(1.0 / d);
    return {(1 - r) * (1 - r), (1 + r) * (1 + r)};
}

inline double mp_density(double d, double E)
{
    const auto [lo, hi] = mp_edges(d);
    if (E <= lo || E >= hi) return 0.0;
    return std::sqrt((hi - E) * (E - lo)) / (2 * M_PI * E);
}

/// integral_a^b f by composite Simpson with the substitution x = a + (b - a) (1 - cos t)/2,
/// which removes square-root endpoint singularities.
inline double integrate_edges(const std::function<double(double)>& f, double a, double b, int n = 4000)
{
    if (n % 2) ++n;
    const double h = M_PI / n;
    auto g = [&](double t) { return f(a + (b - a) * (1 - std::cos(t)) / 2) * (b - a) * std::sin(t) / 2; };
    double s = g(0) + g(M_PI);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * g(i * h);
    return s * h / 3;
}

/// max |F(t) - G(t)| over the given points, with F the step function of
/// jumps (x, w) evaluated by direct summation.
inline double kolmogorov_on_points(const std::vector<double>& x, const std::vector<double>& w,
                                   const std::function<double(double)>& G, const std::vector<double>& points)
{
    double best = 0;
    for (double t : points) {
        double F = 0;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (x[i] <= t) F += w[i];
        best = std::max(best, std::abs(F - G(t)));
    }
    return best;
}

/// Uniform grid on [a, b] plus x +- eps for every x in `around`.
inline std::vector<double> dense_grid(double a, double b, int n, const std::vector<double>& around, double eps = 1e-11)
{
    std::vector<double> g;
    for (int i = 0; i <= n; ++i) g.push_back(a + (b - a) * i / n);
    for (double x : around) {
        g.push_back(x - eps * std::max(1.0, std::abs(x)));
        g.push_back(x);
        g.push_back(x + eps * std::max(1.0, std::abs(x)));
    }
    return g;
}

} // namespace oracle
