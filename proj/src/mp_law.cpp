#include "mpvesd/mp_law.hpp"

#include "mpvesd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace mpvesd {

namespace {

constexpr double kPi = std::numbers::pi;

std::string describe(double E, double eta)
{
    std::ostringstream os;
    os << "z = " << E << " + " << eta << "i";
    return os.str();
}

// Residual of the self-consistent equation and its derivative in m.
struct Equation {
    const std::vector<Atom>& atoms;
    double inv_d;

    cdouble stieltjes_sum(cdouble m) const
    {
        cdouble s = 0.0;
        for (const auto& a : atoms) s += a.weight * a.sigma / (1.0 + m * a.sigma);
        return s;
    }

    cdouble residual(cdouble z, cdouble m) const { return 1.0 / m + z - inv_d * stieltjes_sum(m); }

    cdouble derivative(cdouble m) const
    {
        cdouble s = 0.0;
        for (const auto& a : atoms) {
            const cdouble q = 1.0 + m * a.sigma;
            s += a.weight * a.sigma * a.sigma / (q * q);
        }
        return -1.0 / (m * m) + inv_d * s;
    }

    cdouble fixed_point_map(cdouble z, cdouble m) const { return 1.0 / (-z + inv_d * stieltjes_sum(m)); }
};

bool admissible(cdouble z, cdouble m)
{
    if (!std::isfinite(m.real()) || !std::isfinite(m.imag())) return false;
    if (m.imag() <= 0.0) return false;
    const cdouble zm = z * m;
    return zm.imag() >= -1e-13 * std::abs(zm);
}

double scaled(cdouble r, cdouble z) { return std::abs(r) / std::max(1.0, std::abs(z)); }

// Newton on the residual, keeping iterates admissible by step halving.
bool newton(const Equation& eq, cdouble z, cdouble& m, double tol)
{
    for (int it = 0; it < 80; ++it) {
        const cdouble f = eq.residual(z, m);
        const cdouble df = eq.derivative(m);
        if (df == 0.0) break;
        const cdouble step = f / df;
        double t = 1.0;
        cdouble next = m - step;
        while (!admissible(z, next) && t > 1e-8) {
            t *= 0.5;
            next = m - t * step;
        }
        if (!admissible(z, next)) return false;
        m = next;
        if (std::abs(t * step) <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(m)) break;
    }
    return scaled(eq.residual(z, m), z) <= tol;
}

// One continuation step: warm-started Newton, damped fixed point as fallback.
bool refine(const Equation& eq, cdouble z, cdouble& m, const SolverOptions& opts)
{
    cdouble trial = admissible(z, m) ? m : -1.0 / z;
    if (newton(eq, z, trial, opts.tol)) {
        m = trial;
        return true;
    }
    cdouble fp = admissible(z, m) ? m : -1.0 / z;
    for (int it = 0; it < opts.max_iter; ++it) {
        fp = (1.0 - opts.damping) * fp + opts.damping * eq.fixed_point_map(z, fp);
        if (scaled(eq.residual(z, fp), z) <= opts.tol) break;
    }
    newton(eq, z, fp, opts.tol);
    m = fp;
    return admissible(z, m) && scaled(eq.residual(z, m), z) <= opts.tol;
}

cdouble solve_with_continuation(const Equation& eq, double E, double eta, const SolverOptions& opts)
{
    std::vector<double> schedule;
    for (double e = opts.eta_start; e > eta; e *= opts.continuation_ratio) schedule.push_back(e);
    schedule.push_back(eta);

    cdouble m = -1.0 / cdouble(E, schedule.front());
    for (double e : schedule) {
        const cdouble z(E, e);
        if (!refine(eq, z, m, opts)) {
            throw NonConvergence("solve_m2c: no admissible root within tolerance at " + describe(E, e));
        }
    }
    return m;
}

// m2c at eta_floor and eta_floor / 2, the pair used by Richardson extrapolation.
std::pair<cdouble, cdouble> boundary_pair(const Equation& eq, double E, const SolverOptions& opts)
{
    cdouble m = solve_with_continuation(eq, E, opts.eta_floor, opts);
    cdouble half = m;
    const cdouble z(E, 0.5 * opts.eta_floor);
    if (!refine(eq, z, half, opts)) {
        throw NonConvergence("solve_m2c: no admissible root within tolerance at " + describe(E, z.imag()));
    }
    return {m, half};
}

double richardson(double at_eta, double at_half_eta) { return 2.0 * at_half_eta - at_eta; }

// Im of the Stieltjes transform of the zero atom, -p/z.
double zero_atom_im(double p, double E, double eta) { return p * eta / (E * E + eta * eta); }

double zero_atom_mass(double d) { return std::max(0.0, 1.0 - 1.0 / d); }

// rho2c from the boundary pair, with the zero atom's Poisson tail removed.
double continuous_density(double d, double E, double eta, cdouble m, cdouble half)
{
    const double p = zero_atom_mass(d);
    const double im = m.imag() - zero_atom_im(p, E, eta);
    const double imh = half.imag() - zero_atom_im(p, E, 0.5 * eta);
    return std::max(0.0, richardson(im, imh) / kPi);
}

void validate_d(double d)
{
    if (!(d > 0.0) || !std::isfinite(d)) throw BadSpec("aspect ratio d must be positive and finite");
}

// Real critical points of x(m) = -1/m + d^{-1} sum w t/(1+mt); their images
// are the edges of the support.
std::vector<double> critical_edges(const PopulationSpectrum& spectrum, double d)
{
    const double inv_d = 1.0 / d;
    const auto& atoms = spectrum.atoms();
    auto x_of = [&](double m) {
        double s = 0.0;
        for (const auto& a : atoms) s += a.weight * a.sigma / (1.0 + m * a.sigma);
        return -1.0 / m + inv_d * s;
    };
    // x'(m); NaN where cancellation leaves the sign undetermined.
    auto dx_of = [&](double m) {
        double s = 0.0;
        for (const auto& a : atoms) {
            const double q = 1.0 + m * a.sigma;
            s += a.weight * a.sigma * a.sigma / (q * q);
        }
        const double g = 1.0 / (m * m) - inv_d * s;
        if (std::abs(g) < 1e-9 * (1.0 / (m * m) + inv_d * s)) return std::numeric_limits<double>::quiet_NaN();
        return g;
    };

    std::vector<double> poles{0.0};
    for (const auto& a : atoms) poles.push_back(-1.0 / a.sigma);
    std::sort(poles.begin(), poles.end());

    // Each interval of the real line between poles, parametrized by u in (0, 1).
    struct Interval {
        double lo;
        double hi;  // infinite ends encoded by +-inf
    };
    std::vector<Interval> intervals;
    const double inf = std::numeric_limits<double>::infinity();
    intervals.push_back({-inf, poles.front()});
    for (std::size_t i = 0; i + 1 < poles.size(); ++i) intervals.push_back({poles[i], poles[i + 1]});
    intervals.push_back({poles.back(), inf});

    auto param = [](const Interval& iv, double u) {
        if (std::isinf(iv.lo)) return iv.hi - u / (1.0 - u) * (1.0 + std::abs(iv.hi));
        if (std::isinf(iv.hi)) return iv.lo + (1.0 - u) / u * (1.0 + std::abs(iv.lo));
        return iv.lo + (iv.hi - iv.lo) * 0.5 * (1.0 - std::cos(kPi * u));
    };

    constexpr int kSamples = 4000;
    std::vector<double> edges;
    for (const auto& iv : intervals) {
        double u_prev = 0.0;
        double g_prev = std::numeric_limits<double>::quiet_NaN();
        for (int k = 1; k < kSamples; ++k) {
            const double u = static_cast<double>(k) / kSamples;
            const double g = dx_of(param(iv, u));
            if (std::isfinite(g) && std::isfinite(g_prev) && (g > 0.0) != (g_prev > 0.0)) {
                double a = u_prev;
                double b = u;
                const bool rising = g > 0.0;
                for (int it = 0; it < 200 && b - a > 0.0; ++it) {
                    const double mid = 0.5 * (a + b);
                    if (mid <= a || mid >= b) break;
                    const double gm = dx_of(param(iv, mid));
                    if (std::isnan(gm)) break;
                    if ((gm > 0.0) == rising) b = mid;
                    else a = mid;
                }
                const double x = x_of(param(iv, 0.5 * (a + b)));
                if (std::isfinite(x) && x > 0.0) edges.push_back(x);
            }
            u_prev = u;
            g_prev = g;
        }
    }
    std::sort(edges.begin(), edges.end());
    return edges;
}

} // namespace

// ---------------------------------------------------------------------------
// PopulationSpectrum

PopulationSpectrum::PopulationSpectrum(std::vector<Atom> atoms, double tau) : tau_(tau)
{
    if (atoms.empty()) throw BadSpec("spectrum: no atoms");
    if (!(tau > 0.0)) throw BadSpec("spectrum: tau must be positive");
    double total = 0.0;
    for (const auto& a : atoms) {
        if (!(a.sigma > 0.0) || !std::isfinite(a.sigma)) throw BadSpec("spectrum: sigma must be positive");
        if (!(a.weight > 0.0)) throw BadSpec("spectrum: weights must be positive");
        total += a.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        std::ostringstream os;
        os << "spectrum: weights sum to " << total << ", expected 1";
        throw BadSpec(os.str());
    }
    std::sort(atoms.begin(), atoms.end(), [](const Atom& l, const Atom& r) { return l.sigma > r.sigma; });
    for (const auto& a : atoms) {
        if (!atoms_.empty() && atoms_.back().sigma == a.sigma) atoms_.back().weight += a.weight;
        else atoms_.push_back(a);
    }
    if (sigma_max() > 1.0 / tau_) throw BadSpec("spectrum: sigma_max exceeds 1/tau");
    double low_mass = 0.0;
    for (const auto& a : atoms_)
        if (a.sigma <= tau_) low_mass += a.weight;
    if (low_mass > 1.0 - tau_) throw BadSpec("spectrum: mass of [0, tau] exceeds 1 - tau");
}

PopulationSpectrum PopulationSpectrum::from_diagonal(std::span<const double> sigmas, double tau)
{
    if (sigmas.empty()) throw BadSpec("spectrum: empty diagonal");
    std::vector<double> sorted(sigmas.begin(), sigmas.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    std::vector<Atom> atoms;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        atoms.push_back({sorted[i], static_cast<double>(j - i)});
        i = j;
    }
    const double n = static_cast<double>(sorted.size());
    double total = 0.0;
    for (auto& a : atoms) {
        a.weight /= n;
        total += a.weight;
    }
    atoms.back().weight += 1.0 - total;
    return PopulationSpectrum(std::move(atoms), tau);
}

std::size_t PopulationSpectrum::index_of(double sigma) const
{
    for (std::size_t i = 0; i < atoms_.size(); ++i)
        if (std::abs(atoms_[i].sigma - sigma) <= 1e-12 * std::max(1.0, sigma)) return i;
    std::ostringstream os;
    os << "spectrum: no atom at sigma = " << sigma;
    throw BadSpec(os.str());
}

// ---------------------------------------------------------------------------
// Stieltjes transform and density

double m2c_residual(const PopulationSpectrum& spectrum, double d, cdouble z, cdouble m)
{
    const Equation eq{spectrum.atoms(), 1.0 / d};
    return scaled(eq.residual(z, m), z);
}

cdouble solve_m2c(const PopulationSpectrum& spectrum, double d, SpectralPoint z, const SolverOptions& opts)
{
    validate_d(d);
    if (!(z.eta > 0.0)) throw BadSpec("solve_m2c: eta must be positive");
    const Equation eq{spectrum.atoms(), 1.0 / d};
    return solve_with_continuation(eq, z.E, z.eta, opts);
}

double density_rho2c(const PopulationSpectrum& spectrum, double d, double E, const SolverOptions& opts)
{
    validate_d(d);
    const Equation eq{spectrum.atoms(), 1.0 / d};
    const auto [m, half] = boundary_pair(eq, E, opts);
    return continuous_density(d, E, opts.eta_floor, m, half);
}

// ---------------------------------------------------------------------------
// Support

Support find_support(const PopulationSpectrum& spectrum, double d, const SupportScanOptions& scan,
                     const SolverOptions& opts)
{
    validate_d(d);
    const double thr = scan.density_threshold;
    auto inside = [&](double x) { return density_rho2c(spectrum, d, x, opts) > thr; };

    const double x_hi = 2.0 * std::pow(1.0 + std::sqrt(1.0 / d), 2) * spectrum.sigma_max();
    const double x_lo = x_hi * 1e-7;
    const int n = std::max(scan.grid_points, 16);
    std::vector<double> xs(n);
    std::vector<char> in(n);
    for (int i = 0; i < n; ++i) {
        xs[i] = x_lo * std::pow(x_hi / x_lo, static_cast<double>(i) / (n - 1));
        in[i] = inside(xs[i]);
    }

    Support out;
    out.zero_atom = zero_atom_mass(d);

    // Edges from the critical points of the inverse function, validated
    // against the density scan.
    std::vector<double> crit = critical_edges(spectrum, d);
    if (crit.size() % 2 == 1) crit.insert(crit.begin(), 0.0);
    bool consistent = !crit.empty();
    std::vector<std::pair<double, double>> comps;
    for (std::size_t k = 0; consistent && k + 1 < crit.size(); k += 2) {
        const double lo = crit[k];
        const double hi = crit[k + 1];
        if (!(hi > lo) || !inside(0.5 * (lo + hi))) consistent = false;
        if (k + 2 < crit.size() && inside(0.5 * (hi + crit[k + 2]))) consistent = false;
        comps.emplace_back(lo, hi);
    }
    for (int i = 0; consistent && i < n; ++i) {
        if (!in[i]) continue;
        const double slack = (i + 1 < n ? xs[i + 1] - xs[i] : xs[i] - xs[i - 1]);
        const bool covered = std::any_of(comps.begin(), comps.end(), [&](const auto& c) {
            return xs[i] >= c.first - slack && xs[i] <= c.second + slack;
        });
        if (!covered) consistent = false;
    }
    if (consistent) {
        out.components = std::move(comps);
        return out;
    }

    // Fallback: bracket sign changes on the grid and bisect on the density.
    auto bisect = [&](double a, double b, bool a_inside) {
        while (b - a > scan.bisection_tol) {
            const double mid = 0.5 * (a + b);
            if (inside(mid) == a_inside) a = mid;
            else b = mid;
        }
        return 0.5 * (a + b);
    };
    double open_lo = in[0] ? 0.0 : -1.0;
    for (int i = 0; i + 1 < n; ++i) {
        if (in[i] == in[i + 1]) continue;
        const double e = bisect(xs[i], xs[i + 1], in[i]);
        if (in[i + 1]) {
            open_lo = e;
        } else {
            out.components.emplace_back(open_lo, e);
            open_lo = -1.0;
        }
    }
    if (open_lo >= 0.0) out.components.emplace_back(open_lo, x_hi);
    if (out.components.empty()) throw SupportScanFailure("find_support: density vanishes on the whole scan range");
    return out;
}

// ---------------------------------------------------------------------------
// VectorInLawBasis

VectorInLawBasis VectorInLawBasis::on_atom(std::size_t atom_index)
{
    return VectorInLawBasis{{{atom_index, cdouble(1.0, 0.0)}}};
}

VectorInLawBasis VectorInLawBasis::from_coordinates(const PopulationSpectrum& spectrum,
                                                     std::span<const double> sigma_diag,
                                                     std::span<const double> u)
{
    if (sigma_diag.size() != u.size()) throw DimensionMismatch("vector and Sigma diagonal differ in length");
    VectorInLawBasis v;
    std::vector<double> mass(spectrum.size(), 0.0);
    for (std::size_t i = 0; i < u.size(); ++i) mass[spectrum.index_of(sigma_diag[i])] += u[i] * u[i];
    for (std::size_t a = 0; a < mass.size(); ++a)
        if (mass[a] > 0.0) v.coords.emplace_back(a, cdouble(std::sqrt(mass[a]), 0.0));
    return v;
}

std::vector<double> VectorInLawBasis::atom_weights(std::size_t n_atoms) const
{
    std::vector<double> w(n_atoms, 0.0);
    double total = 0.0;
    for (const auto& [idx, amp] : coords) {
        if (idx >= n_atoms) throw BadSpec("vector: atom index out of range");
        w[idx] += std::norm(amp);
        total += std::norm(amp);
    }
    if (std::abs(total - 1.0) > 1e-12) throw BadSpec("vector: squared amplitudes must sum to 1");
    return w;
}

// ---------------------------------------------------------------------------
// SolvedLaw

SolvedLaw::SolvedLaw(PopulationSpectrum spectrum, double d, SolverOptions opts, SupportScanOptions scan)
    : spectrum_(std::move(spectrum)), d_(d), opts_(opts)
{
    support_ = find_support(spectrum_, d_, scan, opts_);
    const Equation eq{spectrum_.atoms(), 1.0 / d_};
    const std::size_t n_atoms = spectrum_.size();
    const int n = std::max(scan.nodes_per_component, 8);

    atom_component_mass_.assign(n_atoms, {});
    for (const auto& [lo, hi] : support_.components) {
        Component c;
        c.lo = lo;
        c.hi = hi;
        c.h = kPi / n;
        const double half_width = 0.5 * (hi - lo);

        // Integrand in theta: rho(x(theta)) * dx/dtheta, x = lo + half_width (1 - cos theta).
        // Values at nodes and midpoints, for rho2c and every atom-resolved density.
        auto sample = [&](double theta, double& rho2, std::vector<double>& rho_atoms, bool record) {
            const double x = lo + half_width * (1.0 - std::cos(theta));
            const double jac = half_width * std::sin(theta);
            rho_atoms.assign(n_atoms, 0.0);
            if (jac <= 0.0 || x <= 0.0) {
                rho2 = 0.0;
                if (record) grid_.push_back({x, 0.0});
                return;
            }
            const auto [m, mh] = boundary_pair(eq, x, opts_);
            const double r2 = continuous_density(d_, x, opts_.eta_floor, m, mh);
            rho2 = r2 * jac;
            if (record) grid_.push_back({x, r2});
            const cdouble z(x, opts_.eta_floor);
            const cdouble zh(x, 0.5 * opts_.eta_floor);
            for (std::size_t a = 0; a < n_atoms; ++a) {
                const double s = spectrum_.atoms()[a].sigma;
                const double im = (-1.0 / (z * (1.0 + m * s))).imag();
                const double imh = (-1.0 / (zh * (1.0 + mh * s))).imag();
                rho_atoms[a] = std::max(0.0, richardson(im, imh) / kPi) * jac;
            }
        };

        c.cum.assign(n + 1, 0.0);
        c.rate.assign(n + 1, 0.0);
        c.atom_cum.assign(n_atoms, std::vector<double>(n + 1, 0.0));
        c.atom_rate.assign(n_atoms, std::vector<double>(n + 1, 0.0));

        std::vector<double> ra;
        double r = 0.0;
        sample(0.0, r, ra, true);
        c.rate[0] = r;
        for (std::size_t a = 0; a < n_atoms; ++a) c.atom_rate[a][0] = ra[a];

        for (int j = 0; j < n; ++j) {
            double r_mid = 0.0;
            double r_end = 0.0;
            std::vector<double> ra_mid;
            std::vector<double> ra_end;
            sample((j + 0.5) * c.h, r_mid, ra_mid, false);
            sample((j + 1) * c.h, r_end, ra_end, true);
            c.rate[j + 1] = r_end;
            c.cum[j + 1] = c.cum[j] + c.h / 6.0 * (c.rate[j] + 4.0 * r_mid + r_end);
            for (std::size_t a = 0; a < n_atoms; ++a) {
                c.atom_rate[a][j + 1] = ra_end[a];
                c.atom_cum[a][j + 1] =
                    c.atom_cum[a][j] + c.h / 6.0 * (c.atom_rate[a][j] + 4.0 * ra_mid[a] + ra_end[a]);
            }
        }
        component_mass_.push_back(c.cum.back());
        for (std::size_t a = 0; a < n_atoms; ++a) atom_component_mass_[a].push_back(c.atom_cum[a].back());
        components_.push_back(std::move(c));
    }

    atom_zero_.assign(n_atoms, 0.0);
    for (std::size_t a = 0; a < n_atoms; ++a) {
        const double cont = std::accumulate(atom_component_mass_[a].begin(), atom_component_mass_[a].end(), 0.0);
        atom_zero_[a] = std::clamp(1.0 - cont, 0.0, 1.0);
    }
}

double SolvedLaw::continuous_mass() const
{
    return std::accumulate(component_mass_.begin(), component_mass_.end(), 0.0);
}

double SolvedLaw::density(double E) const
{
    if (!(E > 0.0)) return 0.0;
    return density_rho2c(spectrum_, d_, E, opts_);
}

// Monotone cubic Hermite interpolation of the cumulative table in theta.
double SolvedLaw::interpolate(const Component& c, const std::vector<double>& cum,
                              const std::vector<double>& rate, double x)
{
    if (x <= c.lo) return 0.0;
    if (x >= c.hi) return cum.back();
    const double arg = std::clamp(1.0 - 2.0 * (x - c.lo) / (c.hi - c.lo), -1.0, 1.0);
    const double theta = std::acos(arg);
    const int n = static_cast<int>(cum.size()) - 1;
    const int j = std::clamp(static_cast<int>(theta / c.h), 0, n - 1);
    const double s = (theta - j * c.h) / c.h;
    const double delta = cum[j + 1] - cum[j];
    if (delta <= 0.0) return cum[j];
    double d0 = rate[j] * c.h;
    double d1 = rate[j + 1] * c.h;
    const double alpha = d0 / delta;
    const double beta = d1 / delta;
    const double norm2 = alpha * alpha + beta * beta;
    if (norm2 > 9.0) {
        const double t = 3.0 / std::sqrt(norm2);
        d0 *= t;
        d1 *= t;
    }
    const double s2 = s * s;
    const double s3 = s2 * s;
    return cum[j] * (2 * s3 - 3 * s2 + 1) + d0 * (s3 - 2 * s2 + s) + cum[j + 1] * (-2 * s3 + 3 * s2) +
           d1 * (s3 - s2);
}

double SolvedLaw::cdf(double x) const
{
    if (x < 0.0) return 0.0;
    double f = support_.zero_atom;
    for (const auto& c : components_) {
        if (x >= c.hi) {
            f += c.cum.back();
            continue;
        }
        f += interpolate(c, c.cum, c.rate, x);
        break;
    }
    return std::min(f, 1.0);
}

double SolvedLaw::quantile(double p) const
{
    if (!(p >= 0.0 && p <= 1.0 + 1e-12)) {
        std::ostringstream os;
        os << "quantile level " << p << " outside [0, 1]";
        throw QuantileOutOfRange(os.str());
    }
    double lo = 0.0;
    double hi = top_edge();
    if (p <= cdf(0.0)) return 0.0;
    while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(mid) >= p) hi = mid;
        else lo = mid;
    }
    return hi;
}

double SolvedLaw::atom_cdf(std::size_t atom, double x) const
{
    if (x < 0.0) return 0.0;
    double f = atom_zero_.at(atom);
    for (const auto& c : components_) {
        if (x >= c.hi) {
            f += c.atom_cum[atom].back();
            continue;
        }
        f += interpolate(c, c.atom_cum[atom], c.atom_rate[atom], x);
        break;
    }
    return std::min(f, 1.0);
}

double cdf_F2c(const SolvedLaw& law, double x) { return law.cdf(x); }

cdouble m1c_u(const SolvedLaw& law, const VectorInLawBasis& u, SpectralPoint z)
{
    const auto w = u.atom_weights(law.spectrum().size());
    const cdouble m = law.m2c(z);
    const cdouble zz = z.z();
    cdouble out = 0.0;
    for (std::size_t a = 0; a < w.size(); ++a)
        if (w[a] > 0.0) out -= w[a] / (zz * (1.0 + m * law.spectrum().atoms()[a].sigma));
    return out;
}

double cdf_F1c_u(const SolvedLaw& law, const VectorInLawBasis& u, double x)
{
    const auto w = u.atom_weights(law.spectrum().size());
    double f = 0.0;
    for (std::size_t a = 0; a < w.size(); ++a)
        if (w[a] > 0.0) f += w[a] * law.atom_cdf(a, x);
    return std::min(f, 1.0);
}

double cdf_F1c(const SolvedLaw& law, double x)
{
    if (x < 0.0) return 0.0;
    return law.d() * law.cdf(x) + (1.0 - law.d());
}

std::vector<double> classical_locations(const SolvedLaw& law, int N, int M)
{
    if (N < 1 || M < 1) throw BadSpec("classical_locations: N and M must be positive");
    const int K = std::min(M, N);
    const double cont = law.continuous_mass();
    std::vector<double> gamma(K);
    for (int j = 1; j <= K; ++j) {
        const double tail = (j - 0.5) / N;
        if (tail > cont + 1e-9) {
            std::ostringstream os;
            os << "classical_locations: (j - 1/2)/N = " << tail << " exceeds continuous mass " << cont;
            throw QuantileOutOfRange(os.str());
        }
        const double target = 1.0 - tail;
        double lo = 0.0;
        double hi = law.top_edge();
        while (hi - lo > 1e-12) {
            const double mid = 0.5 * (lo + hi);
            if (law.cdf(mid) >= target) hi = mid;
            else lo = mid;
        }
        gamma[j - 1] = 0.5 * (lo + hi);
    }
    return gamma;
}

bool RegularityReport::all_edges_regular() const
{
    return std::all_of(edges.begin(), edges.end(), [](const EdgeCheck& e) { return e.regular(); });
}

RegularityReport check_edge_regularity(const SolvedLaw& law, double tau)
{
    RegularityReport rep;
    std::vector<double> all;
    for (const auto& [lo, hi] : law.edges()) {
        all.push_back(lo);
        all.push_back(hi);
    }
    for (std::size_t k = 0; k < all.size(); ++k) {
        EdgeCheck e{};
        e.edge = all[k];
        e.above_tau = all[k] >= tau;
        e.separation = std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < all.size(); ++l)
            if (l != k) e.separation = std::min(e.separation, std::abs(all[k] - all[l]));
        e.separated = e.separation >= tau;
        e.pole_distance = std::numeric_limits<double>::infinity();
        if (all[k] > 0.0) {
            const cdouble m = law.m2c_boundary(all[k]);
            for (const auto& a : law.spectrum().atoms())
                e.pole_distance = std::min(e.pole_distance, std::abs(1.0 + m * a.sigma));
        } else {
            e.pole_distance = 0.0;
        }
        e.away_from_poles = e.pole_distance >= tau;
        rep.edges.push_back(e);
    }
    for (const auto& [lo, hi] : law.edges()) {
        double mn = std::numeric_limits<double>::infinity();
        for (const auto& s : law.density_grid())
            if (s.E >= lo + tau && s.E <= hi - tau) mn = std::min(mn, s.rho);
        rep.bulk_min_density.push_back(std::isfinite(mn) ? mn : 0.0);
    }
    return rep;
}

double spiked_density(const SolvedLaw& law, double sigma_i, double E)
{
    if (!(sigma_i > 0.0)) throw BadSpec("spiked_density: sigma_i must be positive");
    if (!(E > 0.0)) throw BadSpec("spiked_density: E must be positive");
    const double rho = law.density(E);
    if (rho == 0.0) return 0.0;
    const cdouble m = law.m2c_boundary(E);
    const double denom = 1.0 / sigma_i + 2.0 * m.real() + std::norm(m) * sigma_i;
    if (std::abs(denom) < 1e-10) throw DenominatorNearZero("spiked_density: denominator vanishes");
    return rho / (E * denom);
}

} // namespace mpvesd
