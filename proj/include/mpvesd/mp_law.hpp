#pragma once

// Deformed Marcenko-Pastur law of a weighted-atom population spectrum.
//
// The law is described by the Stieltjes transform m2c(z) of the limiting
// spectral distribution of Q2 = X^T Sigma X, defined as the admissible root of
//
//     1/m = -z + d^{-1} * sum_t w_t * sigma_t / (1 + m * sigma_t),
//
// with Im m >= 0 and Im(z m) >= 0 on the upper half plane. Everything else
// (density, support edges, CDF, quantiles, the vector-resolved laws of Q1)
// is derived from m2c.

#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace mpvesd {

using cdouble = std::complex<double>;

inline constexpr double kDefaultTau = 1e-2;

struct Atom {
    double sigma;
    double weight;
};

/// Population spectrum pi as weighted atoms, sorted by sigma descending.
///
/// Construction validates that weights sum to one (1e-12), every sigma is
/// positive, sigma_max <= 1/tau and pi([0, tau]) <= 1 - tau. Atoms with equal
/// sigma are merged.
class PopulationSpectrum {
public:
    explicit PopulationSpectrum(std::vector<Atom> atoms, double tau = kDefaultTau);

    /// Empirical spectral distribution of diag(sigmas).
    static PopulationSpectrum from_diagonal(std::span<const double> sigmas, double tau = kDefaultTau);

    const std::vector<Atom>& atoms() const { return atoms_; }
    std::size_t size() const { return atoms_.size(); }
    double tau() const { return tau_; }
    double sigma_max() const { return atoms_.front().sigma; }

    /// Index of the atom located at `sigma` (relative tolerance 1e-12).
    std::size_t index_of(double sigma) const;

private:
    std::vector<Atom> atoms_;
    double tau_;
};

/// Spectral parameter z = E + i*eta with eta > 0.
struct SpectralPoint {
    double E;
    double eta;

    cdouble z() const { return {E, eta}; }
};

struct SolverOptions {
    double tol = 1e-12;        ///< residual tolerance, relative to max(1, |z|)
    int max_iter = 10000;      ///< damped iterations per continuation step
    double eta_floor = 1e-6;   ///< imaginary part used for boundary values
    double damping = 0.5;
    double eta_start = 1.0;
    double continuation_ratio = 0.5;
};

/// Scaled residual |1/m + z - d^{-1} int t/(1+mt) dpi| / max(1, |z|).
double m2c_residual(const PopulationSpectrum& spectrum, double d, cdouble z, cdouble m);

/// Solves the self-consistent equation at z. Throws NonConvergence.
cdouble solve_m2c(const PopulationSpectrum& spectrum, double d, SpectralPoint z,
                  const SolverOptions& opts = {});

/// rho2c(E) from Im m2c at eta_floor and eta_floor/2 (two-point Richardson),
/// clamped at zero.
double density_rho2c(const PopulationSpectrum& spectrum, double d, double E,
                     const SolverOptions& opts = {});

struct SupportScanOptions {
    int grid_points = 4000;
    double bisection_tol = 1e-9;
    double density_threshold = 1e-8;
    int nodes_per_component = 1024;  ///< CDF table resolution
};

struct Support {
    std::vector<std::pair<double, double>> components;  ///< (a_lo, a_hi), increasing
    double zero_atom = 0.0;
};

/// Locates the connected components of supp rho2c. Throws SupportScanFailure.
Support find_support(const PopulationSpectrum& spectrum, double d,
                     const SupportScanOptions& scan = {}, const SolverOptions& opts = {});

struct DensitySample {
    double E;
    double rho;
};

/// Unit vector expressed in the eigenbasis of Sigma, grouped by atom.
struct VectorInLawBasis {
    std::vector<std::pair<std::size_t, cdouble>> coords;

    /// Unit coordinate vector sitting on one atom.
    static VectorInLawBasis on_atom(std::size_t atom_index);

    /// Expresses u (coordinates in the eigenbasis of Sigma = diag(sigma_diag)).
    static VectorInLawBasis from_coordinates(const PopulationSpectrum& spectrum,
                                             std::span<const double> sigma_diag,
                                             std::span<const double> u);

    /// Squared mass sitting on each atom; throws BadSpec unless unit (1e-12).
    std::vector<double> atom_weights(std::size_t n_atoms) const;
};

/// A fully resolved deformed MP law. Immutable after construction.
class SolvedLaw {
public:
    SolvedLaw(PopulationSpectrum spectrum, double d, SolverOptions opts = {},
              SupportScanOptions scan = {});

    const PopulationSpectrum& spectrum() const { return spectrum_; }
    double d() const { return d_; }
    const SolverOptions& solver_options() const { return opts_; }
    const std::vector<std::pair<double, double>>& edges() const { return support_.components; }
    double zero_atom() const { return support_.zero_atom; }
    double top_edge() const { return support_.components.back().second; }

    /// Mass of each bulk component, in order of edges().
    const std::vector<double>& component_masses() const { return component_mass_; }
    double continuous_mass() const;

    /// (E, rho2c) at the quadrature nodes of every component.
    const std::vector<DensitySample>& density_grid() const { return grid_; }

    cdouble m2c(SpectralPoint z) const { return solve_m2c(spectrum_, d_, z, opts_); }
    /// m2c(E + i*eta_floor).
    cdouble m2c_boundary(double E) const { return m2c({E, opts_.eta_floor}); }
    double density(double E) const;

    /// F2c(x).
    double cdf(double x) const;
    /// Smallest x with F2c(x) >= p, by bisection to 1e-10.
    double quantile(double p) const;

    /// CDF of F_{1c, e_a} for the unit vector sitting on atom a.
    double atom_cdf(std::size_t atom, double x) const;
    /// Zero-atom mass of F_{1c, e_a}.
    double atom_zero_mass(std::size_t atom) const { return atom_zero_[atom]; }

private:
    struct Component {
        double lo;
        double hi;
        double h;                               // theta step
        std::vector<double> cum;                // cumulative mass at theta nodes
        std::vector<double> rate;               // d(mass)/d(theta) at nodes
        std::vector<std::vector<double>> atom_cum;
        std::vector<std::vector<double>> atom_rate;
    };

    static double interpolate(const Component& c, const std::vector<double>& cum,
                              const std::vector<double>& rate, double x);

    PopulationSpectrum spectrum_;
    double d_;
    SolverOptions opts_;
    Support support_;
    std::vector<Component> components_;
    std::vector<double> component_mass_;
    std::vector<std::vector<double>> atom_component_mass_;
    std::vector<double> atom_zero_;
    std::vector<DensitySample> grid_;
};

double cdf_F2c(const SolvedLaw& law, double x);

/// m_{1c,u}(z) = -sum_t |u_t|^2 / (z (1 + m2c(z) sigma_t)).
cdouble m1c_u(const SolvedLaw& law, const VectorInLawBasis& u, SpectralPoint z);

/// F_{1c,u}(x); the zero atom makes the total mass exactly one.
double cdf_F1c_u(const SolvedLaw& law, const VectorInLawBasis& u, double x);

/// Asymptotic ESD of Q1: d * F2c + (1 - d) 1_{[0, inf)}.
double cdf_F1c(const SolvedLaw& law, double x);

/// gamma_1 > ... > gamma_K with 1 - F2c(gamma_j) = (j - 1/2)/N, K = min(M, N).
/// Throws QuantileOutOfRange.
std::vector<double> classical_locations(const SolvedLaw& law, int N, int M);

struct EdgeCheck {
    double edge;
    bool above_tau;        ///< a_k >= tau
    bool separated;        ///< min_{l != k} |a_k - a_l| >= tau
    bool away_from_poles;  ///< min_t |1 + m2c(a_k) sigma_t| >= tau
    double separation;
    double pole_distance;

    bool regular() const { return above_tau && separated && away_from_poles; }
};

struct RegularityReport {
    std::vector<EdgeCheck> edges;            ///< ascending edge order
    std::vector<double> bulk_min_density;    ///< min rho on [a_lo + tau, a_hi - tau] per component

    bool all_edges_regular() const;
};

RegularityReport check_edge_regularity(const SolvedLaw& law, double tau);

/// Limiting density of F_{1c,u_i} for the population eigenvector with
/// eigenvalue sigma_i. Throws DenominatorNearZero.
double spiked_density(const SolvedLaw& law, double sigma_i, double E);

} // namespace mpvesd
