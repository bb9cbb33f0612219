#pragma once

#include "mpvesd/ensembles.hpp"

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace mpvesd {

/// Eigenvalues below this are treated as exact zeros.
inline constexpr double kZeroEigenvalue = 1e-10;

/// Right-continuous step distribution with nonnegative jumps.
class WeightedStepCDF {
public:
    WeightedStepCDF() = default;
    /// Sorts by x and merges jumps at equal x. Throws BadSpec on negative weights.
    explicit WeightedStepCDF(std::vector<std::pair<double, double>> jumps);

    const std::vector<double>& points() const { return x_; }
    const std::vector<double>& weights() const { return w_; }
    std::size_t size() const { return x_.size(); }
    double total() const { return cum_.empty() ? 0.0 : cum_.back(); }

    /// F(x) = sum of weights at points <= x.
    double operator()(double x) const;
    /// F(x-) = sum of weights at points < x.
    double left_limit(double x) const;
    /// F at the k-th jump point.
    double cumulative(std::size_t k) const { return cum_[k]; }

    /// Jumps moved to c * x; weights unchanged.
    WeightedStepCDF scaled(double c) const;

    /// Pointwise mean of several step distributions.
    static WeightedStepCDF average(std::span<const WeightedStepCDF> curves);

private:
    std::vector<double> x_;
    std::vector<double> w_;
    std::vector<double> cum_;
};

/// Distribution function with an optional list of atoms (location, mass);
/// continuous elsewhere. The quantile is optional.
struct ContinuousCDF {
    std::function<double(double)> cdf;
    std::vector<std::pair<double, double>> atoms;
    std::function<double(double)> quantile;
};

// The law_cdf_* results reference the law, which must outlive them.

/// F2c of a solved law (atom at 0 when d > 1).
ContinuousCDF law_cdf_F2c(const SolvedLaw& law);
/// F1c = d F2c + (1 - d) 1_{[0, inf)}.
ContinuousCDF law_cdf_F1c(const SolvedLaw& law);
/// F_{1c,e_a} for the unit vector on atom a.
ContinuousCDF law_cdf_atom(const SolvedLaw& law, std::size_t atom);

/// VESD of unit vector v against the eigenbasis of Q1 or Q2; zero
/// eigenvalues are aggregated into one jump at 0.
/// Throws DimensionMismatch, NotNormalized when |v| differs from 1 by more than 1e-10.
WeightedStepCDF vesd_curve(const EnsembleDecomposition& dec, const Eigen::VectorXd& v, Side side);

/// VESD of every standard basis vector e_i (curve i), same conventions.
std::vector<WeightedStepCDF> coordinate_vesd_curves(const EnsembleDecomposition& dec, Side side);

/// Empirical spectral distribution (mass 1/n per eigenvalue).
WeightedStepCDF esd(const Eigen::VectorXd& lambdas);

struct KolmogorovOptions {
    double normalization_tol = 1e-9;
    /// Also evaluate at G's quantiles of each plateau level (requires G.quantile).
    bool plateau_quantiles = false;
};

/// sup_x |F(x) - G(x)|, exact. Throws NotNormalized.
double kolmogorov(const WeightedStepCDF& F, const WeightedStepCDF& G, const KolmogorovOptions& opts = {});
double kolmogorov(const WeightedStepCDF& F, const ContinuousCDF& G, const KolmogorovOptions& opts = {});

struct RatePoint {
    int N;
    double value;
};

enum class FitMode { mean, upper_envelope };

struct LogLogFit {
    double slope;
    double intercept;
    double residual;  ///< root-mean-square residual in log space
    std::vector<RatePoint> used;  ///< points entering the regression
};

/// Least squares of log(value) on log(N); upper_envelope first keeps the
/// maximum of each of `bins` log-spaced N-bins. Throws InsufficientData
/// with fewer than `min_distinct` distinct N.
LogLogFit loglog_fit(std::span<const RatePoint> points, FitMode mode, int bins = 8, int min_distinct = 5);

} // namespace mpvesd
