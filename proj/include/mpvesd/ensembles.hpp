#pragma once

#include "mpvesd/mp_law.hpp"
#include "mpvesd/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace mpvesd {

enum class EntryKind { gaussian, rademacher, pareto_symmetric };

/// Law of sqrt(N) * x_ij: mean 0, variance 1.
///
/// pareto_symmetric is a symmetric law with a uniform body on (-s0, s0) and
/// an exact power tail P(|xi| >= s) = s^{-a} for s >= s0, where s0 is fixed
/// by the unit-variance constraint. When no such s0 exists (small a) the
/// law is a pure symmetric Pareto rescaled to unit variance, whose tail is
/// s0^a * s^{-a}.
class EntryLaw {
public:
    EntryLaw() = default;
    explicit EntryLaw(EntryKind kind, double tail_index = 6.0);

    EntryKind kind() const { return kind_; }
    double tail_index() const { return tail_index_; }
    /// Threshold where the power tail starts (pareto_symmetric only).
    double tail_start() const { return s0_; }
    /// True when P(|xi| >= s) = s^{-a} holds exactly beyond tail_start().
    bool exact_tail() const { return exact_tail_; }

    double draw(Engine& rng) const;

private:
    EntryKind kind_ = EntryKind::gaussian;
    double tail_index_ = 6.0;
    double s0_ = 0.0;
    bool exact_tail_ = false;
};

/// M x N matrix with i.i.d. entries xi / sqrt(N). Reproducible from seed.
Eigen::MatrixXd sample_X(int M, int N, const EntryLaw& law, std::uint64_t seed);

/// Fills an existing matrix in place; same stream as sample_X.
void fill_entries(Eigen::MatrixXd& X, const EntryLaw& law, double scale, Engine& rng);

/// Zeroes entries with |x| > N^{-phi}; returns the number zeroed.
std::size_t truncate_entries(Eigen::MatrixXd& X, double phi);

struct SigmaBlock {
    double sigma;
    int count;
};

struct SigmaSpec {
    std::vector<SigmaBlock> blocks;
    std::optional<std::uint64_t> rotation_seed;
};

/// Sigma = U diag(values) U^T, U = I when no rotation was requested.
struct PopulationCovariance {
    Eigen::VectorXd diag;                    ///< descending
    std::optional<Eigen::MatrixXd> rotation; ///< orthogonal U

    int dim() const { return static_cast<int>(diag.size()); }
    Eigen::MatrixXd dense() const;
    Eigen::MatrixXd sqrt_dense() const;
    /// Sigma^{1/2} * X.
    Eigen::MatrixXd apply_sqrt(const Eigen::MatrixXd& X) const;
    PopulationSpectrum spectrum(double tau = kDefaultTau) const;

    static PopulationCovariance identity(int M);
    static PopulationCovariance diagonal(Eigen::VectorXd values);
};

/// Throws BadSpec when the block counts do not sum to M.
PopulationCovariance build_sigma(const SigmaSpec& spec, int M);

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix, sign-fixed).
Eigen::MatrixXd random_orthogonal(int n, Engine& rng);

enum class Side { Q1, Q2 };

struct Sides {
    bool left = true;
    bool right = true;
};

/// Spectral decompositions of Q1 = Y Y^T (M x M) and Q2 = Y^T Y (N x N),
/// Y = Sigma^{1/2} X, with full orthonormal bases (null spaces included).
struct EnsembleDecomposition {
    Eigen::VectorXd lambda_left;   ///< eigenvalues of Q1, descending
    Eigen::MatrixXd basis_left;    ///< columns xi_k
    Eigen::VectorXd lambda_right;  ///< eigenvalues of Q2, descending
    Eigen::MatrixXd basis_right;   ///< columns zeta_k
    std::uint64_t seed = 0;

    const Eigen::VectorXd& lambdas(Side side) const { return side == Side::Q1 ? lambda_left : lambda_right; }
    const Eigen::MatrixXd& basis(Side side) const { return side == Side::Q1 ? basis_left : basis_right; }
};

/// Symmetric eigendecomposition via LAPACK dsyevd, sorted descending.
/// Throws DecompositionFailure.
void symmetric_eigen(const Eigen::MatrixXd& Q, Eigen::VectorXd& values, Eigen::MatrixXd& vectors);
/// Eigenvalues only, descending.
Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& Q);

/// The min(M, N) largest eigenvalues of Q1 (equivalently Q2), descending,
/// computed from the smaller Gram matrix.
Eigen::VectorXd nonzero_spectrum(const Eigen::MatrixXd& X, const PopulationCovariance& sigma);

EnsembleDecomposition decompose(const Eigen::MatrixXd& X, const PopulationCovariance& sigma,
                                Sides sides = {}, std::uint64_t seed = 0);

/// Y = Sigma1^{1/2} X Sigma2^{1/2}.
Eigen::MatrixXd sample_separable(const PopulationCovariance& sigma1, const PopulationCovariance& sigma2,
                                 const Eigen::MatrixXd& X);

/// M x N data matrix whose columns are (A s_j + z_j) / sqrt(N) with
/// independent signal s_j ~ s_law^k and noise z_j ~ z_law^M.
Eigen::MatrixXd sample_signal_model(const Eigen::MatrixXd& A, int N, const EntryLaw& s_law,
                                    const EntryLaw& z_law, std::uint64_t seed);
/// Pure-noise variant (k = 0).
Eigen::MatrixXd sample_signal_model(int M, int N, const EntryLaw& z_law, std::uint64_t seed);

/// Loading matrix A = D V: D is M x k with D(n(i), i) ~ U[lo, hi] at k distinct
/// uniformly chosen rows n(i), V a random k x k orthogonal matrix.
struct PlantedLoading {
    Eigen::MatrixXd A;
    std::vector<int> rows;          ///< n(i), 0-based
    std::vector<double> amplitudes; ///< D(n(i), i)
};

PlantedLoading planted_loading(int M, int k, double lo, double hi, std::uint64_t seed);

} // namespace mpvesd
