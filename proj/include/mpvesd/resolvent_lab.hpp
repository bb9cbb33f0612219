#pragma once

// Resolvent of the (M+N) x (M+N) linearization
//
//     B(z) = [[-I_M, Y], [Y^T, -z I_N]],   G(z) = B(z)^{-1},   Y = Sigma^{1/2} X,
//
// whose top-left block is z (Q1 - z)^{-1} and bottom-right block (Q2 - z)^{-1}.
// Indices 0..M-1 form the first block, M..M+N-1 the second.

#include "mpvesd/ensembles.hpp"
#include "mpvesd/mp_law.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace mpvesd {

/// Dense B(z) for a given Y.
Eigen::MatrixXcd linearization(const Eigen::MatrixXd& Y, cdouble z);

struct LinearizedResolvent {
    SpectralPoint z;
    Eigen::MatrixXcd G;
    int M = 0;
    int N = 0;

    Eigen::MatrixXcd first_block() const { return G.topLeftCorner(M, M); }
    Eigen::MatrixXcd second_block() const { return G.bottomRightCorner(N, N); }
    /// m2 = N^{-1} tr (Q2 - z)^{-1}.
    cdouble m2() const { return G.bottomRightCorner(N, N).trace() / static_cast<double>(N); }
};

/// Solves B(z) G = I by dense LU. Throws SingularSystem.
LinearizedResolvent build_resolvent(const Eigen::MatrixXd& X, const PopulationCovariance& sigma, SpectralPoint z);
LinearizedResolvent build_resolvent_from_Y(const Eigen::MatrixXd& Y, SpectralPoint z);

/// Inverse of B with the rows and columns in `removed` deleted, embedded back
/// into full size with zeros on the removed rows and columns.
Eigen::MatrixXcd minor_resolvent(const Eigen::MatrixXcd& B, std::span<const int> removed);

struct IdentityResiduals {
    double entry_expansion = 0.0;   ///< G_bc = G^(a)_bc + G_ba G_ac / G_aa
    double inverse_expansion = 0.0; ///< 1/G_bb = 1/G^(a)_bb - G_ba G_ab / (G_bb G^(a)_bb G_aa)
    double diagonal = 0.0;          ///< 1/G_aa in terms of the minor G^(a)
    double off_diagonal = 0.0;      ///< G_ab in terms of G^(a) and G^(ab)
    int checks = 0;

    double max() const;
};

/// Checks the resolvent expansion identities on every admissible combination of
/// the sampled indices, with all minors obtained by explicit re-inversion.
IdentityResiduals verify_resolvent_identities(const Eigen::MatrixXd& X, const PopulationCovariance& sigma,
                                              SpectralPoint z, std::span<const int> indices);

/// Pi(z) = diag(-(1 + m2c sigma_i)^{-1}, m2c I_N) in the eigenbasis of Sigma, and
/// Psi(z) = sqrt(Im m2c / (N eta)) + 1/(N eta).
struct DeterministicLimit {
    SpectralPoint z;
    cdouble m2c;
    Eigen::VectorXcd pi_diag;
    double psi;
    int M = 0;
    int N = 0;
};

/// Throws BadSpec if the law does not match Sigma's spectrum and N/M.
DeterministicLimit deterministic_limit(const SolvedLaw& law, const PopulationCovariance& sigma, SpectralPoint z,
                                       int N);

/// <u, Pi v> in standard coordinates (u, v of length M+N).
cdouble pi_form(const DeterministicLimit& pi, const PopulationCovariance& sigma, const Eigen::VectorXd& u,
                const Eigen::VectorXd& v);

struct TestPair {
    std::string name;
    Eigen::VectorXd u;
    Eigen::VectorXd v;
};

/// m2 and <u, G v> for every pair at one z, from a single dense LU solve.
struct ResolventForms {
    cdouble m2;
    std::vector<cdouble> forms;
};

ResolventForms resolvent_forms(const Eigen::MatrixXd& X, const PopulationCovariance& sigma,
                               std::span<const TestPair> pairs, SpectralPoint z);

/// True when both vectors are supported on the same block.
bool same_block(const TestPair& p, int M);

struct LocalLawOptions {
    double q = -1.0;      ///< support parameter; negative selects N^{-1/2}
    double omega = 0.1;   ///< domain constant: N^{-1+omega} <= eta <= 1/omega
};

struct LocalLawRow {
    double E;
    double eta;
    int trial;  ///< -1 for rows aggregated over trials
    std::string statistic;
    double value;
    double envelope;

    double ratio() const { return value / envelope; }
};

struct LocalLawReport {
    std::vector<LocalLawRow> rows;

    /// Fraction of rows with the given statistic whose ratio is below `threshold`.
    double fraction_below(const std::string& statistic, double threshold) const;
};

/// Per trial and z: "averaged" |m2 - m2c| against (N eta)^{-1}; for each pair
/// "aniso:<name>" |<u,Gv> - <u,Pi v>| against q + Psi, or q^2 + (N eta)^{-1/2}
/// when u and v live in the same block. Aggregated rows "expected:<name>"
/// compare the trial mean of <u,Gv> with <u,Pi v> against (N eta)^{-1}.
/// Throws BadSpec when z lies outside the domain or a vector is not unit.
LocalLawReport local_law_residuals(std::span<const Eigen::MatrixXd> samples, const PopulationCovariance& sigma,
                                   const SolvedLaw& law, std::span<const TestPair> pairs,
                                   std::span<const SpectralPoint> zs, const LocalLawOptions& opts = {});

struct RigidityReport {
    std::vector<double> scaled;  ///< |lambda_j - gamma_j| N^{2/3} min(j, K+1-j)^{1/3}
    double max = 0.0;
};

/// Throws LengthMismatch.
RigidityReport rigidity_report(std::span<const double> lambdas, std::span<const double> gammas, int N);

} // namespace mpvesd
