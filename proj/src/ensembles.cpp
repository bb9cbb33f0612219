#include "mpvesd/ensembles.hpp"

#include "mpvesd/errors.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace mpvesd {

namespace {

// Second moment of the body+tail law as a function of the tail start s0.
double body_tail_variance(double s0, double a)
{
    double tail = std::pow(s0, -a);
    return (1.0 - tail) * s0 * s0 / 3.0 + a * std::pow(s0, 2.0 - a) / (a - 2.0);
}

} // namespace

EntryLaw::EntryLaw(EntryKind kind, double tail_index) : kind_(kind), tail_index_(tail_index)
{
    if (kind_ != EntryKind::pareto_symmetric) return;
    const double a = tail_index_;
    if (!(a > 2.0)) throw BadSpec("pareto tail index must exceed 2 for finite variance, got " + std::to_string(a));

    // Locate the minimum of the variance on [1, 10] and take the larger root above it.
    double lo = 1.0, hi = 10.0;
    for (int it = 0; it < 200; ++it) {
        double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (body_tail_variance(m1, a) < body_tail_variance(m2, a)) hi = m2; else lo = m1;
    }
    double smin = 0.5 * (lo + hi);
    if (body_tail_variance(smin, a) <= 1.0) {
        double l = smin, h = smin;
        while (body_tail_variance(h, a) < 1.0) h *= 2.0;
        for (int it = 0; it < 200; ++it) {
            double m = 0.5 * (l + h);
            if (body_tail_variance(m, a) < 1.0) l = m; else h = m;
        }
        s0_ = 0.5 * (l + h);
        exact_tail_ = true;
    } else {
        s0_ = std::sqrt((a - 2.0) / a);
        exact_tail_ = false;
    }
}

double EntryLaw::draw(Engine& rng) const
{
    switch (kind_) {
    case EntryKind::gaussian: {
        std::normal_distribution<double> nd(0.0, 1.0);
        return nd(rng);
    }
    case EntryKind::rademacher:
        return (rng() >> 63) ? 1.0 : -1.0;
    case EntryKind::pareto_symmetric: {
        std::uniform_real_distribution<double> ud(0.0, 1.0);
        const double a = tail_index_;
        double sign = (rng() >> 63) ? 1.0 : -1.0;
        double u = 1.0 - ud(rng);  // (0, 1]
        if (!exact_tail_) return sign * s0_ * std::pow(u, -1.0 / a);
        double tail_mass = std::pow(s0_, -a);
        if (u <= tail_mass) return sign * std::pow(u, -1.0 / a);
        double body = (u - tail_mass) / (1.0 - tail_mass);  // uniform on (0, 1]
        return sign * s0_ * body;
    }
    }
    return 0.0;
}

void fill_entries(Eigen::MatrixXd& X, const EntryLaw& law, double scale, Engine& rng)
{
    if (law.kind() == EntryKind::gaussian) {
        std::normal_distribution<double> nd(0.0, 1.0);
        for (Eigen::Index j = 0; j < X.cols(); ++j)
            for (Eigen::Index i = 0; i < X.rows(); ++i) X(i, j) = scale * nd(rng);
        return;
    }
    for (Eigen::Index j = 0; j < X.cols(); ++j)
        for (Eigen::Index i = 0; i < X.rows(); ++i) X(i, j) = scale * law.draw(rng);
}

Eigen::MatrixXd sample_X(int M, int N, const EntryLaw& law, std::uint64_t seed)
{
    if (M < 1 || N < 1) throw BadSpec("sample_X needs M, N >= 1");
    Engine rng = make_engine(seed);
    Eigen::MatrixXd X(M, N);
    fill_entries(X, law, 1.0 / std::sqrt(static_cast<double>(N)), rng);
    return X;
}

std::size_t truncate_entries(Eigen::MatrixXd& X, double phi)
{
    const double cut = std::pow(static_cast<double>(X.cols()), -phi);
    std::size_t count = 0;
    for (Eigen::Index j = 0; j < X.cols(); ++j)
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            if (std::abs(X(i, j)) > cut) {
                X(i, j) = 0.0;
                ++count;
            }
    return count;
}

Eigen::MatrixXd PopulationCovariance::dense() const
{
    if (!rotation) return diag.asDiagonal();
    const auto& U = *rotation;
    return U * diag.asDiagonal() * U.transpose();
}

Eigen::MatrixXd PopulationCovariance::sqrt_dense() const
{
    Eigen::VectorXd r = diag.cwiseSqrt();
    if (!rotation) return r.asDiagonal();
    const auto& U = *rotation;
    return U * r.asDiagonal() * U.transpose();
}

Eigen::MatrixXd PopulationCovariance::apply_sqrt(const Eigen::MatrixXd& X) const
{
    if (X.rows() != dim()) throw DimensionMismatch("Sigma is " + std::to_string(dim()) + "-dimensional but X has "
                                                   + std::to_string(X.rows()) + " rows");
    Eigen::VectorXd r = diag.cwiseSqrt();
    if (!rotation) return r.asDiagonal() * X;
    const auto& U = *rotation;
    Eigen::MatrixXd T = U.transpose() * X;
    T = r.asDiagonal() * T;
    return U * T;
}

PopulationSpectrum PopulationCovariance::spectrum(double tau) const
{
    return PopulationSpectrum::from_diagonal(std::span<const double>(diag.data(), diag.size()), tau);
}

PopulationCovariance PopulationCovariance::identity(int M)
{
    return {Eigen::VectorXd::Ones(M), std::nullopt};
}

PopulationCovariance PopulationCovariance::diagonal(Eigen::VectorXd values)
{
    std::sort(values.data(), values.data() + values.size(), std::greater<>());
    return {std::move(values), std::nullopt};
}

Eigen::MatrixXd random_orthogonal(int n, Engine& rng)
{
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::MatrixXd G(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) G(i, j) = nd(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd& R = qr.matrixQR();
    for (int j = 0; j < n; ++j)
        if (R(j, j) < 0) Q.col(j) = -Q.col(j);
    return Q;
}

PopulationCovariance build_sigma(const SigmaSpec& spec, int M)
{
    long total = 0;
    for (const auto& b : spec.blocks) {
        if (!(b.sigma > 0)) throw BadSpec("sigma blocks must be positive");
        if (b.count < 0) throw BadSpec("sigma block counts must be nonnegative");
        total += b.count;
    }
    if (total != M)
        throw BadSpec("sigma block counts sum to " + std::to_string(total) + " but M = " + std::to_string(M));
    Eigen::VectorXd diag(M);
    int k = 0;
    for (const auto& b : spec.blocks)
        for (int c = 0; c < b.count; ++c) diag(k++) = b.sigma;
    PopulationCovariance out = PopulationCovariance::diagonal(std::move(diag));
    if (spec.rotation_seed) {
        Engine rng = make_engine(*spec.rotation_seed);
        out.rotation = random_orthogonal(M, rng);
    }
    return out;
}

void symmetric_eigen(const Eigen::MatrixXd& Q, Eigen::VectorXd& values, Eigen::MatrixXd& vectors)
{
    const lapack_int n = static_cast<lapack_int>(Q.rows());
    if (Q.cols() != Q.rows()) throw DimensionMismatch("symmetric_eigen needs a square matrix");
    Eigen::MatrixXd A = Q;
    Eigen::VectorXd w(n);
    if (n > 0) {
        lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', n, A.data(), n, w.data());
        if (info != 0) throw DecompositionFailure("dsyevd returned info = " + std::to_string(info));
    }
    values = w.reverse();
    vectors = A.rowwise().reverse();
}

Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& Q)
{
    const lapack_int n = static_cast<lapack_int>(Q.rows());
    if (Q.cols() != Q.rows()) throw DimensionMismatch("symmetric_eigenvalues needs a square matrix");
    Eigen::MatrixXd A = Q;
    Eigen::VectorXd w(n);
    if (n > 0) {
        lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'U', n, A.data(), n, w.data());
        if (info != 0) throw DecompositionFailure("dsyevd returned info = " + std::to_string(info));
    }
    return w.reverse();
}

Eigen::VectorXd nonzero_spectrum(const Eigen::MatrixXd& X, const PopulationCovariance& sigma)
{
    Eigen::MatrixXd Y = sigma.apply_sqrt(X);
    Eigen::MatrixXd Q;
    if (Y.rows() <= Y.cols())
        Q.noalias() = Y * Y.transpose();
    else
        Q.noalias() = Y.transpose() * Y;
    return symmetric_eigenvalues(Q);
}

EnsembleDecomposition decompose(const Eigen::MatrixXd& X, const PopulationCovariance& sigma, Sides sides,
                                std::uint64_t seed)
{
    Eigen::MatrixXd Y = sigma.apply_sqrt(X);
    EnsembleDecomposition dec;
    dec.seed = seed;
    if (sides.left) {
        Eigen::MatrixXd Q1(Y.rows(), Y.rows());
        Q1.noalias() = Y * Y.transpose();
        symmetric_eigen(Q1, dec.lambda_left, dec.basis_left);
    }
    if (sides.right) {
        Eigen::MatrixXd Q2(Y.cols(), Y.cols());
        Q2.noalias() = Y.transpose() * Y;
        symmetric_eigen(Q2, dec.lambda_right, dec.basis_right);
    }
    return dec;
}

Eigen::MatrixXd sample_separable(const PopulationCovariance& sigma1, const PopulationCovariance& sigma2,
                                 const Eigen::MatrixXd& X)
{
    if (X.cols() != sigma2.dim())
        throw DimensionMismatch("Sigma2 is " + std::to_string(sigma2.dim()) + "-dimensional but X has "
                                + std::to_string(X.cols()) + " columns");
    Eigen::MatrixXd left = sigma1.apply_sqrt(X);
    // left * Sigma2^{1/2} = (Sigma2^{1/2} left^T)^T since Sigma2^{1/2} is symmetric.
    Eigen::MatrixXd lt = left.transpose();
    return sigma2.apply_sqrt(lt).transpose();
}

Eigen::MatrixXd sample_signal_model(const Eigen::MatrixXd& A, int N, const EntryLaw& s_law, const EntryLaw& z_law,
                                    std::uint64_t seed)
{
    const int M = static_cast<int>(A.rows());
    const int k = static_cast<int>(A.cols());
    const double scale = 1.0 / std::sqrt(static_cast<double>(N));
    Engine noise_rng = make_engine(substream_seed(seed, 2));
    Eigen::MatrixXd data(M, N);
    fill_entries(data, z_law, scale, noise_rng);
    if (k > 0) {
        Engine signal_rng = make_engine(substream_seed(seed, 1));
        Eigen::MatrixXd S(k, N);
        fill_entries(S, s_law, scale, signal_rng);
        data.noalias() += A * S;
    }
    return data;
}

Eigen::MatrixXd sample_signal_model(int M, int N, const EntryLaw& z_law, std::uint64_t seed)
{
    return sample_signal_model(Eigen::MatrixXd(M, 0), N, EntryLaw{}, z_law, seed);
}

PlantedLoading planted_loading(int M, int k, double lo, double hi, std::uint64_t seed)
{
    if (k < 0 || k > M) throw BadSpec("planted_loading needs 0 <= k <= M");
    if (!(lo <= hi)) throw BadSpec("planted_loading needs lo <= hi");
    Engine rng = make_engine(seed);
    std::vector<int> idx(M);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<int> pick(i, M - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    PlantedLoading out;
    out.rows.assign(idx.begin(), idx.begin() + k);
    std::uniform_real_distribution<double> amp(lo, hi);
    for (int i = 0; i < k; ++i) out.amplitudes.push_back(amp(rng));
    Eigen::MatrixXd V = k > 0 ? random_orthogonal(k, rng) : Eigen::MatrixXd(0, 0);
    out.A = Eigen::MatrixXd::Zero(M, k);
    for (int i = 0; i < k; ++i) out.A.row(out.rows[i]) = out.amplitudes[i] * V.row(i);
    return out;
}

} // namespace mpvesd

