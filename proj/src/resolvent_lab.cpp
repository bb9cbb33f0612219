#include "mpvesd/resolvent_lab.hpp"

#include "mpvesd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mpvesd {

Eigen::MatrixXcd linearization(const Eigen::MatrixXd& Y, cdouble z)
{
    const Eigen::Index M = Y.rows(), N = Y.cols();
    Eigen::MatrixXcd B = Eigen::MatrixXcd::Zero(M + N, M + N);
    B.topLeftCorner(M, M).diagonal().setConstant(-1.0);
    B.topRightCorner(M, N) = Y.cast<cdouble>();
    B.bottomLeftCorner(N, M) = Y.transpose().cast<cdouble>();
    B.bottomRightCorner(N, N).diagonal().setConstant(-z);
    return B;
}

namespace {

Eigen::MatrixXcd invert(const Eigen::MatrixXcd& B)
{
    if (B.rows() == 0) return B;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(B);
    const double rc = lu.rcond();
    if (!(rc > 1e-14)) {
        std::ostringstream os;
        os << "linearized system is numerically singular (rcond = " << rc << ")";
        throw SingularSystem(os.str());
    }
    return lu.inverse();
}

} // namespace

LinearizedResolvent build_resolvent_from_Y(const Eigen::MatrixXd& Y, SpectralPoint z)
{
    LinearizedResolvent r;
    r.z = z;
    r.M = static_cast<int>(Y.rows());
    r.N = static_cast<int>(Y.cols());
    r.G = invert(linearization(Y, z.z()));
    return r;
}

LinearizedResolvent build_resolvent(const Eigen::MatrixXd& X, const PopulationCovariance& sigma, SpectralPoint z)
{
    return build_resolvent_from_Y(sigma.apply_sqrt(X), z);
}

Eigen::MatrixXcd minor_resolvent(const Eigen::MatrixXcd& B, std::span<const int> removed)
{
    const int n = static_cast<int>(B.rows());
    std::vector<int> keep;
    for (int a = 0; a < n; ++a)
        if (std::find(removed.begin(), removed.end(), a) == removed.end()) keep.push_back(a);
    const int k = static_cast<int>(keep.size());
    Eigen::MatrixXcd sub(k, k);
    for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) sub(r, c) = B(keep[r], keep[c]);
    Eigen::MatrixXcd inv = invert(sub);
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(n, n);
    for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) out(keep[r], keep[c]) = inv(r, c);
    return out;
}

double IdentityResiduals::max() const
{
    return std::max({entry_expansion, inverse_expansion, diagonal, off_diagonal});
}

IdentityResiduals verify_resolvent_identities(const Eigen::MatrixXd& X, const PopulationCovariance& sigma,
                                              SpectralPoint z, std::span<const int> indices)
{
    const Eigen::MatrixXd Y = sigma.apply_sqrt(X);
    const int M = static_cast<int>(Y.rows());
    const int n = M + static_cast<int>(Y.cols());
    for (int a : indices)
        if (a < 0 || a >= n) throw BadSpec("resolvent index out of range");

    const Eigen::MatrixXcd B = linearization(Y, z.z());
    const Eigen::MatrixXcd G = invert(B);
    const Eigen::MatrixXcd Yc = Y.cast<cdouble>();
    IdentityResiduals res;
    auto bump = [&res](double& slot, cdouble diff) {
        slot = std::max(slot, std::abs(diff));
        ++res.checks;
    };

    // Quadratic form over the opposite block: (Y G^(T) Y^T)_{ij} for i, j in the
    // first block, (Y^T G^(T) Y)_{mu nu} for mu, nu in the second.
    auto sandwich = [&](const Eigen::MatrixXcd& GT, int a, int b) -> cdouble {
        if (a < M) return (Yc.row(a) * GT.bottomRightCorner(n - M, n - M) * Yc.row(b).transpose())(0, 0);
        return (Yc.col(a - M).transpose() * GT.topLeftCorner(M, M) * Yc.col(b - M))(0, 0);
    };
    const cdouble zz = z.z();

    for (int a : indices) {
        const int ra[] = {a};
        const Eigen::MatrixXcd Ga = minor_resolvent(B, ra);
        for (int b : indices) {
            if (b == a) continue;
            for (int c : indices) {
                if (c == a) continue;
                bump(res.entry_expansion, G(b, c) - (Ga(b, c) + G(b, a) * G(a, c) / G(a, a)));
            }
            bump(res.inverse_expansion,
                 1.0 / G(b, b) - (1.0 / Ga(b, b) - G(b, a) * G(a, b) / (G(b, b) * Ga(b, b) * G(a, a))));
        }
        const cdouble shift = a < M ? cdouble(-1.0) : -zz;
        bump(res.diagonal, 1.0 / G(a, a) - (shift - sandwich(Ga, a, a)));

        for (int b : indices) {
            if (b == a || (a < M) != (b < M)) continue;
            const int rab[] = {a, b};
            const Eigen::MatrixXcd Gab = minor_resolvent(B, rab);
            bump(res.off_diagonal, G(a, b) - G(a, a) * Ga(b, b) * sandwich(Gab, a, b));
        }
    }
    return res;
}

DeterministicLimit deterministic_limit(const SolvedLaw& law, const PopulationCovariance& sigma, SpectralPoint z,
                                       int N)
{
    const int M = sigma.dim();
    const double d = static_cast<double>(N) / M;
    if (std::abs(d - law.d()) > 1e-12 * d) {
        std::ostringstream os;
        os << "law has d = " << law.d() << " but N/M = " << d;
        throw BadSpec(os.str());
    }
    for (Eigen::Index i = 0; i < sigma.diag.size(); ++i) law.spectrum().index_of(sigma.diag(i));

    DeterministicLimit out;
    out.z = z;
    out.M = M;
    out.N = N;
    out.m2c = law.m2c(z);
    out.pi_diag.resize(M + N);
    for (int i = 0; i < M; ++i) out.pi_diag(i) = -1.0 / (1.0 + out.m2c * sigma.diag(i));
    for (int mu = 0; mu < N; ++mu) out.pi_diag(M + mu) = out.m2c;
    const double Neta = N * z.eta;
    out.psi = std::sqrt(out.m2c.imag() / Neta) + 1.0 / Neta;
    return out;
}

cdouble pi_form(const DeterministicLimit& pi, const PopulationCovariance& sigma, const Eigen::VectorXd& u,
                const Eigen::VectorXd& v)
{
    const int M = pi.M, N = pi.N;
    if (u.size() != M + N || v.size() != M + N) throw DimensionMismatch("pi_form vectors must have length M+N");
    Eigen::VectorXd u1 = u.head(M), v1 = v.head(M);
    if (sigma.rotation) {
        u1 = sigma.rotation->transpose() * u1;
        v1 = sigma.rotation->transpose() * v1;
    }
    cdouble out = 0.0;
    for (int i = 0; i < M; ++i) out += u1(i) * pi.pi_diag(i) * v1(i);
    out += pi.m2c * u.tail(N).dot(v.tail(N));
    return out;
}

ResolventForms resolvent_forms(const Eigen::MatrixXd& X, const PopulationCovariance& sigma,
                               std::span<const TestPair> pairs, SpectralPoint z)
{
    const LinearizedResolvent r = build_resolvent(X, sigma, z);
    ResolventForms out;
    out.m2 = r.m2();
    for (const auto& p : pairs) {
        if (p.u.size() != r.G.rows() || p.v.size() != r.G.rows())
            throw DimensionMismatch("test pair " + p.name + " has wrong length");
        out.forms.push_back(p.u.cast<cdouble>().dot(r.G * p.v.cast<cdouble>()));
    }
    return out;
}

bool same_block(const TestPair& p, int M)
{
    auto in_first = [M](const Eigen::VectorXd& w) { return w.tail(w.size() - M).norm() == 0.0; };
    auto in_second = [M](const Eigen::VectorXd& w) { return w.head(M).norm() == 0.0; };
    return (in_first(p.u) && in_first(p.v)) || (in_second(p.u) && in_second(p.v));
}

double LocalLawReport::fraction_below(const std::string& statistic, double threshold) const
{
    int total = 0, below = 0;
    for (const auto& r : rows) {
        if (r.statistic != statistic) continue;
        ++total;
        if (r.ratio() < threshold) ++below;
    }
    return total == 0 ? 0.0 : static_cast<double>(below) / total;
}

LocalLawReport local_law_residuals(std::span<const Eigen::MatrixXd> samples, const PopulationCovariance& sigma,
                                   const SolvedLaw& law, std::span<const TestPair> pairs,
                                   std::span<const SpectralPoint> zs, const LocalLawOptions& opts)
{
    LocalLawReport report;
    if (samples.empty()) return report;
    const int M = sigma.dim();
    const int N = static_cast<int>(samples.front().cols());
    const double q = opts.q > 0 ? opts.q : 1.0 / std::sqrt(static_cast<double>(N));
    const double eta_min = std::pow(static_cast<double>(N), -1.0 + opts.omega);
    for (const auto& z : zs)
        if (z.eta < eta_min * (1 - 1e-12) || z.eta > 1.0 / opts.omega) {
            std::ostringstream os;
            os << "eta = " << z.eta << " lies outside [N^{-1+omega}, 1/omega] = [" << eta_min << ", "
               << 1.0 / opts.omega << "]";
            throw BadSpec(os.str());
        }
    std::vector<bool> same;
    for (const auto& p : pairs) {
        if (p.u.size() != M + N || p.v.size() != M + N) throw DimensionMismatch("test pair " + p.name + " has wrong length");
        if (std::abs(p.u.norm() - 1.0) > 1e-10 || std::abs(p.v.norm() - 1.0) > 1e-10)
            throw NotNormalized("test pair " + p.name + " is not unit");
        same.push_back(same_block(p, M));
    }

    for (const auto& z : zs) {
        const DeterministicLimit pi = deterministic_limit(law, sigma, z, N);
        const double Neta = N * z.eta;
        std::vector<cdouble> reference, mean(pairs.size(), 0.0);
        for (const auto& p : pairs) reference.push_back(pi_form(pi, sigma, p.u, p.v));
        for (std::size_t t = 0; t < samples.size(); ++t) {
            const ResolventForms r = resolvent_forms(samples[t], sigma, pairs, z);
            report.rows.push_back({z.E, z.eta, static_cast<int>(t), "averaged", std::abs(r.m2 - pi.m2c), 1.0 / Neta});
            for (std::size_t k = 0; k < pairs.size(); ++k) {
                mean[k] += r.forms[k] / static_cast<double>(samples.size());
                const double env = same[k] ? q * q + 1.0 / std::sqrt(Neta) : q + pi.psi;
                report.rows.push_back({z.E, z.eta, static_cast<int>(t), "aniso:" + pairs[k].name,
                                       std::abs(r.forms[k] - reference[k]), env});
            }
        }
        for (std::size_t k = 0; k < pairs.size(); ++k)
            report.rows.push_back(
                {z.E, z.eta, -1, "expected:" + pairs[k].name, std::abs(mean[k] - reference[k]), 1.0 / Neta});
    }
    return report;
}

RigidityReport rigidity_report(std::span<const double> lambdas, std::span<const double> gammas, int N)
{
    if (lambdas.size() != gammas.size()) {
        std::ostringstream os;
        os << "rigidity needs equal lengths, got " << lambdas.size() << " eigenvalues and " << gammas.size()
           << " classical locations";
        throw LengthMismatch(os.str());
    }
    const int K = static_cast<int>(lambdas.size());
    RigidityReport out;
    out.scaled.resize(K);
    const double scale = std::pow(static_cast<double>(N), 2.0 / 3.0);
    for (int j = 1; j <= K; ++j) {
        const double w = std::cbrt(static_cast<double>(std::min(j, K + 1 - j)));
        out.scaled[j - 1] = std::abs(lambdas[j - 1] - gammas[j - 1]) * scale * w;
        out.max = std::max(out.max, out.scaled[j - 1]);
    }
    return out;
}

} // namespace mpvesd
