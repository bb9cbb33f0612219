#include "mpvesd/ensembles.hpp"
#include "mpvesd/errors.hpp"
#include "mpvesd/rng.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <set>

using namespace mpvesd;

TEST_SUITE("ensembles") {

TEST_CASE("substreams are deterministic and distinct")
{
    CHECK(substream_seed(1, 2, 3) == substream_seed(1, 2, 3));
    CHECK(substream_seed(1, 2, 3) != substream_seed(1, 3, 2));
    CHECK(substream_seed(1, 2) != substream_seed(2, 2));
}

TEST_CASE("entry laws have mean zero and unit variance")
{
    for (EntryKind kind : {EntryKind::gaussian, EntryKind::rademacher, EntryKind::pareto_symmetric}) {
        const EntryLaw law(kind, 6.0);
        Engine rng = make_engine(42);
        const int n = 400000;
        double s1 = 0, s2 = 0;
        for (int i = 0; i < n; ++i) {
            const double x = law.draw(rng);
            s1 += x;
            s2 += x * x;
        }
        CHECK(std::abs(s1 / n) < 0.01);
        CHECK(std::abs(s2 / n - 1.0) < 0.02);
    }
}

TEST_CASE("pareto law has the requested tail")
{
    const EntryLaw law(EntryKind::pareto_symmetric, 6.0);
    REQUIRE(law.exact_tail());
    const double s0 = law.tail_start();
    CHECK(s0 > 1.0);
    Engine rng = make_engine(7);
    const int n = 2000000;
    int above = 0;
    const double s = 2.0 * s0;
    for (int i = 0; i < n; ++i) above += std::abs(law.draw(rng)) >= s;
    CHECK(static_cast<double>(above) / n == doctest::Approx(std::pow(s, -6.0)).epsilon(0.1));
    CHECK_THROWS_AS(EntryLaw(EntryKind::pareto_symmetric, 2.0), BadSpec);
}

TEST_CASE("sample_X is reproducible and scaled by 1/sqrt(N)")
{
    const EntryLaw law(EntryKind::gaussian);
    const Eigen::MatrixXd A = sample_X(200, 400, law, 11);
    const Eigen::MatrixXd B = sample_X(200, 400, law, 11);
    CHECK((A - B).norm() == 0.0);
    CHECK(A.squaredNorm() / 200.0 == doctest::Approx(1.0).epsilon(0.02));
    CHECK((A - sample_X(200, 400, law, 12)).norm() > 0.0);
}

TEST_CASE("truncation zeroes large entries")
{
    Eigen::MatrixXd X(2, 4);
    X << 0.1, 0.9, -0.2, -0.8, 0.0, 0.5, 0.6, 0.3;
    // cut = 4^{-0.5} = 0.5
    const std::size_t n = truncate_entries(X, 0.5);
    CHECK(n == 3);
    CHECK(X.cwiseAbs().maxCoeff() <= 0.5);
}

TEST_CASE("build_sigma")
{
    SigmaSpec spec{{{1.0, 3}, {4.0, 1}}, std::nullopt};
    const auto S = build_sigma(spec, 4);
    CHECK(S.diag(0) == 4.0);
    CHECK(S.diag(3) == 1.0);
    CHECK(!S.rotation);
    CHECK_THROWS_AS(build_sigma(spec, 5), BadSpec);

    spec.rotation_seed = 3;
    const auto R = build_sigma(spec, 4);
    REQUIRE(R.rotation);
    const Eigen::MatrixXd U = *R.rotation;
    CHECK((U.transpose() * U - Eigen::MatrixXd::Identity(4, 4)).norm() < 1e-12);
    CHECK((R.sqrt_dense() * R.sqrt_dense() - R.dense()).norm() < 1e-12);
    const auto sp = R.spectrum();
    CHECK(sp.size() == 2);
}

TEST_CASE("random orthogonal is orthogonal")
{
    Engine rng = make_engine(5);
    const Eigen::MatrixXd Q = random_orthogonal(30, rng);
    CHECK((Q.transpose() * Q - Eigen::MatrixXd::Identity(30, 30)).norm() < 1e-12);
}

TEST_CASE("decomposition matches a reference eigensolver")
{
    const EntryLaw law(EntryKind::gaussian);
    const Eigen::MatrixXd X = sample_X(30, 20, law, 9);
    const auto S = build_sigma({{{1.0, 15}, {4.0, 15}}, 17}, 30);
    const EnsembleDecomposition dec = decompose(X, S);
    const Eigen::MatrixXd Y = S.apply_sqrt(X);
    const Eigen::MatrixXd Q1 = Y * Y.transpose(), Q2 = Y.transpose() * Y;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es1(Q1), es2(Q2);
    for (int k = 0; k < 30; ++k) CHECK(dec.lambda_left(k) == doctest::Approx(es1.eigenvalues()(29 - k)).epsilon(1e-10));
    for (int k = 0; k < 20; ++k) CHECK(dec.lambda_right(k) == doctest::Approx(es2.eigenvalues()(19 - k)).epsilon(1e-10));
    for (int k = 1; k < 30; ++k) CHECK(dec.lambda_left(k) <= dec.lambda_left(k - 1));
    CHECK((Q1 * dec.basis_left - dec.basis_left * dec.lambda_left.asDiagonal()).norm() < 1e-10);
    CHECK((dec.basis_left.transpose() * dec.basis_left - Eigen::MatrixXd::Identity(30, 30)).norm() < 1e-10);
    CHECK((Q2 * dec.basis_right - dec.basis_right * dec.lambda_right.asDiagonal()).norm() < 1e-10);

    const Eigen::VectorXd nz = nonzero_spectrum(X, S);
    REQUIRE(nz.size() == 20);
    CHECK((nz - dec.lambda_right).norm() < 1e-10);

    const EnsembleDecomposition only_right = decompose(X, S, {false, true});
    CHECK(only_right.lambda_left.size() == 0);
    CHECK((only_right.lambda_right - dec.lambda_right).norm() == 0.0);
}

TEST_CASE("separable sample")
{
    const EntryLaw law(EntryKind::gaussian);
    const Eigen::MatrixXd X = sample_X(6, 4, law, 1);
    Eigen::VectorXd a(6), b(4);
    a << 3, 3, 2, 2, 1, 1;
    b << 4, 4, 1, 1;
    const auto S1 = PopulationCovariance::diagonal(a), S2 = PopulationCovariance::diagonal(b);
    const Eigen::MatrixXd Y = sample_separable(S1, S2, X);
    const Eigen::MatrixXd ref = S1.sqrt_dense() * X * S2.sqrt_dense();
    CHECK((Y - ref).norm() < 1e-14);
}

TEST_CASE("signal model without signal is pure noise")
{
    const EntryLaw noise(EntryKind::gaussian), signal(EntryKind::rademacher);
    const Eigen::MatrixXd A0 = Eigen::MatrixXd::Zero(20, 0);
    const Eigen::MatrixXd Z1 = sample_signal_model(A0, 30, signal, noise, 5);
    const Eigen::MatrixXd Z2 = sample_signal_model(20, 30, noise, 5);
    CHECK((Z1 - Z2).norm() == 0.0);
}

TEST_CASE("planted loading structure")
{
    const PlantedLoading p = planted_loading(50, 5, 0.4, 0.8, 3);
    REQUIRE(p.rows.size() == 5);
    CHECK(std::set<int>(p.rows.begin(), p.rows.end()).size() == 5);
    for (int i = 0; i < 50; ++i) {
        const bool planted = std::find(p.rows.begin(), p.rows.end(), i) != p.rows.end();
        if (!planted) CHECK(p.A.row(i).norm() == 0.0);
    }
    for (int i = 0; i < 5; ++i) {
        CHECK(p.amplitudes[i] >= 0.4);
        CHECK(p.amplitudes[i] <= 0.8);
        // Rows of an orthogonal V have unit norm, so |A(n_i, :)| = amplitude.
        CHECK(p.A.row(p.rows[i]).norm() == doctest::Approx(p.amplitudes[i]));
    }
}

}
