#include "oracles.hpp"

#include "mpvesd/errors.hpp"
#include "mpvesd/mp_law.hpp"

#include <doctest.h>

#include <cmath>

using namespace mpvesd;

TEST_SUITE("mp_law") {

TEST_CASE("spectrum validation")
{
    CHECK_THROWS_AS(PopulationSpectrum({{1.0, 0.99}}), BadSpec);
    CHECK_THROWS_AS(PopulationSpectrum({{-1.0, 1.0}}), BadSpec);
    CHECK_THROWS_AS(PopulationSpectrum({{1000.0, 1.0}}), BadSpec);
    const PopulationSpectrum merged({{1.0, 0.25}, {4.0, 0.5}, {1.0, 0.25}});
    REQUIRE(merged.size() == 2);
    CHECK(merged.atoms()[0].sigma == 4.0);
    CHECK(merged.atoms()[1].weight == doctest::Approx(0.5));
    CHECK(merged.index_of(1.0) == 1);
    CHECK_THROWS(merged.index_of(2.0));
    const std::vector<double> diag = {1, 4, 1, 4};
    const auto from = PopulationSpectrum::from_diagonal(diag);
    CHECK(from.size() == 2);
    CHECK(from.atoms()[0].weight == doctest::Approx(0.5));
}

TEST_CASE("m2c matches the quadratic root for the identity spectrum")
{
    const PopulationSpectrum pi({{1.0, 1.0}});
    for (double d : {0.5, 1.0, 2.0})
        for (double E : {0.05, 0.5, 1.0, 3.0, 6.0})
            for (double eta : {1e-4, 1e-2, 1.0}) {
                const cdouble m = solve_m2c(pi, d, {E, eta});
                const cdouble ref = oracle::mp_quadratic_root(d, {E, eta});
                CHECK(std::abs(m - ref) < 1e-10);
                CHECK(m.imag() > 0);
                CHECK(m2c_residual(pi, d, {E, eta}, m) < 1e-12);
            }
}

TEST_CASE("m2c matches the companion-matrix cubic root for two atoms")
{
    const PopulationSpectrum pi({{1.0, 0.5}, {4.0, 0.5}});
    for (double E : {0.2, 1.0, 2.5, 7.0, 12.0})
        for (double eta : {1e-3, 0.1, 1.0}) {
            const cdouble m = solve_m2c(pi, 0.5, {E, eta});
            const cdouble ref = oracle::two_atom_cubic_root(1.0, 0.5, 4.0, 0.5, 0.5, {E, eta});
            CHECK(std::abs(m - ref) < 1e-9);
        }
}

TEST_CASE("density, edges and mass for the identity spectrum")
{
    for (double d : {0.5, 2.0}) {
        const SolvedLaw law(PopulationSpectrum({{1.0, 1.0}}), d);
        const auto [lo, hi] = oracle::mp_edges(d);
        REQUIRE(law.edges().size() == 1);
        CHECK(law.edges()[0].first == doctest::Approx(lo).epsilon(1e-8));
        CHECK(law.edges()[0].second == doctest::Approx(hi).epsilon(1e-8));
        CHECK(law.zero_atom() == doctest::Approx(std::max(0.0, 1.0 - 1.0 / d)));
        for (double E = lo + 0.01; E < hi; E += 0.137)
            CHECK(law.density(E) == doctest::Approx(oracle::mp_density(d, E)).epsilon(1e-6));
        const double mass = oracle::integrate_edges([&](double E) { return law.density(E); }, lo, hi);
        CHECK(mass == doctest::Approx(std::min(1.0, 1.0 / d)).epsilon(1e-6));
        CHECK(law.continuous_mass() == doctest::Approx(std::min(1.0, 1.0 / d)).epsilon(1e-8));
    }
}

TEST_CASE("CDF against closed-form density quadrature")
{
    const double d = 0.5;
    const SolvedLaw law(PopulationSpectrum({{1.0, 1.0}}), d);
    const auto [lo, hi] = oracle::mp_edges(d);
    for (double x : {0.3, 1.0, 2.0, 4.0, 5.5}) {
        const double ref = oracle::integrate_edges([&](double E) { return oracle::mp_density(d, E); }, lo, x);
        CHECK(law.cdf(x) == doctest::Approx(ref).epsilon(1e-6));
    }
    CHECK(law.cdf(lo - 1) == 0.0);
    CHECK(law.cdf(hi + 1) == doctest::Approx(1.0));
}

TEST_CASE("quantile inverts the CDF")
{
    const SolvedLaw law(PopulationSpectrum({{1.0, 0.5}, {4.0, 0.5}}), 0.5);
    for (double p : {0.01, 0.2, 0.5, 0.77, 0.99}) CHECK(law.cdf(law.quantile(p)) == doctest::Approx(p).epsilon(1e-8));
    CHECK_THROWS_AS(law.quantile(1.5), QuantileOutOfRange);
}

TEST_CASE("two separated atoms give two components")
{
    const SolvedLaw law(PopulationSpectrum({{1.0, 0.5}, {20.0, 0.5}}, 0.01), 10.0);
    CHECK(law.edges().size() == 2);
    double total = 0;
    for (double m : law.component_masses()) total += m;
    CHECK(total == doctest::Approx(law.continuous_mass()));
}

TEST_CASE("classical locations are decreasing and inside the support")
{
    const SolvedLaw law(PopulationSpectrum({{1.0, 1.0}}), 2.0);
    const auto gamma = classical_locations(law, 100, 50);
    REQUIRE(gamma.size() == 50);
    for (std::size_t j = 1; j < gamma.size(); ++j) CHECK(gamma[j] < gamma[j - 1]);
    CHECK(gamma.front() <= law.top_edge());
    CHECK(gamma.back() >= law.edges().front().first);
    for (std::size_t j = 0; j < gamma.size(); ++j)
        CHECK(1.0 - law.cdf(gamma[j]) == doctest::Approx((j + 0.5) / 100.0).epsilon(1e-8));
}

TEST_CASE("F1c relation")
{
    const SolvedLaw law(PopulationSpectrum({{1.0, 1.0}}), 0.5);
    CHECK(cdf_F1c(law, -0.1) == 0.0);
    CHECK(cdf_F1c(law, 0.0) == doctest::Approx(0.5));
    CHECK(cdf_F1c(law, 2.0) == doctest::Approx(0.5 * law.cdf(2.0) + 0.5));
}

TEST_CASE("atom CDFs mix to F1c and the zero mass is analytic")
{
    // pi-weighted atom CDFs reproduce F1c; the zero atom of F_{1c,e_a} is
    // (1 - 1/d')^+ scaled per atom, in total 1 - d when d < 1.
    const double d = 0.5;
    const SolvedLaw law(PopulationSpectrum({{1.0, 0.5}, {4.0, 0.5}}), d);
    for (double x : {0.0, 0.5, 2.0, 6.0, 15.0}) {
        double mix = 0;
        for (std::size_t a = 0; a < 2; ++a) mix += law.spectrum().atoms()[a].weight * law.atom_cdf(a, x);
        CHECK(mix == doctest::Approx(cdf_F1c(law, x)).epsilon(1e-7));
    }
    double zero = 0;
    for (std::size_t a = 0; a < 2; ++a) zero += law.spectrum().atoms()[a].weight * law.atom_zero_mass(a);
    CHECK(zero == doctest::Approx(1 - d).epsilon(1e-8));
    CHECK(law.atom_cdf(0, 1e6) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("spiked density integrates to the continuous part of F1c,e_a")
{
    const SolvedLaw law(PopulationSpectrum({{1.0, 0.9}, {4.0, 0.1}}), 2.0);
    for (std::size_t a = 0; a < 2; ++a) {
        const double sigma = law.spectrum().atoms()[a].sigma;
        double mass = 0;
        for (const auto& [lo, hi] : law.edges())
            mass += oracle::integrate_edges([&](double E) { return spiked_density(law, sigma, E); }, lo, hi);
        CHECK(mass == doctest::Approx(1.0 - law.atom_zero_mass(a)).epsilon(1e-5));
    }
    // Near the right edge the density is increasing in sigma.
    const double E = law.top_edge() - 0.25 * (law.edges().back().second - law.edges().back().first);
    CHECK(spiked_density(law, 4.0, E) > spiked_density(law, 1.0, E));
}

TEST_CASE("regularity of the standard settings")
{
    const SolvedLaw law(PopulationSpectrum({{1.0, 0.5}, {4.0, 0.5}}), 0.5);
    const auto rep = check_edge_regularity(law, 0.01);
    CHECK(rep.all_edges_regular());
    CHECK(rep.edges.size() == 2 * law.edges().size());
}

TEST_CASE("vector in law basis")
{
    const PopulationSpectrum pi({{1.0, 0.5}, {4.0, 0.5}});
    const std::vector<double> diag = {4, 4, 1, 1};
    const std::vector<double> u = {0.5, 0.5, 0.5, 0.5};
    const auto v = VectorInLawBasis::from_coordinates(pi, diag, u);
    const auto w = v.atom_weights(2);
    CHECK(w[0] == doctest::Approx(0.5));
    CHECK(w[1] == doctest::Approx(0.5));
    const SolvedLaw law(pi, 0.5);
    CHECK(cdf_F1c_u(law, v, 3.0) == doctest::Approx(0.5 * law.atom_cdf(0, 3.0) + 0.5 * law.atom_cdf(1, 3.0)).epsilon(1e-8));
}

}
