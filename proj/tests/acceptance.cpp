// Acceptance checks. Run with criterion numbers as arguments (default: all);
// prints one PASS/FAIL line per criterion and exits nonzero on any failure.

#include "oracles.hpp"

#include "mpvesd/experiments.hpp"
#include "mpvesd/resolvent_lab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>
#include <string>

using namespace mpvesd;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

constexpr std::uint64_t kSeed = 1;

std::string fmt(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

double record_value(const ExperimentResult& r, const std::string& stat, int N, int trial)
{
    for (const auto& rec : r.records)
        if (rec.statistic == stat && rec.N == N && rec.trial == trial) return rec.value;
    throw std::runtime_error("missing record " + stat);
}

Outcome solver_oracle()
{
    double err1 = 0, err2 = 0;
    const PopulationSpectrum delta({{1.0, 1.0}});
    const PopulationSpectrum two({{1.0, 0.5}, {4.0, 0.5}});
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 20; ++j) {
            const double E = 0.1 + 3.9 * i / 19.0;
            const double eta = std::pow(10.0, -4.0 + 4.0 * j / 19.0);
            const SpectralPoint z{E, eta};
            for (double d : {0.5, 2.0})
                err1 = std::max(err1, std::abs(solve_m2c(delta, d, z) - oracle::mp_quadratic_root(d, z.z())));
            err2 = std::max(err2, std::abs(solve_m2c(two, 0.5, z) - oracle::two_atom_cubic_root(1.0, 0.5, 4.0, 0.5, 0.5, z.z())));
        }
    return {err1 <= 1e-10 && err2 <= 1e-9,
            "max |m - quadratic root| = " + fmt(err1) + " (tol 1e-10), max |m - cubic root| = " + fmt(err2) + " (tol 1e-9)"};
}

Outcome mass_and_support()
{
    const SolvedLaw law(PopulationSpectrum({{1.0, 1.0}}), 2.0);
    const double lo = std::pow(1 - std::sqrt(0.5), 2), hi = std::pow(1 + std::sqrt(0.5), 2);
    bool ok = law.edges().size() == 1;
    double edge_err = 1.0, mass = 0.0;
    if (ok) {
        edge_err = std::max(std::abs(law.edges()[0].first - lo), std::abs(law.edges()[0].second - hi));
        mass = oracle::integrate_edges([&](double E) { return law.density(E); }, law.edges()[0].first,
                                       law.edges()[0].second, 20000);
    }
    ok = ok && edge_err <= 1e-6 && law.zero_atom() == 0.5 && std::abs(mass - 0.5) <= 1e-6;
    return {ok, "edge error " + fmt(edge_err) + ", zero_atom " + fmt(law.zero_atom()) + ", integral of rho " +
                    fmt(mass) + " (|.-0.5| = " + fmt(std::abs(mass - 0.5)) + ")"};
}

Outcome per_sample_rate()
{
    std::ostringstream os;
    bool ok = true;
    const std::vector<std::vector<Atom>> settings = {{{1.0, 1.0}}, {{1.0, 0.5}, {4.0, 0.5}}};
    for (std::size_t s = 0; s < settings.size(); ++s) {
        ExperimentConfig cfg;
        cfg.family = Family::conv_rate;
        cfg.schedule = {50, 100, 200, 400, 800};
        cfg.d = 0.5;
        cfg.spectrum = settings[s];
        cfg.trials = 10;
        cfg.seed = kSeed;
        const auto r = run_conv_rate(cfg);
        const double slope = r.summary.at("envelope_slope");
        const bool in = slope >= -0.75 && slope <= -0.30;
        ok = ok && in;
        os << (s ? ", " : "") << (s ? "pi=0.5d1+0.5d4" : "pi=d1") << " slope " << fmt(slope);
    }
    os << " (window [-0.75, -0.30])";
    return {ok, os.str()};
}

Outcome expected_rate()
{
    ExperimentConfig cfg;
    cfg.family = Family::expected_conv;
    cfg.schedule = {50, 100, 200, 400};
    cfg.d = 0.5;
    cfg.trials = 1;
    cfg.repetition_cap = 2000;
    cfg.seed = kSeed;
    const auto r = run_expected_conv(cfg);
    const double slope = r.summary.at("mean_slope");
    std::ostringstream os;
    os << "mean slope " << fmt(slope) << " (window [-1.3, -0.75]); distances";
    for (int N : cfg.schedule) os << " N=" << N << ":" << fmt(record_value(r, "expected_kolmogorov", N, -1));
    return {slope >= -1.3 && slope <= -0.75, os.str()};
}

Outcome rigidity()
{
    ExperimentConfig cfg;
    cfg.family = Family::rigidity;
    cfg.schedule = {500};
    cfg.d = 2.0;
    cfg.trials = 50;
    cfg.entry = EntryKind::gaussian;
    cfg.seed = kSeed;
    const auto r = run_rigidity(cfg);
    const double med = record_value(r, "median_max_scaled_deviation", 500, -1);
    return {med < 10.0, "median max scaled deviation " + fmt(med) + " (< 10)"};
}

Outcome identities()
{
    double worst = 0;
    int checks = 0;
    const EntryLaw law(EntryKind::gaussian);
    std::vector<int> idx(20);
    for (int a = 0; a < 20; ++a) idx[a] = a;
    for (int i = 0; i < 100; ++i) {
        const Eigen::MatrixXd X = sample_X(10, 10, law, substream_seed(kSeed, 6, static_cast<std::uint64_t>(i)));
        const IdentityResiduals r = verify_resolvent_identities(X, PopulationCovariance::identity(10), {1.0, 1.0}, idx);
        worst = std::max(worst, r.max());
        checks += r.checks;
    }
    return {worst < 1e-8, "max residual " + fmt(worst) + " over " + std::to_string(checks) + " checks (< 1e-8)"};
}

Outcome signal_detection()
{
    ExperimentConfig cfg;
    cfg.family = Family::signal_detect;
    cfg.schedule = {1000};
    cfg.d = 2.0;
    cfg.trials = 10;
    cfg.entry = EntryKind::gaussian;
    cfg.signal = {10, 0.4, 0.8};
    cfg.seed = kSeed;
    const auto r = run_signal_detect(cfg);
    int good = 0;
    std::ostringstream os;
    os << "hits per repetition:";
    for (int t = 0; t < 10; ++t) {
        const double h = record_value(r, "hits", 1000, t);
        good += h >= 8;
        os << ' ' << h;
    }
    os << "; repetitions with >= 8/10: " << good << " (need >= 8)";
    return {good >= 8, os.str()};
}

Outcome spiked_ordering()
{
    ExperimentConfig cfg;
    cfg.family = Family::spiked_vesd;
    cfg.schedule = {2000};
    cfg.d = 2.0;
    cfg.spectrum = {{1.0, 0.9}, {4.0, 0.1}};
    cfg.trials = 10;
    cfg.entry = EntryKind::gaussian;
    cfg.seed = kSeed;
    const auto r = run_spiked_vesd(cfg);
    const int ordered = static_cast<int>(r.summary.at("ordered_repetitions"));
    return {ordered >= 9, "strictly ordered in " + std::to_string(ordered) + "/10 repetitions at E = " +
                              fmt(r.summary.at("evaluation_E")) + " (need >= 9)"};
}

Outcome properties()
{
    Engine rng = make_engine(substream_seed(kSeed, 9));
    std::uniform_int_distribution<int> dim(2, 40);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const EntryLaw gauss(EntryKind::gaussian);
    const int cases = 1000;
    int mass_fail = 0, ks_fail = 0, herglotz_fail = 0, mono_fail = 0;
    double mass_err = 0, ks_err = 0;

    auto random_sigma = [&](int M) {
        SigmaSpec spec;
        const int k = 1 + static_cast<int>(unif(rng) * 3);
        int left = M;
        for (int b = 0; b < k && left > 0; ++b) {
            const int c = b == k - 1 ? left : std::max(1, static_cast<int>(unif(rng) * left));
            spec.blocks.push_back({0.5 + 4.5 * unif(rng), c});
            left -= c;
        }
        if (left > 0) spec.blocks.back().count += left;
        if (unif(rng) < 0.5) spec.rotation_seed = rng();
        return build_sigma(spec, M);
    };

    // VESD mass.
    for (int c = 0; c < cases; ++c) {
        const int M = dim(rng), N = dim(rng);
        const auto S = random_sigma(M);
        const EnsembleDecomposition dec = decompose(sample_X(M, N, gauss, rng()), S);
        for (Side side : {Side::Q1, Side::Q2}) {
            const Eigen::VectorXd v = random_unit_vector(side == Side::Q1 ? M : N, rng());
            const double e = std::abs(vesd_curve(dec, v, side).total() - 1.0);
            mass_err = std::max(mass_err, e);
            mass_fail += e > 1e-10;
        }
    }

    // Kolmogorov distance against the dense-grid oracle; the limiting laws are
    // solved once and reused.
    struct Ref {
        double d;
        SolvedLaw law;
        ContinuousCDF G;
    };
    const std::vector<std::pair<std::vector<Atom>, double>> settings = {
        {{{1.0, 1.0}}, 0.5}, {{{1.0, 1.0}}, 2.0}, {{{1.0, 0.5}, {4.0, 0.5}}, 0.5}, {{{1.0, 0.9}, {4.0, 0.1}}, 2.0}};
    std::vector<Ref> refs;
    refs.reserve(settings.size());
    for (const auto& [atoms, d] : settings) {
        refs.push_back({d, SolvedLaw(PopulationSpectrum(atoms), d), {}});
        refs.back().G = law_cdf_F2c(refs.back().law);
    }
    for (int c = 0; c < cases; ++c) {
        const Ref& ref = refs[static_cast<std::size_t>(c) % refs.size()];
        const double lo = ref.law.edges().front().first, hi = ref.law.top_edge();
        std::vector<std::pair<double, double>> jumps;
        if (c % 2 == 0) {
            // VESD of a small sample with the matching aspect ratio.
            const int N = 10 * (1 + static_cast<int>(unif(rng) * 4));
            const int M = static_cast<int>(std::lround(N / ref.d));
            std::vector<double> sig;
            for (const auto& a : ref.law.spectrum().atoms()) sig.push_back(a.sigma);
            SigmaSpec spec;
            int used = 0;
            for (std::size_t a = 0; a < sig.size(); ++a) {
                const int cnt = a + 1 == sig.size() ? M - used
                                                     : static_cast<int>(std::lround(ref.law.spectrum().atoms()[a].weight * M));
                spec.blocks.push_back({sig[a], cnt});
                used += cnt;
            }
            const auto dec = decompose(sample_X(M, N, gauss, rng()), build_sigma(spec, M), {false, true});
            const WeightedStepCDF F = vesd_curve(dec, random_unit_vector(N, rng()), Side::Q2);
            for (std::size_t k = 0; k < F.size(); ++k) jumps.emplace_back(F.points()[k], F.weights()[k]);
        } else {
            // Arbitrary step distribution, some jumps outside the support or at 0.
            const int n = 1 + static_cast<int>(unif(rng) * 30);
            double total = 0;
            for (int k = 0; k < n; ++k) {
                const double x = unif(rng) < 0.1 ? 0.0 : lo - 0.5 + (hi - lo + 1.0) * unif(rng);
                const double w = unif(rng);
                jumps.emplace_back(x, w);
                total += w;
            }
            for (auto& j : jumps) j.second /= total;
        }
        const WeightedStepCDF F(jumps);
        const double exact = kolmogorov(F, ref.G);
        std::vector<double> xs, ws, around;
        for (const auto& [x, w] : jumps) {
            xs.push_back(x);
            ws.push_back(w);
            around.push_back(x);
        }
        for (const auto& a : ref.G.atoms) around.push_back(a.first);
        const double dense = oracle::kolmogorov_on_points(xs, ws, ref.G.cdf, oracle::dense_grid(lo - 1.0, hi + 1.0, 2000, around));
        const double e = std::abs(exact - dense);
        ks_err = std::max(ks_err, e);
        ks_fail += e > 1e-6;
    }

    // Herglotz positivity and eta-monotonicity of <v, G2 v>.
    for (int c = 0; c < cases; ++c) {
        const int M = dim(rng), N = dim(rng);
        const auto S = random_sigma(M);
        const Eigen::MatrixXd X = sample_X(M, N, gauss, rng());
        Eigen::VectorXd w = Eigen::VectorXd::Zero(M + N);
        w.tail(N) = random_unit_vector(N, rng());
        const double E = -1.0 + 8.0 * unif(rng);
        const double eta1 = std::pow(10.0, -3.0 + 4.0 * unif(rng));
        const double eta2 = eta1 * (1.0 + 10.0 * unif(rng));
        const auto r1 = build_resolvent(X, S, {E, eta1});
        const auto r2 = build_resolvent(X, S, {E, eta2});
        const double im1 = w.cast<cdouble>().dot(r1.G * w.cast<cdouble>()).imag();
        const double im2 = w.cast<cdouble>().dot(r2.G * w.cast<cdouble>()).imag();
        herglotz_fail += !(im1 > 0) + !(im2 > 0);
        mono_fail += !(eta1 * im1 <= eta2 * im2 * (1 + 1e-12));
    }

    std::ostringstream os;
    os << cases << " cases each: mass failures " << mass_fail << " (max err " << fmt(mass_err) << "), Kolmogorov failures "
       << ks_fail << " (max diff " << fmt(ks_err) << "), Herglotz failures " << herglotz_fail
       << ", eta-monotonicity failures " << mono_fail;
    return {mass_fail + ks_fail + herglotz_fail + mono_fail == 0, os.str()};
}

} // namespace

int main(int argc, char** argv)
{
    const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria = {
        {1, {"solver-oracle equivalence", solver_oracle}},
        {2, {"mass and support", mass_and_support}},
        {3, {"per-sample VESD rate", per_sample_rate}},
        {4, {"expected VESD rate", expected_rate}},
        {5, {"rigidity", rigidity}},
        {6, {"resolvent identities", identities}},
        {7, {"signal detection", signal_detection}},
        {8, {"spiked slope ordering", spiked_ordering}},
        {9, {"property suites", properties}},
    };
    std::vector<int> which;
    for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
    if (which.empty())
        for (const auto& [k, v] : criteria) which.push_back(k);

    int failures = 0;
    for (int k : which) {
        const auto it = criteria.find(k);
        if (it == criteria.end()) {
            std::printf("criterion %d: unknown\n", k);
            ++failures;
            continue;
        }
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = it->second.second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("criterion %d %s: %s: %s [%.1fs]\n", k, o.pass ? "PASS" : "FAIL", it->second.first, o.detail.c_str(), secs);
        std::fflush(stdout);
        failures += !o.pass;
    }
    return failures == 0 ? 0 : 1;
}
