// mpvesd: command-line front end.
//
//   mpvesd law solve|density|edges|gamma|regularity
//   mpvesd sample | vesd | dist
//   mpvesd exp <family>
//   mpvesd lab identities|locallaw|rigidity
//
// Global flags: --config FILE, --seed N, --out FILE, --jobs N (MPVESD_JOBS
// overrides --jobs). Exit status 2 on usage or config errors, 1 on numerical
// failures.

#include "mpvesd/config.hpp"
#include "mpvesd/csv.hpp"
#include "mpvesd/errors.hpp"
#include "mpvesd/experiments.hpp"
#include "mpvesd/resolvent_lab.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

using namespace mpvesd;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    int jobs = 0;
};

struct Output {
    std::string csv;
    std::size_t rows = 0;
    std::vector<Curve> curves;
    std::string note;
};

std::size_t count_rows(const std::string& csv)
{
    std::size_t n = 0;
    for (char c : csv) n += c == '\n';
    return n == 0 ? 0 : n - 1;
}

ExperimentConfig read_config(const Globals& g)
{
    ExperimentConfig cfg = g.config.empty() ? ExperimentConfig{} : load_config(g.config);
    if (g.seed) cfg.seed = *g.seed;
    return cfg;
}

SolvedLaw config_law(const ExperimentConfig& cfg)
{
    return SolvedLaw(PopulationSpectrum(cfg.spectrum, cfg.tau), cfg.d, cfg.solver);
}

int jobs_from(const Globals& g)
{
    if (const char* env = std::getenv("MPVESD_JOBS")) {
        try {
            const int j = std::stoi(env);
            if (j > 0) return j;
        } catch (const std::exception&) {
        }
        throw ConfigError("MPVESD_JOBS: expected a positive integer");
    }
    return g.jobs;
}

std::string stem_with(const std::string& out, const std::string& suffix)
{
    std::filesystem::path p(out);
    std::filesystem::path r = p.parent_path() / (p.stem().string() + suffix + p.extension().string());
    return r.string();
}

std::string sanitize(std::string s)
{
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
    return s;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Deformed Marcenko-Pastur laws, VESD statistics and Monte Carlo experiments"};
    app.set_version_flag("--version", std::string(MPVESD_VERSION));
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "root seed (overrides the config)");
    app.add_option("--config", g.config, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("--out", g.out, "output CSV (standard output when omitted)");
    app.add_option("--jobs", g.jobs, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);

    // law
    auto* law = app.add_subcommand("law", "limiting law of the configured population spectrum");
    law->require_subcommand(1);
    std::vector<double> solve_E = {1.0}, solve_eta = {1e-3};
    auto* law_solve = law->add_subcommand("solve", "m2c(E + i eta) on a grid");
    law_solve->add_option("--E", solve_E, "energies")->expected(1, -1);
    law_solve->add_option("--eta", solve_eta, "imaginary parts")->expected(1, -1)->check(CLI::PositiveNumber);
    int density_points = 400;
    bool density_cdf = false;
    auto* law_density = law->add_subcommand("density", "rho2c (or the F2c CDF) on a uniform grid over the support");
    law_density->add_option("--points", density_points, "grid size")->check(CLI::Range(2, 10000000));
    law_density->add_flag("--cdf", density_cdf, "export F2c instead of the density");
    auto* law_edges = law->add_subcommand("edges", "support components and the zero atom");
    int gamma_N = 100;
    auto* law_gamma = law->add_subcommand("gamma", "classical locations for sample size N");
    law_gamma->add_option("--N", gamma_N, "sample size")->check(CLI::PositiveNumber);
    auto* law_reg = law->add_subcommand("regularity", "edge regularity report");

    // sample, vesd, dist
    int sample_N = 100, sample_trials = 1;
    std::string side_name = "Q2", vector_name = "random";
    auto* sample = app.add_subcommand("sample", "eigenvalues of one sample Q2 = X^T Sigma X");
    sample->add_option("--N", sample_N, "sample size")->check(CLI::PositiveNumber);
    auto* vesd = app.add_subcommand("vesd", "VESD curve of one sample");
    vesd->add_option("--N", sample_N, "sample size")->check(CLI::PositiveNumber);
    vesd->add_option("--side", side_name, "Q1 or Q2")->check(CLI::IsMember({"Q1", "Q2"}));
    vesd->add_option("--vector", vector_name, "random, ones or e<i>");
    auto* dist = app.add_subcommand("dist", "Kolmogorov distance of VESDs of random unit vectors to the limit");
    dist->add_option("--N", sample_N, "sample size")->check(CLI::PositiveNumber);
    dist->add_option("--side", side_name, "Q1 or Q2")->check(CLI::IsMember({"Q1", "Q2"}));
    dist->add_option("--trials", sample_trials, "independent samples")->check(CLI::PositiveNumber);

    // exp
    std::string family;
    auto* exp = app.add_subcommand("exp", "run an experiment family");
    exp->add_option("family", family, "experiment family")
        ->required()
        ->check(CLI::IsMember({"conv_rate", "expected_conv", "signal_detect", "separable", "spiked_vesd", "locallaw",
                               "rigidity"}));

    // lab
    auto* lab = app.add_subcommand("lab", "resolvent diagnostics");
    lab->require_subcommand(1);
    int lab_M = 10, lab_N = 10, lab_instances = 100;
    double lab_E = 1.0, lab_eta = 1.0;
    auto* lab_id = lab->add_subcommand("identities", "resolvent expansion identities by explicit minors");
    lab_id->add_option("--M", lab_M, "rows")->check(CLI::PositiveNumber);
    lab_id->add_option("--N", lab_N, "columns")->check(CLI::PositiveNumber);
    lab_id->add_option("--instances", lab_instances, "random instances")->check(CLI::PositiveNumber);
    lab_id->add_option("--E", lab_E, "real part of z");
    lab_id->add_option("--eta", lab_eta, "imaginary part of z")->check(CLI::PositiveNumber);
    auto* lab_ll = lab->add_subcommand("locallaw", "local-law residual ratios (locallaw family)");
    auto* lab_rig = lab->add_subcommand("rigidity", "eigenvalue rigidity (rigidity family)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (*seed_opt) g.seed = seed_value;

    const auto start = std::chrono::steady_clock::now();
    std::string operation = "setup", label;
    ExperimentConfig cfg;
    Output result;
    try {
        cfg = read_config(g);
        const int jobs = jobs_from(g);
        if (g.out.empty()) g.out = cfg.output;
        if (lab_ll->parsed()) family = "locallaw";
        if (lab_rig->parsed()) family = "rigidity";
        if (!family.empty()) cfg.family = parse_family(family);
        std::fprintf(stderr, "mpvesd %s config_hash=%016llx seed=%llu\n", MPVESD_VERSION,
                     static_cast<unsigned long long>(config_hash(cfg)), static_cast<unsigned long long>(cfg.seed));

        if (law->parsed()) {
            operation = "law";
            const SolvedLaw L = config_law(cfg);
            std::vector<std::vector<std::string>> rows;
            if (law_solve->parsed()) {
                operation = "law solve";
                for (double E : solve_E)
                    for (double eta : solve_eta) {
                        const cdouble m = L.m2c({E, eta});
                        rows.push_back({format_double(E), format_double(eta), format_double(m.real()), format_double(m.imag())});
                    }
                result.csv = csv_table({"E", "eta", "re_m2c", "im_m2c"}, rows);
            } else if (law_density->parsed()) {
                operation = "law density";
                const double lo = L.edges().front().first, hi = L.edges().back().second;
                for (int i = 0; i < density_points; ++i) {
                    const double E = lo + (hi - lo) * i / (density_points - 1);
                    rows.push_back({format_6g(E), format_6g(density_cdf ? L.cdf(E) : L.density(E))});
                }
                result.csv = csv_table({"E", "value"}, rows);
            } else if (law_edges->parsed()) {
                operation = "law edges";
                for (const auto& [a, b] : L.edges())
                    rows.push_back({format_double(a), format_double(b), format_double(L.zero_atom())});
                result.csv = csv_table({"a_lo", "a_hi", "zero_atom"}, rows);
            } else if (law_gamma->parsed()) {
                operation = "law gamma";
                const auto gamma = classical_locations(L, gamma_N, cfg.dimension_for(gamma_N));
                for (std::size_t j = 0; j < gamma.size(); ++j)
                    rows.push_back({std::to_string(j + 1), format_double(gamma[j])});
                result.csv = csv_table({"j", "gamma"}, rows);
            } else if (law_reg->parsed()) {
                operation = "law regularity";
                const RegularityReport rep = check_edge_regularity(L, cfg.tau);
                for (const auto& e : rep.edges)
                    rows.push_back({format_double(e.edge), e.above_tau ? "1" : "0", e.separated ? "1" : "0",
                                    e.away_from_poles ? "1" : "0", format_double(e.separation),
                                    format_double(e.pole_distance), e.regular() ? "1" : "0"});
                result.csv = csv_table(
                    {"edge", "above_tau", "separated", "away_from_poles", "separation", "pole_distance", "regular"}, rows);
                if (!rep.all_edges_regular()) result.note = "some edges are not regular";
            }
        } else if (sample->parsed() || vesd->parsed() || dist->parsed()) {
            const int M = cfg.dimension_for(sample_N);
            const PopulationCovariance sigma = build_sigma(cfg.sigma_spec(M), M);
            const EntryLaw entry = cfg.entry_law();
            std::vector<std::vector<std::string>> rows;
            if (sample->parsed()) {
                operation = "sample";
                const Eigen::MatrixXd X = sample_X(M, sample_N, entry, substream_seed(cfg.seed, 1));
                const Eigen::VectorXd lambda = nonzero_spectrum(X, sigma);
                for (Eigen::Index i = 0; i < lambda.size(); ++i)
                    rows.push_back({std::to_string(i + 1), format_double(lambda(i))});
                result.csv = csv_table({"index", "lambda"}, rows);
            } else if (vesd->parsed()) {
                operation = "vesd";
                const Side side = side_name == "Q1" ? Side::Q1 : Side::Q2;
                const int n = side == Side::Q1 ? M : sample_N;
                Eigen::VectorXd v;
                if (vector_name == "random") {
                    v = random_unit_vector(n, substream_seed(cfg.seed, 2));
                } else if (vector_name == "ones") {
                    v = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
                } else if (vector_name.size() > 1 && vector_name[0] == 'e') {
                    int i = 0;
                    try {
                        i = std::stoi(vector_name.substr(1));
                    } catch (const std::exception&) {
                        throw ConfigError("--vector: expected random, ones or e<i>");
                    }
                    if (i < 0 || i >= n) throw ConfigError("--vector: coordinate out of range");
                    v = Eigen::VectorXd::Unit(n, i);
                } else {
                    throw ConfigError("--vector: expected random, ones or e<i>");
                }
                const Eigen::MatrixXd X = sample_X(M, sample_N, entry, substream_seed(cfg.seed, 1));
                const EnsembleDecomposition dec = decompose(X, sigma, {side == Side::Q1, side == Side::Q2}, cfg.seed);
                const WeightedStepCDF F = vesd_curve(dec, v, side);
                for (std::size_t k = 0; k < F.size(); ++k)
                    rows.push_back({format_double(F.points()[k]), format_double(F.cumulative(k))});
                result.csv = csv_table({"x", "cumulative"}, rows);
            } else {
                operation = "dist";
                const Side side = side_name == "Q1" ? Side::Q1 : Side::Q2;
                const SolvedLaw L = config_law(cfg);
                if (side == Side::Q1 && sigma.diag.maxCoeff() != sigma.diag.minCoeff())
                    throw ConfigError("dist: --side Q1 needs a single-atom spectrum (the limit depends on v)");
                const ContinuousCDF G = side == Side::Q1 ? law_cdf_F1c(L) : law_cdf_F2c(L);
                std::vector<double> d(static_cast<std::size_t>(sample_trials));
                parallel_for(sample_trials, jobs, [&](int t) {
                    const std::uint64_t s = substream_seed(cfg.seed, static_cast<std::uint64_t>(sample_N), static_cast<std::uint64_t>(t));
                    const Eigen::MatrixXd X = sample_X(M, sample_N, entry, substream_seed(s, 1));
                    const EnsembleDecomposition dec = decompose(X, sigma, {side == Side::Q1, side == Side::Q2}, s);
                    const Eigen::VectorXd v = random_unit_vector(side == Side::Q1 ? M : sample_N, substream_seed(s, 2));
                    d[t] = kolmogorov(vesd_curve(dec, v, side), G);
                });
                for (int t = 0; t < sample_trials; ++t) rows.push_back({std::to_string(t), format_double(d[t])});
                result.csv = csv_table({"trial", "kolmogorov"}, rows);
            }
        } else if (exp->parsed() || lab_ll->parsed() || lab_rig->parsed()) {
            operation = "exp " + family;
            const ExperimentResult r = run_experiment(cfg, jobs);
            result.csv = records_csv(r.records);
            result.curves = r.curves;
            std::string summary;
            for (const auto& [k, v] : r.summary) summary += (summary.empty() ? "" : " ") + k + "=" + format_6g(v);
            if (cfg.trials_defaulted) summary += (summary.empty() ? "" : " ") + std::string("trials=10 (default)");
            result.note = summary;
        } else if (lab_id->parsed()) {
            operation = "lab identities";
            std::vector<std::vector<std::string>> rows(static_cast<std::size_t>(lab_instances));
            const PopulationCovariance sigma = PopulationCovariance::identity(lab_M);
            const EntryLaw entry(EntryKind::gaussian);
            double worst = 0.0;
            std::vector<IdentityResiduals> res(static_cast<std::size_t>(lab_instances));
            parallel_for(lab_instances, jobs, [&](int i) {
                const Eigen::MatrixXd X = sample_X(lab_M, lab_N, entry, substream_seed(cfg.seed, static_cast<std::uint64_t>(i)));
                std::vector<int> idx(static_cast<std::size_t>(lab_M + lab_N));
                for (int a = 0; a < lab_M + lab_N; ++a) idx[a] = a;
                res[i] = verify_resolvent_identities(X, sigma, {lab_E, lab_eta}, idx);
            });
            for (int i = 0; i < lab_instances; ++i) {
                const auto& r = res[i];
                rows[i] = {std::to_string(i), format_double(r.entry_expansion), format_double(r.inverse_expansion),
                           format_double(r.diagonal), format_double(r.off_diagonal), std::to_string(r.checks)};
                worst = std::max(worst, r.max());
            }
            result.csv = csv_table({"instance", "entry_expansion", "inverse_expansion", "diagonal", "off_diagonal", "checks"}, rows);
            result.note = "max_residual=" + format_6g(worst);
        }

        label = operation;
        operation = "write";
        result.rows = count_rows(result.csv);
        if (g.out.empty()) {
            std::cout << result.csv;
        } else {
            write_file_atomic(g.out, result.csv);
            for (const auto& c : result.curves) write_file_atomic(stem_with(g.out, "_curve_" + sanitize(c.name)), curve_csv(c));
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s failed: %s\n", operation.c_str(), e.what());
        return 1;
    }

    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::FILE* sink = g.out.empty() ? stderr : stdout;
    std::fprintf(sink, "%s: %zu rows -> %s in %.2fs%s%s\n", label.c_str(), result.rows,
                 g.out.empty() ? "stdout" : g.out.c_str(), elapsed, result.note.empty() ? "" : "; ",
                 result.note.c_str());
    return 0;
}
