#pragma once

// Monte Carlo experiment families. Every run is a pure function of its
// configuration: trial t at size N draws from substream (seed, N, t), and the
// emitted records are canonically sorted, so the number of worker threads
// never changes the output.

#include "mpvesd/ensembles.hpp"
#include "mpvesd/mp_law.hpp"
#include "mpvesd/vesd_metrics.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mpvesd {

enum class Family { conv_rate, expected_conv, signal_detect, separable, spiked_vesd, locallaw, rigidity };

const char* family_name(Family f);
/// Throws ConfigError on unknown names.
Family parse_family(const std::string& name);

struct SignalOptions {
    int k = 10;
    double amplitude_lo = 0.4;
    double amplitude_hi = 0.8;
};

enum class SeparableCase { blocks, random_levels };

struct SeparableOptions {
    double a = 0.1;
    SeparableCase layout = SeparableCase::blocks;
    int block = 200;
};

struct SpikedOptions {
    /// Evaluation point E = a_hi - edge_offset * (a_hi - a_lo) of the top bulk component.
    double edge_offset = 0.25;
    /// Slope window E +- half_window * (a_hi - a_lo).
    double half_window = 0.1;
    /// Samples averaged into one VESD curve per repetition.
    int averaging = 10;
};

struct LocalLawGrid {
    std::vector<double> E = {1.0};
    /// Negative entries mean N^{-1/2}.
    std::vector<double> eta = {-1.0};
    double q = -1.0;
    double omega = 0.1;
};

struct ExperimentConfig {
    Family family = Family::conv_rate;
    std::vector<int> schedule = {50, 100, 200, 400, 800};  ///< sample sizes N, ascending
    double d = 0.5;                                         ///< N / M
    std::vector<Atom> spectrum = {{1.0, 1.0}};              ///< population atoms; counts are weight * M
    std::optional<std::uint64_t> rotation_seed;
    EntryKind entry = EntryKind::pareto_symmetric;
    double tail_index = 6.0;
    int trials = 10;
    bool trials_defaulted = true;
    int repetition_cap = 2000;
    std::uint64_t seed = 0;
    std::string output;
    double tau = kDefaultTau;
    SolverOptions solver;
    SignalOptions signal;
    SeparableOptions separable;
    SpikedOptions spiked;
    LocalLawGrid locallaw;

    EntryLaw entry_law() const { return EntryLaw(entry, tail_index); }
    /// M = N / d; throws ConfigError unless it is a positive integer.
    int dimension_for(int N) const;
    /// Block counts weight * M; throws ConfigError unless they are integers.
    SigmaSpec sigma_spec(int M) const;
};

/// One row of the tidy output table.
struct ExperimentRecord {
    std::string family;
    int N;
    int trial;  ///< -1 for rows aggregated over trials
    std::uint64_t seed;
    std::string statistic;
    double value;
};

struct Curve {
    std::string name;
    std::vector<std::pair<double, double>> points;  ///< (x, cumulative)
};

struct ExperimentResult {
    std::vector<ExperimentRecord> records;  ///< sorted by (family, N, trial, statistic)
    std::vector<Curve> curves;
    std::map<std::string, double> summary;
};

/// Worker count: jobs > 0 is used as is, otherwise the hardware concurrency.
int resolve_jobs(int jobs);

/// Runs body(i) for i in [0, n) on up to `jobs` threads; rethrows the first error.
void parallel_for(int n, int jobs, const std::function<void(int)>& body);

/// Uniformly distributed unit vector (normalized Gaussian).
Eigen::VectorXd random_unit_vector(int n, std::uint64_t seed);

ExperimentResult run_conv_rate(const ExperimentConfig& cfg, int jobs = 0);
ExperimentResult run_expected_conv(const ExperimentConfig& cfg, int jobs = 0);
ExperimentResult run_signal_detect(const ExperimentConfig& cfg, int jobs = 0);
ExperimentResult run_separable(const ExperimentConfig& cfg, int jobs = 0);
ExperimentResult run_spiked_vesd(const ExperimentConfig& cfg, int jobs = 0);
ExperimentResult run_locallaw(const ExperimentConfig& cfg, int jobs = 0);
ExperimentResult run_rigidity(const ExperimentConfig& cfg, int jobs = 0);

/// Dispatches on cfg.family.
ExperimentResult run_experiment(const ExperimentConfig& cfg, int jobs = 0);

/// The five spiked test vectors in the coordinates of build_sigma (sigma descending).
std::vector<Eigen::VectorXd> spiked_test_vectors(int M);

/// Spearman rank correlation.
double rank_correlation(const std::vector<double>& a, const std::vector<double>& b);

} // namespace mpvesd
