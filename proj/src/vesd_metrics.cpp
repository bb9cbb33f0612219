#include "mpvesd/vesd_metrics.hpp"

#include "mpvesd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace mpvesd {

WeightedStepCDF::WeightedStepCDF(std::vector<std::pair<double, double>> jumps)
{
    std::sort(jumps.begin(), jumps.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [x, w] : jumps) {
        if (!(w >= 0.0) || !std::isfinite(x)) throw BadSpec("step distribution needs finite points and nonnegative weights");
        if (!x_.empty() && x == x_.back()) {
            w_.back() += w;
        } else {
            x_.push_back(x);
            w_.push_back(w);
        }
    }
    cum_.resize(x_.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < x_.size(); ++k) cum_[k] = (acc += w_[k]);
}

double WeightedStepCDF::operator()(double x) const
{
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    if (it == x_.begin()) return 0.0;
    return cum_[static_cast<std::size_t>(it - x_.begin()) - 1];
}

double WeightedStepCDF::left_limit(double x) const
{
    auto it = std::lower_bound(x_.begin(), x_.end(), x);
    if (it == x_.begin()) return 0.0;
    return cum_[static_cast<std::size_t>(it - x_.begin()) - 1];
}

WeightedStepCDF WeightedStepCDF::scaled(double c) const
{
    if (!(c > 0)) throw BadSpec("scale factor must be positive");
    std::vector<std::pair<double, double>> j;
    j.reserve(x_.size());
    for (std::size_t k = 0; k < x_.size(); ++k) j.emplace_back(c * x_[k], w_[k]);
    return WeightedStepCDF(std::move(j));
}

WeightedStepCDF WeightedStepCDF::average(std::span<const WeightedStepCDF> curves)
{
    if (curves.empty()) return {};
    std::size_t n = 0;
    for (const auto& c : curves) n += c.size();
    std::vector<std::pair<double, double>> j;
    j.reserve(n);
    const double scale = 1.0 / static_cast<double>(curves.size());
    for (const auto& c : curves)
        for (std::size_t k = 0; k < c.size(); ++k) j.emplace_back(c.x_[k], c.w_[k] * scale);
    return WeightedStepCDF(std::move(j));
}

ContinuousCDF law_cdf_F2c(const SolvedLaw& law)
{
    ContinuousCDF G;
    G.cdf = [&law](double x) { return law.cdf(x); };
    G.quantile = [&law](double p) { return law.quantile(p); };
    if (law.zero_atom() > 0.0) G.atoms.emplace_back(0.0, law.zero_atom());
    return G;
}

ContinuousCDF law_cdf_F1c(const SolvedLaw& law)
{
    const double d = law.d();
    const double atom = std::max(0.0, d * law.zero_atom() + (1.0 - d));
    ContinuousCDF G;
    G.cdf = [&law](double x) { return cdf_F1c(law, x); };
    G.quantile = [&law, d, atom](double p) {
        if (p <= atom) return 0.0;
        return law.quantile(std::min(1.0, (p - (1.0 - d)) / d));
    };
    if (atom > 1e-15) G.atoms.emplace_back(0.0, atom);
    return G;
}

ContinuousCDF law_cdf_atom(const SolvedLaw& law, std::size_t atom)
{
    ContinuousCDF G;
    G.cdf = [&law, atom](double x) { return law.atom_cdf(atom, x); };
    G.quantile = [&law, atom](double p) {
        double lo = 0.0, hi = law.top_edge();
        if (law.atom_cdf(atom, 0.0) >= p) return 0.0;
        while (hi - lo > 1e-10) {
            double mid = 0.5 * (lo + hi);
            if (law.atom_cdf(atom, mid) >= p) hi = mid; else lo = mid;
        }
        return hi;
    };
    if (law.atom_zero_mass(atom) > 1e-15) G.atoms.emplace_back(0.0, law.atom_zero_mass(atom));
    return G;
}

namespace {

WeightedStepCDF curve_from_weights(const Eigen::VectorXd& lambdas, const Eigen::VectorXd& weights)
{
    std::vector<std::pair<double, double>> j;
    j.reserve(static_cast<std::size_t>(lambdas.size()));
    double zero = 0.0;
    bool has_zero = false;
    for (Eigen::Index k = 0; k < lambdas.size(); ++k) {
        if (std::abs(lambdas(k)) < kZeroEigenvalue) {
            zero += weights(k);
            has_zero = true;
        } else {
            j.emplace_back(lambdas(k), weights(k));
        }
    }
    if (has_zero) j.emplace_back(0.0, zero);
    return WeightedStepCDF(std::move(j));
}

} // namespace

WeightedStepCDF vesd_curve(const EnsembleDecomposition& dec, const Eigen::VectorXd& v, Side side)
{
    const Eigen::MatrixXd& B = dec.basis(side);
    if (B.rows() == 0) throw DimensionMismatch("decomposition has no basis for the requested side");
    if (v.size() != B.rows()) {
        std::ostringstream os;
        os << "test vector has dimension " << v.size() << " but the eigenbasis has " << B.rows();
        throw DimensionMismatch(os.str());
    }
    if (std::abs(v.norm() - 1.0) > 1e-10) throw NotNormalized("test vector is not unit length");
    Eigen::VectorXd w = (B.transpose() * v).cwiseAbs2();
    return curve_from_weights(dec.lambdas(side), w);
}

std::vector<WeightedStepCDF> coordinate_vesd_curves(const EnsembleDecomposition& dec, Side side)
{
    const Eigen::MatrixXd& B = dec.basis(side);
    std::vector<WeightedStepCDF> out;
    out.reserve(static_cast<std::size_t>(B.rows()));
    for (Eigen::Index i = 0; i < B.rows(); ++i) {
        Eigen::VectorXd w = B.row(i).transpose().cwiseAbs2();
        out.push_back(curve_from_weights(dec.lambdas(side), w));
    }
    return out;
}

WeightedStepCDF esd(const Eigen::VectorXd& lambdas)
{
    Eigen::VectorXd w = Eigen::VectorXd::Constant(lambdas.size(), 1.0 / static_cast<double>(lambdas.size()));
    return curve_from_weights(lambdas, w);
}

namespace {

void require_normalized(double total, double tol, const char* which)
{
    if (std::abs(total - 1.0) > tol) {
        std::ostringstream os;
        os << which << " has total mass " << total << ", expected 1";
        throw NotNormalized(os.str());
    }
}

} // namespace

double kolmogorov(const WeightedStepCDF& F, const WeightedStepCDF& G, const KolmogorovOptions& opts)
{
    require_normalized(F.total(), opts.normalization_tol, "first distribution");
    require_normalized(G.total(), opts.normalization_tol, "second distribution");
    double best = 0.0;
    auto probe = [&](double x) {
        best = std::max(best, std::abs(F(x) - G(x)));
        best = std::max(best, std::abs(F.left_limit(x) - G.left_limit(x)));
    };
    for (double x : F.points()) probe(x);
    for (double x : G.points()) probe(x);
    return best;
}

double kolmogorov(const WeightedStepCDF& F, const ContinuousCDF& G, const KolmogorovOptions& opts)
{
    require_normalized(F.total(), opts.normalization_tol, "step distribution");
    require_normalized(G.cdf(std::numeric_limits<double>::max()), std::max(opts.normalization_tol, 1e-6),
                       "reference distribution");

    auto atom_at = [&G](double x) {
        double m = 0.0;
        for (const auto& [a, w] : G.atoms)
            if (a == x) m += w;
        return m;
    };

    double best = 0.0;
    const auto& xs = F.points();
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const double gx = G.cdf(xs[k]);
        const double fl = k == 0 ? 0.0 : F.cumulative(k - 1);
        best = std::max(best, std::abs(F.cumulative(k) - gx));
        best = std::max(best, std::abs(fl - (gx - atom_at(xs[k]))));
    }
    for (const auto& [a, w] : G.atoms) {
        const double ga = G.cdf(a);
        best = std::max(best, std::abs(F(a) - ga));
        best = std::max(best, std::abs(F.left_limit(a) - (ga - w)));
    }
    if (opts.plateau_quantiles && G.quantile) {
        for (std::size_t k = 0; k < xs.size(); ++k) {
            const double level = F.cumulative(k);
            if (level >= 1.0) continue;
            const double q = G.quantile(level);
            const double hi = k + 1 < xs.size() ? xs[k + 1] : std::numeric_limits<double>::infinity();
            if (q > xs[k] && q < hi) best = std::max(best, std::abs(level - G.cdf(q)));
        }
    }
    return best;
}

LogLogFit loglog_fit(std::span<const RatePoint> points, FitMode mode, int bins, int min_distinct)
{
    std::map<int, int> distinct;
    for (const auto& p : points) {
        if (!(p.value > 0.0)) throw BadSpec("rate values must be positive for a log-log fit");
        if (p.N < 2) throw BadSpec("rate points need N >= 2");
        ++distinct[p.N];
    }
    if (static_cast<int>(distinct.size()) < std::max(2, min_distinct)) {
        std::ostringstream os;
        os << "log-log fit needs at least " << std::max(2, min_distinct) << " distinct N, got " << distinct.size();
        throw InsufficientData(os.str());
    }

    LogLogFit fit{};
    if (mode == FitMode::mean) {
        fit.used.assign(points.begin(), points.end());
    } else {
        if (bins < 1) throw BadSpec("envelope needs at least one bin");
        const double lmin = std::log(static_cast<double>(distinct.begin()->first));
        const double lmax = std::log(static_cast<double>(distinct.rbegin()->first));
        std::vector<int> best(static_cast<std::size_t>(bins), -1);
        for (std::size_t i = 0; i < points.size(); ++i) {
            double t = (std::log(static_cast<double>(points[i].N)) - lmin) / (lmax - lmin);
            int b = std::clamp(static_cast<int>(std::floor(t * bins)), 0, bins - 1);
            int& slot = best[static_cast<std::size_t>(b)];
            if (slot < 0 || points[i].value > points[static_cast<std::size_t>(slot)].value) slot = static_cast<int>(i);
        }
        for (int s : best)
            if (s >= 0) fit.used.push_back(points[static_cast<std::size_t>(s)]);
    }

    const double n = static_cast<double>(fit.used.size());
    double mx = 0, my = 0;
    for (const auto& p : fit.used) {
        mx += std::log(static_cast<double>(p.N)) / n;
        my += std::log(p.value) / n;
    }
    double vxx = 0, vxy = 0;
    for (const auto& p : fit.used) {
        double x = std::log(static_cast<double>(p.N)) - mx, y = std::log(p.value) - my;
        vxx += x * x;
        vxy += x * y;
    }
    if (!(vxx > 0)) throw InsufficientData("log-log fit needs points at two or more distinct N");
    fit.slope = vxy / vxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0.0;
    for (const auto& p : fit.used) {
        double r = std::log(p.value) - (fit.intercept + fit.slope * std::log(static_cast<double>(p.N)));
        rss += r * r;
    }
    fit.residual = std::sqrt(rss / n);
    return fit;
}

} // namespace mpvesd
