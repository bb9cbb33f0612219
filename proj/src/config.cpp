#include "mpvesd/config.hpp"

#include "mpvesd/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mpvesd {

using nlohmann::json;

namespace {

class Reader {
public:
    std::vector<std::string> errors;

    void fail(const std::string& key, const std::string& msg) { errors.push_back(key + ": " + msg); }

    void unknown_keys(const json& obj, const std::string& prefix, std::initializer_list<const char*> allowed)
    {
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (auto it = obj.begin(); it != obj.end(); ++it)
            if (!ok.count(it.key())) fail(prefix + it.key(), "unknown key");
    }

    template <class T>
    bool get(const json& obj, const char* key, const std::string& path, T& out)
    {
        if (!obj.contains(key)) return false;
        try {
            const json& v = obj.at(key);
            if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
                if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
                if constexpr (std::is_same_v<T, std::uint64_t>)
                    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
                        throw std::invalid_argument("expected a nonnegative integer");
            } else if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw std::invalid_argument("expected a number");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw std::invalid_argument("expected a string");
            }
            out = v.get<T>();
            return true;
        } catch (const std::exception& e) {
            fail(path + key, e.what());
            return false;
        }
    }

    bool object(const json& obj, const char* key, const std::string& path)
    {
        if (!obj.contains(key)) return false;
        if (!obj.at(key).is_object()) {
            fail(path + key, "expected an object");
            return false;
        }
        return true;
    }

    bool number_list(const json& obj, const char* key, const std::string& path, std::vector<double>& out)
    {
        if (!obj.contains(key)) return false;
        const json& v = obj.at(key);
        if (!v.is_array() || v.empty()) {
            fail(path + key, "expected a nonempty list of numbers");
            return false;
        }
        std::vector<double> r;
        for (const auto& x : v) {
            if (!x.is_number()) {
                fail(path + key, "expected a nonempty list of numbers");
                return false;
            }
            r.push_back(x.get<double>());
        }
        out = std::move(r);
        return true;
    }
};

std::string layout_name(SeparableCase c) { return c == SeparableCase::blocks ? "blocks" : "random_levels"; }

} // namespace

const char* entry_kind_name(EntryKind kind)
{
    switch (kind) {
    case EntryKind::gaussian: return "gaussian";
    case EntryKind::rademacher: return "rademacher";
    case EntryKind::pareto_symmetric: return "pareto_symmetric";
    }
    return "unknown";
}

EntryKind parse_entry_kind(const std::string& name)
{
    for (EntryKind k : {EntryKind::gaussian, EntryKind::rademacher, EntryKind::pareto_symmetric})
        if (name == entry_kind_name(k)) return k;
    throw ConfigError("entry_law.kind: unknown entry law '" + name + "'");
}

ExperimentConfig parse_config(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config: top level must be an object");

    Reader rd;
    ExperimentConfig cfg;
    rd.unknown_keys(doc, "", {"family", "schedule", "d", "spectrum", "rotation_seed", "entry_law", "trials",
                              "repetition_cap", "seed", "output", "tau", "solver", "signal", "separable", "spiked",
                              "locallaw"});

    std::string family;
    if (rd.get(doc, "family", "", family)) {
        try {
            cfg.family = parse_family(family);
        } catch (const ConfigError& e) {
            rd.errors.push_back(e.what());
        }
    }

    if (doc.contains("schedule")) {
        const json& s = doc["schedule"];
        bool ok = s.is_array() && !s.empty();
        std::vector<int> sched;
        if (ok)
            for (const auto& x : s) {
                if (!x.is_number_integer() || x.get<long long>() < 1 || x.get<long long>() > 1000000) {
                    ok = false;
                    break;
                }
                sched.push_back(x.get<int>());
            }
        if (!ok) {
            rd.fail("schedule", "expected a nonempty list of positive integers");
        } else {
            for (std::size_t i = 1; i < sched.size(); ++i)
                if (sched[i] <= sched[i - 1]) {
                    rd.fail("schedule", "must be strictly ascending");
                    ok = false;
                    break;
                }
            if (ok) cfg.schedule = sched;
        }
    }

    if (rd.get(doc, "d", "", cfg.d) && !(cfg.d > 0 && std::isfinite(cfg.d))) rd.fail("d", "must be positive");
    if (rd.get(doc, "tau", "", cfg.tau) && !(cfg.tau > 0 && cfg.tau < 1)) rd.fail("tau", "must lie in (0, 1)");

    if (doc.contains("spectrum")) {
        const json& s = doc["spectrum"];
        if (!s.is_array() || s.empty()) {
            rd.fail("spectrum", "expected a nonempty list of {sigma, weight}");
        } else {
            std::vector<Atom> atoms;
            bool ok = true;
            for (const auto& a : s) {
                if (!a.is_object() || !a.contains("sigma") || !a.contains("weight") || !a["sigma"].is_number() ||
                    !a["weight"].is_number() || a.size() != 2) {
                    rd.fail("spectrum", "each entry must be {sigma: number, weight: number}");
                    ok = false;
                    break;
                }
                atoms.push_back({a["sigma"].get<double>(), a["weight"].get<double>()});
            }
            if (ok) {
                double total = 0;
                for (const auto& a : atoms) {
                    if (!(a.sigma > 0)) {
                        rd.fail("spectrum", "sigma values must be positive");
                        ok = false;
                    }
                    if (!(a.weight > 0)) {
                        rd.fail("spectrum", "weights must be positive");
                        ok = false;
                    }
                    total += a.weight;
                }
                if (ok && std::abs(total - 1.0) > 1e-9) {
                    std::ostringstream os;
                    os << "weights sum to " << total << ", expected 1";
                    rd.fail("spectrum", os.str());
                    ok = false;
                }
                if (ok) cfg.spectrum = atoms;
            }
        }
    }

    std::uint64_t rot = 0;
    if (rd.get(doc, "rotation_seed", "", rot)) cfg.rotation_seed = rot;

    bool entry_given = false;
    if (rd.object(doc, "entry_law", "")) {
        const json& e = doc["entry_law"];
        rd.unknown_keys(e, "entry_law.", {"kind", "tail_index"});
        std::string kind;
        if (rd.get(e, "kind", "entry_law.", kind)) {
            try {
                cfg.entry = parse_entry_kind(kind);
                entry_given = true;
            } catch (const ConfigError& err) {
                rd.errors.push_back(err.what());
            }
        }
        if (rd.get(e, "tail_index", "entry_law.", cfg.tail_index) && !(cfg.tail_index > 2))
            rd.fail("entry_law.tail_index", "must exceed 2");
    }
    if (!entry_given && cfg.family != Family::conv_rate && cfg.family != Family::expected_conv)
        cfg.entry = EntryKind::gaussian;

    if (rd.get(doc, "trials", "", cfg.trials)) {
        cfg.trials_defaulted = false;
        if (cfg.trials < 1) rd.fail("trials", "must be at least 1");
    }
    if (rd.get(doc, "repetition_cap", "", cfg.repetition_cap) && cfg.repetition_cap < 1)
        rd.fail("repetition_cap", "must be at least 1");
    rd.get(doc, "seed", "", cfg.seed);
    rd.get(doc, "output", "", cfg.output);

    if (rd.object(doc, "solver", "")) {
        const json& s = doc["solver"];
        rd.unknown_keys(s, "solver.", {"tol", "max_iter", "eta_floor"});
        if (rd.get(s, "tol", "solver.", cfg.solver.tol) && !(cfg.solver.tol > 0)) rd.fail("solver.tol", "must be positive");
        if (rd.get(s, "max_iter", "solver.", cfg.solver.max_iter) && cfg.solver.max_iter < 1)
            rd.fail("solver.max_iter", "must be at least 1");
        if (rd.get(s, "eta_floor", "solver.", cfg.solver.eta_floor) && !(cfg.solver.eta_floor > 0))
            rd.fail("solver.eta_floor", "must be positive");
    }

    if (rd.object(doc, "signal", "")) {
        const json& s = doc["signal"];
        rd.unknown_keys(s, "signal.", {"k", "amplitude_lo", "amplitude_hi"});
        if (rd.get(s, "k", "signal.", cfg.signal.k) && cfg.signal.k < 0) rd.fail("signal.k", "must be nonnegative");
        rd.get(s, "amplitude_lo", "signal.", cfg.signal.amplitude_lo);
        rd.get(s, "amplitude_hi", "signal.", cfg.signal.amplitude_hi);
        if (!(cfg.signal.amplitude_lo >= 0 && cfg.signal.amplitude_lo <= cfg.signal.amplitude_hi))
            rd.fail("signal.amplitude_lo", "need 0 <= amplitude_lo <= amplitude_hi");
    }

    if (rd.object(doc, "separable", "")) {
        const json& s = doc["separable"];
        rd.unknown_keys(s, "separable.", {"a", "layout", "block"});
        if (rd.get(s, "a", "separable.", cfg.separable.a) && !(std::abs(cfg.separable.a) < 1))
            rd.fail("separable.a", "must satisfy |a| < 1");
        std::string layout;
        if (rd.get(s, "layout", "separable.", layout)) {
            if (layout == "blocks") cfg.separable.layout = SeparableCase::blocks;
            else if (layout == "random_levels") cfg.separable.layout = SeparableCase::random_levels;
            else rd.fail("separable.layout", "expected 'blocks' or 'random_levels'");
        }
        if (rd.get(s, "block", "separable.", cfg.separable.block) && cfg.separable.block < 1)
            rd.fail("separable.block", "must be positive");
    }

    if (rd.object(doc, "spiked", "")) {
        const json& s = doc["spiked"];
        rd.unknown_keys(s, "spiked.", {"edge_offset", "half_window", "averaging"});
        if (rd.get(s, "edge_offset", "spiked.", cfg.spiked.edge_offset) &&
            !(cfg.spiked.edge_offset > 0 && cfg.spiked.edge_offset < 1))
            rd.fail("spiked.edge_offset", "must lie in (0, 1)");
        if (rd.get(s, "half_window", "spiked.", cfg.spiked.half_window) &&
            !(cfg.spiked.half_window > 0 && cfg.spiked.half_window < cfg.spiked.edge_offset))
            rd.fail("spiked.half_window", "must lie in (0, edge_offset)");
        if (rd.get(s, "averaging", "spiked.", cfg.spiked.averaging) && cfg.spiked.averaging < 1)
            rd.fail("spiked.averaging", "must be at least 1");
    }

    if (rd.object(doc, "locallaw", "")) {
        const json& s = doc["locallaw"];
        rd.unknown_keys(s, "locallaw.", {"E", "eta", "q", "omega"});
        rd.number_list(s, "E", "locallaw.", cfg.locallaw.E);
        rd.number_list(s, "eta", "locallaw.", cfg.locallaw.eta);
        rd.get(s, "q", "locallaw.", cfg.locallaw.q);
        if (rd.get(s, "omega", "locallaw.", cfg.locallaw.omega) && !(cfg.locallaw.omega > 0 && cfg.locallaw.omega < 1))
            rd.fail("locallaw.omega", "must lie in (0, 1)");
    }

    if (rd.errors.empty()) {
        try {
            PopulationSpectrum(cfg.spectrum, cfg.tau);
        } catch (const Error& e) {
            rd.fail("spectrum", e.what());
        }
        for (int N : cfg.schedule) {
            try {
                cfg.sigma_spec(cfg.dimension_for(N));
            } catch (const ConfigError& e) {
                rd.errors.push_back(e.what());
            }
        }
    }

    if (!rd.errors.empty()) {
        std::ostringstream os;
        os << "invalid config (" << rd.errors.size() << (rd.errors.size() == 1 ? " error" : " errors") << ")";
        for (const auto& e : rd.errors) os << "\n  " << e;
        throw ConfigError(os.str());
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("config: cannot read " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& cfg)
{
    json j;
    j["family"] = family_name(cfg.family);
    j["schedule"] = cfg.schedule;
    j["d"] = cfg.d;
    json spec = json::array();
    for (const auto& a : cfg.spectrum) spec.push_back({{"sigma", a.sigma}, {"weight", a.weight}});
    j["spectrum"] = spec;
    if (cfg.rotation_seed) j["rotation_seed"] = *cfg.rotation_seed;
    j["entry_law"] = {{"kind", entry_kind_name(cfg.entry)}, {"tail_index", cfg.tail_index}};
    if (!cfg.trials_defaulted) j["trials"] = cfg.trials;
    j["repetition_cap"] = cfg.repetition_cap;
    j["seed"] = cfg.seed;
    j["output"] = cfg.output;
    j["tau"] = cfg.tau;
    j["solver"] = {{"tol", cfg.solver.tol}, {"max_iter", cfg.solver.max_iter}, {"eta_floor", cfg.solver.eta_floor}};
    j["signal"] = {{"k", cfg.signal.k}, {"amplitude_lo", cfg.signal.amplitude_lo}, {"amplitude_hi", cfg.signal.amplitude_hi}};
    j["separable"] = {{"a", cfg.separable.a}, {"layout", layout_name(cfg.separable.layout)}, {"block", cfg.separable.block}};
    j["spiked"] = {{"edge_offset", cfg.spiked.edge_offset},
                   {"half_window", cfg.spiked.half_window},
                   {"averaging", cfg.spiked.averaging}};
    j["locallaw"] = {{"E", cfg.locallaw.E}, {"eta", cfg.locallaw.eta}, {"q", cfg.locallaw.q}, {"omega", cfg.locallaw.omega}};
    return j.dump(2) + "\n";
}

void save_config(const ExperimentConfig& cfg, const std::string& path)
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("config: cannot write " + path);
    os << dump_config(cfg);
}

std::uint64_t config_hash(const ExperimentConfig& cfg)
{
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : dump_config(cfg)) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace mpvesd
