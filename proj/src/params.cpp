#include "ehcr/params.hpp"

#include "ehcr/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace ehcr {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': not a number: '" + v + "'");
    }
}

long long parse_int(const std::string& key, const std::string& v) {
    long long x = 0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, x);
    if (ec != std::errc() || ptr != end) throw ConfigError("config key '" + key + "': not an integer: '" + v + "'");
    return x;
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

using Setter = std::function<void(SystemParams&, const std::string&, const std::string&)>;

const std::vector<std::pair<std::string, Setter>>& setters() {
    static const std::vector<std::pair<std::string, Setter>> table = {
        {"M", [](SystemParams& p, const std::string& k, const std::string& v) { p.M = static_cast<int>(parse_int(k, v)); }},
        {"N", [](SystemParams& p, const std::string& k, const std::string& v) { p.N = static_cast<int>(parse_int(k, v)); }},
        {"BW", [](SystemParams& p, const std::string& k, const std::string& v) { p.BW = parse_double(k, v); }},
        {"T", [](SystemParams& p, const std::string& k, const std::string& v) { p.T = parse_double(k, v); }},
        {"C",
         [](SystemParams& p, const std::string& k, const std::string& v) {
             p.C = parse_double(k, v);
             p.w1 = 8.0 / p.C;
         }},
        {"lambda", [](SystemParams& p, const std::string& k, const std::string& v) { p.lambda = parse_double(k, v); }},
        {"P1", [](SystemParams& p, const std::string& k, const std::string& v) { p.P1 = parse_double(k, v); }},
        {"P2", [](SystemParams& p, const std::string& k, const std::string& v) { p.P2 = parse_double(k, v); }},
        {"p_p", [](SystemParams& p, const std::string& k, const std::string& v) { p.p_p = parse_double(k, v); }},
        {"p_max", [](SystemParams& p, const std::string& k, const std::string& v) { p.p_max = parse_double(k, v); }},
        {"E_max", [](SystemParams& p, const std::string& k, const std::string& v) { p.E_max = parse_double(k, v); }},
        {"B_max", [](SystemParams& p, const std::string& k, const std::string& v) { p.B_max = static_cast<int>(parse_int(k, v)); }},
        {"eta", [](SystemParams& p, const std::string& k, const std::string& v) { p.eta = parse_double(k, v); }},
        {"noise_w", [](SystemParams& p, const std::string& k, const std::string& v) { p.noise_w = parse_double(k, v); }},
        {"noise_dbm",
         [](SystemParams& p, const std::string& k, const std::string& v) { p.noise_w = dbm_to_watt(parse_double(k, v)); }},
        {"R0", [](SystemParams& p, const std::string& k, const std::string& v) { p.R0 = parse_double(k, v); }},
        {"R1", [](SystemParams& p, const std::string& k, const std::string& v) { p.R1 = parse_double(k, v); }},
        {"E0", [](SystemParams& p, const std::string& k, const std::string& v) { p.E0 = parse_double(k, v); }},
        {"wavelength", [](SystemParams& p, const std::string& k, const std::string& v) { p.wavelength = parse_double(k, v); }},
        {"d_s_min", [](SystemParams& p, const std::string& k, const std::string& v) { p.d_s_range.lo = parse_double(k, v); }},
        {"d_s_max", [](SystemParams& p, const std::string& k, const std::string& v) { p.d_s_range.hi = parse_double(k, v); }},
        {"d_p_min", [](SystemParams& p, const std::string& k, const std::string& v) { p.d_p_range.lo = parse_double(k, v); }},
        {"d_p_max", [](SystemParams& p, const std::string& k, const std::string& v) { p.d_p_range.hi = parse_double(k, v); }},
        {"w1", [](SystemParams& p, const std::string& k, const std::string& v) { p.w1 = parse_double(k, v); }},
        {"w2", [](SystemParams& p, const std::string& k, const std::string& v) { p.w2 = parse_double(k, v); }},
        {"w3", [](SystemParams& p, const std::string& k, const std::string& v) { p.w3 = parse_double(k, v); }},
        {"seed",
         [](SystemParams& p, const std::string& k, const std::string& v) {
             const auto s = parse_int(k, v);
             if (s < 0) throw ConfigError("config key 'seed' must be nonnegative");
             p.seed = static_cast<std::uint64_t>(s);
         }},
    };
    return table;
}

} // namespace

double dbm_to_watt(double dbm) { return std::pow(10.0, dbm / 10.0) * 1e-3; }

void SystemParams::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(what);
    };
    require(M >= 0, "M must be >= 0");
    require(N >= 1, "N must be >= 1");
    require(BW > 0, "BW must be > 0");
    require(T > 0, "T must be > 0");
    require(C > 0, "C must be > 0");
    require(lambda >= 0, "lambda must be >= 0");
    require(P1 >= 0 && P1 <= 1, "P1 must lie in [0,1]");
    require(P2 >= 0 && P2 <= 1, "P2 must lie in [0,1]");
    require(p_p > 0, "p_p must be > 0");
    require(p_max > 0, "p_max must be > 0");
    require(E_max > 0, "E_max must be > 0");
    require(B_max >= 1, "B_max must be >= 1");
    require(eta > 0 && eta <= 1, "eta must lie in (0,1]");
    require(noise_w > 0, "noise power must be > 0");
    require(R0 > 0 && R1 > 0, "rate thresholds must be > 0");
    require(E0 >= 0 && E0 < E_max, "E0 must lie in [0, E_max)");
    require(wavelength > 0, "wavelength must be > 0");
    require(d_s_range.lo > 0 && d_s_range.lo <= d_s_range.hi, "SSU distance range must be nonempty and positive");
    require(d_p_range.lo > 0 && d_p_range.lo <= d_p_range.hi, "PU distance range must be nonempty and positive");
    require(d_s_range.lo > d_p_range.lo, "SSUs must be placed farther from the BS than PUs (d_s_min > d_p_min)");
    require(w1 >= 0 && w2 >= 0 && w3 >= 0, "reward weights must be nonnegative");
}

const std::vector<std::string>& param_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [name, _] : setters()) k.push_back(name);
        return k;
    }();
    return keys;
}

std::map<std::string, std::string> to_key_values(const SystemParams& p) {
    return {
        {"M", std::to_string(p.M)},
        {"N", std::to_string(p.N)},
        {"BW", fmt(p.BW)},
        {"T", fmt(p.T)},
        {"C", fmt(p.C)},
        {"lambda", fmt(p.lambda)},
        {"P1", fmt(p.P1)},
        {"P2", fmt(p.P2)},
        {"p_p", fmt(p.p_p)},
        {"p_max", fmt(p.p_max)},
        {"E_max", fmt(p.E_max)},
        {"B_max", std::to_string(p.B_max)},
        {"eta", fmt(p.eta)},
        {"noise_w", fmt(p.noise_w)},
        {"R0", fmt(p.R0)},
        {"R1", fmt(p.R1)},
        {"E0", fmt(p.E0)},
        {"wavelength", fmt(p.wavelength)},
        {"d_s_min", fmt(p.d_s_range.lo)},
        {"d_s_max", fmt(p.d_s_range.hi)},
        {"d_p_min", fmt(p.d_p_range.lo)},
        {"d_p_max", fmt(p.d_p_range.hi)},
        {"w1", fmt(p.w1)},
        {"w2", fmt(p.w2)},
        {"w3", fmt(p.w3)},
        {"seed", std::to_string(p.seed)},
    };
}

void apply_key_value(SystemParams& p, const std::string& key, const std::string& value) {
    for (const auto& [name, set] : setters()) {
        if (name == key) {
            set(p, key, trim(value));
            return;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

SystemParams parse_config(const std::string& text, std::map<std::string, std::string>* extra, SystemParams base) {
    std::vector<std::pair<std::string, std::string>> entries;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    // C first so an explicit w1 later in the file wins over the 8/C default.
    std::stable_partition(entries.begin(), entries.end(), [](const auto& e) { return e.first == "C"; });
    const auto& keys = param_keys();
    for (const auto& [k, v] : entries) {
        if (std::find(keys.begin(), keys.end(), k) != keys.end()) {
            apply_key_value(base, k, v);
        } else if (extra != nullptr) {
            (*extra)[k] = v;
        } else {
            throw ConfigError("unknown config key '" + k + "'");
        }
    }
    return base;
}

SystemParams load_config(const std::string& path, std::map<std::string, std::string>* extra) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), extra);
}

} // namespace ehcr
