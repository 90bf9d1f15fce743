#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace ehcr {

// All stochastic components draw from an explicit engine passed by reference.
using Rng = std::mt19937_64;

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

/// Physical and reward parameters of the EH-CR-NOMA uplink.
/// Defaults mirror the reference simulation table; slot length, carrier
/// wavelength and the battery protection threshold are not given there and
/// carry the documented defaults below.
struct SystemParams {
    int M = 3;                    // primary users
    int N = 20;                   // secondary sensing users
    double BW = 10e3;             // Hz
    double T = 1.0;               // slot length, s
    double C = 2500.0;            // bits per packet
    double lambda = 1.0;          // packets per slot
    double P1 = 0.3;              // busy -> idle
    double P2 = 0.8;              // idle -> busy
    double p_p = 1.0;             // PU transmit power, W
    double p_max = 0.5;           // SSU max transmit power, W
    double E_max = 2.0;           // battery capacity, J
    int B_max = 6;                // buffer capacity, packets
    double eta = 0.9;             // EH efficiency
    double noise_w = 1e-18;       // -150 dBm
    double R0 = 0.3;              // SSU rate threshold, bit/s/Hz
    double R1 = 0.3;              // PU rate threshold, bit/s/Hz
    double E0 = 0.02;             // battery protection threshold, J
    double wavelength = 0.3277;   // 915 MHz carrier
    Range d_s_range{15.0, 60.0};
    Range d_p_range{5.0, 20.0};
    double w1 = 8.0 / 2500.0;
    double w2 = 10.0;
    double w3 = 4.0;
    std::uint64_t seed = 1;

    /// Throws ConfigError describing the first violated constraint.
    void validate() const;
};

/// Flat key=value view of SystemParams, used for config echo and overrides.
std::map<std::string, std::string> to_key_values(const SystemParams& p);

/// Applies one override. Unknown keys or unparsable values throw ConfigError.
/// Setting `C` without an explicit `w1` keeps w1 = 8/C.
void apply_key_value(SystemParams& p, const std::string& key, const std::string& value);

/// Keys accepted by apply_key_value, in documentation order.
const std::vector<std::string>& param_keys();

/// Reads a config file of `key = value` lines; `#` starts a comment.
/// Keys not belonging to SystemParams are returned in `extra` (if non-null)
/// so callers can interpret training options from the same file.
SystemParams load_config(const std::string& path, std::map<std::string, std::string>* extra = nullptr);

/// Same parsing applied to in-memory text.
SystemParams parse_config(const std::string& text, std::map<std::string, std::string>* extra = nullptr,
                          SystemParams base = {});

double dbm_to_watt(double dbm);

} // namespace ehcr
