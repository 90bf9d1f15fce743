#pragma once

#include "ehcr/params.hpp"
#include "ehcr/phy.hpp"
#include "ehcr/sysmodel.hpp"

#include <deque>
#include <iosfwd>
#include <vector>

namespace ehcr {

enum class AccessMode { NOMA, OFDM };

/// Normalized agent action: power fraction and time-sharing factor, both in [0,1].
struct ActionVec {
    double p = 0.0;
    double alpha = 0.0;
};

/// Action after conversion to physical units.
struct PhysicalAction {
    int U_s = 0;         // channel access bit
    double p_s = 0.0;    // W
    double alpha = 0.0;  // fraction of the slot spent transmitting
};

// Components at or below this value mean "do not access".
inline constexpr double kActionEpsilon = 1e-6;

/// p_s = p * min(p_max, E / (alpha T)). Guarantees alpha*T*p_s <= E and p_s <= p_max.
PhysicalAction to_physical(const ActionVec& a, double E, const SystemParams& params);

/// w1*(-L) + w2*(rate if accessed and rate >= R0) + w3*(-sum O_p).
double compute_reward(int lost, double rate_s, bool accessed, const std::vector<int>& pu_failed,
                      const SystemParams& params);

struct SsuState {
    double E = 0.0;
    std::deque<long> buffer;                        // arrival slot of each queued packet, FIFO
    long lost_total = 0;
    std::vector<std::pair<long, long>> delivered;   // (arrival slot, delivery slot)
};

/// dB-domain squashing of channel gains into [0,1].
struct ObsNormalization {
    double offset_db = 150.0;
    double scale_db = 100.0;

    double norm_db(double gain) const;
};

struct Observation {
    double gs = 0.0;
    std::vector<int> up;
    std::vector<double> gmn;
    double E = 0.0;
    int B = 0;
    std::vector<double> features;  // length 2M+3
};

struct StepResult {
    std::vector<double> reward;
    std::vector<PhysicalAction> executed;
    std::vector<int> delivered;      // l_n
    std::vector<int> lost;           // L_n
    std::vector<int> arrivals;       // c_n
    std::vector<double> rate_s;      // 0 when not decoded
    std::vector<double> consumed;    // J
    std::vector<double> harvested;   // J, before the E_max clamp
    std::vector<double> rate_p;
    std::vector<int> pu_active;
    std::vector<int> pu_failed;      // O_p
    std::vector<double> delays;      // slots, one per packet delivered this slot
    double sum_rate = 0.0;
    double ee_num = 0.0;
    double ee_den = 0.0;
    std::vector<Observation> next_obs;
};

/// Multi-agent slot simulator. Single-threaded; independent instances share nothing.
class Environment {
public:
    Environment(SystemParams params, Topology topology, std::uint64_t seed);

    void set_access_mode(AccessMode mode) { mode_ = mode; }
    AccessMode access_mode() const { return mode_; }
    void set_normalization(ObsNormalization norm) { norm_ = norm; }

    /// Random battery and buffer levels, fresh PU states and channels.
    std::vector<Observation> reset();

    /// Converts normalized actions with to_physical and runs one slot.
    StepResult step(const std::vector<ActionVec>& actions);

    /// Runs one slot from physical actions (used by allocators that choose
    /// powers directly). Infeasible actions throw DomainError.
    StepResult step_physical(const std::vector<PhysicalAction>& actions);

    Observation observe(int n) const;
    std::vector<Observation> observe_all() const;

    const SystemParams& params() const { return params_; }
    SystemParams& mutable_params() { return params_; }
    const Topology& topology() const { return topo_; }
    const ChannelRealization& channels() const { return ch_; }
    const std::vector<SsuState>& states() const { return ssu_; }
    long slot() const { return slot_; }
    int obs_dim() const { return 2 * params_.M + 3; }

    // Test hooks: overwrite state of the current slot.
    void set_channels(ChannelRealization ch) { ch_ = std::move(ch); }
    std::vector<SsuState>& mutable_states() { return ssu_; }
    void set_arrival_override(std::vector<int> counts) { arrival_override_ = std::move(counts); }

private:
    SystemParams params_;
    Topology topo_;
    Rng rng_;
    AccessMode mode_ = AccessMode::NOMA;
    ObsNormalization norm_;
    ChannelRealization ch_;
    std::vector<SsuState> ssu_;
    long slot_ = 0;
    bool ready_ = false;
    std::vector<int> arrival_override_;
};

/// Episode trace: slot,agent,U_s,p_s,alpha,E,B,l,L,R_s,reward
void write_trace_header(std::ostream& os);
void append_trace(std::ostream& os, long slot, const StepResult& r);

} // namespace ehcr
