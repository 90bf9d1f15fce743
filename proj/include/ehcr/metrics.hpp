#pragma once

#include "ehcr/env.hpp"

#include <iosfwd>
#include <vector>

namespace ehcr {

struct EpisodeMetrics {
    double avg_reward = 0.0;   // per slot per agent
    double anpl = 0.0;         // lost packets per slot per agent
    double sumrate = 0.0;      // sum of SSU rates per slot, bit/s/Hz
    double energy_eff = 0.0;   // mean over slots with an active PU
    double avg_delay = 0.0;    // slots; NaN when nothing was delivered
    double avg_arrivals = 0.0; // arrivals per slot per agent (not exported)
};

/// Running sums for one episode. Merging two accumulators adds sums and counts.
class MetricsAccumulator {
public:
    void add(const StepResult& r);
    void merge(const MetricsAccumulator& other);
    EpisodeMetrics finish() const;

    long slots() const { return slots_; }
    long total_lost() const { return lost_; }
    long agent_slots() const { return agent_slots_; }

private:
    double reward_ = 0.0;
    long lost_ = 0;
    long arrivals_ = 0;
    long agent_slots_ = 0;
    long slots_ = 0;
    double sumrate_ = 0.0;
    double ee_ = 0.0;
    long ee_slots_ = 0;
    double delay_ = 0.0;
    long delay_count_ = 0;
};

/// Mean of each field over a range of episodes (NaN delays are skipped).
EpisodeMetrics mean_metrics(const std::vector<EpisodeMetrics>& v, std::size_t first, std::size_t last);

/// Header `episode,avg_reward,anpl,sumrate,energy_eff,avg_delay`, one row per
/// episode numbered from 0, undefined means written as `nan`.
void export_csv(std::ostream& os, const std::vector<EpisodeMetrics>& history);
void export_csv(const std::string& path, const std::vector<EpisodeMetrics>& history);
std::vector<EpisodeMetrics> parse_csv(std::istream& is);

} // namespace ehcr
