#pragma once

#include "ehcr/env.hpp"
#include "ehcr/metrics.hpp"
#include "ehcr/nn.hpp"
#include "ehcr/policy.hpp"

#include <functional>
#include <iosfwd>
#include <vector>

namespace ehcr {

/// Exploration magnitude max(n0 - t*decrement, floor).
struct NoiseSchedule {
    double n0 = 0.3;
    double floor = 0.01;
    double decrement = 0.0;

    /// Decrement chosen so the floor is reached after `fraction` of `total_steps`.
    static NoiseSchedule reaching_floor(double n0, double floor, long total_steps, double fraction = 0.6);
};

double noise_magnitude(long t, const NoiseSchedule& s);

/// Local quantities the action adjuster reads.
struct RawState {
    double E = 0.0;
    double gs = 0.0;
};

struct Transition {
    std::vector<double> s;
    std::vector<double> a;       // executed (adjusted) action in actor-output space
    double r = 0.0;
    std::vector<double> s_next;
    RawState raw;
    RawState raw_next;
};

/// Fixed-capacity FIFO of transitions with uniform sampling.
class ReplayMemory {
public:
    explicit ReplayMemory(std::size_t capacity);

    void store(Transition tr);
    /// Uniform with replacement. Throws NotReadyError when size() < count.
    std::vector<const Transition*> sample(std::size_t count, Rng& rng) const;

    std::size_t size() const { return buf_.size(); }
    std::size_t capacity() const { return capacity_; }
    long inserted() const { return inserted_; }
    /// k-th oldest transition currently held.
    const Transition& at(std::size_t k) const;

private:
    std::size_t capacity_;
    std::vector<Transition> buf_;
    std::size_t head_ = 0;  // index of the oldest entry once full
    long inserted_ = 0;
};

struct DdpgConfig {
    std::vector<int> hidden{256, 256, 128};
    double gamma = 0.9;
    double tau = 0.01;
    int batch = 40;
    std::size_t memory = 10000;
    double lr_actor = 0.001;
    double lr_critic = 0.002;
    bool use_adjuster = true;
    bool adjust_target = true;   // apply the adjuster to the target action as well
    int action_dims = 2;         // 1: power only, time share fixed to fixed_alpha
    double fixed_alpha = 0.5;
    double noise_n0 = 0.3;
    double noise_floor = 0.01;
    double noise_floor_fraction = 0.6;
};

/// Online and target actor/critic with their optimizer states.
struct AgentNets {
    DdpgConfig cfg;
    nn::Mlp actor, critic, target_actor, target_critic;
    nn::AdamState actor_opt, critic_opt;
    long updates = 0;
    long global_step = 0;   // slots elapsed, drives the noise schedule
};

AgentNets make_agent(int obs_dim, const DdpgConfig& cfg, Rng& rng);

/// Actor-space vector -> normalized action (expands the power-only variant).
ActionVec to_action(const std::vector<double>& a, const DdpgConfig& cfg);
std::vector<double> from_action(const ActionVec& a, const DdpgConfig& cfg);

/// mu(s), no exploration.
std::vector<double> actor_output(const nn::Mlp& actor, const std::vector<double>& features);

/// clip(mu(s) + xi, 0, 1) with xi ~ N(0, n(t)^2 I); exact mu(s) when `explore` is false.
std::vector<double> select_action(const nn::Mlp& actor, const std::vector<double>& features, long t,
                                  const NoiseSchedule& sched, Rng& rng, bool explore = true);

/// Battery protection and interference-free feasibility gate.
ActionVec action_adjuster(const RawState& raw, const ActionVec& candidate, const SystemParams& params);

struct TrainStepStats {
    double critic_loss = 0.0;
    double actor_objective = 0.0;
};

/// One critic and one actor Adam step on `batch`, then soft target updates.
TrainStepStats train_step(AgentNets& nets, const std::vector<const Transition*>& batch, const SystemParams& params);

struct TrainSchedule {
    int episodes = 200;
    int steps = 80;
};

struct TrainResult {
    AgentNets nets;
    std::vector<EpisodeMetrics> history;
    long transitions = 0;
    long first_update_at = -1;   // transition count when the first gradient step fired
};

using EpisodeCallback = std::function<void(int episode, const EpisodeMetrics&)>;

/// Centralized training with distributed execution: every agent queries the
/// shared actor on its own observation, all transitions go to one memory, one
/// train_step per slot once the memory holds a third of its capacity.
TrainResult train(Environment& env, AgentNets nets, const TrainSchedule& schedule, Rng& rng,
                  const EpisodeCallback& on_episode = {});

/// Deterministic execution of a trained actor (adjuster applied when the agent uses it).
class DdpgPolicy : public Policy {
public:
    explicit DdpgPolicy(const AgentNets& nets) : nets_(nets) {}
    std::vector<PhysicalAction> act(const Environment& env, const std::vector<Observation>& obs, Rng& rng) override;

private:
    const AgentNets& nets_;
};

// Checkpoint: "agent v1", config block, four networks, two Adam states, counters.
void save_agent(std::ostream& os, const AgentNets& nets);
AgentNets load_agent(std::istream& is);

} // namespace ehcr
