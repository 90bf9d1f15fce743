#pragma once

#include "ehcr/ddpg.hpp"
#include "ehcr/env.hpp"
#include "ehcr/nn.hpp"
#include "ehcr/policy.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace ehcr {

/// 20 power levels x 20 time-share levels; level k maps to k/19.
struct DiscreteActionTable {
    static constexpr int kLevels = 20;
    static constexpr int kSize = kLevels * kLevels;

    /// index = power_level * 20 + alpha_level
    static ActionVec decode(int index);
    static int encode(int power_level, int alpha_level);
};

ActionVec random_policy(Rng& rng);

/// Full normalized power with the time share taken from a trained actor.
ActionVec greedy_policy(const AgentNets& trained, const Observation& obs);

enum class PowerSource { Actor, Random };

/// Time share fixed to 0.5. The actor variant expects a power-only agent
/// (action_dims == 1); `agent` may be null for the random variant.
ActionVec constant_t_policy(PowerSource source, const AgentNets* agent, const Observation& obs, Rng& rng);

struct AorAllocation {
    double alpha = 0.0;
    std::vector<int> U_s;
    std::vector<double> p_s;
};

/// Request-based allocator: alpha = C*lambda/(R0*BW); users sorted by
/// ascending |h|^2*E each get the least power meeting R0 against noise plus
/// already admitted users, if the battery and p_max allow it. Throws
/// ConfigError when alpha > 1.
AorAllocation aor_allocate(const std::vector<double>& h2, const std::vector<double>& E, const SystemParams& params);

/// Epsilon-greedy over Q-values; ties resolve to the lowest index.
int dqn_select(const nn::Mlp& qnet, const std::vector<double>& features, double epsilon, Rng& rng);

struct DqnConfig {
    std::vector<int> hidden{256, 256, 128};
    double gamma = 0.9;
    double tau = 0.01;
    int batch = 40;
    std::size_t memory = 10000;
    double lr = 0.001;
    double eps_start = 1.0;
    double eps_end = 0.05;
    double eps_decay_fraction = 0.5;
};

struct DqnNets {
    DqnConfig cfg;
    nn::Mlp q, target_q;
    nn::AdamState opt;
    long updates = 0;
    long global_step = 0;
};

DqnNets make_dqn(int obs_dim, const DqnConfig& cfg, Rng& rng);

/// Linear decay from eps_start to eps_end over the first fraction of steps.
double dqn_epsilon(long t, long total_steps, const DqnConfig& cfg);

/// Target r + gamma * max_a' Q'(s', a'); one Adam step on the squared error
/// of the taken action's Q-value, then soft target update. Returns the loss.
/// Transition::a holds the action index as a single double.
double dqn_train_step(DqnNets& nets, const std::vector<const Transition*>& batch);

struct DqnTrainResult {
    DqnNets nets;
    std::vector<EpisodeMetrics> history;
    long transitions = 0;
};

DqnTrainResult train_dqn(Environment& env, DqnNets nets, const TrainSchedule& schedule, Rng& rng,
                         const EpisodeCallback& on_episode = {});

void save_dqn(std::ostream& os, const DqnNets& nets);
DqnNets load_dqn(std::istream& is);

// Policy adapters used by the evaluation harness.

class RandomPolicy : public Policy {
public:
    std::vector<PhysicalAction> act(const Environment& env, const std::vector<Observation>& obs, Rng& rng) override;
};

class GreedyPolicy : public Policy {
public:
    explicit GreedyPolicy(const AgentNets& trained) : nets_(trained) {}
    std::vector<PhysicalAction> act(const Environment& env, const std::vector<Observation>& obs, Rng& rng) override;

private:
    const AgentNets& nets_;
};

class ConstantTPolicy : public Policy {
public:
    ConstantTPolicy(PowerSource source, const AgentNets* agent) : source_(source), agent_(agent) {}
    std::vector<PhysicalAction> act(const Environment& env, const std::vector<Observation>& obs, Rng& rng) override;

private:
    PowerSource source_;
    const AgentNets* agent_;
};

class AorPolicy : public Policy {
public:
    std::vector<PhysicalAction> act(const Environment& env, const std::vector<Observation>& obs, Rng& rng) override;
};

class DqnPolicy : public Policy {
public:
    explicit DqnPolicy(const DqnNets& nets) : nets_(nets) {}
    std::vector<PhysicalAction> act(const Environment& env, const std::vector<Observation>& obs, Rng& rng) override;

private:
    const DqnNets& nets_;
};

} // namespace ehcr
