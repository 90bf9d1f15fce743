#pragma once

#include "ehcr/baselines.hpp"
#include "ehcr/ddpg.hpp"
#include "ehcr/env.hpp"
#include "ehcr/metrics.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ehcr {

enum class Algorithm { Aaddpg, Ddpg, Dqn, Greedy, Random, ConstTAaddpg, ConstTRandom, Aor };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);
std::string to_string(AccessMode m);
AccessMode access_mode_from_string(const std::string& s);

/// Whether run_train accepts the algorithm (greedy trains the actor it borrows alpha from).
bool is_trainable(Algorithm a);

struct ExperimentSpec {
    Algorithm algorithm = Algorithm::Aaddpg;
    AccessMode mode = AccessMode::NOMA;
    SystemParams params;                 // params.seed is the master seed
    TrainSchedule schedule;
    DdpgConfig ddpg;
    DqnConfig dqn;
    int eval_episodes = -1;              // < 0: floor(3/7 * training episodes), at least 1
    std::string sweep_axis;
    std::vector<std::string> sweep_values;
    std::string out_dir = "out";

    int resolved_eval_episodes() const;
};

/// Applies a non-SystemParams key (episodes, steps, gamma, tau, batch, memory,
/// lr_actor, lr_critic, lr_dqn, noise_n0, noise_floor, noise_floor_fraction,
/// eval_episodes, algorithm, mode). Unknown keys throw ConfigError.
void apply_spec_key(ExperimentSpec& spec, const std::string& key, const std::string& value);

/// Config file: SystemParams keys plus the keys accepted by apply_spec_key.
void load_spec_file(ExperimentSpec& spec, const std::string& path);

/// Overrides from EHCR_<KEY> environment variables (e.g. EHCR_LAMBDA,
/// EHCR_SEED, EHCR_EPISODES). `getenv` is injectable for tests.
void apply_env_overrides(ExperimentSpec& spec, const std::function<const char*(const char*)>& getenv_fn);

/// Independent stream seed for a named purpose (topology, env, agent, eval).
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose);

/// Per-point sweep seed from (master, axis, value); independent of point order.
std::uint64_t sweep_point_seed(std::uint64_t master, const std::string& axis, const std::string& value);

Topology make_topology(const ExperimentSpec& spec);
Environment make_env(const ExperimentSpec& spec, std::string_view purpose);

struct Trained {
    std::optional<AgentNets> agent;
    std::optional<DqnNets> dqn;
    std::vector<EpisodeMetrics> history;
    long transitions = 0;
    long first_update_at = -1;
};

/// Training without I/O. Greedy trains an AADDPG agent; ConstTAaddpg a power-only agent.
Trained train_algorithm(const ExperimentSpec& spec, const EpisodeCallback& on_episode = {});

/// Policy for evaluation; `trained` must outlive the policy.
std::unique_ptr<Policy> make_policy(const ExperimentSpec& spec, const Trained& trained);

/// Noise-free rollouts on fresh episodes of the evaluation stream.
std::vector<EpisodeMetrics> evaluate(const ExperimentSpec& spec, Policy& policy, int episodes,
                                     std::string_view purpose = "eval");

nlohmann::json params_to_json(const SystemParams& p);
nlohmann::json spec_to_json(const ExperimentSpec& spec);
nlohmann::json metrics_to_json(const EpisodeMetrics& m);

struct RunOutput {
    std::vector<EpisodeMetrics> history;
    nlohmann::json summary;
};

/// Trains, then writes checkpoint.txt, train_metrics.csv and summary.json to out_dir.
RunOutput run_train(const ExperimentSpec& spec);

/// Evaluates a checkpoint (or a parameter-free policy when `checkpoint` is
/// empty) and writes eval_metrics.csv and eval_summary.json to out_dir.
RunOutput run_eval(const ExperimentSpec& spec, const std::string& checkpoint, int episodes);

struct SweepPoint {
    std::string value;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    EpisodeMetrics metrics;
};

/// Train (if needed) and evaluate every axis value, points in parallel with
/// at most `jobs` workers; writes point_<i>.json and sweep.csv to out_dir.
std::vector<SweepPoint> run_sweep(const ExperimentSpec& spec, int jobs = 1);

void save_checkpoint(const std::string& path, const ExperimentSpec& spec, const Trained& trained);
Trained load_checkpoint(const std::string& path, const ExperimentSpec& spec);

} // namespace ehcr
