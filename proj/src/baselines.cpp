#include "ehcr/baselines.hpp"

#include "ehcr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

namespace ehcr {

ActionVec DiscreteActionTable::decode(int index) {
    if (index < 0 || index >= kSize) throw UsageError("discrete action index out of range");
    const double step = 1.0 / (kLevels - 1);
    return {(index / kLevels) * step, (index % kLevels) * step};
}

int DiscreteActionTable::encode(int power_level, int alpha_level) {
    if (power_level < 0 || power_level >= kLevels || alpha_level < 0 || alpha_level >= kLevels)
        throw UsageError("discrete action level out of range");
    return power_level * kLevels + alpha_level;
}

ActionVec random_policy(Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double p = u(rng);
    return {p, u(rng)};
}

ActionVec greedy_policy(const AgentNets& trained, const Observation& obs) {
    if (trained.actor.layers().empty()) throw ConfigError("greedy policy needs a trained actor");
    const ActionVec a = to_action(actor_output(trained.actor, obs.features), trained.cfg);
    return {1.0, a.alpha};
}

ActionVec constant_t_policy(PowerSource source, const AgentNets* agent, const Observation& obs, Rng& rng) {
    constexpr double kAlpha = 0.5;
    if (source == PowerSource::Random) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        return {u(rng), kAlpha};
    }
    if (agent == nullptr || agent->actor.layers().empty()) throw ConfigError("constant-T actor variant needs an agent");
    return {actor_output(agent->actor, obs.features).at(0), kAlpha};
}

AorAllocation aor_allocate(const std::vector<double>& h2, const std::vector<double>& E, const SystemParams& params) {
    if (h2.size() != E.size()) throw UsageError("aor_allocate: h2 and E lengths differ");
    AorAllocation out;
    out.alpha = params.C * params.lambda / (params.R0 * params.BW);
    if (out.alpha > 1.0) throw ConfigError("AoR time share exceeds 1: request rate infeasible for this bandwidth");
    const std::size_t N = h2.size();
    out.U_s.assign(N, 0);
    out.p_s.assign(N, 0.0);
    if (out.alpha <= 0.0) return out;

    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return h2[a] * E[a] < h2[b] * E[b]; });

    const double snr_req = std::exp2(params.R0) - 1.0;
    double admitted_rx = 0.0;
    for (std::size_t i : order) {
        if (!(h2[i] > 0.0)) continue;
        const double p_min = snr_req * (params.noise_w + admitted_rx) / h2[i];
        if (E[i] / (out.alpha * params.T) >= p_min && p_min <= params.p_max) {
            out.U_s[i] = 1;
            out.p_s[i] = p_min;
            admitted_rx += p_min * h2[i];
        }
    }
    return out;
}

int dqn_select(const nn::Mlp& qnet, const std::vector<double>& features, double epsilon, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (epsilon > 0.0 && u(rng) < epsilon) {
        std::uniform_int_distribution<int> pick(0, qnet.output_dim() - 1);
        return pick(rng);
    }
    const nn::Vector x = Eigen::Map<const nn::Vector>(features.data(), static_cast<Eigen::Index>(features.size()));
    const nn::Vector q = nn::forward(qnet, x);
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < q.size(); ++k)
        if (q(k) > q(best)) best = k;
    return static_cast<int>(best);
}

DqnNets make_dqn(int obs_dim, const DqnConfig& cfg, Rng& rng) {
    DqnNets d;
    d.cfg = cfg;
    std::vector<int> dims{obs_dim};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(DiscreteActionTable::kSize);
    d.q = nn::init(dims, nn::Activation::Linear, rng);
    d.target_q = d.q;
    d.opt = nn::AdamState::for_net(d.q);
    return d;
}

double dqn_epsilon(long t, long total_steps, const DqnConfig& cfg) {
    const double horizon = cfg.eps_decay_fraction * static_cast<double>(total_steps);
    if (horizon <= 0.0) return cfg.eps_end;
    const double frac = std::min(static_cast<double>(t) / horizon, 1.0);
    return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac;
}

double dqn_train_step(DqnNets& nets, const std::vector<const Transition*>& batch) {
    if (batch.empty()) throw UsageError("dqn_train_step: empty batch");
    const auto B = static_cast<Eigen::Index>(batch.size());
    const int obs_dim = nets.q.input_dim();
    nn::Matrix S(obs_dim, B), S2(obs_dim, B);
    for (Eigen::Index i = 0; i < B; ++i)
        for (int k = 0; k < obs_dim; ++k) {
            S(k, i) = batch[i]->s[k];
            S2(k, i) = batch[i]->s_next[k];
        }
    const nn::Matrix Q2 = nn::forward(nets.target_q, S2);
    nn::ForwardCache cache;
    const nn::Matrix Q = nn::forward(nets.q, S, &cache);
    nn::Matrix dy = nn::Matrix::Zero(Q.rows(), B);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < B; ++i) {
        const double y = batch[i]->r + nets.cfg.gamma * Q2.col(i).maxCoeff();
        const auto a = static_cast<Eigen::Index>(batch[i]->a.at(0));
        const double e = Q(a, i) - y;
        loss += e * e;
        dy(a, i) = 2.0 * e / static_cast<double>(B);
    }
    const auto g = nn::backward(nets.q, cache, dy);
    nn::adam_step(nets.q, g.grads, nets.opt, nets.cfg.lr);
    nn::soft_update(nets.target_q, nets.q, nets.cfg.tau);
    ++nets.updates;
    return loss / static_cast<double>(B);
}

DqnTrainResult train_dqn(Environment& env, DqnNets nets, const TrainSchedule& schedule, Rng& rng,
                         const EpisodeCallback& on_episode) {
    if (nets.q.input_dim() != env.obs_dim()) throw ConfigError("Q-network input dimension does not match environment");
    const int N = env.params().N;
    const long total = static_cast<long>(schedule.episodes) * schedule.steps;
    const long gate = static_cast<long>((nets.cfg.memory + 2) / 3);
    DqnTrainResult res;
    ReplayMemory memory(nets.cfg.memory);
    std::vector<ActionVec> actions(N);
    std::vector<int> chosen(N);
    for (int ep = 0; ep < schedule.episodes; ++ep) {
        auto obs = env.reset();
        MetricsAccumulator acc;
        for (int t = 0; t < schedule.steps; ++t) {
            const double eps = dqn_epsilon(nets.global_step, total, nets.cfg);
            for (int n = 0; n < N; ++n) {
                chosen[n] = dqn_select(nets.q, obs[n].features, eps, rng);
                actions[n] = DiscreteActionTable::decode(chosen[n]);
            }
            auto step = env.step(actions);
            acc.add(step);
            for (int n = 0; n < N; ++n)
                memory.store({obs[n].features, {static_cast<double>(chosen[n])}, step.reward[n],
                              step.next_obs[n].features, {obs[n].E, obs[n].gs},
                              {step.next_obs[n].E, step.next_obs[n].gs}});
            if (memory.inserted() >= gate && memory.size() >= static_cast<std::size_t>(nets.cfg.batch))
                dqn_train_step(nets, memory.sample(static_cast<std::size_t>(nets.cfg.batch), rng));
            obs = std::move(step.next_obs);
            ++nets.global_step;
        }
        res.history.push_back(acc.finish());
        if (on_episode) on_episode(ep, res.history.back());
    }
    res.transitions = memory.inserted();
    res.nets = std::move(nets);
    return res;
}

void save_dqn(std::ostream& os, const DqnNets& d) {
    const auto old = os.precision(17);
    const auto& c = d.cfg;
    os << "dqn v1\nhidden " << c.hidden.size();
    for (int h : c.hidden) os << ' ' << h;
    os << "\ngamma " << c.gamma << "\ntau " << c.tau << "\nbatch " << c.batch << "\nmemory " << c.memory << "\nlr "
       << c.lr << "\nepsilon " << c.eps_start << ' ' << c.eps_end << ' ' << c.eps_decay_fraction << "\nupdates "
       << d.updates << "\nglobal_step " << d.global_step << '\n';
    nn::save(os, d.q);
    nn::save(os, d.target_q);
    nn::save(os, d.opt);
    os << "end-dqn\n";
    os.precision(old);
}

DqnNets load_dqn(std::istream& is) {
    auto expect = [&](const std::string& tok) {
        std::string got;
        if (!(is >> got) || got != tok) throw CheckpointError("dqn checkpoint: expected '" + tok + "'");
    };
    DqnNets d;
    auto& c = d.cfg;
    expect("dqn");
    expect("v1");
    expect("hidden");
    std::size_t nh = 0;
    if (!(is >> nh) || nh > 64) throw CheckpointError("dqn checkpoint: bad hidden count");
    c.hidden.resize(nh);
    for (auto& h : c.hidden) is >> h;
    expect("gamma");
    is >> c.gamma;
    expect("tau");
    is >> c.tau;
    expect("batch");
    is >> c.batch;
    expect("memory");
    is >> c.memory;
    expect("lr");
    is >> c.lr;
    expect("epsilon");
    is >> c.eps_start >> c.eps_end >> c.eps_decay_fraction;
    expect("updates");
    is >> d.updates;
    expect("global_step");
    is >> d.global_step;
    if (!is) throw CheckpointError("dqn checkpoint: malformed header");
    d.q = nn::load(is);
    d.target_q = nn::load(is);
    d.opt = nn::load_adam(is, d.q);
    expect("end-dqn");
    if (d.q.output_dim() != DiscreteActionTable::kSize) throw CheckpointError("dqn checkpoint: output size must be 400");
    return d;
}

std::vector<PhysicalAction> RandomPolicy::act(const Environment& env, const std::vector<Observation>& obs, Rng& rng) {
    std::vector<PhysicalAction> out(obs.size());
    for (std::size_t n = 0; n < obs.size(); ++n) out[n] = to_physical(random_policy(rng), obs[n].E, env.params());
    return out;
}

std::vector<PhysicalAction> GreedyPolicy::act(const Environment& env, const std::vector<Observation>& obs, Rng&) {
    std::vector<PhysicalAction> out(obs.size());
    for (std::size_t n = 0; n < obs.size(); ++n) out[n] = to_physical(greedy_policy(nets_, obs[n]), obs[n].E, env.params());
    return out;
}

std::vector<PhysicalAction> ConstantTPolicy::act(const Environment& env, const std::vector<Observation>& obs, Rng& rng) {
    const auto& params = env.params();
    std::vector<PhysicalAction> out(obs.size());
    for (std::size_t n = 0; n < obs.size(); ++n) {
        ActionVec a = constant_t_policy(source_, agent_, obs[n], rng);
        if (source_ == PowerSource::Actor && agent_->cfg.use_adjuster)
            a = action_adjuster({obs[n].E, obs[n].gs}, a, params);
        out[n] = to_physical(a, obs[n].E, params);
    }
    return out;
}

std::vector<PhysicalAction> AorPolicy::act(const Environment& env, const std::vector<Observation>& obs, Rng&) {
    std::vector<double> h2(obs.size()), E(obs.size());
    for (std::size_t n = 0; n < obs.size(); ++n) {
        h2[n] = obs[n].gs;
        E[n] = obs[n].E;
    }
    const auto alloc = aor_allocate(h2, E, env.params());
    std::vector<PhysicalAction> out(obs.size());
    for (std::size_t n = 0; n < obs.size(); ++n)
        if (alloc.U_s[n]) out[n] = {1, alloc.p_s[n], alloc.alpha};
    return out;
}

std::vector<PhysicalAction> DqnPolicy::act(const Environment& env, const std::vector<Observation>& obs, Rng& rng) {
    std::vector<PhysicalAction> out(obs.size());
    for (std::size_t n = 0; n < obs.size(); ++n) {
        const int k = dqn_select(nets_.q, obs[n].features, 0.0, rng);
        out[n] = to_physical(DiscreteActionTable::decode(k), obs[n].E, env.params());
    }
    return out;
}

} // namespace ehcr
