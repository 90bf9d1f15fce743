#include "ehcr/ddpg.hpp"

#include "ehcr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

namespace ehcr {

NoiseSchedule NoiseSchedule::reaching_floor(double n0, double floor, long total_steps, double fraction) {
    NoiseSchedule s{n0, floor, 0.0};
    const double horizon = fraction * static_cast<double>(total_steps);
    if (horizon > 0.0 && n0 > floor) s.decrement = (n0 - floor) / horizon;
    return s;
}

double noise_magnitude(long t, const NoiseSchedule& s) {
    return std::max(s.n0 - static_cast<double>(t) * s.decrement, s.floor);
}

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay memory capacity must be > 0");
    buf_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayMemory::store(Transition tr) {
    if (buf_.size() < capacity_) {
        buf_.push_back(std::move(tr));
    } else {
        buf_[head_] = std::move(tr);
        head_ = (head_ + 1) % capacity_;
    }
    ++inserted_;
}

const Transition& ReplayMemory::at(std::size_t k) const {
    if (k >= buf_.size()) throw UsageError("ReplayMemory::at out of range");
    return buf_[(head_ + k) % buf_.size()];
}

std::vector<const Transition*> ReplayMemory::sample(std::size_t count, Rng& rng) const {
    if (buf_.size() < count || buf_.empty())
        throw NotReadyError("replay memory holds " + std::to_string(buf_.size()) + " transitions, " +
                            std::to_string(count) + " requested");
    std::uniform_int_distribution<std::size_t> pick(0, buf_.size() - 1);
    std::vector<const Transition*> out(count);
    for (auto& p : out) p = &buf_[pick(rng)];
    return out;
}

AgentNets make_agent(int obs_dim, const DdpgConfig& cfg, Rng& rng) {
    if (cfg.action_dims != 1 && cfg.action_dims != 2) throw ConfigError("action_dims must be 1 or 2");
    AgentNets a;
    a.cfg = cfg;
    std::vector<int> actor_dims{obs_dim};
    actor_dims.insert(actor_dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    actor_dims.push_back(cfg.action_dims);
    std::vector<int> critic_dims{obs_dim + cfg.action_dims};
    critic_dims.insert(critic_dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    critic_dims.push_back(1);
    a.actor = nn::init(actor_dims, nn::Activation::Logistic, rng);
    a.critic = nn::init(critic_dims, nn::Activation::Linear, rng);
    a.target_actor = a.actor;
    a.target_critic = a.critic;
    a.actor_opt = nn::AdamState::for_net(a.actor);
    a.critic_opt = nn::AdamState::for_net(a.critic);
    return a;
}

ActionVec to_action(const std::vector<double>& a, const DdpgConfig& cfg) {
    if (cfg.action_dims == 1) return {a.at(0), cfg.fixed_alpha};
    return {a.at(0), a.at(1)};
}

std::vector<double> from_action(const ActionVec& a, const DdpgConfig& cfg) {
    if (cfg.action_dims == 1) return {a.p};
    return {a.p, a.alpha};
}

std::vector<double> actor_output(const nn::Mlp& actor, const std::vector<double>& features) {
    const nn::Vector x = Eigen::Map<const nn::Vector>(features.data(), static_cast<Eigen::Index>(features.size()));
    const nn::Vector mu = nn::forward(actor, x);
    return {mu.data(), mu.data() + mu.size()};
}

std::vector<double> select_action(const nn::Mlp& actor, const std::vector<double>& features, long t,
                                  const NoiseSchedule& sched, Rng& rng, bool explore) {
    auto a = actor_output(actor, features);
    if (explore) {
        std::normal_distribution<double> xi(0.0, noise_magnitude(t, sched));
        for (auto& v : a) v = std::clamp(v + xi(rng), 0.0, 1.0);
    }
    return a;
}

ActionVec action_adjuster(const RawState& raw, const ActionVec& candidate, const SystemParams& params) {
    if (raw.E < params.E0) return {};
    const auto phys = to_physical(candidate, raw.E, params);
    const double rate = std::log2(1.0 + phys.p_s * raw.gs / params.noise_w);
    if (rate < params.R0) return {};
    return candidate;
}

namespace {

nn::Matrix stack_inputs(const std::vector<const Transition*>& batch, bool next, int obs_dim) {
    nn::Matrix m(obs_dim, static_cast<Eigen::Index>(batch.size()));
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& s = next ? batch[i]->s_next : batch[i]->s;
        for (int k = 0; k < obs_dim; ++k) m(k, static_cast<Eigen::Index>(i)) = s[k];
    }
    return m;
}

// Applies the adjuster column by column; mask[i] = 1 where the action passed.
void adjust_columns(nn::Matrix& actions, const std::vector<const Transition*>& batch, bool next,
                    const AgentNets& nets, const SystemParams& params, std::vector<double>* mask) {
    const int ad = nets.cfg.action_dims;
    if (mask) mask->assign(batch.size(), 1.0);
    for (Eigen::Index i = 0; i < actions.cols(); ++i) {
        std::vector<double> a(ad);
        for (int k = 0; k < ad; ++k) a[k] = actions(k, i);
        const auto& raw = next ? batch[i]->raw_next : batch[i]->raw;
        const ActionVec adj = action_adjuster(raw, to_action(a, nets.cfg), params);
        if (adj.p == 0.0 && adj.alpha == 0.0) {
            for (int k = 0; k < ad; ++k) actions(k, i) = 0.0;
            if (mask) (*mask)[i] = 0.0;
        }
    }
}

} // namespace

TrainStepStats train_step(AgentNets& nets, const std::vector<const Transition*>& batch, const SystemParams& params) {
    if (batch.empty()) throw UsageError("train_step: empty batch");
    const auto B = static_cast<Eigen::Index>(batch.size());
    const int obs_dim = nets.actor.input_dim();
    const int ad = nets.cfg.action_dims;
    const double inv_b = 1.0 / static_cast<double>(B);

    const nn::Matrix S = stack_inputs(batch, false, obs_dim);
    const nn::Matrix S2 = stack_inputs(batch, true, obs_dim);

    // Target values r + gamma * Q'(s', mu'(s')).
    nn::Matrix A2 = nn::forward(nets.target_actor, S2);
    if (nets.cfg.use_adjuster && nets.cfg.adjust_target) adjust_columns(A2, batch, true, nets, params, nullptr);
    nn::Matrix X2(obs_dim + ad, B);
    X2 << S2, A2;
    const nn::Matrix Q2 = nn::forward(nets.target_critic, X2);

    nn::Matrix X(obs_dim + ad, B);
    X.topRows(obs_dim) = S;
    nn::Vector y(B);
    for (Eigen::Index i = 0; i < B; ++i) {
        y(i) = batch[i]->r + nets.cfg.gamma * Q2(0, i);
        for (int k = 0; k < ad; ++k) X(obs_dim + k, i) = batch[i]->a[k];
    }

    TrainStepStats stats;

    // Critic regression on the executed actions.
    nn::ForwardCache cc;
    const nn::Matrix Q = nn::forward(nets.critic, X, &cc);
    const nn::Matrix err = Q - y.transpose();
    stats.critic_loss = err.squaredNorm() * inv_b;
    auto cb = nn::backward(nets.critic, cc, 2.0 * inv_b * err);
    nn::adam_step(nets.critic, cb.grads, nets.critic_opt, nets.cfg.lr_critic);

    // Actor ascent through the (straight-through) adjuster.
    nn::ForwardCache ac;
    nn::Matrix A = nn::forward(nets.actor, S, &ac);
    std::vector<double> mask(batch.size(), 1.0);
    if (nets.cfg.use_adjuster) adjust_columns(A, batch, false, nets, params, &mask);
    nn::Matrix XA(obs_dim + ad, B);
    XA << S, A;
    nn::ForwardCache qc;
    const nn::Matrix QA = nn::forward(nets.critic, XA, &qc);
    stats.actor_objective = QA.sum() * inv_b;
    const auto qb = nn::backward(nets.critic, qc, nn::Matrix::Constant(1, B, -inv_b));
    nn::Matrix dA = qb.dx.bottomRows(ad);
    for (Eigen::Index i = 0; i < B; ++i) dA.col(i) *= mask[static_cast<std::size_t>(i)];
    const auto ab = nn::backward(nets.actor, ac, dA);
    nn::adam_step(nets.actor, ab.grads, nets.actor_opt, nets.cfg.lr_actor);

    nn::soft_update(nets.target_critic, nets.critic, nets.cfg.tau);
    nn::soft_update(nets.target_actor, nets.actor, nets.cfg.tau);
    ++nets.updates;
    return stats;
}

namespace {

RawState raw_of(const Observation& o) { return {o.E, o.gs}; }

} // namespace

TrainResult train(Environment& env, AgentNets nets, const TrainSchedule& schedule, Rng& rng,
                  const EpisodeCallback& on_episode) {
    if (schedule.episodes < 0 || schedule.steps < 0) throw ConfigError("schedule must be nonnegative");
    if (nets.actor.input_dim() != env.obs_dim()) throw ConfigError("actor input dimension does not match environment");
    const auto& params = env.params();
    const int N = params.N;
    const auto sched = NoiseSchedule::reaching_floor(nets.cfg.noise_n0, nets.cfg.noise_floor,
                                                     static_cast<long>(schedule.episodes) * schedule.steps,
                                                     nets.cfg.noise_floor_fraction);
    const long gate = static_cast<long>((nets.cfg.memory + 2) / 3);

    TrainResult res;
    ReplayMemory memory(nets.cfg.memory);
    std::vector<ActionVec> actions(N);
    std::vector<std::vector<double>> executed(N);

    for (int ep = 0; ep < schedule.episodes; ++ep) {
        auto obs = env.reset();
        MetricsAccumulator acc;
        for (int t = 0; t < schedule.steps; ++t) {
            for (int n = 0; n < N; ++n) {
                const auto cand = select_action(nets.actor, obs[n].features, nets.global_step, sched, rng, true);
                ActionVec a = to_action(cand, nets.cfg);
                if (nets.cfg.use_adjuster) a = action_adjuster(raw_of(obs[n]), a, params);
                actions[n] = a;
                executed[n] = from_action(a, nets.cfg);
            }
            auto step = env.step(actions);
            acc.add(step);
            for (int n = 0; n < N; ++n) {
                memory.store({obs[n].features, executed[n], step.reward[n], step.next_obs[n].features, raw_of(obs[n]),
                              raw_of(step.next_obs[n])});
            }
            if (memory.inserted() >= gate && memory.size() >= static_cast<std::size_t>(nets.cfg.batch)) {
                if (res.first_update_at < 0) res.first_update_at = memory.inserted();
                train_step(nets, memory.sample(static_cast<std::size_t>(nets.cfg.batch), rng), params);
            }
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

std::vector<PhysicalAction> DdpgPolicy::act(const Environment& env, const std::vector<Observation>& obs, Rng&) {
    const auto& params = env.params();
    std::vector<PhysicalAction> out(obs.size());
    for (std::size_t n = 0; n < obs.size(); ++n) {
        ActionVec a = to_action(actor_output(nets_.actor, obs[n].features), nets_.cfg);
        if (nets_.cfg.use_adjuster) a = action_adjuster(raw_of(obs[n]), a, params);
        out[n] = to_physical(a, obs[n].E, params);
    }
    return out;
}

void save_agent(std::ostream& os, const AgentNets& a) {
    const auto old = os.precision(17);
    const auto& c = a.cfg;
    os << "agent v1\n";
    os << "hidden " << c.hidden.size();
    for (int h : c.hidden) os << ' ' << h;
    os << "\ngamma " << c.gamma << "\ntau " << c.tau << "\nbatch " << c.batch << "\nmemory " << c.memory
       << "\nlr_actor " << c.lr_actor << "\nlr_critic " << c.lr_critic << "\nuse_adjuster " << c.use_adjuster
       << "\nadjust_target " << c.adjust_target << "\naction_dims " << c.action_dims << "\nfixed_alpha "
       << c.fixed_alpha << "\nnoise " << c.noise_n0 << ' ' << c.noise_floor << ' ' << c.noise_floor_fraction
       << "\nupdates " << a.updates << "\nglobal_step " << a.global_step << '\n';
    nn::save(os, a.actor);
    nn::save(os, a.critic);
    nn::save(os, a.target_actor);
    nn::save(os, a.target_critic);
    nn::save(os, a.actor_opt);
    nn::save(os, a.critic_opt);
    os << "end-agent\n";
    os.precision(old);
}

AgentNets load_agent(std::istream& is) {
    auto expect = [&](const std::string& tok) {
        std::string got;
        if (!(is >> got) || got != tok) throw CheckpointError("agent checkpoint: expected '" + tok + "'");
    };
    AgentNets a;
    auto& c = a.cfg;
    expect("agent");
    expect("v1");
    expect("hidden");
    std::size_t nh = 0;
    if (!(is >> nh) || nh > 64) throw CheckpointError("agent checkpoint: bad hidden count");
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
    expect("lr_actor");
    is >> c.lr_actor;
    expect("lr_critic");
    is >> c.lr_critic;
    expect("use_adjuster");
    is >> c.use_adjuster;
    expect("adjust_target");
    is >> c.adjust_target;
    expect("action_dims");
    is >> c.action_dims;
    expect("fixed_alpha");
    is >> c.fixed_alpha;
    expect("noise");
    is >> c.noise_n0 >> c.noise_floor >> c.noise_floor_fraction;
    expect("updates");
    is >> a.updates;
    expect("global_step");
    is >> a.global_step;
    if (!is) throw CheckpointError("agent checkpoint: malformed header");
    a.actor = nn::load(is);
    a.critic = nn::load(is);
    a.target_actor = nn::load(is);
    a.target_critic = nn::load(is);
    a.actor_opt = nn::load_adam(is, a.actor);
    a.critic_opt = nn::load_adam(is, a.critic);
    expect("end-agent");
    if (a.actor.output_dim() != c.action_dims || a.critic.input_dim() != a.actor.input_dim() + c.action_dims)
        throw CheckpointError("agent checkpoint: network shapes inconsistent with config");
    return a;
}

} // namespace ehcr
