#include "ehcr/env.hpp"

#include "ehcr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace ehcr {

PhysicalAction to_physical(const ActionVec& a, double E, const SystemParams& params) {
    if (a.p <= kActionEpsilon || a.alpha <= kActionEpsilon) return {};
    const double p = std::clamp(a.p, 0.0, 1.0);
    const double alpha = std::clamp(a.alpha, 0.0, 1.0);
    const double budget = std::max(E, 0.0) / (alpha * params.T);
    return {1, p * std::min(params.p_max, budget), alpha};
}

double compute_reward(int lost, double rate_s, bool accessed, const std::vector<int>& pu_failed,
                      const SystemParams& params) {
    const double r_loss = -static_cast<double>(lost);
    const double r_rate = (accessed && rate_s >= params.R0) ? rate_s : 0.0;
    double r_pu = 0.0;
    for (int o : pu_failed) r_pu -= o;
    return params.w1 * r_loss + params.w2 * r_rate + params.w3 * r_pu;
}

double ObsNormalization::norm_db(double gain) const {
    const double db = 10.0 * std::log10(std::max(gain, 1e-30));
    return std::clamp((db + offset_db) / scale_db, 0.0, 1.0);
}

Environment::Environment(SystemParams params, Topology topology, std::uint64_t seed)
    : params_(std::move(params)), topo_(std::move(topology)), rng_(seed) {
    params_.validate();
    if (topo_.num_pu() != params_.M || topo_.num_ssu() != params_.N)
        throw ConfigError("topology size does not match M/N");
}

std::vector<Observation> Environment::reset() {
    const auto& p = params_;
    std::uniform_real_distribution<double> energy(0.0, p.E_max);
    std::uniform_int_distribution<int> fill(0, p.B_max);
    slot_ = 0;
    ssu_.assign(p.N, SsuState{});
    for (auto& s : ssu_) {
        s.E = energy(rng_);
        // Initial backlog counts as having arrived in the slot before the first decision.
        s.buffer.assign(fill(rng_), -1L);
    }
    ch_ = sample_channels(topo_, initial_pu_activity(p.M, p.P1, p.P2, rng_), p, rng_);
    ready_ = true;
    return observe_all();
}

Observation Environment::observe(int n) const {
    if (n < 0 || n >= params_.N) throw UsageError("observe: agent index out of range");
    const auto& p = params_;
    Observation o;
    o.gs = ch_.gs[n];
    o.up = ch_.up;
    o.gmn.resize(p.M);
    for (int m = 0; m < p.M; ++m) o.gmn[m] = ch_.gmn[m][n];
    o.E = ssu_[n].E;
    o.B = static_cast<int>(ssu_[n].buffer.size());

    o.features.reserve(2 * p.M + 3);
    o.features.push_back(norm_.norm_db(o.gs));
    for (int u : o.up) o.features.push_back(static_cast<double>(u));
    for (double g : o.gmn) o.features.push_back(norm_.norm_db(g));
    o.features.push_back(std::clamp(o.E / p.E_max, 0.0, 1.0));
    o.features.push_back(static_cast<double>(o.B) / p.B_max);
    return o;
}

std::vector<Observation> Environment::observe_all() const {
    std::vector<Observation> v;
    v.reserve(params_.N);
    for (int n = 0; n < params_.N; ++n) v.push_back(observe(n));
    return v;
}

StepResult Environment::step(const std::vector<ActionVec>& actions) {
    if (!ready_) throw UsageError("step called before reset");
    if (static_cast<int>(actions.size()) != params_.N) throw UsageError("step: one action per SSU required");
    std::vector<PhysicalAction> phys(params_.N);
    for (int n = 0; n < params_.N; ++n) phys[n] = to_physical(actions[n], ssu_[n].E, params_);
    return step_physical(phys);
}

StepResult Environment::step_physical(const std::vector<PhysicalAction>& actions) {
    if (!ready_) throw UsageError("step called before reset");
    const auto& p = params_;
    const int N = p.N;
    const int M = p.M;
    if (static_cast<int>(actions.size()) != N) throw UsageError("step: one action per SSU required");

    StepResult r;
    r.executed = actions;
    for (int n = 0; n < N; ++n) {
        auto& a = r.executed[n];
        if (a.U_s == 0 || a.p_s <= 0.0 || a.alpha <= 0.0) {
            a = PhysicalAction{};
            continue;
        }
        if (a.alpha > 1.0 || a.p_s > p.p_max * (1.0 + 1e-12))
            throw DomainError("step: action exceeds power or time limits");
        if (a.alpha * p.T * a.p_s > ssu_[n].E * (1.0 + 1e-12) + 1e-300)
            throw DomainError("step: transmit energy exceeds stored energy");
    }

    // (b) transmitter list: PU ids 0..M-1, SSU ids M..M+N-1
    std::vector<TxEntry> tx;
    for (int m = 0; m < M; ++m)
        if (ch_.up[m]) tx.push_back({m, UserKind::PU, p.p_p * ch_.gp[m], p.R1});
    for (int n = 0; n < N; ++n)
        if (r.executed[n].U_s) tx.push_back({M + n, UserKind::SSU, r.executed[n].p_s * ch_.gs[n], p.R0});

    // (c) decoding
    std::vector<DecodeOutcome> dec;
    double share = 1.0;
    if (mode_ == AccessMode::NOMA) {
        dec = sic_decode(tx, p.noise_w);
    } else {
        // Equal split of the band; each user sees only noise on its sub-band.
        dec.reserve(tx.size());
        share = tx.empty() ? 1.0 : 1.0 / static_cast<double>(tx.size());
        for (const auto& e : tx) {
            if (e.rx_power < 0.0) throw DomainError("negative received power");
            DecodeOutcome o;
            o.id = e.id;
            o.sinr = e.rx_power / p.noise_w;
            o.rate = std::log2(1.0 + o.sinr);
            o.decoded = o.rate >= e.threshold;
            dec.push_back(o);
        }
    }

    r.rate_p.assign(M, 0.0);
    r.pu_active = ch_.up;
    r.pu_failed.assign(M, 0);
    r.rate_s.assign(N, 0.0);
    std::vector<int> decoded_ssu(N, 0);
    for (const auto& o : dec) {
        // Rates are reported per Hz of the whole band.
        const double rate = o.rate * share;
        if (o.id < M) {
            r.rate_p[o.id] = rate;
            r.pu_failed[o.id] = o.decoded ? 0 : 1;
        } else if (o.decoded) {
            r.rate_s[o.id - M] = rate;
            decoded_ssu[o.id - M] = 1;
        }
    }

    r.delivered.assign(N, 0);
    r.lost.assign(N, 0);
    r.arrivals.assign(N, 0);
    r.consumed.assign(N, 0.0);
    r.harvested.assign(N, 0.0);
    r.reward.assign(N, 0.0);

    for (int n = 0; n < N; ++n) {
        auto& s = ssu_[n];
        const auto& a = r.executed[n];

        // (d) transmission, FIFO
        const int l = achievable_packets(r.rate_s[n], a.alpha, p.T, p.BW, p.C,
                                         static_cast<int>(s.buffer.size()), decoded_ssu[n] != 0);
        for (int k = 0; k < l; ++k) {
            const long arrived = s.buffer.front();
            s.buffer.pop_front();
            s.delivered.emplace_back(arrived, slot_);
            r.delays.push_back(static_cast<double>(slot_ - arrived));
        }
        r.delivered[n] = l;

        // (e) arrivals with drop-tail overflow
        const int c = arrival_override_.empty() ? poisson_arrivals(p.lambda, rng_) : arrival_override_[n];
        const int room = p.B_max - static_cast<int>(s.buffer.size());
        const int accepted = std::min(c, std::max(room, 0));
        for (int k = 0; k < accepted; ++k) s.buffer.push_back(slot_);
        r.arrivals[n] = c;
        r.lost[n] = c - accepted;
        s.lost_total += r.lost[n];

        // (f) transmit-then-harvest battery update
        const double t_tx = a.U_s * a.alpha * p.T;
        double incident = 0.0;
        for (int m = 0; m < M; ++m) incident += ch_.up[m] * p.p_p * ch_.gmn[m][n];
        r.consumed[n] = std::min(t_tx * a.p_s, s.E);
        r.harvested[n] = (p.T - t_tx) * p.eta * incident;
        s.E = std::min(std::max(s.E - r.consumed[n], 0.0) + r.harvested[n], p.E_max);
    }

    // (h) rewards and slot aggregates
    for (int n = 0; n < N; ++n)
        r.reward[n] = compute_reward(r.lost[n], r.rate_s[n], r.executed[n].U_s == 1, r.pu_failed, p);
    for (int n = 0; n < N; ++n) r.sum_rate += r.rate_s[n];
    r.ee_num = r.sum_rate;
    for (int m = 0; m < M; ++m) {
        r.ee_num += r.rate_p[m];
        r.ee_den += ch_.up[m] * p.p_p;
    }

    // (i) next slot
    arrival_override_.clear();
    ch_ = sample_channels(topo_, ch_.up, p, rng_);
    ++slot_;
    r.next_obs = observe_all();
    return r;
}

void write_trace_header(std::ostream& os) { os << "slot,agent,U_s,p_s,alpha,E,B,l,L,R_s,reward\n"; }

void append_trace(std::ostream& os, long slot, const StepResult& r) {
    const auto old = os.precision(12);
    for (std::size_t n = 0; n < r.executed.size(); ++n) {
        const auto& a = r.executed[n];
        os << slot << ',' << n << ',' << a.U_s << ',' << a.p_s << ',' << a.alpha << ',' << r.next_obs[n].E << ','
           << r.next_obs[n].B << ',' << r.delivered[n] << ',' << r.lost[n] << ',' << r.rate_s[n] << ','
           << r.reward[n] << '\n';
    }
    os.precision(old);
}

} // namespace ehcr
