#include "ehcr/checks.hpp"

#include "ehcr/baselines.hpp"
#include "ehcr/ddpg.hpp"
#include "ehcr/env.hpp"
#include "ehcr/errors.hpp"
#include "ehcr/experiment.hpp"
#include "ehcr/sysmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

namespace ehcr {

namespace {

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(4);
    os << x;
    return os.str();
}

CheckResult pass(std::string name, std::string detail) { return {std::move(name), true, std::move(detail)}; }
CheckResult fail(std::string name, std::string detail) { return {std::move(name), false, std::move(detail)}; }

SystemParams small_params(std::uint64_t seed) {
    SystemParams p;
    p.M = 2;
    p.N = 6;
    p.seed = seed;
    return p;
}

} // namespace

bool CheckReport::all_passed() const {
    return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed; });
}

void CheckReport::print(std::ostream& os) const {
    for (const auto& r : results) os << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << '\n';
    const auto n_pass = std::count_if(results.begin(), results.end(), [](const CheckResult& r) { return r.passed; });
    os << n_pass << '/' << results.size() << " checks passed\n";
}

// ---------------------------------------------------------------- SIC oracle

std::vector<DecodeOutcome> sic_bruteforce(const std::vector<TxEntry>& entries, double noise) {
    const std::size_t n = entries.size();
    if (n > 20) throw DomainError("sic_bruteforce: too many users");
    auto before = [&](std::size_t i, std::size_t j) {
        return entries[i].rx_power > entries[j].rx_power ||
               (entries[i].rx_power == entries[j].rx_power && entries[i].id < entries[j].id);
    };
    std::vector<DecodeOutcome> found;
    int matches = 0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        std::vector<DecodeOutcome> cand(n);
        bool consistent = true;
        for (std::size_t k = 0; k < n && consistent; ++k) {
            double interference = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == k) continue;
                const bool cancelled = before(j, k) && ((mask >> j) & 1u);
                if (!cancelled) interference += entries[j].rx_power;
            }
            auto& o = cand[k];
            o.id = entries[k].id;
            o.sinr = entries[k].rx_power / (noise + interference);
            o.rate = std::log2(1.0 + o.sinr);
            o.decoded = o.rate >= entries[k].threshold;
            consistent = o.decoded == static_cast<bool>((mask >> k) & 1u);
        }
        if (consistent) {
            ++matches;
            found = std::move(cand);
        }
    }
    if (matches != 1) throw DomainError("sic_bruteforce: " + std::to_string(matches) + " consistent assignments");
    return found;
}

CheckResult check_sic_equivalence(int trials, int max_users, std::uint64_t seed) {
    const std::string name = "sic_bruteforce_equivalence";
    Rng rng(seed);
    std::uniform_int_distribution<int> users(1, max_users);
    std::uniform_real_distribution<double> log_power(-20.0, -12.0);
    std::uniform_real_distribution<double> thr(0.0, 1.5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double noise = 1e-18;
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        const int n = users(rng);
        std::vector<TxEntry> e(n);
        for (int k = 0; k < n; ++k) {
            e[k].id = k;
            e[k].kind = k % 2 ? UserKind::SSU : UserKind::PU;
            // Occasional exact ties and silent users exercise the ordering rule.
            if (k > 0 && u(rng) < 0.1)
                e[k].rx_power = e[k - 1].rx_power;
            else if (u(rng) < 0.05)
                e[k].rx_power = 0.0;
            else
                e[k].rx_power = std::pow(10.0, log_power(rng));
            e[k].threshold = thr(rng);
        }
        std::shuffle(e.begin(), e.end(), rng);
        const auto fast = sic_decode(e, noise);
        const auto ref = sic_bruteforce(e, noise);
        for (int k = 0; k < n; ++k) {
            if (fast[k].id != ref[k].id || fast[k].decoded != ref[k].decoded)
                return fail(name, "trial " + std::to_string(t) + ": decode sets differ");
            const double rel = std::abs(fast[k].sinr - ref[k].sinr) / std::max(ref[k].sinr, 1e-300);
            worst = std::max(worst, ref[k].sinr > 0.0 ? rel : std::abs(fast[k].sinr));
        }
    }
    if (worst > 1e-9) return fail(name, "SINR mismatch, max relative error " + fmt(worst));
    return pass(name, std::to_string(trials) + " random instances with up to " + std::to_string(max_users) +
                          " users, max SINR rel. err " + fmt(worst));
}

// ------------------------------------------------------------ gradient check

CheckResult check_mlp_gradients(std::uint64_t seed, double tol, const BackwardFn& backward_fn) {
    const std::string name = "mlp_gradients_finite_difference";
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    const double h = 1e-5;
    double worst = 0.0;
    std::size_t compared = 0;
    for (auto act : {nn::Activation::Linear, nn::Activation::Logistic, nn::Activation::Relu}) {
        nn::Mlp net = nn::init({4, 7, 5, 3}, act, rng);
        // Nonzero biases keep every unit away from the rectifier kink.
        for (auto& L : net.mutable_layers())
            for (Eigen::Index i = 0; i < L.b.size(); ++i) L.b(i) = 0.3 + 0.1 * g(rng);
        nn::Matrix x(4, 3), c(3, 3);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
        for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = g(rng);
        auto loss = [&](const nn::Mlp& m, const nn::Matrix& in) { return (nn::forward(m, in).array() * c.array()).sum(); };

        nn::ForwardCache cache;
        nn::forward(net, x, &cache);
        const auto res = backward_fn(net, cache, c);

        auto compare = [&](double analytic, double numeric) {
            const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            worst = std::max(worst, rel);
            ++compared;
        };
        std::size_t idx = 0;
        for (std::size_t l = 0; l < net.layers().size(); ++l) {
            const auto& L = net.layers()[l];
            for (Eigen::Index r = 0; r < L.W.rows(); ++r)
                for (Eigen::Index col = 0; col < L.W.cols(); ++col, ++idx) {
                    nn::Mlp m = net;
                    const double v = m.parameter(idx);
                    m.set_parameter(idx, v + h);
                    const double up = loss(m, x);
                    m.set_parameter(idx, v - h);
                    compare(res.grads.dW[l](r, col), (up - loss(m, x)) / (2 * h));
                }
            for (Eigen::Index r = 0; r < L.b.size(); ++r, ++idx) {
                nn::Mlp m = net;
                const double v = m.parameter(idx);
                m.set_parameter(idx, v + h);
                const double up = loss(m, x);
                m.set_parameter(idx, v - h);
                compare(res.grads.db[l](r), (up - loss(m, x)) / (2 * h));
            }
        }
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            nn::Matrix xp = x, xm = x;
            xp.data()[i] += h;
            xm.data()[i] -= h;
            compare(res.dx.data()[i], (loss(net, xp) - loss(net, xm)) / (2 * h));
        }
    }
    const std::string detail = std::to_string(compared) + " parameter and input derivatives, max rel. err " + fmt(worst);
    return worst < tol ? pass(name, detail) : fail(name, detail + " (limit " + fmt(tol) + ")");
}

// ------------------------------------------------------- soft update, replay

CheckResult check_soft_update(std::uint64_t seed) {
    const std::string name = "soft_update_contraction";
    Rng rng(seed);
    const nn::Mlp source = nn::init({3, 6, 2}, nn::Activation::Linear, rng);
    nn::Mlp target = nn::init({3, 6, 2}, nn::Activation::Linear, rng);
    const nn::Mlp start = target;
    const double tau = 0.01;
    const int k = 50;
    for (int i = 0; i < k; ++i) nn::soft_update(target, source, tau);
    const double factor = std::pow(1.0 - tau, k);
    double worst = 0.0;
    for (std::size_t i = 0; i < target.parameter_count(); ++i) {
        const double gap0 = start.parameter(i) - source.parameter(i);
        const double gap = target.parameter(i) - source.parameter(i);
        worst = std::max(worst, std::abs(gap - factor * gap0) / std::max(std::abs(gap0), 1e-300));
    }
    const std::string detail = std::to_string(k) + " updates at tau=0.01, max deviation from (1-tau)^k " + fmt(worst);
    return worst < 1e-12 ? pass(name, detail) : fail(name, detail);
}

CheckResult check_replay_fifo() {
    const std::string name = "replay_fifo";
    ReplayMemory mem(5);
    for (int i = 0; i < 12; ++i) {
        Transition t;
        t.r = i;
        mem.store(std::move(t));
    }
    if (mem.size() != 5 || mem.inserted() != 12) return fail(name, "size or insertion count wrong");
    for (std::size_t k = 0; k < 5; ++k)
        if (mem.at(k).r != static_cast<double>(7 + k)) return fail(name, "entry " + std::to_string(k) + " out of order");
    Rng rng(1);
    for (int i = 0; i < 40; ++i)
        for (const Transition* t : mem.sample(5, rng))
            if (t->r < 7) return fail(name, "sample returned an evicted transition");
    bool threw = false;
    try {
        ReplayMemory(3).sample(1, rng);
    } catch (const NotReadyError&) {
        threw = true;
    }
    if (!threw) return fail(name, "sampling an empty memory did not throw");
    return pass(name, "capacity 5 after 12 insertions holds exactly the 5 newest, oldest first");
}

// ------------------------------------------------------------ env invariants

CheckResult check_env_invariants(int episodes, int steps, std::uint64_t seed) {
    const std::string name = "env_invariants_all_policies";
    const double tol = 1e-12;
    long slots = 0;
    Rng agent_rng(seed);
    DdpgConfig cfg;
    cfg.hidden = {32, 32};
    const SystemParams base = small_params(seed);
    const int obs_dim = 2 * base.M + 3;
    const AgentNets agent = make_agent(obs_dim, cfg, agent_rng);
    DdpgConfig cfg_power = cfg;
    cfg_power.action_dims = 1;
    const AgentNets agent_power = make_agent(obs_dim, cfg_power, agent_rng);
    DqnConfig dcfg;
    dcfg.hidden = {32};
    const DqnNets dqn = make_dqn(obs_dim, dcfg, agent_rng);

    std::vector<std::pair<std::string, std::unique_ptr<Policy>>> policies;
    policies.emplace_back("random", std::make_unique<RandomPolicy>());
    policies.emplace_back("aor", std::make_unique<AorPolicy>());
    policies.emplace_back("greedy", std::make_unique<GreedyPolicy>(agent));
    policies.emplace_back("actor", std::make_unique<DdpgPolicy>(agent));
    policies.emplace_back("const_t_actor", std::make_unique<ConstantTPolicy>(PowerSource::Actor, &agent_power));
    policies.emplace_back("const_t_random", std::make_unique<ConstantTPolicy>(PowerSource::Random, nullptr));
    policies.emplace_back("dqn", std::make_unique<DqnPolicy>(dqn));

    for (auto mode : {AccessMode::NOMA, AccessMode::OFDM})
        for (double lambda : {0.5, 1.2}) {
            SystemParams p = base;
            p.lambda = lambda;
            p.B_max = lambda < 1 ? 3 : 6;
            Rng topo_rng(seed + 11);
            const Topology topo = generate_topology(p, topo_rng);
            for (auto& [pname, policy] : policies) {
                Environment env(p, topo, seed + 101);
                env.set_access_mode(mode);
                Rng rng(seed + 202);
                const std::string where = pname + "/" + to_string(mode) + "/lambda=" + fmt(lambda);
                for (int ep = 0; ep < episodes; ++ep) {
                    auto obs = env.reset();
                    long initial = 0, arrived = 0, delivered = 0, lost = 0;
                    for (const auto& s : env.states()) initial += static_cast<long>(s.buffer.size());
                    for (int t = 0; t < steps; ++t, ++slots) {
                        std::vector<double> E0;
                        std::vector<int> B0;
                        for (const auto& s : env.states()) {
                            E0.push_back(s.E);
                            B0.push_back(static_cast<int>(s.buffer.size()));
                        }
                        const auto r = env.step_physical(policy->act(env, obs, rng));
                        std::size_t delays = 0;
                        for (int n = 0; n < p.N; ++n) {
                            const auto& a = r.executed[n];
                            const auto& s = env.states()[n];
                            const int B1 = static_cast<int>(s.buffer.size());
                            auto bad = [&](const std::string& what) {
                                return fail(name, where + " slot " + std::to_string(t) + " agent " + std::to_string(n) +
                                                      ": " + what);
                            };
                            if (a.U_s != 0 && a.U_s != 1) return bad("access bit not binary");
                            if (a.U_s == 0 && (a.p_s != 0.0 || a.alpha != 0.0)) return bad("idle agent transmits");
                            if (a.alpha < 0.0 || a.alpha > 1.0) return bad("time share outside [0,1]");
                            if (a.p_s < 0.0 || a.p_s > p.p_max * (1 + tol)) return bad("power outside [0,p_max]");
                            if (a.alpha * p.T * a.p_s > E0[n] + tol) return bad("energy causality violated");
                            if (r.consumed[n] > E0[n] + tol) return bad("consumption exceeds stored energy");
                            if (std::abs(r.consumed[n] - a.alpha * p.T * a.p_s) > tol) return bad("consumption mismatch");
                            if (s.E < 0.0 || s.E > p.E_max) return bad("battery outside [0,E_max]");
                            const double expect_E = std::min(std::max(E0[n] - r.consumed[n], 0.0) + r.harvested[n], p.E_max);
                            if (std::abs(s.E - expect_E) > tol) return bad("battery update mismatch");
                            if (r.delivered[n] < 0 || r.delivered[n] > B0[n]) return bad("delivered more than queued");
                            if (B1 != B0[n] + r.arrivals[n] - r.delivered[n] - r.lost[n]) return bad("buffer conservation");
                            if (r.lost[n] != std::max(0, B0[n] - r.delivered[n] + r.arrivals[n] - p.B_max))
                                return bad("loss is not the drop-tail overflow");
                            if (B1 > p.B_max) return bad("buffer above B_max");
                            if (r.delivered[n] > 0 && !(r.rate_s[n] > 0.0)) return bad("delivery without decoding");
                            arrived += r.arrivals[n];
                            delivered += r.delivered[n];
                            lost += r.lost[n];
                            delays += static_cast<std::size_t>(r.delivered[n]);
                        }
                        if (delays != r.delays.size()) return fail(name, where + ": delay record count mismatch");
                        for (double d : r.delays)
                            if (d < 1.0) return fail(name, where + ": delay below one slot");
                        obs = r.next_obs;
                    }
                    long final_q = 0;
                    for (const auto& s : env.states()) final_q += static_cast<long>(s.buffer.size());
                    if (initial + arrived != delivered + lost + final_q)
                        return fail(name, where + ": episode packet balance broken");
                }
            }
        }
    return pass(name, std::to_string(slots) + " slots over 7 policies, NOMA and OFDM: battery, causality, buffer, "
                                              "power, time-share and access constraints hold");
}

// ---------------------------------------------------------- reproducibility

CheckResult check_reproducibility(std::uint64_t seed) {
    const std::string name = "seed_reproducibility";
    ExperimentSpec spec;
    spec.params = small_params(seed);
    spec.params.N = 3;
    spec.schedule = {4, 10};
    spec.ddpg.hidden = {16, 16};
    spec.ddpg.memory = 60;
    spec.ddpg.batch = 8;
    auto run = [&](Algorithm a) {
        ExperimentSpec s = spec;
        s.algorithm = a;
        s.dqn.hidden = {16};
        s.dqn.memory = 60;
        s.dqn.batch = 8;
        const Trained t = train_algorithm(s);
        std::ostringstream os;
        export_csv(os, t.history);
        if (t.agent) save_agent(os, *t.agent);
        if (t.dqn) save_dqn(os, *t.dqn);
        auto pol = make_policy(s, t);
        export_csv(os, evaluate(s, *pol, 2));
        return std::make_pair(os.str(), t.transitions);
    };
    for (auto a : {Algorithm::Aaddpg, Algorithm::Dqn}) {
        const auto r1 = run(a);
        const auto r2 = run(a);
        if (r1.second == 0) return fail(name, to_string(a) + ": no transitions recorded");
        if (r1.first != r2.first) return fail(name, to_string(a) + ": repeated run differs");
    }
    ExperimentSpec other = spec;
    other.params.seed = seed + 1;
    const Trained a = train_algorithm(spec), b = train_algorithm(other);
    std::ostringstream sa, sb;
    export_csv(sa, a.history);
    export_csv(sb, b.history);
    if (sa.str() == sb.str()) return fail(name, "different seeds produced identical runs");
    return pass(name, "aaddpg and dqn training plus evaluation are byte-identical for a repeated seed");
}

// ------------------------------------------------------------ distributions

CheckResult check_poisson(double lambda, int samples, std::uint64_t seed) {
    const std::string name = "poisson_moments_lambda_" + fmt(lambda);
    Rng rng(seed);
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double k = poisson_arrivals(lambda, rng);
        sum += k;
        sum2 += k * k;
    }
    const double mean = sum / samples;
    const double var = sum2 / samples - mean * mean;
    const double em = std::abs(mean - lambda) / lambda, ev = std::abs(var - lambda) / lambda;
    const std::string detail = "mean " + fmt(mean) + " (rel " + fmt(em) + "), variance " + fmt(var) + " (rel " + fmt(ev) + ")";
    return em <= 0.02 && ev <= 0.05 ? pass(name, detail) : fail(name, detail);
}

CheckResult check_pu_stationary(double P1, double P2, int steps, std::uint64_t seed) {
    const std::string name = "pu_chain_stationary_occupancy";
    Rng rng(seed);
    int state = initial_pu_activity(1, P1, P2, rng)[0];
    long busy = 0;
    for (int t = 0; t < steps; ++t) {
        state = step_pu_activity(state, P1, P2, rng);
        busy += state;
    }
    const double occ = static_cast<double>(busy) / steps;
    const double expect = P2 / (P1 + P2);
    const double rel = std::abs(occ - expect) / expect;
    const std::string detail = "occupancy " + fmt(occ) + " vs " + fmt(expect) + " (rel " + fmt(rel) + ")";
    return rel <= 0.01 ? pass(name, detail) : fail(name, detail);
}

CheckResult check_rayleigh_mean(int samples, std::uint64_t seed) {
    const std::string name = "rayleigh_power_gain_mean";
    SystemParams p = small_params(seed);
    Rng rng(seed);
    const Topology topo = generate_topology(p, rng);
    std::vector<double> sum_s(p.N, 0.0), sum_p(p.M, 0.0);
    std::vector<int> up(p.M, 1);
    for (int i = 0; i < samples; ++i) {
        const auto ch = sample_channels(topo, up, p, rng);
        up = ch.up;
        for (int n = 0; n < p.N; ++n) sum_s[n] += ch.gs[n];
        for (int m = 0; m < p.M; ++m) sum_p[m] += ch.gp[m];
    }
    double worst = 0.0;
    for (int n = 0; n < p.N; ++n) worst = std::max(worst, std::abs(sum_s[n] / samples - topo.beta_s[n]) / topo.beta_s[n]);
    for (int m = 0; m < p.M; ++m) worst = std::max(worst, std::abs(sum_p[m] / samples - topo.beta_p[m]) / topo.beta_p[m]);
    const std::string detail = std::to_string(samples) + " draws per link, max rel. deviation " + fmt(worst);
    return worst <= 0.02 ? pass(name, detail) : fail(name, detail);
}

// -------------------------------------------------------------------- AoR

CheckResult check_aor_exactness(int instances, std::uint64_t seed, double tol) {
    const std::string name = "aor_rate_exactness";
    Rng rng(seed);
    std::uniform_int_distribution<int> users(1, 20);
    std::uniform_real_distribution<double> log_gain(-8.0, -5.0), energy(0.0, 2.0), lam(0.1, 1.2);
    long admitted = 0;
    double worst = 0.0;
    for (int i = 0; i < instances; ++i) {
        SystemParams p;
        p.lambda = lam(rng);
        const int n = users(rng);
        std::vector<double> h2(n), E(n);
        for (int k = 0; k < n; ++k) {
            h2[k] = std::pow(10.0, log_gain(rng));
            E[k] = energy(rng);
        }
        const auto alloc = aor_allocate(h2, E, p);
        // Admission order is ascending h2*E; interference is every earlier admission.
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return h2[a] * E[a] < h2[b] * E[b]; });
        double earlier = 0.0;
        for (int k : order) {
            if (!alloc.U_s[k]) {
                if (alloc.p_s[k] != 0.0) return fail(name, "rejected user holds power");
                continue;
            }
            ++admitted;
            const double rate = std::log2(1.0 + alloc.p_s[k] * h2[k] / (p.noise_w + earlier));
            worst = std::max(worst, std::abs(rate - p.R0));
            if (alloc.p_s[k] > p.p_max || alloc.alpha * p.T * alloc.p_s[k] > E[k] * (1 + 1e-12))
                return fail(name, "admitted user violates power or energy limits");
            earlier += alloc.p_s[k] * h2[k];
        }
    }
    if (admitted == 0) return fail(name, "no user was ever admitted");
    const std::string detail = std::to_string(instances) + " instances, " + std::to_string(admitted) +
                               " admissions, max |rate - R0| " + fmt(worst);
    return worst <= tol ? pass(name, detail) : fail(name, detail);
}

// ---------------------------------------------------------------- selftest

CheckReport run_selftest(const SelftestOptions& opt) {
    const std::uint64_t s = opt.seed;
    const int scale = opt.quick ? 10 : 1;
    CheckReport rep;
    auto guarded = [&](const std::string& name, const std::function<CheckResult()>& fn) {
        try {
            rep.results.push_back(fn());
        } catch (const std::exception& e) {
            rep.results.push_back(fail(name, std::string("threw: ") + e.what()));
        }
    };
    guarded("sic_bruteforce_equivalence", [&] { return check_sic_equivalence(10000 / scale, 5, s); });
    guarded("mlp_gradients_finite_difference", [&] { return check_mlp_gradients(s); });
    guarded("gradient_check_mutation", [&] {
        const BackwardFn flipped = [](const nn::Mlp& net, const nn::ForwardCache& c, const nn::Matrix& dy) {
            auto r = nn::backward(net, c, dy);
            r.grads.dW[0] = -r.grads.dW[0];
            return r;
        };
        const auto r = check_mlp_gradients(s, 1e-4, flipped);
        return r.passed ? fail("gradient_check_mutation", "sign-flipped backprop was not detected")
                        : pass("gradient_check_mutation", "sign-flipped backprop rejected (" + r.detail + ")");
    });
    guarded("soft_update_contraction", [&] { return check_soft_update(s); });
    guarded("replay_fifo", [&] { return check_replay_fifo(); });
    guarded("env_invariants_all_policies", [&] { return check_env_invariants(opt.quick ? 2 : 5, 40, s); });
    guarded("seed_reproducibility", [&] { return check_reproducibility(s); });
    for (double lambda : {0.5, 1.0, 2.5})
        guarded("poisson_moments", [&] { return check_poisson(lambda, 400000 / scale, s + 1); });
    guarded("pu_chain_stationary_occupancy", [&] { return check_pu_stationary(0.3, 0.8, 1000000 / scale, s + 2); });
    guarded("rayleigh_power_gain_mean", [&] { return check_rayleigh_mean(100000 / scale, s + 3); });
    guarded("aor_rate_exactness", [&] { return check_aor_exactness(1000 / scale, s + 4); });
    return rep;
}

} // namespace ehcr
