#include "ehcr/baselines.hpp"
#include "ehcr/checks.hpp"
#include "ehcr/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace ehcr;

namespace {

Observation obs_with(int obs_dim, double E, double gs) {
    Observation o;
    o.E = E;
    o.gs = gs;
    o.features.assign(obs_dim, 0.3);
    return o;
}

} // namespace

TEST_CASE("random policy") {
    Rng rng(1);
    double sp = 0, sa = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const auto a = random_policy(rng);
        CHECK((a.p >= 0 && a.p <= 1 && a.alpha >= 0 && a.alpha <= 1));
        sp += a.p;
        sa += a.alpha;
    }
    CHECK(sp / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(sa / n == doctest::Approx(0.5).epsilon(0.01));
    Rng a(2), b(2);
    CHECK(random_policy(a).p == random_policy(b).p);
}

TEST_CASE("greedy policy uses full power and the actor's time share") {
    Rng rng(3);
    DdpgConfig cfg;
    cfg.hidden = {8};
    const auto agent = make_agent(7, cfg, rng);
    const auto o = obs_with(7, 2.0, 1e-6);
    const auto a = greedy_policy(agent, o);
    CHECK(a.p == 1.0);
    CHECK(a.alpha == actor_output(agent.actor, o.features)[1]);
    const SystemParams p;
    const auto phys = to_physical({1.0, 0.5}, 2.0, p);
    CHECK(phys.p_s == 0.5);
    CHECK_THROWS_AS(greedy_policy(AgentNets{}, o), ConfigError);
}

TEST_CASE("constant time share policies") {
    Rng rng(4);
    double sp = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const auto a = constant_t_policy(PowerSource::Random, nullptr, Observation{}, rng);
        CHECK(a.alpha == 0.5);
        sp += a.p;
    }
    CHECK(sp / n == doctest::Approx(0.5).epsilon(0.01));

    DdpgConfig cfg;
    cfg.hidden = {8};
    cfg.action_dims = 1;
    const auto agent = make_agent(7, cfg, rng);
    const auto o = obs_with(7, 1.0, 1e-6);
    const auto a1 = constant_t_policy(PowerSource::Actor, &agent, o, rng);
    const auto a2 = constant_t_policy(PowerSource::Actor, &agent, o, rng);
    CHECK(a1.alpha == 0.5);
    CHECK(a1.p == a2.p);
    CHECK_THROWS_AS(constant_t_policy(PowerSource::Actor, nullptr, o, rng), ConfigError);
}

TEST_CASE("allocation on request closed forms") {
    SystemParams p;
    p.noise_w = 1.0;
    const auto one = aor_allocate({1.0}, {10.0}, p);
    CHECK(one.alpha == doctest::Approx(2500.0 / 3000.0));
    CHECK(one.U_s[0] == 1);
    CHECK(one.p_s[0] == doctest::Approx(0.2311).epsilon(1e-3));
    CHECK(one.p_s[0] == doctest::Approx(std::exp2(0.3) - 1.0));

    const auto two = aor_allocate({1.0, 1.0}, {10.0, 10.0}, p);
    CHECK(two.U_s[0] == 1);
    CHECK(two.U_s[1] == 1);
    CHECK(two.p_s[0] == doctest::Approx(0.2311).epsilon(1e-3));
    CHECK(two.p_s[1] == doctest::Approx(0.2845).epsilon(1e-3));

    const auto none = aor_allocate({1.0, 2.0, 3.0}, {0.0, 0.0, 0.0}, p);
    for (int u : none.U_s) CHECK(u == 0);

    // Power cap: a user needing more than p_max is refused.
    const auto capped = aor_allocate({0.1}, {10.0}, p);
    CHECK(capped.U_s[0] == 0);

    p.lambda = 2.0;  // alpha = 5000/3000 > 1
    CHECK_THROWS_AS(aor_allocate({1.0}, {1.0}, p), ConfigError);
    CHECK_THROWS_AS(aor_allocate({1.0}, {}, SystemParams{}), UsageError);
}

TEST_CASE("admitted users meet the rate threshold exactly") {
    const auto r = check_aor_exactness(1000, 17);
    INFO(r.detail);
    CHECK(r.passed);
}

TEST_CASE("discrete action grid") {
    auto a = DiscreteActionTable::decode(399);
    CHECK(a.p == 1.0);
    CHECK(a.alpha == 1.0);
    a = DiscreteActionTable::decode(0);
    CHECK(a.p == 0.0);
    CHECK(a.alpha == 0.0);
    a = DiscreteActionTable::decode(DiscreteActionTable::encode(3, 7));
    CHECK(a.p == doctest::Approx(3.0 / 19));
    CHECK(a.alpha == doctest::Approx(7.0 / 19));
    CHECK_THROWS_AS(DiscreteActionTable::decode(400), UsageError);
}

TEST_CASE("epsilon-greedy selection") {
    nn::Mlp q({3, 400}, nn::Activation::Linear);
    q.mutable_layers()[0].b(37) = 1.0;
    Rng rng(5);
    CHECK(dqn_select(q, {0.1, 0.2, 0.3}, 0.0, rng) == 37);
    nn::Mlp flat({3, 400}, nn::Activation::Linear);
    CHECK(dqn_select(flat, {0.1, 0.2, 0.3}, 0.0, rng) == 0);
    std::vector<int> hits(400, 0);
    for (int i = 0; i < 40000; ++i) ++hits[dqn_select(q, {0, 0, 0}, 1.0, rng)];
    CHECK(*std::min_element(hits.begin(), hits.end()) > 50);
    CHECK(*std::max_element(hits.begin(), hits.end()) < 170);

    DqnConfig cfg;
    CHECK(dqn_epsilon(0, 1000, cfg) == 1.0);
    CHECK(dqn_epsilon(250, 1000, cfg) == doctest::Approx(0.525));
    CHECK(dqn_epsilon(500, 1000, cfg) == doctest::Approx(0.05));
    CHECK(dqn_epsilon(900, 1000, cfg) == doctest::Approx(0.05));
}

TEST_CASE("DQN update") {
    Rng rng(6);
    DqnConfig cfg;
    cfg.hidden = {16};
    cfg.gamma = 0.0;
    auto nets = make_dqn(5, cfg, rng);
    Transition t;
    t.s = {0.1, 0.2, 0.3, 0.4, 0.5};
    t.s_next = t.s;
    t.a = {12.0};
    t.r = 2.0;
    std::vector<const Transition*> batch(4, &t);
    nn::Vector x = Eigen::Map<const nn::Vector>(t.s.data(), 5);
    const double q0 = nn::forward(nets.q, x)(12);
    // Zero discount: target is the reward.
    CHECK(dqn_train_step(nets, batch) == doctest::Approx((q0 - 2.0) * (q0 - 2.0)));

    double prev = 1e300;
    int decreases = 0;
    for (int i = 0; i < 50; ++i) {
        const double loss = dqn_train_step(nets, batch);
        decreases += loss < prev;
        prev = loss;
    }
    CHECK(decreases == 50);

    std::stringstream ss;
    save_dqn(ss, nets);
    const auto back = load_dqn(ss);
    CHECK(back.updates == nets.updates);
    for (std::size_t i = 0; i < nets.q.parameter_count(); i += 97) CHECK(back.q.parameter(i) == nets.q.parameter(i));
}

TEST_CASE("DQN training loop") {
    SystemParams p;
    p.M = 2;
    p.N = 3;
    Rng rng(7);
    Environment env(p, generate_topology(p, rng), 7);
    DqnConfig cfg;
    cfg.hidden = {16};
    cfg.memory = 30;
    cfg.batch = 4;
    auto r = train_dqn(env, make_dqn(env.obs_dim(), cfg, rng), {3, 10}, rng);
    CHECK(r.transitions == 90);
    CHECK(r.history.size() == 3);
    // Gate at ceil(30/3) = 10 transitions: first reached in slot 4 of 30.
    CHECK(r.nets.updates == 27);
}

TEST_CASE("policy adapters produce feasible actions") {
    SystemParams p;
    p.M = 2;
    p.N = 5;
    Rng rng(8);
    Environment env(p, generate_topology(p, rng), 8);
    const auto obs = env.reset();
    AorPolicy aor;
    const auto a = aor.act(env, obs, rng);
    REQUIRE(a.size() == 5);
    for (const auto& x : a) {
        CHECK(x.p_s <= p.p_max);
        if (x.U_s) CHECK(x.alpha == doctest::Approx(2500.0 / 3000.0));
    }
    const auto r = check_env_invariants(1, 20, 3);
    INFO(r.detail);
    CHECK(r.passed);
}
