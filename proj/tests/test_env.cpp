#include "ehcr/env.hpp"
#include "ehcr/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace ehcr;

namespace {

SystemParams one_by_one() {
    SystemParams p;
    p.M = 1;
    p.N = 1;
    return p;
}

Environment make(const SystemParams& p, std::uint64_t seed = 1) {
    Rng rng(seed);
    return Environment(p, generate_topology(p, rng), seed);
}

// Channel state with the PU idle unless `pu_on`, and a chosen SSU gain.
ChannelRealization channels(int M, int N, double gs, int pu_on = 0, double gmn = 0.0, double gp = 1e-9) {
    ChannelRealization ch;
    ch.gs.assign(N, gs);
    ch.gp.assign(M, gp);
    ch.gmn.assign(M, std::vector<double>(N, gmn));
    ch.up.assign(M, pu_on);
    return ch;
}

void set_state(Environment& env, int n, double E, int B) {
    auto& s = env.mutable_states()[n];
    s.E = E;
    s.buffer.assign(B, -1L);
}

} // namespace

TEST_CASE("action conversion") {
    const SystemParams p;
    auto a = to_physical({0.5, 0.5}, 2.0, p);
    CHECK(a.U_s == 1);
    CHECK(a.p_s == doctest::Approx(0.25));
    CHECK(a.alpha == 0.5);

    a = to_physical({1.0, 0.1}, 0.01, p);
    CHECK(a.p_s == doctest::Approx(0.1));
    CHECK(a.alpha * p.T * a.p_s == doctest::Approx(0.01));
    CHECK(a.alpha * p.T * a.p_s <= 0.01);

    for (ActionVec z : {ActionVec{0.0, 0.7}, ActionVec{0.7, 0.0}, ActionVec{1e-7, 0.5}}) {
        const auto q = to_physical(z, 1.0, p);
        CHECK(q.U_s == 0);
        CHECK(q.p_s == 0.0);
        CHECK(q.alpha == 0.0);
    }
}

TEST_CASE("reward terms") {
    const SystemParams p;
    CHECK(compute_reward(0, 0.5, true, {0, 0, 0}, p) == doctest::Approx(5.0));
    CHECK(compute_reward(0, 0.2, true, {0, 0, 0}, p) == 0.0);
    CHECK(compute_reward(5, 0.0, false, {1, 0, 0}, p) == doctest::Approx(-4.016));
    CHECK(compute_reward(0, 0.5, false, {0, 0, 0}, p) == 0.0);
}

TEST_CASE("observation normalization") {
    const ObsNormalization norm;
    CHECK(norm.norm_db(1e-15) == doctest::Approx(0.0));
    CHECK(norm.norm_db(1e-5) == doctest::Approx(1.0));
    CHECK(norm.norm_db(1e-10) == doctest::Approx(0.5));
    CHECK(norm.norm_db(1e-20) == 0.0);
    CHECK(norm.norm_db(1.0) == 1.0);

    SystemParams p;
    auto env = make(p);
    const auto obs = env.reset();
    REQUIRE(obs.size() == 20);
    CHECK(env.obs_dim() == 9);
    for (const auto& o : obs) {
        REQUIRE(o.features.size() == 9);
        CHECK(o.features[7] == doctest::Approx(o.E / p.E_max));
        CHECK(o.features[8] == doctest::Approx(o.B / 6.0));
        for (int m = 0; m < 3; ++m) CHECK(o.features[1 + m] == o.up[m]);
    }
    set_state(env, 0, p.E_max, 3);
    const auto o = env.observe(0);
    CHECK(o.features[7] == 1.0);
    CHECK(o.features[8] == 0.5);
}

TEST_CASE("reset bounds and determinism") {
    SystemParams p;
    auto e1 = make(p, 4), e2 = make(p, 4);
    const auto a = e1.reset(), b = e2.reset();
    for (std::size_t n = 0; n < a.size(); ++n) {
        CHECK((a[n].E >= 0 && a[n].E <= p.E_max));
        CHECK((a[n].B >= 0 && a[n].B <= p.B_max));
        CHECK(a[n].features == b[n].features);
    }
    auto e3 = make(p, 4);
    CHECK_THROWS_AS(e3.step(std::vector<ActionVec>(20)), UsageError);
}

TEST_CASE("buffer update without overflow") {
    auto p = one_by_one();
    auto env = make(p);
    env.reset();
    set_state(env, 0, 1.0, 4);
    // p_s*gs/noise = 2^1.2 - 1 gives rate 1.2 and floor(10000*0.5*1.2/2500) = 2 packets.
    env.set_channels(channels(1, 1, (std::exp2(1.2) - 1.0) * p.noise_w / 0.5));
    env.set_arrival_override({3});
    const auto r = env.step_physical({{1, 0.5, 0.5}});
    CHECK(r.rate_s[0] == doctest::Approx(1.2));
    CHECK(r.delivered[0] == 2);
    CHECK(r.lost[0] == 0);
    CHECK(env.states()[0].buffer.size() == 5);
    REQUIRE(r.delays.size() == 2);
    CHECK(r.delays[0] == 1.0);
}

TEST_CASE("buffer overflow is drop-tail") {
    auto p = one_by_one();
    auto env = make(p);
    env.reset();
    set_state(env, 0, 1.0, 6);
    env.set_channels(channels(1, 1, 1e-6));
    env.set_arrival_override({3});
    const auto r = env.step_physical({{0, 0, 0}});
    CHECK(r.delivered[0] == 0);
    CHECK(r.lost[0] == 3);
    CHECK(env.states()[0].buffer.size() == 6);
    CHECK(env.states()[0].lost_total == 3);
}

TEST_CASE("battery update with harvesting") {
    auto p = one_by_one();
    auto env = make(p);
    env.reset();
    set_state(env, 0, 1.0, 0);
    env.set_channels(channels(1, 1, 1e-6, 1, 0.1));
    env.set_arrival_override({0});
    const auto r = env.step_physical({{1, 0.5, 0.5}});
    CHECK(r.consumed[0] == doctest::Approx(0.25));
    CHECK(r.harvested[0] == doctest::Approx(0.045));
    CHECK(env.states()[0].E == doctest::Approx(0.795));
}

TEST_CASE("battery clamps at capacity") {
    auto p = one_by_one();
    auto env = make(p);
    env.reset();
    set_state(env, 0, 1.99, 0);
    // Full-slot harvest 0.9 * 1 * g = 0.05
    env.set_channels(channels(1, 1, 1e-6, 1, 0.05 / 0.9));
    env.set_arrival_override({0});
    const auto r = env.step_physical({{0, 0, 0}});
    CHECK(r.harvested[0] == doctest::Approx(0.05));
    CHECK(env.states()[0].E == p.E_max);
}

TEST_CASE("infeasible physical actions are rejected") {
    auto p = one_by_one();
    auto env = make(p);
    env.reset();
    set_state(env, 0, 0.1, 0);
    CHECK_THROWS_AS(env.step_physical({{1, 0.5, 0.5}}), DomainError);  // needs 0.25 J
    CHECK_THROWS_AS(env.step_physical({{1, 0.6, 0.1}}), DomainError);  // above p_max
    CHECK_THROWS_AS(env.step_physical({{1, 0.1, 1.5}}), DomainError);
    CHECK_THROWS_AS(env.step_physical({}), UsageError);
}

TEST_CASE("OFDM splits the band without mutual interference") {
    SystemParams p;
    p.M = 1;
    p.N = 2;
    const double g = (std::exp2(1.0) - 1.0) * p.noise_w / 0.5;  // SNR 1 at 0.5 W
    for (auto mode : {AccessMode::NOMA, AccessMode::OFDM}) {
        auto env = make(p);
        env.set_access_mode(mode);
        env.reset();
        set_state(env, 0, 2.0, 6);
        set_state(env, 1, 2.0, 6);
        env.set_channels(channels(1, 2, g));
        env.set_arrival_override({0, 0});
        const auto r = env.step_physical({{1, 0.5, 1.0}, {1, 0.5, 1.0}});
        if (mode == AccessMode::OFDM) {
            // Each user: log2(1 + 1) on half the band.
            CHECK(r.rate_s[0] == doctest::Approx(0.5));
            CHECK(r.rate_s[1] == doctest::Approx(0.5));
            CHECK(r.delivered[0] == 2);  // 5000 Hz * 1 s * 1 bit/s/Hz / 2500
        } else {
            CHECK(r.rate_s[0] == doctest::Approx(std::log2(1.5)));
            CHECK(r.rate_s[1] == doctest::Approx(1.0));
        }
    }
    // A single transmitter sees the same rate in both modes.
    double rates[2];
    int i = 0;
    for (auto mode : {AccessMode::NOMA, AccessMode::OFDM}) {
        auto env = make(p);
        env.set_access_mode(mode);
        env.reset();
        set_state(env, 0, 2.0, 6);
        env.set_channels(channels(1, 2, g));
        rates[i++] = env.step_physical({{1, 0.5, 1.0}, {0, 0, 0}}).rate_s[0];
    }
    CHECK(rates[0] == doctest::Approx(rates[1]));
}

TEST_CASE("PU failure is charged to every agent") {
    SystemParams p;
    p.M = 1;
    p.N = 2;
    p.R0 = 2.0;
    auto env = make(p);
    env.reset();
    set_state(env, 0, 2.0, 0);
    set_state(env, 1, 2.0, 0);
    // The SSU (2 noise units) fails its own threshold, so it is never
    // cancelled and pushes the PU (0.5 noise units) below R1.
    env.set_channels(channels(1, 2, 4e-18, 1, 0.0, 0.5e-18));
    env.set_arrival_override({0, 0});
    const auto r = env.step_physical({{1, 0.5, 0.5}, {0, 0, 0}});
    CHECK(r.rate_s[0] == 0.0);
    CHECK(r.pu_failed[0] == 1);
    CHECK(r.reward[1] == doctest::Approx(-p.w3));
    CHECK(r.ee_den == 1.0);
}

TEST_CASE("trace output") {
    auto p = one_by_one();
    auto env = make(p);
    env.reset();
    const auto r = env.step({{0.5, 0.5}});
    std::ostringstream os;
    write_trace_header(os);
    append_trace(os, 0, r);
    const auto s = os.str();
    CHECK(s.rfind("slot,agent,U_s,p_s,alpha,E,B,l,L,R_s,reward\n0,0,", 0) == 0);
}
