#include "ehcr/errors.hpp"
#include "ehcr/metrics.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace ehcr;

namespace {

StepResult slot(std::vector<double> reward, std::vector<int> lost, std::vector<double> rate_s,
                std::vector<double> rate_p, std::vector<int> up) {
    StepResult r;
    const auto N = reward.size();
    r.reward = std::move(reward);
    r.lost = std::move(lost);
    r.rate_s = std::move(rate_s);
    r.arrivals.assign(N, 1);
    r.delivered.assign(N, 0);
    r.rate_p = std::move(rate_p);
    r.pu_active = up;
    for (double x : r.rate_s) r.sum_rate += x;
    r.ee_num = r.sum_rate;
    for (std::size_t m = 0; m < up.size(); ++m) {
        r.ee_num += r.rate_p[m];
        r.ee_den += up[m] * 1.0;
    }
    return r;
}

} // namespace

TEST_CASE("per-slot averages") {
    MetricsAccumulator acc;
    acc.add(slot({4, 6}, {0, 3}, {1.0, 0.5}, {1.0, 0.5}, {1, 1}));
    const auto m = acc.finish();
    CHECK(m.avg_reward == doctest::Approx(5.0));
    CHECK(m.anpl == doctest::Approx(1.5));
    CHECK(m.sumrate == doctest::Approx(1.5));
    CHECK(m.energy_eff == doctest::Approx(1.5));  // rates sum 3.0 over 2 W
    CHECK(std::isnan(m.avg_delay));
    CHECK(acc.slots() == 1);
    CHECK(acc.total_lost() == 3);
}

TEST_CASE("idle-PU slots are excluded from efficiency") {
    MetricsAccumulator acc;
    acc.add(slot({1, 1}, {0, 0}, {1.0, 1.0}, {0.0}, {0}));
    acc.add(slot({1, 1}, {0, 0}, {1.0, 1.0}, {2.0}, {1}));
    CHECK(acc.finish().energy_eff == doctest::Approx(4.0));
    MetricsAccumulator idle;
    idle.add(slot({1}, {0}, {1.0}, {0.0}, {0}));
    CHECK(idle.finish().energy_eff == 0.0);
}

TEST_CASE("delays and merge") {
    MetricsAccumulator a, b;
    auto s = slot({1}, {0}, {0.5}, {0.0}, {0});
    s.delays = {1, 3};
    a.add(s);
    s.delays = {2};
    b.add(s);
    a.merge(b);
    CHECK(a.finish().avg_delay == doctest::Approx(2.0));
    CHECK(a.slots() == 2);
    CHECK(a.agent_slots() == 2);
}

TEST_CASE("mean over a range skips undefined delays") {
    std::vector<EpisodeMetrics> v(3);
    v[0].anpl = 1;
    v[1].anpl = 2;
    v[2].anpl = 6;
    v[0].avg_delay = 1;
    v[1].avg_delay = std::nan("");
    v[2].avg_delay = 3;
    const auto m = mean_metrics(v, 1, 3);
    CHECK(m.anpl == 4.0);
    CHECK(m.avg_delay == 3.0);
    CHECK(mean_metrics(v, 0, 3).avg_delay == 2.0);
}

TEST_CASE("CSV export, nan sentinel, round trip") {
    std::vector<EpisodeMetrics> h(200);
    for (int i = 0; i < 200; ++i) {
        h[i].avg_reward = 0.1 * i - 3.0 / 7.0;
        h[i].anpl = 1.0 / (i + 1);
        h[i].sumrate = i * 1e-3;
        h[i].energy_eff = 2.5;
        h[i].avg_delay = i % 10 == 0 ? std::nan("") : 1.0 + i / 3.0;
    }
    std::stringstream ss;
    export_csv(ss, h);
    const auto text = ss.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 201);
    CHECK(text.rfind("episode,avg_reward,anpl,sumrate,energy_eff,avg_delay\n0,", 0) == 0);
    const auto first_row = text.substr(text.find('\n') + 1, text.find('\n', text.find('\n') + 1) - text.find('\n') - 1);
    CHECK(first_row.substr(first_row.rfind(',') + 1) == "nan");
    const auto back = parse_csv(ss);
    REQUIRE(back.size() == 200);
    for (int i = 0; i < 200; ++i) {
        CHECK(back[i].avg_reward == doctest::Approx(h[i].avg_reward).epsilon(1e-12));
        CHECK(back[i].anpl == doctest::Approx(h[i].anpl).epsilon(1e-12));
        if (std::isnan(h[i].avg_delay))
            CHECK(std::isnan(back[i].avg_delay));
        else
            CHECK(back[i].avg_delay == doctest::Approx(h[i].avg_delay).epsilon(1e-12));
    }
    std::ostringstream os;
    CHECK_THROWS(export_csv(os, {}));
}
