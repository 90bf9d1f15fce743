#include "ehcr/sysmodel.hpp"

#include "ehcr/errors.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>

namespace ehcr {

double path_loss(double d, double wavelength) {
    if (!(d > 0.0)) throw DomainError("path_loss: distance must be > 0");
    if (!(wavelength > 0.0)) throw DomainError("path_loss: wavelength must be > 0");
    const double r = wavelength / (4.0 * std::numbers::pi * d);
    return r * r;
}

namespace {

void fill_betas(Topology& t, double wavelength) {
    const auto M = t.d_p.size();
    const auto N = t.d_s.size();
    t.beta_s.resize(N);
    t.beta_p.resize(M);
    t.beta_ps.assign(M, std::vector<double>(N));
    for (std::size_t n = 0; n < N; ++n) t.beta_s[n] = path_loss(t.d_s[n], wavelength);
    for (std::size_t m = 0; m < M; ++m) {
        t.beta_p[m] = path_loss(t.d_p[m], wavelength);
        for (std::size_t n = 0; n < N; ++n) t.beta_ps[m][n] = path_loss(t.d_ps[m][n], wavelength);
    }
}

} // namespace

Topology generate_topology(const SystemParams& params, Rng& rng) {
    const auto check = [](const Range& r, const char* name) {
        if (!(r.lo > 0.0) || r.lo > r.hi) throw ConfigError(std::string("invalid ") + name + " distance range");
    };
    check(params.d_s_range, "SSU");
    check(params.d_p_range, "PU");
    if (params.M < 0 || params.N < 1) throw ConfigError("topology needs M >= 0 and N >= 1");

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw = [&](const Range& r) { return r.lo + (r.hi - r.lo) * unit(rng); };

    Topology t;
    std::vector<double> th_s(params.N), th_p(params.M);
    t.d_s.resize(params.N);
    t.d_p.resize(params.M);
    for (int n = 0; n < params.N; ++n) {
        t.d_s[n] = draw(params.d_s_range);
        th_s[n] = 2.0 * std::numbers::pi * unit(rng);
    }
    for (int m = 0; m < params.M; ++m) {
        t.d_p[m] = draw(params.d_p_range);
        th_p[m] = 2.0 * std::numbers::pi * unit(rng);
    }
    t.d_ps.assign(params.M, std::vector<double>(params.N));
    for (int m = 0; m < params.M; ++m) {
        for (int n = 0; n < params.N; ++n) {
            const double dx = t.d_p[m] * std::cos(th_p[m]) - t.d_s[n] * std::cos(th_s[n]);
            const double dy = t.d_p[m] * std::sin(th_p[m]) - t.d_s[n] * std::sin(th_s[n]);
            t.d_ps[m][n] = std::max(std::hypot(dx, dy), kMinLinkDistance);
        }
    }
    fill_betas(t, params.wavelength);
    return t;
}

int step_pu_activity(int prev, double P1, double P2, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    if (prev == 1) return u < P1 ? 0 : 1;
    return u < P2 ? 1 : 0;
}

std::vector<int> initial_pu_activity(int M, double P1, double P2, Rng& rng) {
    const double busy = (P1 + P2) > 0.0 ? P2 / (P1 + P2) : 0.0;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<int> up(M);
    for (auto& u : up) u = unit(rng) < busy ? 1 : 0;
    return up;
}

ChannelRealization sample_channels(const Topology& topo, const std::vector<int>& prev_up,
                                   const SystemParams& params, Rng& rng) {
    const int M = topo.num_pu();
    const int N = topo.num_ssu();
    if (static_cast<int>(prev_up.size()) != M) throw UsageError("sample_channels: prev_up length must equal M");

    std::exponential_distribution<double> fade(1.0);
    ChannelRealization ch;
    ch.up.resize(M);
    for (int m = 0; m < M; ++m) ch.up[m] = step_pu_activity(prev_up[m], params.P1, params.P2, rng);
    ch.gs.resize(N);
    for (int n = 0; n < N; ++n) ch.gs[n] = topo.beta_s[n] * fade(rng);
    ch.gp.resize(M);
    for (int m = 0; m < M; ++m) ch.gp[m] = topo.beta_p[m] * fade(rng);
    ch.gmn.assign(M, std::vector<double>(N));
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) ch.gmn[m][n] = topo.beta_ps[m][n] * fade(rng);
    return ch;
}

int poisson_arrivals(double lambda, Rng& rng) {
    if (lambda < 0.0) throw DomainError("poisson_arrivals: rate must be >= 0");
    if (lambda == 0.0) return 0;
    std::poisson_distribution<int> dist(lambda);
    return dist(rng);
}

void save_topology(std::ostream& os, const Topology& topo, double wavelength) {
    const auto old = os.precision(17);
    os << "topology v1\n";
    os << "M " << topo.num_pu() << " N " << topo.num_ssu() << "\n";
    os << "d_s";
    for (double d : topo.d_s) os << ' ' << d;
    os << "\nd_p";
    for (double d : topo.d_p) os << ' ' << d;
    os << "\nd_ps\n";
    for (const auto& row : topo.d_ps) {
        for (std::size_t n = 0; n < row.size(); ++n) os << (n ? " " : "") << row[n];
        os << "\n";
    }
    os << "wavelength " << wavelength << "\n";
    os.precision(old);
}

Topology load_topology(std::istream& is) {
    auto expect = [&](const std::string& tok) {
        std::string got;
        if (!(is >> got) || got != tok) throw IoError("topology record: expected '" + tok + "'");
    };
    auto num = [&]() {
        double x;
        if (!(is >> x)) throw IoError("topology record: malformed number");
        return x;
    };
    expect("topology");
    expect("v1");
    int M = 0, N = 0;
    expect("M");
    if (!(is >> M)) throw IoError("topology record: bad M");
    expect("N");
    if (!(is >> N)) throw IoError("topology record: bad N");
    if (M < 0 || N < 0) throw IoError("topology record: negative size");
    Topology t;
    expect("d_s");
    t.d_s.resize(N);
    for (auto& d : t.d_s) d = num();
    expect("d_p");
    t.d_p.resize(M);
    for (auto& d : t.d_p) d = num();
    expect("d_ps");
    t.d_ps.assign(M, std::vector<double>(N));
    for (auto& row : t.d_ps)
        for (auto& d : row) d = num();
    expect("wavelength");
    const double wl = num();
    fill_betas(t, wl);
    return t;
}

} // namespace ehcr
