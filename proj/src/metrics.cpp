#include "ehcr/metrics.hpp"

#include "ehcr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <locale>
#include <sstream>

namespace ehcr {

void MetricsAccumulator::add(const StepResult& r) {
    ++slots_;
    for (std::size_t n = 0; n < r.reward.size(); ++n) {
        reward_ += r.reward[n];
        lost_ += r.lost[n];
        arrivals_ += r.arrivals[n];
        ++agent_slots_;
    }
    sumrate_ += r.sum_rate;
    if (r.ee_den > 0.0) {
        ee_ += r.ee_num / r.ee_den;
        ++ee_slots_;
    }
    for (double d : r.delays) delay_ += d;
    delay_count_ += static_cast<long>(r.delays.size());
}

void MetricsAccumulator::merge(const MetricsAccumulator& o) {
    reward_ += o.reward_;
    lost_ += o.lost_;
    arrivals_ += o.arrivals_;
    agent_slots_ += o.agent_slots_;
    slots_ += o.slots_;
    sumrate_ += o.sumrate_;
    ee_ += o.ee_;
    ee_slots_ += o.ee_slots_;
    delay_ += o.delay_;
    delay_count_ += o.delay_count_;
}

EpisodeMetrics MetricsAccumulator::finish() const {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    EpisodeMetrics m;
    const double as = static_cast<double>(agent_slots_);
    m.avg_reward = agent_slots_ ? reward_ / as : nan;
    m.anpl = agent_slots_ ? static_cast<double>(lost_) / as : nan;
    m.avg_arrivals = agent_slots_ ? static_cast<double>(arrivals_) / as : nan;
    m.sumrate = slots_ ? sumrate_ / static_cast<double>(slots_) : nan;
    m.energy_eff = ee_slots_ ? ee_ / static_cast<double>(ee_slots_) : 0.0;
    m.avg_delay = delay_count_ ? delay_ / static_cast<double>(delay_count_) : nan;
    return m;
}

EpisodeMetrics mean_metrics(const std::vector<EpisodeMetrics>& v, std::size_t first, std::size_t last) {
    last = std::min(last, v.size());
    EpisodeMetrics m;
    double n = 0.0, nd = 0.0;
    for (std::size_t i = first; i < last; ++i) {
        m.avg_reward += v[i].avg_reward;
        m.anpl += v[i].anpl;
        m.sumrate += v[i].sumrate;
        m.energy_eff += v[i].energy_eff;
        m.avg_arrivals += v[i].avg_arrivals;
        n += 1.0;
        if (!std::isnan(v[i].avg_delay)) {
            m.avg_delay += v[i].avg_delay;
            nd += 1.0;
        }
    }
    if (n == 0.0) throw UsageError("mean_metrics: empty range");
    m.avg_reward /= n;
    m.anpl /= n;
    m.sumrate /= n;
    m.energy_eff /= n;
    m.avg_arrivals /= n;
    m.avg_delay = nd > 0.0 ? m.avg_delay / nd : std::numeric_limits<double>::quiet_NaN();
    return m;
}

namespace {

void put(std::ostream& os, double x) {
    if (std::isnan(x))
        os << "nan";
    else
        os << x;
}

double get(const std::string& field) {
    if (field == "nan") return std::numeric_limits<double>::quiet_NaN();
    std::istringstream in(field);
    in.imbue(std::locale::classic());
    double x = 0.0;
    if (!(in >> x)) throw IoError("metrics csv: bad number '" + field + "'");
    return x;
}

} // namespace

void export_csv(std::ostream& os, const std::vector<EpisodeMetrics>& history) {
    if (history.empty()) throw UsageError("export_csv: empty history");
    std::ostringstream buf;
    buf.imbue(std::locale::classic());
    buf.precision(15);
    buf << "episode,avg_reward,anpl,sumrate,energy_eff,avg_delay\n";
    for (std::size_t e = 0; e < history.size(); ++e) {
        const auto& m = history[e];
        buf << e << ',';
        put(buf, m.avg_reward);
        buf << ',';
        put(buf, m.anpl);
        buf << ',';
        put(buf, m.sumrate);
        buf << ',';
        put(buf, m.energy_eff);
        buf << ',';
        put(buf, m.avg_delay);
        buf << '\n';
    }
    os << buf.str();
    if (!os) throw IoError("export_csv: write failed");
}

void export_csv(const std::string& path, const std::vector<EpisodeMetrics>& history) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    export_csv(f, history);
}

std::vector<EpisodeMetrics> parse_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "episode,avg_reward,anpl,sumrate,energy_eff,avg_delay")
        throw IoError("metrics csv: unexpected header");
    std::vector<EpisodeMetrics> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::istringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) f.push_back(cell);
        if (f.size() != 6) throw IoError("metrics csv: expected 6 fields");
        EpisodeMetrics m;
        m.avg_reward = get(f[1]);
        m.anpl = get(f[2]);
        m.sumrate = get(f[3]);
        m.energy_eff = get(f[4]);
        m.avg_delay = get(f[5]);
        out.push_back(m);
    }
    return out;
}

} // namespace ehcr
