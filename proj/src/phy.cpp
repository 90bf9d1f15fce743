#include "ehcr/phy.hpp"

#include "ehcr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ehcr {

std::vector<DecodeOutcome> sic_decode(const std::vector<TxEntry>& entries, double noise) {
    if (!(noise > 0.0)) throw DomainError("sic_decode: noise must be > 0");
    for (const auto& e : entries)
        if (e.rx_power < 0.0) throw DomainError("sic_decode: negative received power");

    std::vector<std::size_t> order(entries.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (entries[a].rx_power != entries[b].rx_power) return entries[a].rx_power > entries[b].rx_power;
        return entries[a].id < entries[b].id;
    });

    // Residual = received power not yet cancelled. Summed from the weakest
    // upward so the running tail is exact for each position.
    std::vector<double> tail(order.size() + 1, 0.0);
    for (std::size_t k = order.size(); k-- > 0;) tail[k] = tail[k + 1] + entries[order[k]].rx_power;

    std::vector<DecodeOutcome> out(entries.size());
    double failed = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& e = entries[order[k]];
        const double interference = tail[k + 1] + failed;
        auto& o = out[order[k]];
        o.id = e.id;
        o.sinr = e.rx_power / (noise + interference);
        o.rate = std::log2(1.0 + o.sinr);
        o.decoded = o.rate >= e.threshold;
        if (!o.decoded) failed += e.rx_power;
    }
    return out;
}

int achievable_packets(double rate, double alpha, double T, double BW, double C, int buffer_len, bool decoded) {
    if (!decoded || buffer_len <= 0) return 0;
    const double capacity = std::floor(BW * alpha * T * rate / C);
    if (!(capacity > 0.0)) return 0;
    return capacity >= static_cast<double>(buffer_len) ? buffer_len : static_cast<int>(capacity);
}

} // namespace ehcr
