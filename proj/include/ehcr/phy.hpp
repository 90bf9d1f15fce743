#pragma once

#include <vector>

namespace ehcr {

enum class UserKind { PU, SSU };

/// One transmitter as seen by the BS receiver.
struct TxEntry {
    int id = 0;              // unique across PUs and SSUs within a slot
    UserKind kind = UserKind::SSU;
    double rx_power = 0.0;   // p * |h|^2, W
    double threshold = 0.0;  // decode threshold, bit/s/Hz
};

struct DecodeOutcome {
    int id = 0;
    double sinr = 0.0;
    double rate = 0.0;       // log2(1 + sinr)
    bool decoded = false;
};

/// Successive interference cancellation in descending received power (ties by
/// ascending id). A user sees as interference every other user that has not
/// been successfully decoded before it; failed users are never subtracted.
/// Outcomes are returned in input order.
std::vector<DecodeOutcome> sic_decode(const std::vector<TxEntry>& entries, double noise);

/// Packets delivered in one slot: floor(BW*alpha*T*rate/C) capped by the
/// buffer, zero when the transmission was not decoded.
int achievable_packets(double rate, double alpha, double T, double BW, double C, int buffer_len, bool decoded);

} // namespace ehcr
