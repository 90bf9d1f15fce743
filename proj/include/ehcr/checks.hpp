#pragma once

#include "ehcr/nn.hpp"
#include "ehcr/params.hpp"
#include "ehcr/phy.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace ehcr {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct CheckReport {
    std::vector<CheckResult> results;

    bool all_passed() const;
    /// One "[PASS] name: detail" or "[FAIL] name: detail" line per check.
    void print(std::ostream& os) const;
};

/// Exhaustive reference: enumerates all 2^n decode assignments and returns the
/// unique one where every user's decode bit matches its SINR under that
/// assignment. Throws DomainError if there is not exactly one.
std::vector<DecodeOutcome> sic_bruteforce(const std::vector<TxEntry>& entries, double noise);

CheckResult check_sic_equivalence(int trials, int max_users, std::uint64_t seed);

using BackwardFn = std::function<nn::BackwardResult(const nn::Mlp&, const nn::ForwardCache&, const nn::Matrix&)>;

/// Central finite differences against `backward` for every parameter and input
/// of small networks with each output activation. Maximum relative error must
/// stay below `tol`.
CheckResult check_mlp_gradients(std::uint64_t seed, double tol = 1e-4, const BackwardFn& backward = nn::backward);

/// After k soft updates toward a fixed source, target - source equals
/// (1 - tau)^k times the initial gap.
CheckResult check_soft_update(std::uint64_t seed);

CheckResult check_replay_fifo();

/// Rolls out random, AoR, const-T, greedy and untrained actor policies and
/// checks battery bounds, energy causality, buffer conservation and every
/// executed action against the power, time-share and access constraints.
CheckResult check_env_invariants(int episodes, int steps, std::uint64_t seed);

/// Two short training runs from the same seed give byte-identical metrics and checkpoints.
CheckResult check_reproducibility(std::uint64_t seed);

CheckResult check_poisson(double lambda, int samples, std::uint64_t seed);
CheckResult check_pu_stationary(double P1, double P2, int steps, std::uint64_t seed);
CheckResult check_rayleigh_mean(int samples, std::uint64_t seed);

/// Every admitted user meets R0 exactly against noise plus earlier admissions.
CheckResult check_aor_exactness(int instances, std::uint64_t seed, double tol = 1e-9);

struct SelftestOptions {
    std::uint64_t seed = 7;
    bool quick = false;  // smaller sample sizes
};

CheckReport run_selftest(const SelftestOptions& opt = {});

} // namespace ehcr
