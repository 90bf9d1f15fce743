#pragma once

#include "ehcr/params.hpp"

#include <iosfwd>
#include <vector>

namespace ehcr {

/// Node placement around the BS and the resulting path-loss coefficients.
/// Indexing: `*_ps[m][n]` is PU m to SSU n.
struct Topology {
    std::vector<double> d_s;                    // SSU-BS distance, m
    std::vector<double> d_p;                    // PU-BS distance, m
    std::vector<std::vector<double>> d_ps;      // PU-SSU distance, m
    std::vector<double> beta_s;
    std::vector<double> beta_p;
    std::vector<std::vector<double>> beta_ps;

    int num_pu() const { return static_cast<int>(d_p.size()); }
    int num_ssu() const { return static_cast<int>(d_s.size()); }
};

/// Per-slot power gains (|h|^2) and PU activity.
struct ChannelRealization {
    std::vector<double> gs;                     // SSU -> BS
    std::vector<double> gp;                     // PU -> BS
    std::vector<std::vector<double>> gmn;       // PU m -> SSU n
    std::vector<int> up;                        // PU busy bit
};

// PU-SSU separations are floored here so coincident placements stay finite.
inline constexpr double kMinLinkDistance = 1.0;

/// Free-space coefficient (wavelength / (4 pi d))^2. Throws DomainError for d <= 0.
double path_loss(double d, double wavelength);

/// Uniform distance in each range and a uniform bearing per node; the PU-SSU
/// separation follows from the planar geometry.
Topology generate_topology(const SystemParams& params, Rng& rng);

/// Two-state chain: busy->idle w.p. P1, idle->busy w.p. P2.
int step_pu_activity(int prev, double P1, double P2, Rng& rng);

/// Advances every PU chain from `prev_up` and draws fresh Rayleigh power gains
/// beta * Exp(1) for all links.
ChannelRealization sample_channels(const Topology& topo, const std::vector<int>& prev_up,
                                   const SystemParams& params, Rng& rng);

/// Initial PU states drawn from the chain's stationary law.
std::vector<int> initial_pu_activity(int M, double P1, double P2, Rng& rng);

int poisson_arrivals(double lambda, Rng& rng);

// Text record:
//   topology v1
//   M <m> N <n>
//   d_s <n doubles>
//   d_p <m doubles>
//   d_ps <m lines of n doubles>
//   wavelength <w>
// Path-loss coefficients are recomputed on load.
void save_topology(std::ostream& os, const Topology& topo, double wavelength);
Topology load_topology(std::istream& is);

} // namespace ehcr
