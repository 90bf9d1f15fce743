#pragma once

#include "ehcr/env.hpp"

#include <vector>

namespace ehcr {

/// A decision rule for all SSUs of one slot. Implementations see the whole
/// environment so that global-information allocators can be expressed; the
/// learned policies only read each agent's own observation.
class Policy {
public:
    virtual ~Policy() = default;
    virtual std::vector<PhysicalAction> act(const Environment& env, const std::vector<Observation>& obs, Rng& rng) = 0;
};

} // namespace ehcr
