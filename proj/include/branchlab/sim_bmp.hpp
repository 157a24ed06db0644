#pragma once

#include "branchlab/rng.hpp"
#include "branchlab/trajectory.hpp"

namespace branchlab {

inline constexpr std::uint64_t kDefaultEventCap = 100'000'000;

/// Statistically exact event-driven simulation at the level of type-count
/// vectors.  Total rate sum_x N_x (q_x + beta_x); exponential waits; motion
/// moves one particle, a branch replaces one particle by an offspring draw.
/// Deterministic given (model, init, seed).
Trajectory simulate(const BmpModel& model, const InitState& init,
                    const std::vector<double>& sample_times, std::uint64_t seed,
                    std::uint64_t event_cap = kDefaultEventCap);

/// Replica r uses the counter stream keyed by (base_seed, r); output is
/// byte-identical for any parallelism degree.
Ensemble simulate_ensemble(const BmpModel& model, const InitState& init,
                           const std::vector<double>& sample_times, int replicas,
                           std::uint64_t base_seed, int parallelism = 1,
                           std::uint64_t event_cap = kDefaultEventCap);

}  // namespace branchlab
