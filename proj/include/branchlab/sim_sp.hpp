#pragma once

#include "branchlab/rng.hpp"
#include "branchlab/trajectory.hpp"

namespace branchlab {

/// Step-size default: 1e-3 * min(1, 1/||A||_inf).
double default_sp_dt(const SpModel& model);

/// Positivity-preserving Euler scheme: full-truncation square-root diffusion
/// with infinitesimal variance 2 b_x X_x, linear drift (Q - diag(a) + eta)^T X
/// between jumps, and per-step Poisson jump counts at the frozen rates
/// rate * X_x.  Deterministic given seed.  Throws StepTooLarge when
/// dt * ||A||_inf > 0.1.
SpTrajectory simulate_sp(const SpModel& model, const InitState& init, double horizon,
                         double dt, const std::vector<double>& sample_times,
                         std::uint64_t seed);

Ensemble simulate_sp_ensemble(const SpModel& model, const InitState& init, double horizon,
                              double dt, const std::vector<double>& sample_times,
                              int replicas, std::uint64_t base_seed, int parallelism = 1);

}  // namespace branchlab
