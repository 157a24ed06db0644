#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "branchlab/model.hpp"

namespace branchlab {

/// Sampled population-state series of one replica.  Counts are carried as
/// doubles (exact below 2^53); rows follow `sample_times`.  If the event cap
/// fired, rows past the cap time hold NaN and `capped` is set.
struct Trajectory {
  std::vector<double> sample_times;
  MatrixXd states;  // sample_times.size() x d
  std::uint64_t seed = 0;
  std::uint64_t events = 0;
  bool capped = false;
};

/// Superprocess analogue with step size and jump count.
struct SpTrajectory {
  std::vector<double> sample_times;
  MatrixXd states;
  std::uint64_t seed = 0;
  std::uint64_t steps = 0;
  std::uint64_t jump_count = 0;
  double dt = 0.0;
};

/// Replica-indexed collection of sampled states with full RNG provenance.
/// Replica r is generated from the counter stream keyed by (base_seed, r),
/// so contents are independent of the parallelism that produced them.
struct Ensemble {
  std::string kind;  // "bmp" | "sp"
  int d = 0;
  std::vector<double> sample_times;
  VectorXd init;
  std::uint64_t base_seed = 0;
  double dt = 0.0;  // sp only

  std::vector<MatrixXd> states;  // replica -> times x d
  std::vector<std::uint64_t> seeds;
  std::vector<std::uint64_t> events;
  std::vector<std::uint8_t> capped;
  std::vector<std::string> status;  // empty = clean

  int replicas() const { return static_cast<int>(states.size()); }

  /// <f, X_t> for one replica at one sampled time index.
  double observe(int replica, int time_index, const VectorXd& f) const {
    return states[replica].row(time_index).dot(f);
  }

  VectorXd mean_at(int time_index) const;
  VectorXd variance_at(int time_index) const;
  VectorXd stderr_at(int time_index) const;
};

}  // namespace branchlab
