#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "branchlab/errors.hpp"

namespace branchlab {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

/// One atom of an offspring point law: with probability `p` the dying
/// particle is replaced by `counts[y]` particles of each type y.
struct OffspringAtom {
  double p = 0.0;
  Eigen::VectorXi counts;
};

/// One jump atom of a superprocess: per unit mass of type x, at rate `rate`
/// the measure gains the mass vector `mass`.
struct JumpAtom {
  double rate = 0.0;
  VectorXd mass;
};

/// Finite-type branching Markov process.  Particles of type x move with
/// generator row Q(x,.), die at rate beta(x) and are replaced by a draw from
/// offspring[x].  Immutable after construction; share freely across threads.
struct BmpModel {
  int d = 0;
  MatrixXd motion_rates;  // d x d, off-diagonal >= 0, zero row sums
  VectorXd branch_rate;   // beta, >= 0
  std::vector<std::vector<OffspringAtom>> offspring;  // per type
  std::string name;
};

/// Finite-type superprocess with linear drift a, local diffusion b, bounded
/// non-local kernel eta (zero diagonal) and finitely many jump atoms per type.
struct SpModel {
  int d = 0;
  MatrixXd motion_rates;
  VectorXd a;
  VectorXd b;
  MatrixXd eta;
  std::vector<std::vector<JumpAtom>> jumps;  // per type
  std::string name;
};

/// Initial configuration: particle counts (BMP) or masses (SP) per type.
struct InitState {
  VectorXd weights;

  void require_positive() const {
    if (weights.size() == 0 || weights.maxCoeff() <= 0.0)
      throw_error(ErrorCode::ZeroInitialMass, "initial state has no positive entry");
    if (weights.minCoeff() < 0.0)
      throw_error(ErrorCode::NegativeMass, "initial state has a negative entry");
  }
};

struct ValidationReport {
  std::string model_name;
  std::string kind;  // "bmp" | "sp"

  // BMP fields
  VectorXd probability_residuals;  // |sum p - 1| per type
  MatrixXd offspring_moments;      // d x 4, E_x[N^k] for k = 1..4
  double sup_fourth_moment = 0.0;  // sup_x E_x[N^4], or sup_x sum r nu(1)^4 (SP)
  MatrixXd mean_matrix;            // M[x][y] = E_x[# offspring of type y]
  bool has_unit_offspring_atom = false;  // some law has an atom with N = 1
  double max_branch_rate = 0.0;

  // SP fields
  VectorXd fourth_moment;   // per type, sum_atoms r * nu(1)^4
  VectorXd total_jump_rate; // per type
  VectorXd eta_row_sums;
  std::vector<int> pure_jump_types;  // b(x) = 0

  bool irreducible = false;

  std::string summary() const;
};

/// Checks structural invariants and reports per-type moments and the mean
/// offspring matrix.  Throws on negative rates, probability sums off by more
/// than 1e-9 (never silently renormalized) and empty offspring lists.
ValidationReport validate_bmp(const BmpModel& model);

/// Superprocess analogue: fourth-moment sums, jump rates, eta row sums.
ValidationReport validate_sp(const SpModel& model);

/// Mean offspring matrix M[x][y] = E_x[# offspring of type y].
MatrixXd offspring_mean_matrix(const BmpModel& model);

/// GW-style extinction probability of the total-count process embedded at
/// branch events, per type (smallest root of the offspring generating
/// equation), found by fixed-point iteration.  Used by simulation tests.
VectorXd extinction_probabilities(const BmpModel& model);

bool models_equal(const BmpModel& a, const BmpModel& b);
bool models_equal(const SpModel& a, const SpModel& b);

}  // namespace branchlab
