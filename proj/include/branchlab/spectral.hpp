#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "branchlab/model.hpp"

namespace branchlab {

using Complex = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

/// One eigen-triple of the mean generator: lambda, right eigenvector g
/// (phase-fixed, sup-norm 1) and left eigenvector g_tilde scaled so that
/// <g, g_tilde> = 1.
struct EigenTriple {
  Complex lambda;
  VectorXcd right;
  VectorXcd left;
};

struct PrincipalTriple {
  double lambda1 = 0.0;
  VectorXd phi;        // positive, max entry 1
  VectorXd phi_tilde;  // positive, <phi, phi_tilde> = 1
};

struct DeltaRow {
  double t = 0.0;
  double delta = 0.0;
  double fitted_bound = 0.0;  // C_fit * exp(-rate_fit * t)
};

struct DeltaTable {
  std::vector<DeltaRow> rows;
  double fitted_rate = 0.0;  // decay rate from a log-linear fit
  double fitted_c = 0.0;
  double spectral_gap = 0.0;
};

/// Mean generator and full eigensystem of a finite-type model.  Immutable
/// after construction; all member-free operations on it are pure.
struct SpectralContext {
  MatrixXd A;
  std::vector<EigenTriple> pairs;  // sorted by decreasing Re(lambda)
  PrincipalTriple principal;
  MatrixXcd V;     // right eigenvector matrix (solver scaling)
  MatrixXcd Vinv;  // inverse; rows are left eigenvectors
  VectorXcd eigenvalues;  // matching V's columns
  double condition = 0.0;      // spectral condition estimate of V
  double spectral_gap = 0.0;   // lambda1 - max Re(other eigenvalues)
  double a_norm_inf = 0.0;

  int dim() const { return static_cast<int>(A.rows()); }

  /// <v, phi_tilde> with the left principal eigenmeasure.
  Complex project(const VectorXcd& v) const {
    Complex s = 0.0;
    for (int x = 0; x < dim(); ++x) s += v(x) * principal.phi_tilde(x);
    return s;
  }
  double project(const VectorXd& v) const { return principal.phi_tilde.dot(v); }
};

/// A = Q + diag(beta) (M - I): generator of the expectation semigroup T_t.
MatrixXd mean_generator(const BmpModel& model);

/// A = Q - diag(a) + eta + J with J(x,y) = sum of rate * nu_y over the jump
/// atoms at x (full mass vectors, diagonal included).
MatrixXd mean_generator(const SpModel& model);

/// Full complex eigensystem of A with the principal triple identified.
/// Throws DegenerateSpectrum if the leading eigenvalue is not simple to
/// tolerance 1e-8, NonPositivePrincipal if no positive eigenvector exists.
SpectralContext eigensystem(const MatrixXd& A);

inline SpectralContext eigensystem(const BmpModel& m) { return eigensystem(mean_generator(m)); }
inline SpectralContext eigensystem(const SpModel& m) { return eigensystem(mean_generator(m)); }

/// e^{tA}.  Uses the eigendecomposition when V is well conditioned
/// (condition < 1e6), otherwise scaling-and-squaring with a Pade
/// approximant.  Throws Overflow when t * ||A||_inf > 700.
MatrixXd semigroup(const SpectralContext& ctx, double t);

/// e^{-lambda1 t} e^{tA}: bounded uniformly in t, so usable at horizons where
/// the raw exponential would overflow.
MatrixXd normalized_semigroup(const SpectralContext& ctx, double t);

/// Equilibrium distance at time t: with B_t = e^{-lambda1 t} e^{tA} -
/// phi phi_tilde^T, Delta_t = max_x phi(x)^{-1} sum_y |B_t(x,y)|.
double equilibrium_distance(const SpectralContext& ctx, double t);

/// Delta_t on a time grid, with a fitted exponential envelope to compare
/// against the spectral gap.
DeltaTable verify_h1(const SpectralContext& ctx, const std::vector<double>& t_grid);

}  // namespace branchlab
