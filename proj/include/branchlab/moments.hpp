#pragma once

#include <vector>

#include "branchlab/functionals.hpp"

namespace branchlab {

struct MomentReport {
  double t = 0.0;
  double mean = 0.0;
  double second = 0.0;
  double variance = 0.0;
  Convention convention = Convention::AsStated;
  double quadrature_error = 0.0;
};

/// E_mu[<f, X_t>] = mu^T e^{tA} f.
Complex mean_functional(const SpectralContext& ctx, const InitState& mu,
                        const VectorXcd& f, double t);

/// Second moment of <f, X_t> for real f.  AsStated evaluates the displayed
/// formula <T_t f, mu>^2 + <int_0^t T_{t-s}(theta[T_s f]) ds, mu>; Classical
/// adds the particle-fluctuation term <T_t(f^2) - (T_t f)^2, mu> on BMP
/// models.  For SP models the conventions coincide.
MomentReport second_moment(const SpectralContext& ctx, const AnyModel& model,
                           const InitState& mu, const VectorXd& f, double t,
                           Convention conv);

/// Var_{delta_x}[Re W_t(lambda, g)] under the chosen convention.
double variance_re_martingale(const SpectralContext& ctx, const AnyModel& model,
                              const Eigenpair& ep, int x, double t, Convention conv);

/// Var_{delta_x}[<u, X_s>] for every type x (real test vector u).
VectorXd variance_linear(const SpectralContext& ctx, const AnyModel& model,
                         const VectorXd& u, double s, Convention conv);

struct VarianceAsymptoteRow {
  double t = 0.0;
  double normalized = 0.0;  // e^{-(l1-2c)t} Var, Var/t, or Var per regime
  double predicted = 0.0;
  double residual = 0.0;
};

struct VarianceAsymptoteTable {
  Regime regime = Regime::Sub;
  std::vector<VarianceAsymptoteRow> rows;
};

/// Normalized martingale variances along a time grid against the predicted
/// regime limits (oscillation-resolved for complex eigenvalues).
VarianceAsymptoteTable variance_asymptote(const SpectralContext& ctx, const AnyModel& model,
                                          const Eigenpair& ep, int x,
                                          const std::vector<double>& t_grid,
                                          Convention conv = Convention::AsStated);

struct IntegralCheckRow {
  double t = 0.0;
  double computed = 0.0;   // sup-norm of the (scaled) integral
  double predicted = 0.0;  // sup-norm of the predicted asymptote
  double residual = 0.0;   // sup-norm of the difference
};

struct IntegralCheckTable {
  int regime = 0;  // sign of lambda1 - 2 alpha: +1, 0, -1
  std::vector<IntegralCheckRow> rows;
};

/// Long-time behaviour of int_0^t e^{-2 alpha s + i freq s} T_s f ds in the
/// three alpha-regimes, with residuals against the predicted limits.
IntegralCheckTable integral_asymptotics_check(const SpectralContext& ctx, double alpha,
                                              double freq, const VectorXd& f,
                                              const std::vector<double>& t_grid);

}  // namespace branchlab
