#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "branchlab/model_io.hpp"
#include "branchlab/spectral.hpp"

namespace branchlab {

/// Second-moment bookkeeping convention for branching particle models.
/// AsStated uses the displayed pair-correlation functional alone; Classical
/// additionally carries the per-particle fluctuation term (carre du champ of
/// the mean generator).  The two coincide for superprocess models.
enum class Convention { AsStated, Classical };

enum class Regime { Sub, Crit, Super };

const char* regime_name(Regime r);

/// Pair-correlation functional: per type x,
///   BMP: beta(x) E_x[ sum_{i != j} f(x_i) g(x_j) ]
///   SP:  2 b(x) f(x) g(x) + sum of rate * (nu^T f)(nu^T g) over atoms at x.
/// Bilinear and symmetric in (f, g).
VectorXcd theta(const BmpModel& model, const VectorXcd& f, const VectorXcd& g);
VectorXcd theta(const SpModel& model, const VectorXcd& f, const VectorXcd& g);
VectorXcd theta(const AnyModel& model, const VectorXcd& f, const VectorXcd& g);

/// Convention-resolved variance functional: AsStated is theta; Classical adds
/// the carre du champ Gamma[f,g] = A(fg) - f A(g) - g A(f) of the mean
/// generator (BMP only; for SP models both conventions return theta).
VectorXcd variance_functional(const AnyModel& model, const SpectralContext& ctx,
                              const VectorXcd& f, const VectorXcd& g, Convention conv);

/// F_s(z) = (e^{sz} - 1) / z, continuously extended by F_s(0) = s.  A short
/// series takes over for |sz| < 1e-6.
Complex f_factor(double s, Complex z);

/// One eigenpair tagged with its growth regime relative to lambda1 / 2.
struct Eigenpair {
  Complex lambda;
  VectorXcd g;
  double c = 0.0;  // Re lambda
  Regime regime = Regime::Sub;

  Eigenpair conjugated() const;
  Eigenpair phased(Complex theta_unit) const;  // multiply g by a unit phase
};

/// Builds an eigenpair from the context (validating the eigen relation) and
/// classifies its regime with relative tolerance 1e-9 * max(1, lambda1),
/// overridable via `crit_tol`.
Eigenpair make_eigenpair(const SpectralContext& ctx, Complex lambda, const VectorXcd& g,
                         std::optional<double> crit_tol = std::nullopt);
Eigenpair make_eigenpair(const SpectralContext& ctx, int pair_index,
                         std::optional<double> crit_tol = std::nullopt);

/// A finite sum h = sum g_k of eigenpairs with pairwise distinct,
/// pairwise non-conjugate eigenvalues, sorted by decreasing Re.
struct TestCombo {
  std::vector<Eigenpair> terms;

  VectorXcd h() const;
};

TestCombo make_combo(std::vector<Eigenpair> terms);

struct RegimeConstant {
  Regime regime = Regime::Sub;
  double coefficient = 0.0;  // K in limsup = sqrt(K * W_infty)
  bool degenerate = false;   // <theta[g, conj g], phi_tilde> == 0
};

/// The deterministic coefficient K of the iterated-logarithm limit for one
/// eigen-martingale:
///   Sub:   <th[g,gc],pt>/(l1-2c) + |<th[g],pt>/(l1-2lambda)|
///   Crit:  (1 + [Im lambda = 0]) <th[g,gc],pt>
///   Super: <th[g,gc],pt>/(2c-l1) + |<th[g],pt>/(2lambda-l1)|
RegimeConstant regime_constant(const SpectralContext& ctx, const AnyModel& model,
                               const Eigenpair& ep, Convention conv = Convention::AsStated);

/// G_sigma(t) = <th[g,gc],pt> F_sigma(l1-2c)
///            + Re(e^{-2 i t Im lambda} <th[g],pt> F_sigma(l1-2lambda)).
double g_sigma(const SpectralContext& ctx, const AnyModel& model, const Eigenpair& ep,
               double sigma, double t, Convention conv = Convention::AsStated);

/// Projected covariance integral
///   <int_0^t e^{-(lambda_j+lambda_k)s} T_s(th[g_j,g_k]) ds, phi_tilde>,
/// by adaptive quadrature (absolute error <= 1e-9).  t = infinity (pass
/// t < 0) requires Re(lambda_j + lambda_k) > lambda1, else DivergentIntegral.
Complex covariance_integral(const SpectralContext& ctx, const AnyModel& model,
                            const Eigenpair& ep_j, const Eigenpair& ep_k, double t,
                            Convention conv = Convention::AsStated);

struct ComboConstants {
  double h_small = 0.0;   // integral over the subcritical block
  double h_large = 0.0;   // terminal variance of the supercritical block
  double k_crit = 0.0;    // critical sum with the (1 + [Im = 0]) factor
  double quadrature_error = 0.0;
};

ComboConstants combo_constants(const SpectralContext& ctx, const AnyModel& model,
                               const TestCombo& combo,
                               Convention conv = Convention::AsStated);

}  // namespace branchlab
