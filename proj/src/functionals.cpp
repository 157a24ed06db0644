#include "branchlab/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "branchlab/quadrature.hpp"

namespace branchlab {

namespace {

constexpr double kDegenerateTol = 1e-12;

Complex bilinear(const VectorXcd& a, const VectorXcd& b) {
  // No conjugation: the pair-correlation formulas are bilinear, not sesquilinear.
  Complex s = 0.0;
  for (int i = 0; i < a.size(); ++i) s += a(i) * b(i);
  return s;
}

/// Real part of <v, phi_tilde>, asserting the imaginary part is rounding-level.
double real_projection(const SpectralContext& ctx, const VectorXcd& v) {
  const Complex p = ctx.project(v);
  return p.real();
}

/// Estimates C such that |f(s)| <= C e^{-gamma s} by probing, with headroom.
template <class F>
double probe_envelope(F&& f, double gamma) {
  double c = 0.0;
  for (int i = 0; i <= 8; ++i) {
    const double s = gamma > 0.0 ? i / (2.0 * gamma) : static_cast<double>(i);
    c = std::max(c, std::abs(f(s)) * std::exp(gamma * s));
  }
  return 4.0 * std::max(c, 1e-300);
}

}  // namespace

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::Sub: return "sub";
    case Regime::Crit: return "crit";
    case Regime::Super: return "super";
  }
  return "?";
}

VectorXcd theta(const BmpModel& model, const VectorXcd& f, const VectorXcd& g) {
  VectorXcd out = VectorXcd::Zero(model.d);
  for (int x = 0; x < model.d; ++x) {
    Complex acc = 0.0;
    for (const auto& atom : model.offspring[x]) {
      Complex kf = 0.0, kg = 0.0, diag = 0.0;
      for (int y = 0; y < model.d; ++y) {
        const double ky = atom.counts(y);
        kf += ky * f(y);
        kg += ky * g(y);
        diag += ky * f(y) * g(y);
      }
      acc += atom.p * (kf * kg - diag);
    }
    out(x) = model.branch_rate(x) * acc;
  }
  return out;
}

VectorXcd theta(const SpModel& model, const VectorXcd& f, const VectorXcd& g) {
  VectorXcd out = VectorXcd::Zero(model.d);
  for (int x = 0; x < model.d; ++x) {
    Complex acc = 2.0 * model.b(x) * f(x) * g(x);
    for (const auto& atom : model.jumps[x]) {
      const Complex nf = bilinear(atom.mass.cast<Complex>(), f);
      const Complex ng = bilinear(atom.mass.cast<Complex>(), g);
      acc += atom.rate * nf * ng;
    }
    out(x) = acc;
  }
  return out;
}

VectorXcd theta(const AnyModel& model, const VectorXcd& f, const VectorXcd& g) {
  return is_bmp(model) ? theta(as_bmp(model), f, g) : theta(as_sp(model), f, g);
}

VectorXcd variance_functional(const AnyModel& model, const SpectralContext& ctx,
                              const VectorXcd& f, const VectorXcd& g, Convention conv) {
  VectorXcd base = theta(model, f, g);
  if (conv == Convention::AsStated || !is_bmp(model)) return base;
  // Carre du champ of the mean generator restores the per-particle
  // fluctuation the displayed functional drops on particle models.
  const MatrixXcd A = ctx.A.cast<Complex>();
  const VectorXcd fg = f.cwiseProduct(g);
  return base + A * fg - f.cwiseProduct(A * g) - g.cwiseProduct(A * f);
}

namespace {

/// e^z - 1 without cancellation for small |z|.
Complex cexpm1(Complex z) {
  const double x = z.real(), y = z.imag();
  const double sy2 = std::sin(0.5 * y);
  return {std::expm1(x) * std::cos(y) - 2.0 * sy2 * sy2, std::exp(x) * std::sin(y)};
}

}  // namespace

Complex f_factor(double s, Complex z) {
  const Complex sz = s * z;
  if (std::abs(sz) < 1e-6)
    return s * (1.0 + sz / 2.0 + sz * sz / 6.0);
  return cexpm1(sz) / z;
}

Eigenpair Eigenpair::conjugated() const {
  Eigenpair out = *this;
  out.lambda = std::conj(lambda);
  out.g = g.conjugate();
  return out;
}

Eigenpair Eigenpair::phased(Complex theta_unit) const {
  Eigenpair out = *this;
  out.g = theta_unit * g;
  return out;
}

Eigenpair make_eigenpair(const SpectralContext& ctx, Complex lambda, const VectorXcd& g,
                         std::optional<double> crit_tol) {
  Eigenpair ep;
  ep.lambda = lambda;
  ep.g = g;
  ep.c = lambda.real();
  const double scale = std::max(1.0, ctx.a_norm_inf);
  const double residual = (ctx.A.cast<Complex>() * g - lambda * g).cwiseAbs().maxCoeff();
  if (residual > 1e-8 * scale)
    throw_error(ErrorCode::PreconditionViolated,
                "(lambda, g) is not an eigenpair of the mean generator");
  const double lambda1 = ctx.principal.lambda1;
  const double tol = crit_tol.value_or(1e-9 * std::max(1.0, lambda1));
  if (std::abs(ep.c - lambda1 / 2.0) <= tol)
    ep.regime = Regime::Crit;
  else
    ep.regime = ep.c < lambda1 / 2.0 ? Regime::Sub : Regime::Super;
  return ep;
}

Eigenpair make_eigenpair(const SpectralContext& ctx, int pair_index,
                         std::optional<double> crit_tol) {
  if (pair_index < 0 || pair_index >= static_cast<int>(ctx.pairs.size()))
    throw_error(ErrorCode::PreconditionViolated, "eigenpair index out of range");
  const auto& triple = ctx.pairs[pair_index];
  return make_eigenpair(ctx, triple.lambda, triple.right, crit_tol);
}

VectorXcd TestCombo::h() const {
  VectorXcd sum = VectorXcd::Zero(terms.front().g.size());
  for (const auto& ep : terms) sum += ep.g;
  return sum;
}

TestCombo make_combo(std::vector<Eigenpair> terms) {
  if (terms.empty())
    throw_error(ErrorCode::PreconditionViolated, "combination needs at least one eigenpair");
  for (std::size_t i = 0; i < terms.size(); ++i) {
    for (std::size_t j = i + 1; j < terms.size(); ++j) {
      const Complex a = terms[i].lambda, b = terms[j].lambda;
      if (std::abs(a - b) < 1e-9 || std::abs(a - std::conj(b)) < 1e-9)
        throw_error(ErrorCode::PreconditionViolated,
                    "combination eigenvalues must be pairwise distinct and non-conjugate");
    }
  }
  std::sort(terms.begin(), terms.end(), [](const Eigenpair& a, const Eigenpair& b) {
    if (a.lambda.real() != b.lambda.real()) return a.lambda.real() > b.lambda.real();
    return a.lambda.imag() > b.lambda.imag();
  });
  TestCombo combo;
  combo.terms = std::move(terms);
  return combo;
}

RegimeConstant regime_constant(const SpectralContext& ctx, const AnyModel& model,
                               const Eigenpair& ep, Convention conv) {
  RegimeConstant out;
  out.regime = ep.regime;
  const double lambda1 = ctx.principal.lambda1;
  const double mixed = real_projection(
      ctx, variance_functional(model, ctx, ep.g, ep.g.conjugate(), conv));
  const Complex plain = ctx.project(variance_functional(model, ctx, ep.g, ep.g, conv));
  out.degenerate = std::abs(mixed) <= kDegenerateTol * std::max(1.0, ctx.a_norm_inf);
  switch (ep.regime) {
    case Regime::Sub:
      out.coefficient = mixed / (lambda1 - 2.0 * ep.c) +
                         std::abs(plain / (lambda1 - 2.0 * ep.lambda));
      break;
    case Regime::Crit: {
      const double two = std::abs(ep.lambda.imag()) <= kDegenerateTol ? 2.0 : 1.0;
      out.coefficient = two * mixed;
      break;
    }
    case Regime::Super:
      out.coefficient = mixed / (2.0 * ep.c - lambda1) +
                         std::abs(plain / (2.0 * ep.lambda - lambda1));
      break;
  }
  return out;
}

double g_sigma(const SpectralContext& ctx, const AnyModel& model, const Eigenpair& ep,
               double sigma, double t, Convention conv) {
  if (sigma <= 0.0) throw_error(ErrorCode::PreconditionViolated, "sigma must be > 0");
  const double lambda1 = ctx.principal.lambda1;
  const double mixed = real_projection(
      ctx, variance_functional(model, ctx, ep.g, ep.g.conjugate(), conv));
  const Complex plain = ctx.project(variance_functional(model, ctx, ep.g, ep.g, conv));
  const Complex osc = std::exp(Complex(0.0, -2.0 * t * ep.lambda.imag())) * plain *
                      f_factor(sigma, lambda1 - 2.0 * ep.lambda);
  return mixed * f_factor(sigma, lambda1 - 2.0 * ep.c).real() + osc.real();
}

Complex covariance_integral(const SpectralContext& ctx, const AnyModel& model,
                            const Eigenpair& ep_j, const Eigenpair& ep_k, double t,
                            Convention conv) {
  const VectorXcd v = variance_functional(model, ctx, ep_j.g, ep_k.g, conv);
  const Complex rate = ep_j.lambda + ep_k.lambda;
  const double lambda1 = ctx.principal.lambda1;
  // e^{-rate s} T_s = e^{(lambda1 - rate)s} (e^{-lambda1 s} T_s); the second
  // factor stays bounded, so long horizons cannot overflow.
  auto integrand = [&](double s) -> Complex {
    const MatrixXd T = normalized_semigroup(ctx, s);
    return std::exp((lambda1 - rate) * s) * ctx.project(VectorXcd(T.cast<Complex>() * v));
  };
  const double omega = rate.imag();
  QuadratureResult qr;
  Complex value;
  if (t >= 0.0) {
    value = oscillatory_simpson(integrand, 0.0, t, omega, 1e-10, &qr);
  } else {
    const double gamma = rate.real() - lambda1;
    if (gamma <= 1e-12)
      throw_error(ErrorCode::DivergentIntegral,
                  "limit covariance needs Re(lambda_j + lambda_k) > lambda1");
    const double envelope = probe_envelope([&](double s) { return std::abs(integrand(s)); }, gamma);
    value = integrate_to_infinity(integrand, envelope, gamma, omega, 1e-10, &qr);
  }
  return value;
}

ComboConstants combo_constants(const SpectralContext& ctx, const AnyModel& model,
                               const TestCombo& combo, Convention conv) {
  ComboConstants out;
  const double lambda1 = ctx.principal.lambda1;

  std::vector<const Eigenpair*> sub, crit, super;
  for (const auto& ep : combo.terms) {
    switch (ep.regime) {
      case Regime::Sub: sub.push_back(&ep); break;
      case Regime::Crit: crit.push_back(&ep); break;
      case Regime::Super: super.push_back(&ep); break;
    }
  }

  // Subcritical block: integral of the projected variance functional of the
  // real part of sum e^{gamma s} g_k.
  if (!sub.empty()) {
    double c_max = -std::numeric_limits<double>::infinity();
    double omega = 0.0;
    for (const auto* ep : sub) {
      c_max = std::max(c_max, ep->c);
      omega = std::max(omega, 2.0 * std::abs(ep->lambda.imag()));
    }
    auto integrand = [&](double s) -> double {
      VectorXcd u = VectorXcd::Zero(ctx.dim());
      for (const auto* ep : sub) {
        const VectorXcd term = std::exp(ep->lambda * s) * ep->g;
        u += term.real().cast<Complex>();
      }
      return std::exp(-lambda1 * s) *
             real_projection(ctx, variance_functional(model, ctx, u, u, conv));
    };
    const double gamma = lambda1 - 2.0 * c_max;
    const double envelope = probe_envelope(integrand, gamma);
    QuadratureResult qr;
    out.h_small = integrate_to_infinity(integrand, envelope, gamma, omega, 1e-10, &qr);
    out.quadrature_error += qr.error_bound;
  }

  // Supercritical block: Var[sum Re W_infty] assembled from pairwise limit
  // covariances, conjugate combinations included.
  for (std::size_t j = 0; j < super.size(); ++j) {
    for (std::size_t k = 0; k < super.size(); ++k) {
      const Complex plain = covariance_integral(ctx, model, *super[j], *super[k], -1.0, conv);
      const Complex cross =
          covariance_integral(ctx, model, *super[j], super[k]->conjugated(), -1.0, conv);
      out.h_large += 0.5 * (plain + cross).real();
    }
  }

  for (const auto* ep : crit) {
    const double mixed = real_projection(
        ctx, variance_functional(model, ctx, ep->g, ep->g.conjugate(), conv));
    const double two = std::abs(ep->lambda.imag()) <= kDegenerateTol ? 2.0 : 1.0;
    out.k_crit += two * mixed;
  }
  return out;
}

}  // namespace branchlab
