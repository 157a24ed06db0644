#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "branchlab/functionals.hpp"
#include "branchlab/quadrature.hpp"
#include "branchlab/rng.hpp"
#include "support.hpp"

using namespace branchlab;
using branchlab::testing::load_bmp;
using branchlab::testing::load_sp;

namespace {

VectorXcd random_cvector(CounterRng& rng, int d, double scale = 1.0) {
  VectorXcd v(d);
  for (int i = 0; i < d; ++i)
    v(i) = scale * Complex(2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0);
  return v;
}

/// rot3 with uneven branch rates: same cyclic structure but the projection
/// <theta[g], phi_tilde> no longer cancels, so G_sigma genuinely oscillates.
BmpModel uneven_rot3() {
  BmpModel m = load_bmp("rot3");
  m.branch_rate = (VectorXd(3) << 1.0, 2.0, 4.0).finished();
  m.name = "rot3b";
  validate_bmp(m);
  return m;
}

}  // namespace

TEST_CASE("quadrature engine basics") {
  CHECK(adaptive_simpson([](double x) { return x * x; }, 0.0, 1.0, 1e-12) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(oscillatory_simpson([](double x) { return std::cos(7.0 * x); }, 0.0, 10.0, 7.0,
                            1e-12) == doctest::Approx(std::sin(70.0) / 7.0).epsilon(1e-10));
  CHECK(integrate_to_infinity([](double s) { return std::exp(-2.0 * s); }, 1.0, 2.0, 0.0,
                              1e-12) == doctest::Approx(0.5).epsilon(1e-10));
  // Vector-valued integrand.
  const VectorXd v = adaptive_simpson(
      [](double x) { return VectorXd::Constant(2, std::exp(x)); }, 0.0, 1.0, 1e-12);
  CHECK(v(0) == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-12));
}

TEST_CASE("pair-correlation functional on the golden models") {
  const AnyModel yule{load_bmp("yule")};
  const VectorXcd one = VectorXcd::Ones(1);
  CHECK(std::abs(theta(yule, one, one)(0) - Complex(2.0, 0.0)) < 1e-14);
  CHECK(theta(yule, VectorXcd::Zero(1), one).cwiseAbs().maxCoeff() == 0.0);

  const AnyModel t2{load_bmp("t2")};
  VectorXcd g(2);
  g << Complex(1.0, 0.0), Complex(-1.0, 0.0);
  const VectorXcd th = theta(t2, g, g);
  CHECK(std::abs(th(0) - Complex(1.0, 0.0)) < 1e-14);
  CHECK(std::abs(th(1) - Complex(1.0, 0.0)) < 1e-14);
}

TEST_CASE("superprocess pair correlation: local plus jump quadratic") {
  SpModel m = load_sp("feller");
  JumpAtom atom;
  atom.rate = 0.3;
  atom.mass = VectorXd::Constant(1, 2.0);
  m.jumps[0].push_back(atom);
  const AnyModel any{m};
  const VectorXcd f = VectorXcd::Constant(1, Complex(2.0, 1.0));
  const VectorXcd g = VectorXcd::Constant(1, Complex(0.5, -1.0));
  // 2 b f g + rate (nu f)(nu g) = (2 + 0.3 * 4) f g
  const Complex expected = 3.2 * f(0) * g(0);
  CHECK(std::abs(theta(any, f, g)(0) - expected) < 1e-14);
}

TEST_CASE("bilinearity and conjugation symmetry") {
  const AnyModel t2{load_bmp("t2")};
  CounterRng rng(42);
  for (int k = 0; k < 20; ++k) {
    const VectorXcd f1 = random_cvector(rng, 2);
    const VectorXcd f2 = random_cvector(rng, 2);
    const VectorXcd g = random_cvector(rng, 2);
    const Complex alpha(2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0);
    const VectorXcd lhs = theta(t2, alpha * f1 + f2, g);
    const VectorXcd rhs = alpha * theta(t2, f1, g) + theta(t2, f2, g);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);

    const VectorXcd conj_path = theta(t2, f1.conjugate(), g.conjugate());
    CHECK((conj_path - theta(t2, f1, g).conjugate()).cwiseAbs().maxCoeff() <= 1e-12);

    const VectorXcd sym = theta(t2, g, f1);
    CHECK((sym - theta(t2, f1, g)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("classical variance functional carries the carre du champ") {
  // On the Yule model: theta[1,1] = 2, classical pair correlation
  // beta E[(N - 1)^2] = 1, and Gamma = A(1) - 2 A(1) = -1 closes the gap.
  const BmpModel yule = load_bmp("yule");
  const AnyModel any{yule};
  const SpectralContext ctx = eigensystem(yule);
  const VectorXcd one = VectorXcd::Ones(1);
  const VectorXcd cl = variance_functional(any, ctx, one, one, Convention::Classical);
  CHECK(std::abs(cl(0) - Complex(1.0, 0.0)) < 1e-14);
  const VectorXcd as = variance_functional(any, ctx, one, one, Convention::AsStated);
  CHECK(std::abs(as(0) - Complex(2.0, 0.0)) < 1e-14);

  // Conventions coincide on superprocess models.
  const SpModel feller = load_sp("feller");
  const AnyModel sp{feller};
  const SpectralContext sctx = eigensystem(feller);
  CounterRng rng(3);
  for (int k = 0; k < 5; ++k) {
    const VectorXcd f = random_cvector(rng, 1);
    const VectorXcd g = random_cvector(rng, 1);
    const VectorXcd a = variance_functional(sp, sctx, f, g, Convention::AsStated);
    const VectorXcd c = variance_functional(sp, sctx, f, g, Convention::Classical);
    CHECK((a - c).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("F factor: value, continuity at zero, functional identity") {
  CHECK(f_factor(2.5, Complex(0.0, 0.0)) == Complex(2.5, 0.0));
  CHECK(std::abs(f_factor(1.0, Complex(1.0, 0.0)) - Complex(std::exp(1.0) - 1.0, 0.0)) <
        1e-14);
  // Series and direct branches agree with an expm1-based reference across the
  // switchover at |sz| = 1e-6.
  for (double z : {1e-9, 9e-7, 1.1e-6, 1e-5}) {
    const double reference = std::expm1(z) / z;
    const Complex value = f_factor(1.0, Complex(z, 0.0));
    CHECK(std::abs(value - Complex(reference, 0.0)) / reference < 1e-12);
  }
  const Complex lo = f_factor(1.0, Complex(0.99e-6, 0.0));
  const Complex hi = f_factor(1.0, Complex(1.01e-6, 0.0));
  CHECK(std::abs(lo - hi) <= 2e-8);

  CounterRng rng(11);
  for (int k = 0; k < 30; ++k) {
    const double s = 5.0 * rng.uniform() + 1e-3;
    const double u = 5.0 * rng.uniform() + 1e-3;
    const Complex z(20.0 * rng.uniform() - 10.0, 20.0 * rng.uniform() - 10.0);
    const Complex lhs = f_factor(s + u, z);
    const Complex rhs = f_factor(s, z) + std::exp(s * z) * f_factor(u, z);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("eigenpair construction validates and classifies regimes") {
  const BmpModel t2 = load_bmp("t2");
  const SpectralContext ctx = eigensystem(t2);
  const Eigenpair principal = make_eigenpair(ctx, 0);
  CHECK(principal.regime == Regime::Super);
  const Eigenpair crit = make_eigenpair(ctx, 1);
  CHECK(crit.regime == Regime::Crit);

  const SpectralContext rctx = eigensystem(load_bmp("rot3"));
  CHECK(make_eigenpair(rctx, 1).regime == Regime::Sub);

  VectorXcd wrong = VectorXcd::Ones(2);
  wrong(1) = 2.0;
  CHECK_THROWS_AS(make_eigenpair(ctx, Complex(0.5, 0.0), wrong), Error);
}

TEST_CASE("combination class rejects equal or conjugate rates") {
  const SpectralContext ctx = eigensystem(load_bmp("rot3"));
  const Eigenpair a = make_eigenpair(ctx, 1);
  CHECK_THROWS_AS(make_combo({a, a}), Error);
  CHECK_THROWS_AS(make_combo({a, a.conjugated()}), Error);
  const Eigenpair p = make_eigenpair(ctx, 0);
  const TestCombo combo = make_combo({a, p});
  CHECK(combo.terms.front().regime == Regime::Super);  // sorted by decreasing Re
}

TEST_CASE("regime constants on the golden models") {
  SUBCASE("yule principal, both conventions") {
    const BmpModel yule = load_bmp("yule");
    const AnyModel any{yule};
    const SpectralContext ctx = eigensystem(yule);
    const Eigenpair ep = make_eigenpair(ctx, 0);
    CHECK(ep.regime == Regime::Super);
    CHECK(regime_constant(ctx, any, ep, Convention::AsStated).coefficient ==
          doctest::Approx(4.0).epsilon(1e-12));
    CHECK(regime_constant(ctx, any, ep, Convention::Classical).coefficient ==
          doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("t2 critical pair") {
    const BmpModel t2 = load_bmp("t2");
    const AnyModel any{t2};
    const SpectralContext ctx = eigensystem(t2);
    const RegimeConstant rc = regime_constant(ctx, any, make_eigenpair(ctx, 1));
    CHECK(rc.regime == Regime::Crit);
    CHECK(rc.coefficient == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_FALSE(rc.degenerate);
  }
  SUBCASE("rot3 subcritical complex pair") {
    const BmpModel rot3 = load_bmp("rot3");
    const AnyModel any{rot3};
    const SpectralContext ctx = eigensystem(rot3);
    const Eigenpair ep = make_eigenpair(ctx, 1);
    CHECK(ep.regime == Regime::Sub);
    // <theta[g, conj g], phi_tilde> = 2 and lambda1 - 2 Re lambda = 5; the
    // plain projection cancels by the cyclic symmetry.
    const RegimeConstant rc = regime_constant(ctx, any, ep);
    CHECK(rc.coefficient == doctest::Approx(0.4).epsilon(1e-10));
  }
}

TEST_CASE("regime constants are invariant under unit phases of g") {
  const BmpModel rot3b = uneven_rot3();
  const AnyModel any{rot3b};
  const SpectralContext ctx = eigensystem(rot3b);
  const Eigenpair ep = make_eigenpair(ctx, 1);
  const double base = regime_constant(ctx, any, ep).coefficient;
  CounterRng rng(5);
  for (int k = 0; k < 8; ++k) {
    const double angle = 6.28318530717958647692 * rng.uniform();
    const Eigenpair rotated = ep.phased(std::exp(Complex(0.0, angle)));
    const double k_rot = regime_constant(ctx, any, rotated).coefficient;
    CHECK(std::abs(k_rot - base) <= 1e-10 * std::max(1.0, std::abs(base)));
  }
  // Real pair: sign flip.
  const SpectralContext t2 = eigensystem(load_bmp("t2"));
  const AnyModel t2any{load_bmp("t2")};
  const Eigenpair crit = make_eigenpair(t2, 1);
  CHECK(regime_constant(t2, t2any, crit.phased(Complex(-1.0, 0.0))).coefficient ==
        doctest::Approx(regime_constant(t2, t2any, crit).coefficient).epsilon(1e-12));
}

TEST_CASE("G_sigma: real eigenvalue collapse and oscillation amplitude") {
  SUBCASE("t2 critical pair is constant in t with value 2 sigma") {
    const BmpModel t2 = load_bmp("t2");
    const AnyModel any{t2};
    const SpectralContext ctx = eigensystem(t2);
    const Eigenpair ep = make_eigenpair(ctx, 1);
    for (double t : {0.0, 0.7, 3.0, 12.0})
      CHECK(g_sigma(ctx, any, ep, 1.5, t) == doctest::Approx(3.0).epsilon(1e-12));
  }
  SUBCASE("rot3 oscillates at angular frequency 2 Im lambda") {
    const BmpModel rot3b = uneven_rot3();
    const AnyModel any{rot3b};
    const SpectralContext ctx = eigensystem(rot3b);
    const Eigenpair ep = make_eigenpair(ctx, 1);
    const double freq = 2.0 * std::abs(ep.lambda.imag());
    REQUIRE(freq > 0.0);
    const double period = 2.0 * 3.14159265358979323846 / freq;
    const double sigma = 1.0;
    double gmin = 1e300, gmax = -1e300;
    for (int k = 0; k <= 4096; ++k) {
      const double g = g_sigma(ctx, any, ep, sigma, period * k / 4096.0);
      gmin = std::min(gmin, g);
      gmax = std::max(gmax, g);
    }
    const Complex plain = ctx.project(theta(any, ep.g, ep.g));
    const double amplitude =
        2.0 * std::abs(plain * f_factor(sigma, ctx.principal.lambda1 - 2.0 * ep.lambda));
    REQUIRE(amplitude > 1e-6);  // the uneven rates break the cancellation
    CHECK(gmax - gmin == doctest::Approx(amplitude).epsilon(1e-5));

    // Bound on a dense grid: G never exceeds the mixed term plus |plain term|.
    const double mixed = ctx.project(theta(any, ep.g, ep.g.conjugate())).real();
    const double bound =
        mixed * f_factor(sigma, ctx.principal.lambda1 - 2.0 * ep.c).real() + amplitude / 2.0;
    for (int k = 0; k < 10000; ++k)
      CHECK(g_sigma(ctx, any, ep, sigma, 0.004 * k) <= bound + 1e-12);
  }
  SUBCASE("symmetric rot3 has a vanishing plain projection, so G is flat") {
    const BmpModel rot3 = load_bmp("rot3");
    const AnyModel any{rot3};
    const SpectralContext ctx = eigensystem(rot3);
    const Eigenpair ep = make_eigenpair(ctx, 1);
    const double at0 = g_sigma(ctx, any, ep, 1.0, 0.0);
    for (double t : {0.3, 1.1, 2.9}) CHECK(g_sigma(ctx, any, ep, 1.0, t) ==
                                           doctest::Approx(at0).epsilon(1e-10));
  }
}

TEST_CASE("covariance integral: closed forms and divergence guard") {
  const BmpModel yule = load_bmp("yule");
  const AnyModel any{yule};
  const SpectralContext ctx = eigensystem(yule);
  const Eigenpair phi = make_eigenpair(ctx, 0);
  // int_0^inf e^{-2s} T_s(theta[phi]) ds with theta[phi] = 2 phi: equals 2.
  CHECK(covariance_integral(ctx, any, phi, phi, -1.0).real() ==
        doctest::Approx(2.0).epsilon(1e-9));
  CHECK(std::abs(covariance_integral(ctx, any, phi, phi, 0.0)) == 0.0);

  // Finite-t values against the eigen-projected closed form
  // <theta[g_j,g_k], phi_tilde> F_t(lambda1 - lambda_j - lambda_k).
  const BmpModel t2m = load_bmp("t2");
  const AnyModel t2{t2m};
  const SpectralContext tctx = eigensystem(t2m);
  const Eigenpair a = make_eigenpair(tctx, 0);
  const Eigenpair b = make_eigenpair(tctx, 1);
  for (const auto& [j, k] : {std::pair{a, a}, {a, b}, {b, b}}) {
    for (double t : {0.5, 2.0, 6.0}) {
      const Complex proj = tctx.project(theta(t2, j.g, k.g));
      const Complex expected =
          proj * f_factor(t, tctx.principal.lambda1 - j.lambda - k.lambda);
      CHECK(std::abs(covariance_integral(tctx, t2, j, k, t) - expected) <= 1e-9);
    }
  }
  // Re(lambda_j + lambda_k) = lambda1 diverges at t = infinity.
  CHECK_THROWS_WITH_AS(covariance_integral(tctx, t2, b, b, -1.0),
                       doctest::Contains("DivergentIntegral"), Error);
}

TEST_CASE("combination constants on the golden models") {
  SUBCASE("yule principal alone") {
    const BmpModel yule = load_bmp("yule");
    const AnyModel any{yule};
    const SpectralContext ctx = eigensystem(yule);
    const TestCombo combo = make_combo({make_eigenpair(ctx, 0)});
    const ComboConstants cc = combo_constants(ctx, any, combo);
    CHECK(cc.h_small == 0.0);
    CHECK(cc.k_crit == 0.0);
    CHECK(cc.h_large == doctest::Approx(2.0).epsilon(1e-8));
  }
  SUBCASE("t2 critical pair alone") {
    const BmpModel t2 = load_bmp("t2");
    const AnyModel any{t2};
    const SpectralContext ctx = eigensystem(t2);
    const ComboConstants cc = combo_constants(ctx, any, make_combo({make_eigenpair(ctx, 1)}));
    CHECK(cc.h_small == 0.0);
    CHECK(cc.h_large == 0.0);
    CHECK(cc.k_crit == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("rot3 subcritical pair alone: quadrature against the closed form") {
    const BmpModel rot3 = load_bmp("rot3");
    const AnyModel any{rot3};
    const SpectralContext ctx = eigensystem(rot3);
    const ComboConstants cc = combo_constants(ctx, any, make_combo({make_eigenpair(ctx, 1)}));
    // <theta[u(s)], phi_tilde> = e^{-4s} (2 + 0)/2... integrand collapses to
    // e^{-s lambda1} e^{2 c s} <theta[g, conj g], phi_tilde> / 2 = e^{-5s},
    // so the integral is exactly 1/5.
    CHECK(cc.h_small == doctest::Approx(0.2).epsilon(1e-8));
    CHECK(cc.h_large == 0.0);
    CHECK(cc.k_crit == 0.0);
  }
  SUBCASE("t2 full combination") {
    const BmpModel t2 = load_bmp("t2");
    const AnyModel any{t2};
    const SpectralContext ctx = eigensystem(t2);
    const ComboConstants cc = combo_constants(
        ctx, any, make_combo({make_eigenpair(ctx, 0), make_eigenpair(ctx, 1)}));
    CHECK(cc.h_small == 0.0);
    CHECK(cc.h_large == doctest::Approx(2.0).epsilon(1e-8));  // principal block
    CHECK(cc.k_crit == doctest::Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("degenerate pair correlation flags instead of failing") {
  // A two-type model whose second eigenfunction has a vanishing projected
  // pair correlation: pure motion with no branching on one type class.
  BmpModel m = load_bmp("t2");
  m.branch_rate = VectorXd::Zero(2);
  m.motion_rates << -1.0, 1.0, 1.0, -1.0;
  validate_bmp(m);
  const AnyModel any{m};
  const SpectralContext ctx = eigensystem(m);
  const Eigenpair ep = make_eigenpair(ctx, 1);
  const RegimeConstant rc = regime_constant(ctx, any, ep);
  CHECK(rc.degenerate);
  CHECK(rc.coefficient == 0.0);
}
