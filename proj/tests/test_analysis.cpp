#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "branchlab/analysis.hpp"
#include "branchlab/sim_bmp.hpp"
#include "branchlab/sim_sp.hpp"
#include "branchlab/stats.hpp"
#include "support.hpp"

using namespace branchlab;
using branchlab::testing::load_bmp;
using branchlab::testing::load_sp;

namespace {

InitState particles(std::initializer_list<double> counts) {
  InitState init;
  init.weights = VectorXd::Zero(static_cast<int>(counts.size()));
  int i = 0;
  for (double c : counts) init.weights(i++) = c;
  return init;
}

std::vector<double> lattice(double sigma, double tmax) {
  std::vector<double> out;
  for (double t = sigma; t <= tmax + 1e-9; t += sigma) out.push_back(t);
  return out;
}

}  // namespace

TEST_CASE("martingale paths: initial value and principal positivity") {
  const BmpModel t2 = load_bmp("t2");
  const SpectralContext ctx = eigensystem(t2);
  const Ensemble ens =
      simulate_ensemble(t2, particles({2, 1}), {0.5, 1.0, 2.0}, 200, 15, 4);

  const Eigenpair principal = make_eigenpair(ctx, 0);
  const MartingalePaths pp = martingale_paths(ens, ctx, principal);
  for (int r = 0; r < ens.replicas(); ++r) {
    for (std::size_t i = 0; i < ens.sample_times.size(); ++i) {
      CHECK(pp.values(r, i).imag() == 0.0);
      CHECK(pp.values(r, i).real() >= 0.0);
    }
    CHECK(pp.wphi_terminal(r) >= 0.0);
  }

  // W at t = 0 equals <g, init> for every replica: check via a 0-sample run.
  const Ensemble at0 = simulate_ensemble(t2, particles({2, 1}), {0.0, 1.0}, 50, 15, 1);
  const Eigenpair second = make_eigenpair(ctx, 1);
  const MartingalePaths sp = martingale_paths(at0, ctx, second);
  Complex expected = 2.0 * second.g(0) + 1.0 * second.g(1);
  for (int r = 0; r < 50; ++r) CHECK(std::abs(sp.values(r, 0) - expected) == 0.0);
}

TEST_CASE("lln: t2 indicator observable converges onto the martingale limit") {
  const BmpModel t2 = load_bmp("t2");
  const SpectralContext ctx = eigensystem(t2);
  std::vector<double> times{1.0, 2.0, 4.0, 8.0, 12.0};
  const Ensemble ens = simulate_ensemble(t2, particles({1, 0}), times, 10000, 2027, 8);
  VectorXd f = VectorXd::Zero(2);
  f(0) = 1.0;
  const TestVerdict v = lln_test(ens, ctx, f);
  CHECK(v.status == VerdictStatus::Pass);
  CHECK(v.statistic > 0.99);

  // Observables orthogonal to the left eigenmeasure are skipped.
  VectorXd g = (VectorXd(2) << 1.0, -1.0).finished();
  const TestVerdict skipped = lln_test(ens, ctx, g);
  CHECK(skipped.status == VerdictStatus::Skipped);
}

TEST_CASE("lln refuses short horizons and thin survivor sets") {
  const BmpModel t2 = load_bmp("t2");
  const SpectralContext ctx = eigensystem(t2);
  const Ensemble ens = simulate_ensemble(t2, particles({1, 0}), {0.5, 1.0}, 500, 3, 4);
  VectorXd f = VectorXd::Zero(2);
  f(0) = 1.0;
  CHECK_THROWS_WITH_AS(lln_test(ens, ctx, f), doctest::Contains("PreconditionViolated"),
                       Error);
}

TEST_CASE("l2 convergence of the yule martingale along dyadic pairs") {
  const BmpModel yule = load_bmp("yule");
  const AnyModel any{yule};
  const SpectralContext ctx = eigensystem(yule);
  const Ensemble ens =
      simulate_ensemble(yule, particles({1}), {1.0, 2.0, 4.0, 8.0}, 20000, 404, 8);
  const Eigenpair principal = make_eigenpair(ctx, 0);
  const TestVerdict v =
      l2_convergence_test(ens, ctx, any, principal, Convention::Classical);
  CHECK(v.status == VerdictStatus::Pass);

  // Direct check of the oracle: E|W_{2t} - W_t|^2 = e^{-t} - e^{-2t}.
  const MartingalePaths paths = martingale_paths(ens, ctx, principal);
  std::vector<double> sq;
  for (int r = 0; r < ens.replicas(); ++r)
    sq.push_back(std::norm(paths.values(r, 3) - paths.values(r, 2)));
  const double oracle = std::exp(-4.0) - std::exp(-8.0);
  CHECK(std::abs(sample_mean(sq) - oracle) <= 3.0 * sample_stderr(sq));

  const SpectralContext rctx = eigensystem(load_bmp("rot3"));
  const Eigenpair sub = make_eigenpair(rctx, 1);
  CHECK_THROWS_AS(l2_convergence_test(ens, rctx, AnyModel{load_bmp("rot3")}, sub,
                                      Convention::Classical),
                  Error);
}

TEST_CASE("increment gaussianity on the yule principal martingale") {
  const BmpModel yule = load_bmp("yule");
  const AnyModel any{yule};
  const SpectralContext ctx = eigensystem(yule);
  const Ensemble ens =
      simulate_ensemble(yule, particles({1}), {6.0, 7.0}, 4000, 606, 8);
  const Eigenpair principal = make_eigenpair(ctx, 0);
  std::vector<double> zs;
  const TestVerdict v = increment_gaussianity_test(ens, ctx, any, principal, 6.0, 1.0,
                                                   Convention::Classical, &zs);
  CHECK(v.status == VerdictStatus::Pass);
  CHECK(zs.size() > 3000);

  CHECK_THROWS_AS(increment_gaussianity_test(ens, ctx, any, principal, 6.0, 0.0,
                                             Convention::Classical),
                  Error);
}

TEST_CASE("gaussianity rejects a degenerate pair correlation") {
  BmpModel frozen = load_bmp("t2");
  frozen.branch_rate = VectorXd::Zero(2);
  frozen.motion_rates << -1.0, 1.0, 1.0, -1.0;
  const AnyModel any{frozen};
  const SpectralContext ctx = eigensystem(frozen);
  const Ensemble ens =
      simulate_ensemble(frozen, particles({4, 4}), {6.0, 7.0}, 200, 1, 2);
  const Eigenpair second = make_eigenpair(ctx, 1);
  CHECK_THROWS_WITH_AS(increment_gaussianity_test(ens, ctx, any, second, 6.0, 1.0,
                                                  Convention::Classical),
                       doctest::Contains("DegenerateConditionalVariance"), Error);
}

TEST_CASE("lil scan on the slow binary model lands in the soft band") {
  const BmpModel yule = load_bmp("yule_slow");
  const AnyModel any{yule};
  const SpectralContext ctx = eigensystem(yule);
  const Ensemble ens =
      simulate_ensemble(yule, particles({1}), lattice(1.0, 200.0), 800, 99, 8);
  const Eigenpair principal = make_eigenpair(ctx, 0);

  LilOptions opt;
  opt.convention = Convention::AsStated;
  const LilScanReport report = lil_scan(ens, ctx, any, principal, opt);
  CHECK(report.coefficient == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(report.verdict.status == VerdictStatus::SoftPass);
  CHECK(report.median_ratio > 0.3);
  CHECK(report.median_ratio < 1.4);

  // Phase robustness: a sign flip leaves K and the envelope statistics alike.
  const LilScanReport flipped =
      lil_scan(ens, ctx, any, principal.phased(Complex(-1.0, 0.0)), opt);
  CHECK(flipped.coefficient == doctest::Approx(report.coefficient));
  CHECK(std::abs(flipped.median_ratio - report.median_ratio) < report.iqr);
}

TEST_CASE("lil scan refuses windows that are too short") {
  const BmpModel yule = load_bmp("yule");
  const AnyModel any{yule};
  const SpectralContext ctx = eigensystem(yule);
  const Ensemble ens =
      simulate_ensemble(yule, particles({1}), lattice(1.0, 12.0), 200, 9, 4);
  CHECK_THROWS_WITH_AS(lil_scan(ens, ctx, any, make_eigenpair(ctx, 0)),
                       doctest::Contains("WindowTooShort"), Error);
}

TEST_CASE("combo series identity: sum of rotated martingales reproduces <h, X>") {
  const BmpModel rot3 = load_bmp("rot3");
  const SpectralContext ctx = eigensystem(rot3);
  const Ensemble ens =
      simulate_ensemble(rot3, particles({1, 0, 0}), {0.5, 1.0, 2.0, 3.0}, 100, 33, 4);
  const Eigenpair p = make_eigenpair(ctx, 0);
  const Eigenpair c = make_eigenpair(ctx, 1);
  const TestCombo combo = make_combo({p, c});
  const VectorXcd h = combo.h();
  const double lambda1 = ctx.principal.lambda1;

  const MartingalePaths wp = martingale_paths(ens, ctx, p);
  const MartingalePaths wc = martingale_paths(ens, ctx, c);
  for (int r = 0; r < ens.replicas(); ++r) {
    for (std::size_t i = 0; i < ens.sample_times.size(); ++i) {
      const double t = ens.sample_times[i];
      Complex inner = 0.0;
      for (int x = 0; x < 3; ++x) inner += ens.states[r](i, x) * h(x);
      const double lhs = std::exp(-lambda1 * t / 2.0) * inner.real();
      double rhs = 0.0;
      for (const auto& [ep, w] : {std::pair<const Eigenpair&, const MartingalePaths&>{p, wp},
                                  {c, wc}}) {
        const Complex rotated = std::exp(Complex(0.0, t * ep.lambda.imag())) * w.values(r, i);
        rhs += std::exp((ep.c - lambda1 / 2.0) * t) * rotated.real();
      }
      CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
    }
  }
}

TEST_CASE("near-return times of oscillation frequencies") {
  SUBCASE("full turns always return") {
    const auto report = near_return_times({2.0 * 3.14159265358979323846}, 0.5, 1000);
    CHECK(report.times.size() == 1000);
    CHECK(report.max_gap == 1);
  }
  SUBCASE("half turns return on even integers") {
    const auto report = near_return_times({3.14159265358979323846}, 0.5, 1000);
    CHECK(report.times.size() == 500);
    CHECK(report.times.front() == 2);
    CHECK(report.max_gap == 2);
  }
  SUBCASE("irrational frequency: bounded gaps at eps = 0.1") {
    const auto report = near_return_times({std::sqrt(3.0)}, 0.1, 100000);
    CHECK_FALSE(report.none_found);
    CHECK(report.times.size() > 2000);
    CHECK(report.max_gap <= 200);
    CHECK(report.density == doctest::Approx(0.1 / 3.14159265).epsilon(0.2));
  }
  SUBCASE("arguments are validated") {
    CHECK_THROWS_AS(near_return_times({1.0}, 2.5, 10), Error);
    CHECK_THROWS_AS(near_return_times({1.0}, 0.5, 0), Error);
  }
}

TEST_CASE("superprocess martingale means stay flat (drift/jump split)") {
  SpModel m = load_sp("feller");
  JumpAtom atom;
  atom.rate = 0.5;
  atom.mass = VectorXd::Constant(1, 0.4);
  m.jumps[0].push_back(atom);
  const SpectralContext ctx = eigensystem(m);
  const std::vector<double> times{0.5, 1.0, 2.0};
  InitState init;
  init.weights = VectorXd::Constant(1, 1.0);
  const Ensemble ens = simulate_sp_ensemble(m, init, 2.0, 5e-4, times, 20000, 71, 8);
  const Eigenpair principal = make_eigenpair(ctx, 0);
  const MartingalePaths paths = martingale_paths(ens, ctx, principal);
  for (std::size_t i = 0; i < times.size(); ++i) {
    std::vector<double> re;
    for (int r = 0; r < ens.replicas(); ++r) re.push_back(paths.values(r, i).real());
    // 3 sigma plus a first-order discretization allowance
    CHECK(std::abs(sample_mean(re) - principal.g(0).real()) <=
          3.0 * sample_stderr(re) + 2e-3);
  }
}
