#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "branchlab/moments.hpp"
#include "branchlab/sim_sp.hpp"
#include "branchlab/stats.hpp"
#include "support.hpp"

using namespace branchlab;
using branchlab::testing::load_sp;

namespace {

InitState mass(std::initializer_list<double> ws) {
  InitState init;
  init.weights = VectorXd::Zero(static_cast<int>(ws.size()));
  int i = 0;
  for (double w : ws) init.weights(i++) = w;
  return init;
}

SpModel pure_drift(double a) {
  SpModel m = load_sp("feller");
  m.a = VectorXd::Constant(1, a);
  m.b = VectorXd::Zero(1);
  m.name = "pure_drift";
  return m;
}

}  // namespace

TEST_CASE("noise-free dynamics reduce to the linear ODE") {
  const SpModel m = pure_drift(1.0);  // dX = -X dt, X_t = e^{-t}
  SUBCASE("euler error scales out at a fine step") {
    const SpTrajectory tr = simulate_sp(m, mass({1.0}), 1.0, 1e-6, {1.0}, 5);
    CHECK(std::abs(tr.states(0, 0) - std::exp(-1.0)) <= 1e-6);
  }
  SUBCASE("error at dt = 1e-4 sits at the first-order level t dt / 2") {
    const SpTrajectory tr = simulate_sp(m, mass({1.0}), 1.0, 1e-4, {1.0}, 5);
    const double err = std::abs(tr.states(0, 0) - std::exp(-1.0));
    CHECK(err <= 1.0 * 1e-4);
    CHECK(err >= 1e-6);  // genuinely first order, not hiding a smaller scheme
  }
}

TEST_CASE("identical seeds give identical paths; parallelism changes nothing") {
  const SpModel feller = load_sp("feller");
  const std::vector<double> times{0.25, 0.5, 1.0};
  const SpTrajectory a = simulate_sp(feller, mass({1.0}), 1.0, 1e-3, times, 77);
  const SpTrajectory b = simulate_sp(feller, mass({1.0}), 1.0, 1e-3, times, 77);
  CHECK((a.states - b.states).cwiseAbs().maxCoeff() == 0.0);

  const Ensemble serial =
      simulate_sp_ensemble(feller, mass({1.0}), 1.0, 1e-3, times, 48, 9, 1);
  const Ensemble wide =
      simulate_sp_ensemble(feller, mass({1.0}), 1.0, 1e-3, times, 48, 9, 8);
  for (int r = 0; r < 48; ++r)
    CHECK((serial.states[r] - wide.states[r]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("guard rails") {
  const SpModel feller = load_sp("feller");
  CHECK_THROWS_WITH_AS(simulate_sp(feller, mass({1.0}), 1.0, 0.2, {1.0}, 1),
                       doctest::Contains("StepTooLarge"), Error);
  CHECK_THROWS_WITH_AS(simulate_sp(feller, mass({0.0}), 1.0, 1e-3, {1.0}, 1),
                       doctest::Contains("ZeroInitialMass"), Error);
  CHECK_THROWS_AS(simulate_sp(feller, mass({1.0}), 0.5, 1e-3, {1.0}, 1), Error);
  CHECK_THROWS_AS(
      simulate_sp_ensemble(feller, mass({1.0}), 1.0, 1e-3, {1.0}, 0, 1, 1), Error);
}

TEST_CASE("zero is a trap: absorbed paths stay at zero") {
  SpModel m = load_sp("feller");
  m.a = VectorXd::Constant(1, 3.0);  // strong pull toward extinction
  std::vector<double> times;
  for (int k = 1; k <= 40; ++k) times.push_back(0.25 * k);
  const Ensemble ens = simulate_sp_ensemble(m, mass({0.05}), 10.0, 1e-3, times, 200, 3, 4);
  int absorbed = 0;
  for (int r = 0; r < ens.replicas(); ++r) {
    bool dead = false;
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double x = ens.states[r](i, 0);
      if (dead) CHECK(x == 0.0);
      if (x == 0.0) dead = true;
    }
    if (dead) ++absorbed;
  }
  CHECK(absorbed > 150);  // nearly every path dies under this drift
}

TEST_CASE("feller ensemble mean and variance track the oracle") {
  const SpModel feller = load_sp("feller");
  const Ensemble ens =
      simulate_sp_ensemble(feller, mass({1.0}), 1.0, 1e-3, {1.0}, 20000, 88, 8);
  std::vector<double> x1;
  for (int r = 0; r < ens.replicas(); ++r) x1.push_back(ens.states[r](0, 0));
  const double mean_oracle = std::exp(1.0);
  const double var_oracle = 2.0 * std::exp(1.0) * (std::exp(1.0) - 1.0);
  CHECK(std::abs(sample_mean(x1) - mean_oracle) <=
        3.0 * sample_stderr(x1) + 2e-3 * mean_oracle);
  CHECK(std::abs(sample_variance(x1) - var_oracle) <= 0.05 * var_oracle + 0.3);
}

TEST_CASE("jump means are not double counted in the drift") {
  // Pure-jump growth: no diffusion, no linear drift, one atom of rate 1 and
  // mass 0.5 gives A = 0.5, so the mean is e^{t/2}.
  SpModel m = load_sp("feller");
  m.a = VectorXd::Zero(1);
  m.b = VectorXd::Zero(1);
  JumpAtom atom;
  atom.rate = 1.0;
  atom.mass = VectorXd::Constant(1, 0.5);
  m.jumps[0].push_back(atom);
  CHECK(mean_generator(m)(0, 0) == doctest::Approx(0.5).epsilon(1e-15));

  const Ensemble ens = simulate_sp_ensemble(m, mass({1.0}), 2.0, 1e-3, {2.0}, 20000, 5, 8);
  std::vector<double> xt;
  for (int r = 0; r < ens.replicas(); ++r) xt.push_back(ens.states[r](0, 0));
  CHECK(std::abs(sample_mean(xt) - std::exp(1.0)) <=
        3.0 * sample_stderr(xt) + 2e-3 * std::exp(1.0));
  CHECK(ens.events[0] + ens.events[1] > 0);  // jump counters recorded
}

TEST_CASE("two-type superprocess mean law with eta transfer and jumps") {
  SpModel m;
  m.d = 2;
  m.motion_rates = MatrixXd::Zero(2, 2);
  m.a = (VectorXd(2) << 0.3, -0.2).finished();
  m.b = (VectorXd(2) << 0.5, 0.25).finished();
  m.eta = MatrixXd::Zero(2, 2);
  m.eta(0, 1) = 0.4;
  m.eta(1, 0) = 0.1;
  JumpAtom atom;
  atom.rate = 0.2;
  atom.mass = (VectorXd(2) << 0.3, 0.6).finished();
  m.jumps = {{atom}, {}};
  m.name = "sp2";
  validate_sp(m);
  const SpectralContext ctx = eigensystem(m);

  const std::vector<double> times{0.5, 1.0, 2.0};
  const Ensemble ens = simulate_sp_ensemble(m, mass({1.0, 0.5}), 2.0, 5e-4, times,
                                            20000, 17, 8);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const VectorXd oracle =
        semigroup(ctx, times[i]).transpose() * (VectorXd(2) << 1.0, 0.5).finished();
    const VectorXd mean = ens.mean_at(static_cast<int>(i));
    const VectorXd se = ens.stderr_at(static_cast<int>(i));
    for (int x = 0; x < 2; ++x)
      CHECK(std::abs(mean(x) - oracle(x)) <= 3.0 * se(x) + 2e-3 * oracle.maxCoeff());
  }
}

TEST_CASE("second moment of the observable matches the moment oracle") {
  const SpModel feller = load_sp("feller");
  const AnyModel any{feller};
  const SpectralContext ctx = eigensystem(feller);
  const Ensemble ens =
      simulate_sp_ensemble(feller, mass({1.0}), 1.0, 5e-4, {1.0}, 30000, 21, 8);
  std::vector<double> sq;
  for (int r = 0; r < ens.replicas(); ++r)
    sq.push_back(ens.states[r](0, 0) * ens.states[r](0, 0));
  InitState mu = mass({1.0});
  const double oracle =
      second_moment(ctx, any, mu, VectorXd::Ones(1), 1.0, Convention::AsStated).second;
  CHECK(std::abs(sample_mean(sq) - oracle) <= 0.05 * oracle + 3.0 * sample_stderr(sq));
}
