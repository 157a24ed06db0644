#include "branchlab/sim_sp.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "branchlab/spectral.hpp"

namespace branchlab {

namespace {

struct SpTables {
  MatrixXd drift_t;  // (Q - diag(a) + eta)^T; jump means enter via the jumps themselves
  VectorXd noise;    // sqrt(2 b_x)
  double a_norm_inf = 0.0;

  explicit SpTables(const SpModel& model) {
    MatrixXd drift = model.motion_rates + model.eta;
    drift -= MatrixXd(model.a.asDiagonal());
    drift_t = drift.transpose();
    noise = (2.0 * model.b).cwiseSqrt();
    a_norm_inf = mean_generator(model).cwiseAbs().rowwise().sum().maxCoeff();
  }
};

SpTrajectory run_one(const SpModel& model, const SpTables& tables, double horizon,
                     double dt, const std::vector<double>& sample_times, VectorXd state,
                     CounterRng rng) {
  const int d = model.d;
  const std::size_t T = sample_times.size();
  SpTrajectory out;
  out.sample_times = sample_times;
  out.states.resize(static_cast<Eigen::Index>(T), d);
  out.seed = rng.key();
  out.dt = dt;

  const double sqrt_dt = std::sqrt(dt);
  std::size_t next_sample = 0;
  double t = 0.0;
  auto record_through = [&](double now) {
    while (next_sample < T && sample_times[next_sample] <= now + 1e-12) {
      out.states.row(next_sample) = state.transpose();
      ++next_sample;
    }
  };
  record_through(0.0);

  const std::uint64_t n_steps = static_cast<std::uint64_t>(std::ceil(horizon / dt - 1e-9));
  for (std::uint64_t k = 0; k < n_steps && next_sample < T; ++k) {
    VectorXd next = state + dt * (tables.drift_t * state);
    for (int x = 0; x < d; ++x) {
      if (tables.noise(x) > 0.0)
        next(x) += tables.noise(x) * std::sqrt(std::max(state(x), 0.0)) * sqrt_dt *
                   rng.normal();
    }
    for (int x = 0; x < d; ++x) {
      for (const auto& atom : model.jumps[x]) {
        const double mean = atom.rate * std::max(state(x), 0.0) * dt;
        const std::uint64_t n = rng.poisson(mean);
        if (n > 0) {
          next += static_cast<double>(n) * atom.mass;
          out.jump_count += n;
        }
      }
    }
    state = next.cwiseMax(0.0);  // full truncation
    t = (k + 1) * dt;
    ++out.steps;
    record_through(t);
  }
  record_through(horizon + 1.0);  // flush anything left by rounding
  return out;
}

void check_arguments(const SpTables& tables, double horizon, double dt,
                     const std::vector<double>& sample_times) {
  if (dt <= 0.0) throw_error(ErrorCode::PreconditionViolated, "dt must be > 0");
  if (dt * tables.a_norm_inf > 0.1)
    throw_error(ErrorCode::StepTooLarge, "dt * ||A||_inf > 0.1; decrease the step");
  for (std::size_t i = 1; i < sample_times.size(); ++i)
    if (sample_times[i] <= sample_times[i - 1])
      throw_error(ErrorCode::PreconditionViolated, "sample times must be increasing");
  if (!sample_times.empty() && sample_times.back() > horizon + 1e-12)
    throw_error(ErrorCode::PreconditionViolated, "horizon must cover all sample times");
}

}  // namespace

double default_sp_dt(const SpModel& model) {
  const double norm = mean_generator(model).cwiseAbs().rowwise().sum().maxCoeff();
  return 1e-3 * std::min(1.0, norm > 0.0 ? 1.0 / norm : 1.0);
}

SpTrajectory simulate_sp(const SpModel& model, const InitState& init, double horizon,
                         double dt, const std::vector<double>& sample_times,
                         std::uint64_t seed) {
  init.require_positive();
  const SpTables tables(model);
  check_arguments(tables, horizon, dt, sample_times);
  return run_one(model, tables, horizon, dt, sample_times, init.weights, CounterRng(seed));
}

Ensemble simulate_sp_ensemble(const SpModel& model, const InitState& init, double horizon,
                              double dt, const std::vector<double>& sample_times,
                              int replicas, std::uint64_t base_seed, int parallelism) {
  if (replicas < 1) throw_error(ErrorCode::PreconditionViolated, "replicas must be >= 1");
  init.require_positive();
  const SpTables tables(model);
  check_arguments(tables, horizon, dt, sample_times);

  Ensemble ens;
  ens.kind = "sp";
  ens.d = model.d;
  ens.sample_times = sample_times;
  ens.init = init.weights;
  ens.base_seed = base_seed;
  ens.dt = dt;
  ens.states.resize(replicas);
  ens.seeds.resize(replicas);
  ens.events.resize(replicas);
  ens.capped.assign(replicas, 0);
  ens.status.assign(replicas, std::string{});

  std::atomic<int> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const int r = cursor.fetch_add(1);
      if (r >= replicas) return;
      SpTrajectory tr = run_one(model, tables, horizon, dt, sample_times, init.weights,
                                CounterRng::for_replica(base_seed, r));
      ens.seeds[r] = tr.seed;
      ens.events[r] = tr.jump_count;
      ens.states[r] = std::move(tr.states);
    }
  };
  const int jobs = std::max(1, parallelism);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return ens;
}

}  // namespace branchlab
