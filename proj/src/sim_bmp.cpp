#include "branchlab/sim_bmp.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace branchlab {

namespace {

/// Immutable per-model sampling tables shared by all replicas.
struct SimTables {
  int d = 0;
  VectorXd motion_rate;             // q_x = -Q(x,x)
  VectorXd unit_rate;               // q_x + beta_x
  std::vector<std::vector<double>> motion_cdf;   // cumulative off-diagonal rates
  std::vector<std::vector<int>> motion_target;
  std::vector<std::vector<double>> atom_cdf;     // cumulative probabilities
  double max_unit_rate = 0.0;

  explicit SimTables(const BmpModel& model) : d(model.d) {
    motion_rate.resize(d);
    unit_rate.resize(d);
    motion_cdf.resize(d);
    motion_target.resize(d);
    atom_cdf.resize(d);
    for (int x = 0; x < d; ++x) {
      motion_rate(x) = -model.motion_rates(x, x);
      unit_rate(x) = motion_rate(x) + model.branch_rate(x);
      double acc = 0.0;
      for (int y = 0; y < d; ++y) {
        if (y == x || model.motion_rates(x, y) <= 0.0) continue;
        acc += model.motion_rates(x, y);
        motion_cdf[x].push_back(acc);
        motion_target[x].push_back(y);
      }
      double pacc = 0.0;
      for (const auto& atom : model.offspring[x]) {
        pacc += atom.p;
        atom_cdf[x].push_back(pacc);
      }
      max_unit_rate = std::max(max_unit_rate, unit_rate(x));
    }
  }
};

std::vector<long long> integral_counts(const InitState& init) {
  init.require_positive();
  std::vector<long long> counts(init.weights.size());
  for (int x = 0; x < init.weights.size(); ++x) {
    const double w = init.weights(x);
    const double r = std::round(w);
    if (w != r)
      throw_error(ErrorCode::ParseError, "particle counts must be integers");
    counts[x] = static_cast<long long>(r);
  }
  return counts;
}

Trajectory run_one(const BmpModel& model, const SimTables& tables,
                   const std::vector<double>& sample_times,
                   std::vector<long long> counts, CounterRng rng,
                   std::uint64_t event_cap) {
  const int d = model.d;
  const std::size_t T = sample_times.size();
  Trajectory out;
  out.sample_times = sample_times;
  out.states.setConstant(static_cast<Eigen::Index>(T), d,
                         std::numeric_limits<double>::quiet_NaN());
  out.seed = rng.key();

  double rate_total = 0.0;
  for (int x = 0; x < d; ++x) rate_total += counts[x] * tables.unit_rate(x);

  double t = 0.0;
  std::size_t next_sample = 0;
  std::uint64_t events = 0;
  auto record_through = [&](double horizon) {
    while (next_sample < T && sample_times[next_sample] < horizon) {
      for (int x = 0; x < d; ++x)
        out.states(next_sample, x) = static_cast<double>(counts[x]);
      ++next_sample;
    }
  };

  while (next_sample < T) {
    if (rate_total <= 0.0) {
      record_through(std::numeric_limits<double>::infinity());
      break;
    }
    const double t_event = t + rng.exponential(rate_total);
    record_through(t_event);
    if (next_sample >= T) break;
    t = t_event;

    // Pick the acting type proportionally to N_x (q_x + beta_x).  The running
    // total can drift by rounding, so fall back to the last active type.
    double u = rng.uniform() * rate_total;
    int x = -1;
    for (int i = 0; i < d; ++i) {
      const double r = counts[i] * tables.unit_rate(i);
      if (r <= 0.0) continue;
      x = i;
      if (u < r) break;
      u -= r;
    }
    if (x < 0) {  // counts and rates disagree; force an exact refresh
      rate_total = 0.0;
      for (int i = 0; i < d; ++i) rate_total += counts[i] * tables.unit_rate(i);
      continue;
    }

    const double v = rng.uniform() * tables.unit_rate(x);
    if (v < tables.motion_rate(x)) {
      // Motion: one particle x -> y with probability Q(x,y)/q_x.
      const auto& cdf = tables.motion_cdf[x];
      const double w = rng.uniform() * tables.motion_rate(x);
      std::size_t j = 0;
      while (j + 1 < cdf.size() && w >= cdf[j]) ++j;
      const int y = tables.motion_target[x][j];
      counts[x] -= 1;
      counts[y] += 1;
      rate_total += tables.unit_rate(y) - tables.unit_rate(x);
    } else {
      // Branch: remove the parent, add an offspring draw.
      const auto& cdf = tables.atom_cdf[x];
      const double w = rng.uniform() * cdf.back();
      std::size_t j = 0;
      while (j + 1 < cdf.size() && w >= cdf[j]) ++j;
      const auto& atom = model.offspring[x][j];
      counts[x] -= 1;
      rate_total -= tables.unit_rate(x);
      for (int y = 0; y < d; ++y) {
        counts[y] += atom.counts(y);
        rate_total += atom.counts(y) * tables.unit_rate(y);
      }
    }

    if ((++events & 0xfff) == 0) {
      // Periodic exact refresh against floating-point drift of the running sum.
      rate_total = 0.0;
      for (int i = 0; i < d; ++i) rate_total += counts[i] * tables.unit_rate(i);
    }
    if (events >= event_cap) {
      out.capped = true;
      break;
    }
  }
  out.events = events;
  return out;
}

}  // namespace

Trajectory simulate(const BmpModel& model, const InitState& init,
                    const std::vector<double>& sample_times, std::uint64_t seed,
                    std::uint64_t event_cap) {
  if (event_cap < 1) throw_error(ErrorCode::PreconditionViolated, "event cap must be >= 1");
  for (std::size_t i = 1; i < sample_times.size(); ++i)
    if (sample_times[i] <= sample_times[i - 1])
      throw_error(ErrorCode::PreconditionViolated, "sample times must be increasing");
  const SimTables tables(model);
  return run_one(model, tables, sample_times, integral_counts(init), CounterRng(seed),
                 event_cap);
}

Ensemble simulate_ensemble(const BmpModel& model, const InitState& init,
                           const std::vector<double>& sample_times, int replicas,
                           std::uint64_t base_seed, int parallelism,
                           std::uint64_t event_cap) {
  if (replicas < 1) throw_error(ErrorCode::PreconditionViolated, "replicas must be >= 1");
  for (std::size_t i = 1; i < sample_times.size(); ++i)
    if (sample_times[i] <= sample_times[i - 1])
      throw_error(ErrorCode::PreconditionViolated, "sample times must be increasing");
  const SimTables tables(model);
  const auto counts0 = integral_counts(init);

  Ensemble ens;
  ens.kind = "bmp";
  ens.d = model.d;
  ens.sample_times = sample_times;
  ens.init = init.weights;
  ens.base_seed = base_seed;
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
      Trajectory tr = run_one(model, tables, sample_times, counts0,
                              CounterRng::for_replica(base_seed, r), event_cap);
      ens.seeds[r] = tr.seed;
      ens.events[r] = tr.events;
      ens.capped[r] = tr.capped ? 1 : 0;
      if (tr.capped) ens.status[r] = "EventCapExceeded";
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

VectorXd Ensemble::mean_at(int time_index) const {
  VectorXd acc = VectorXd::Zero(d);
  for (const auto& s : states) acc += s.row(time_index);
  return acc / static_cast<double>(states.size());
}

VectorXd Ensemble::variance_at(int time_index) const {
  const VectorXd m = mean_at(time_index);
  VectorXd acc = VectorXd::Zero(d);
  for (const auto& s : states) {
    const VectorXd dv = s.row(time_index).transpose() - m;
    acc += dv.cwiseProduct(dv);
  }
  return acc / std::max<double>(1.0, static_cast<double>(states.size()) - 1.0);
}

VectorXd Ensemble::stderr_at(int time_index) const {
  return (variance_at(time_index) / static_cast<double>(states.size())).cwiseSqrt();
}

}  // namespace branchlab
