#pragma once

#include <string>
#include <vector>

#include "branchlab/analysis.hpp"
#include "branchlab/manifest.hpp"

namespace branchlab {

struct BatteryConfig {
  std::string battery = "standard";  // standard | lil
  std::uint64_t seed = 1;
  int replicas = 10000;
  double horizon = 0.0;  // 0 = auto: 12 / lambda1
  double dt = 0.0;       // 0 = auto (sp models)
  double sigma = 1.0;    // lil lattice spacing
  Convention convention = Convention::Classical;
  int jobs = 1;
  VectorXd init;  // empty = one particle / unit mass of type 0
  double band_lo = 0.4;
  double band_hi = 1.3;
};

struct Artifact {
  std::string name;
  std::string content;
};

struct BatteryResult {
  std::vector<TestVerdict> verdicts;
  int exit_code = 0;
  RunManifest manifest;
  std::vector<Artifact> artifacts;  // report.json, *.csv (deterministic)
};

int exit_code_from(const std::vector<TestVerdict>& verdicts);

InitState default_init(const AnyModel& model, const VectorXd& override_init);

/// Builds the ensemble a battery run needs (scaled sample schedule for the
/// verify battery, sigma-lattice for the lil battery).
Ensemble battery_ensemble(const AnyModel& model, const SpectralContext& ctx,
                          const BatteryConfig& cfg);

/// Runs the named test battery and assembles deterministic artifacts.
BatteryResult run_battery(const AnyModel& model, const BatteryConfig& cfg);

void write_battery_artifacts(const BatteryResult& result, const std::string& out_dir);

std::string format_double(double v);  // shortest round-trip formatting

}  // namespace branchlab
