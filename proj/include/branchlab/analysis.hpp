#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "branchlab/functionals.hpp"
#include "branchlab/moments.hpp"
#include "branchlab/trajectory.hpp"

namespace branchlab {

/// Complex eigen-martingale series W_t = e^{-lambda t} <g, X_t> across an
/// ensemble, plus the terminal principal martingale as the W^phi_infty
/// estimate for each replica.
struct MartingalePaths {
  std::vector<double> times;
  MatrixXcd values;         // replicas x times
  VectorXd wphi_terminal;   // replicas
  std::vector<std::uint8_t> usable;  // not capped, all rows finite
};

enum class VerdictStatus { Pass, Fail, SoftPass, SoftMiss, Skipped, Error };

const char* verdict_status_name(VerdictStatus s);

struct TestVerdict {
  std::string name;
  VerdictStatus status = VerdictStatus::Skipped;
  double statistic = 0.0;
  double threshold = 0.0;
  std::string details;
};

MartingalePaths martingale_paths(const Ensemble& ens, const SpectralContext& ctx,
                                 const Eigenpair& ep);

/// Survivor threshold: 1e-3 of the initial <phi, mu>.
double survivor_threshold(const SpectralContext& ctx, const Ensemble& ens);

/// Law-of-large-numbers check at the final sample time: e^{-lambda1 T}<f,X_T>
/// against <f,phi_tilde> W^phi (terminal estimate), on surviving paths.
/// Pass: Pearson correlation > 0.99 and median ratio in [0.95, 1.05].
TestVerdict lln_test(const Ensemble& ens, const SpectralContext& ctx, const VectorXd& f);

/// Cauchy-in-L2 check for a supercritical eigenpair across dyadic sample-time
/// pairs (t, 2t), compared against the covariance-integral oracle.
TestVerdict l2_convergence_test(const Ensemble& ens, const SpectralContext& ctx,
                                const AnyModel& model, const Eigenpair& ep,
                                Convention conv);

/// Normalized martingale increments (Re W_{t+s} - Re W_t) / conditional sd
/// against a standard normal via one-sample KS.  Pass: p > 0.01.
TestVerdict increment_gaussianity_test(const Ensemble& ens, const SpectralContext& ctx,
                                       const AnyModel& model, const Eigenpair& ep,
                                       double t, double s, Convention conv,
                                       std::vector<double>* z_out = nullptr);

struct LilScanReport {
  std::string series_name;
  Regime regime = Regime::Sub;
  double coefficient = 0.0;  // K
  double median_ratio = 0.0;
  double iqr = 0.0;
  double band_lo = 0.4;
  double band_hi = 1.3;
  int paths_used = 0;
  double window_lo = 0.0;
  double window_hi = 0.0;
  TestVerdict verdict;  // SoftPass / SoftMiss only
  std::vector<double> ratios;  // per usable path: running max / sqrt(K wphi)
};

struct LilOptions {
  double band_lo = 0.4;
  double band_hi = 1.3;
  Convention convention = Convention::AsStated;
};

/// Soft envelope scan of the iterated-logarithm normalization for one
/// eigenpair.  Per path, the running max of the normalized series over the
/// scan window is divided by sqrt(K * wphi_terminal); the cross-path median
/// must land in the soft band.  Explicitly non-probative.
LilScanReport lil_scan(const Ensemble& ens, const SpectralContext& ctx,
                       const AnyModel& model, const Eigenpair& ep,
                       const LilOptions& opt = {});

/// Combination scan per the finite-sum decomposition: the normalized series is
/// e^{-lambda1 t/2} Re(<h,X_t> - sum_super e^{gamma t} W_term) with the
/// critical normalization sqrt(t log log t) when critical terms are present,
/// sqrt(2 log t) otherwise.
LilScanReport lil_scan_combo(const Ensemble& ens, const SpectralContext& ctx,
                             const AnyModel& model, const TestCombo& combo,
                             const LilOptions& opt = {});

struct NearReturnReport {
  std::vector<long long> times;
  long long max_gap = 0;
  double density = 0.0;
  bool none_found = false;
};

/// All integers n <= budget with max_j |e^{i n omega_j} - 1| < eps; reports
/// the largest gap (syndeticity evidence) and the hit density.
NearReturnReport near_return_times(const std::vector<double>& omegas, double eps,
                                   long long budget);

}  // namespace branchlab
