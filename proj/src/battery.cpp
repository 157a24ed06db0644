#include "branchlab/battery.hpp"

#include <cmath>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <sstream>

#include "branchlab/sim_bmp.hpp"
#include "branchlab/sim_sp.hpp"
#include "branchlab/stats.hpp"

namespace branchlab {

namespace {

using json = nlohmann::ordered_json;

const char* convention_name(Convention c) {
  return c == Convention::AsStated ? "as-stated" : "classical";
}

/// Complex pairs enter limit theorems once per conjugate class; keep the
/// member with nonnegative imaginary part.
std::vector<int> representative_pairs(const SpectralContext& ctx) {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(ctx.pairs.size()); ++i)
    if (ctx.pairs[i].lambda.imag() >= -1e-12) out.push_back(i);
  return out;
}

TestVerdict spectral_invariants_verdict(const SpectralContext& ctx) {
  TestVerdict v;
  v.name = "spectral-invariants";
  const double scale = std::max(1.0, ctx.a_norm_inf);
  double worst = 0.0;
  const VectorXd& phi = ctx.principal.phi;
  const VectorXd& phit = ctx.principal.phi_tilde;
  worst = std::max(worst,
                   (ctx.A * phi - ctx.principal.lambda1 * phi).cwiseAbs().maxCoeff() / scale);
  worst = std::max(worst, (phit.transpose() * ctx.A - ctx.principal.lambda1 * phit.transpose())
                                  .cwiseAbs()
                                  .maxCoeff() /
                              scale);
  worst = std::max(worst, std::abs(phit.dot(phi) - 1.0));
  // Non-principal pairs must be orthogonal to the principal left eigenmeasure.
  for (std::size_t i = 1; i < ctx.pairs.size(); ++i) {
    Complex inner = 0.0;
    for (int x = 0; x < ctx.dim(); ++x) inner += ctx.pairs[i].right(x) * phit(x);
    worst = std::max(worst, std::abs(inner));
  }
  v.statistic = worst;
  v.threshold = 1e-8;
  v.status = worst <= 1e-8 ? VerdictStatus::Pass : VerdictStatus::Fail;
  v.details = "max residual=" + format_double(worst) +
              " gap=" + format_double(ctx.spectral_gap);
  return v;
}

TestVerdict martingale_constancy_verdict(const Ensemble& ens, const SpectralContext& ctx,
                                         const Eigenpair& ep, int index) {
  TestVerdict v;
  v.name = "martingale-mean-" + std::to_string(index);
  const MartingalePaths paths = martingale_paths(ens, ctx, ep);
  Complex expected = 0.0;
  for (int x = 0; x < ens.d; ++x) expected += ens.init(x) * ep.g(x);

  double worst_sigma = 0.0;
  for (std::size_t i = 0; i < ens.sample_times.size(); ++i) {
    std::vector<double> re, im;
    for (int r = 0; r < ens.replicas(); ++r) {
      if (!paths.usable[r]) continue;
      re.push_back(paths.values(r, i).real());
      im.push_back(paths.values(r, i).imag());
    }
    const double re_sigma =
        std::abs(sample_mean(re) - expected.real()) / std::max(sample_stderr(re), 1e-300);
    worst_sigma = std::max(worst_sigma, re_sigma);
    if (std::abs(ep.lambda.imag()) > 1e-12) {
      const double im_sigma =
          std::abs(sample_mean(im) - expected.imag()) / std::max(sample_stderr(im), 1e-300);
      worst_sigma = std::max(worst_sigma, im_sigma);
    }
  }
  v.statistic = worst_sigma;
  v.threshold = 3.0;
  v.status = worst_sigma <= 3.0 ? VerdictStatus::Pass : VerdictStatus::Fail;
  v.details = "lambda=(" + format_double(ep.lambda.real()) + "," +
              format_double(ep.lambda.imag()) + ") worst_sigma=" + format_double(worst_sigma);
  return v;
}

std::string verdicts_to_json(const std::string& battery, const AnyModel& model,
                             const BatteryConfig& cfg, const RunManifest& manifest,
                             const std::vector<TestVerdict>& verdicts, int exit_code) {
  json j;
  j["manifest_hash"] = manifest.hash();
  j["battery"] = battery;
  j["model"] = model_name(model);
  j["seed"] = cfg.seed;
  j["convention"] = convention_name(cfg.convention);
  json tests = json::array();
  for (const auto& v : verdicts) {
    json t;
    t["name"] = v.name;
    t["status"] = verdict_status_name(v.status);
    t["statistic"] = v.statistic;
    t["threshold"] = v.threshold;
    t["details"] = v.details;
    tests.push_back(t);
  }
  j["tests"] = tests;
  j["exit_code"] = exit_code;
  return j.dump(2) + "\n";
}

}  // namespace

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

int exit_code_from(const std::vector<TestVerdict>& verdicts) {
  bool soft_miss = false;
  for (const auto& v : verdicts) {
    if (v.status == VerdictStatus::Fail || v.status == VerdictStatus::Error) return 2;
    if (v.status == VerdictStatus::SoftMiss) soft_miss = true;
  }
  return soft_miss ? 3 : 0;
}

InitState default_init(const AnyModel& model, const VectorXd& override_init) {
  InitState init;
  if (override_init.size() > 0) {
    init.weights = override_init;
  } else {
    init.weights = VectorXd::Zero(model_dim(model));
    init.weights(0) = 1.0;
  }
  init.require_positive();
  return init;
}

Ensemble battery_ensemble(const AnyModel& model, const SpectralContext& ctx,
                          const BatteryConfig& cfg) {
  const InitState init = default_init(model, cfg.init);
  if (ctx.principal.lambda1 <= 0.0)
    throw_error(ErrorCode::PreconditionViolated,
                "battery requires a supercritical model (lambda1 > 0)");

  std::vector<double> times;
  if (cfg.battery == "lil") {
    const double T = cfg.horizon > 0.0 ? cfg.horizon : 200.0;
    for (double t = cfg.sigma; t <= T + 1e-9; t += cfg.sigma) times.push_back(t);
  } else {
    const double scale =
        (cfg.horizon > 0.0 ? cfg.horizon : 12.0 / ctx.principal.lambda1) / 12.0;
    for (double base : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 9.0, 12.0})
      times.push_back(base * scale);
  }

  if (is_bmp(model))
    return simulate_ensemble(as_bmp(model), init, times, cfg.replicas, cfg.seed, cfg.jobs);
  const auto& sp = as_sp(model);
  const double dt = cfg.dt > 0.0 ? cfg.dt : default_sp_dt(sp);
  return simulate_sp_ensemble(sp, init, times.back(), dt, times, cfg.replicas, cfg.seed,
                              cfg.jobs);
}

BatteryResult run_battery(const AnyModel& model, const BatteryConfig& cfg) {
  BatteryResult result;
  RunManifest& manifest = result.manifest;
  manifest.subcommand = cfg.battery == "lil" ? "lil" : "verify";
  manifest.model_name = model_name(model);
  manifest.model_serialized = serialize_model(model);
  manifest.seed = cfg.seed;
  manifest.set("battery", cfg.battery);
  manifest.set("replicas", std::to_string(cfg.replicas));
  manifest.set("horizon", format_double(cfg.horizon));
  manifest.set("dt", format_double(cfg.dt));
  manifest.set("sigma", format_double(cfg.sigma));
  manifest.set("convention", convention_name(cfg.convention));

  const SpectralContext ctx = eigensystem(is_bmp(model) ? mean_generator(as_bmp(model))
                                                        : mean_generator(as_sp(model)));

  // Model validation and spectral residuals are free; run them first.
  {
    TestVerdict v;
    v.name = "validate";
    const ValidationReport report =
        is_bmp(model) ? validate_bmp(as_bmp(model)) : validate_sp(as_sp(model));
    v.status = VerdictStatus::Pass;
    v.details = report.irreducible ? "irreducible" : "reducible";
    result.verdicts.push_back(v);
    result.verdicts.push_back(spectral_invariants_verdict(ctx));
  }

  const Ensemble ens = battery_ensemble(model, ctx, cfg);
  const auto rep_pairs = representative_pairs(ctx);

  auto guarded = [&](const std::string& name, auto&& fn) {
    try {
      result.verdicts.push_back(fn());
    } catch (const Error& e) {
      TestVerdict v;
      v.name = name;
      v.status = VerdictStatus::Error;
      v.details = e.what();
      result.verdicts.push_back(v);
    }
  };

  if (cfg.battery == "lil") {
    LilOptions opt;
    opt.convention = cfg.convention;
    opt.band_lo = cfg.band_lo;
    opt.band_hi = cfg.band_hi;
    for (int idx : rep_pairs) {
      const Eigenpair ep = make_eigenpair(ctx, idx);
      guarded("lil-" + std::to_string(idx), [&]() {
        LilScanReport report = lil_scan(ens, ctx, model, ep, opt);
        report.verdict.name = "lil-" + std::to_string(idx) + "-" +
                              regime_name(report.regime) + "-" +
                              convention_name(cfg.convention);
        std::string csv = csv_hash_header(manifest) + "path,ratio\n";
        for (std::size_t r = 0; r < report.ratios.size(); ++r)
          csv += std::to_string(r) + "," + format_double(report.ratios[r]) + "\n";
        result.artifacts.push_back({"lil_" + std::to_string(idx) + ".csv", csv});
        return report.verdict;
      });
    }
  } else {
    for (std::size_t k = 0; k < rep_pairs.size(); ++k) {
      const Eigenpair ep = make_eigenpair(ctx, rep_pairs[k]);
      guarded("martingale-mean-" + std::to_string(rep_pairs[k]), [&]() {
        return martingale_constancy_verdict(ens, ctx, ep, rep_pairs[k]);
      });
    }

    VectorXd f = VectorXd::Zero(ctx.dim());
    f(0) = 1.0;
    guarded("lln", [&]() { return lln_test(ens, ctx, f); });

    const Eigenpair principal = make_eigenpair(ctx, 0);
    guarded("l2-convergence",
            [&]() { return l2_convergence_test(ens, ctx, model, principal, cfg.convention); });

    const double scale = ens.sample_times.back() / 12.0;
    guarded("increment-gaussianity", [&]() {
      std::vector<double> zs;
      TestVerdict v = increment_gaussianity_test(ens, ctx, model, principal, 8.0 * scale,
                                                 1.0 * scale, cfg.convention, &zs);
      std::string csv = csv_hash_header(manifest) + "z\n";
      for (double z : zs) csv += format_double(z) + "\n";
      result.artifacts.push_back({"gauss_z.csv", csv});
      return v;
    });

    // Per-time martingale means for external plotting.
    {
      const Eigenpair ep = principal;
      const MartingalePaths paths = martingale_paths(ens, ctx, ep);
      std::string csv = csv_hash_header(manifest) + "t,re_mean,re_stderr\n";
      for (std::size_t i = 0; i < ens.sample_times.size(); ++i) {
        std::vector<double> re;
        for (int r = 0; r < ens.replicas(); ++r)
          if (paths.usable[r]) re.push_back(paths.values(r, i).real());
        csv += format_double(ens.sample_times[i]) + "," + format_double(sample_mean(re)) +
               "," + format_double(sample_stderr(re)) + "\n";
      }
      result.artifacts.push_back({"martingale_principal.csv", csv});
    }
  }

  result.exit_code = exit_code_from(result.verdicts);
  result.artifacts.insert(
      result.artifacts.begin(),
      Artifact{"report.json", verdicts_to_json(cfg.battery, model, cfg, manifest,
                                               result.verdicts, result.exit_code)});
  return result;
}

void write_battery_artifacts(const BatteryResult& result, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  for (const auto& artifact : result.artifacts)
    write_text_file((fs::path(out_dir) / artifact.name).string(), artifact.content);
  write_text_file((fs::path(out_dir) / "manifest.json").string(), result.manifest.to_json());
}

}  // namespace branchlab
