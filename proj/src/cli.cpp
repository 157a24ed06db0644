#include "branchlab/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <nlohmann/json.hpp>

#include "branchlab/battery.hpp"
#include "branchlab/sim_bmp.hpp"
#include "branchlab/sim_sp.hpp"

namespace branchlab {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct CommonArgs {
  std::string model_path;
  std::string out_dir;
  std::uint64_t seed = 1;
  int replicas = 10000;
  double horizon = 0.0;
  double dt = 0.0;
  double sigma = 1.0;
  std::string convention = "classical";
  int jobs = 1;
  std::string battery = "standard";
  std::vector<double> init;
  double band_lo = 0.4;
  double band_hi = 1.3;
  int ep_index = -1;
};

Convention to_convention(const std::string& name) {
  if (name == "as-stated") return Convention::AsStated;
  if (name == "classical") return Convention::Classical;
  throw_error(ErrorCode::UsageError, "convention must be as-stated or classical");
}

VectorXd to_vector(const std::vector<double>& v) {
  VectorXd out(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<int>(i)) = v[i];
  return out;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_model = true) {
  auto* opt = cmd->add_option("--model", args.model_path, "model configuration file");
  if (needs_model) opt->required();
  cmd->add_option("--out", args.out_dir, "output directory for artifacts");
  cmd->add_option("--seed", args.seed, "master seed; all randomness derives from it");
  cmd->add_option("--replicas", args.replicas, "Monte Carlo replica count");
  cmd->add_option("--horizon", args.horizon, "time horizon (0 = model default)");
  cmd->add_option("--dt", args.dt, "Euler step for superprocess models (0 = default)");
  cmd->add_option("--convention", args.convention,
                  "second-moment convention: as-stated | classical");
  cmd->add_option("--jobs", args.jobs, "replica parallelism");
  cmd->add_option("--init", args.init, "initial counts/masses per type");
}

void emit(const std::string& out_dir, const std::string& name, const std::string& content) {
  if (out_dir.empty()) {
    std::cout << content;
    return;
  }
  fs::create_directories(out_dir);
  write_text_file((fs::path(out_dir) / name).string(), content);
}

RunManifest make_manifest(const char* subcommand, const AnyModel& model,
                          const CommonArgs& args) {
  RunManifest m;
  m.subcommand = subcommand;
  m.model_name = model_name(model);
  m.model_serialized = serialize_model(model);
  m.seed = args.seed;
  m.set("replicas", std::to_string(args.replicas));
  m.set("horizon", format_double(args.horizon));
  m.set("dt", format_double(args.dt));
  m.set("convention", args.convention);
  return m;
}

int cmd_spectral(const CommonArgs& args) {
  const AnyModel model = load_model(args.model_path);
  const SpectralContext ctx = is_bmp(model) ? eigensystem(as_bmp(model))
                                            : eigensystem(as_sp(model));
  RunManifest manifest = make_manifest("spectral", model, args);

  json report;
  report["manifest_hash"] = manifest.hash();
  report["model"] = model_name(model);
  report["lambda1"] = ctx.principal.lambda1;
  report["spectral_gap"] = ctx.spectral_gap;
  report["condition"] = ctx.condition;
  json phi = json::array(), phit = json::array();
  for (int x = 0; x < ctx.dim(); ++x) {
    phi.push_back(ctx.principal.phi(x));
    phit.push_back(ctx.principal.phi_tilde(x));
  }
  report["phi"] = phi;
  report["phi_tilde"] = phit;
  json pairs = json::array();
  for (const auto& p : ctx.pairs) {
    json entry;
    entry["lambda_re"] = p.lambda.real();
    entry["lambda_im"] = p.lambda.imag();
    json g = json::array();
    for (int x = 0; x < ctx.dim(); ++x) {
      g.push_back(p.right(x).real());
      g.push_back(p.right(x).imag());
    }
    entry["g_interleaved"] = g;
    pairs.push_back(entry);
  }
  report["eigenpairs"] = pairs;

  std::vector<double> grid;
  const double scale = ctx.principal.lambda1 > 0.0 ? 1.0 / ctx.principal.lambda1 : 1.0;
  for (double t : {0.5, 1.0, 2.0, 5.0, 10.0, 20.0}) grid.push_back(t * scale);
  const DeltaTable table = verify_h1(ctx, grid);
  report["delta_fitted_rate"] = table.fitted_rate;

  std::string csv = csv_hash_header(manifest) + "t,delta,fitted_bound\n";
  for (const auto& row : table.rows)
    csv += format_double(row.t) + "," + format_double(row.delta) + "," +
           format_double(row.fitted_bound) + "\n";

  emit(args.out_dir, "spectral.json", report.dump(2) + "\n");
  emit(args.out_dir, "delta.csv", csv);
  if (!args.out_dir.empty())
    write_text_file((fs::path(args.out_dir) / "manifest.json").string(), manifest.to_json());
  return 0;
}

int cmd_constants(const CommonArgs& args) {
  const AnyModel model = load_model(args.model_path);
  const SpectralContext ctx = is_bmp(model) ? eigensystem(as_bmp(model))
                                            : eigensystem(as_sp(model));
  const Convention conv = to_convention(args.convention);
  RunManifest manifest = make_manifest("constants", model, args);

  std::vector<int> selected;
  for (int i = 0; i < static_cast<int>(ctx.pairs.size()); ++i)
    if (ctx.pairs[i].lambda.imag() >= -1e-12) selected.push_back(i);
  if (args.ep_index >= 0) selected = {args.ep_index};

  json report;
  report["manifest_hash"] = manifest.hash();
  report["model"] = model_name(model);
  report["convention"] = args.convention;
  json pairs = json::array();
  std::vector<Eigenpair> combo_terms;
  for (int idx : selected) {
    const Eigenpair ep = make_eigenpair(ctx, idx);
    combo_terms.push_back(ep);
    const RegimeConstant rc = regime_constant(ctx, model, ep, conv);
    json entry;
    entry["index"] = idx;
    entry["lambda_re"] = ep.lambda.real();
    entry["lambda_im"] = ep.lambda.imag();
    entry["regime"] = regime_name(ep.regime);
    entry["coefficient"] = rc.coefficient;
    entry["degenerate"] = rc.degenerate;

    // One oscillation period of G_sigma on a fine grid.
    const double sigma = args.sigma;
    const double freq = 2.0 * std::abs(ep.lambda.imag());
    const double period = freq > 0.0 ? 2.0 * 3.14159265358979323846 / freq : 0.0;
    double gmin = 0.0, gmax = 0.0;
    const int n = 512;
    for (int k = 0; k <= n; ++k) {
      const double t = period > 0.0 ? period * k / n : 0.0;
      const double g = g_sigma(ctx, model, ep, sigma, t, conv);
      if (k == 0) gmin = gmax = g;
      gmin = std::min(gmin, g);
      gmax = std::max(gmax, g);
      if (period == 0.0) break;
    }
    entry["g_sigma"] = sigma;
    entry["g_period"] = period;
    entry["g_min"] = gmin;
    entry["g_max"] = gmax;
    pairs.push_back(entry);
  }
  report["eigenpairs"] = pairs;

  const ComboConstants cc = combo_constants(ctx, model, make_combo(combo_terms), conv);
  json combo;
  combo["h_small"] = cc.h_small;
  combo["h_large"] = cc.h_large;
  combo["k_crit"] = cc.k_crit;
  combo["quadrature_error"] = cc.quadrature_error;
  report["combo"] = combo;

  emit(args.out_dir, "constants.json", report.dump(2) + "\n");
  if (!args.out_dir.empty())
    write_text_file((fs::path(args.out_dir) / "manifest.json").string(), manifest.to_json());
  return 0;
}

int cmd_moments(const CommonArgs& args) {
  const AnyModel model = load_model(args.model_path);
  const SpectralContext ctx = is_bmp(model) ? eigensystem(as_bmp(model))
                                            : eigensystem(as_sp(model));
  const Convention conv = to_convention(args.convention);
  RunManifest manifest = make_manifest("moments", model, args);
  const InitState init = default_init(model, to_vector(args.init));

  const double tmax =
      args.horizon > 0.0 ? args.horizon : 12.0 / std::max(ctx.principal.lambda1, 1e-6);
  std::vector<double> grid;
  for (int k = 1; k <= 12; ++k) grid.push_back(tmax * k / 12.0);

  const VectorXd f = VectorXd::Ones(ctx.dim());
  const int ep_index = args.ep_index >= 0 ? args.ep_index : 0;
  const Eigenpair ep = make_eigenpair(ctx, ep_index);
  const VarianceAsymptoteTable asym = variance_asymptote(ctx, model, ep, 0, grid, conv);

  std::string csv = csv_hash_header(manifest) +
                    "t,mean,second,variance,convention,predicted_asymptote,residual\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const MomentReport mr = second_moment(ctx, model, init, f, grid[i], conv);
    csv += format_double(grid[i]) + "," + format_double(mr.mean) + "," +
           format_double(mr.second) + "," + format_double(mr.variance) + "," +
           args.convention + "," + format_double(asym.rows[i].predicted) + "," +
           format_double(asym.rows[i].residual) + "\n";
  }
  emit(args.out_dir, "moments.csv", csv);
  if (!args.out_dir.empty())
    write_text_file((fs::path(args.out_dir) / "manifest.json").string(), manifest.to_json());
  return 0;
}

int cmd_simulate(const CommonArgs& args) {
  const AnyModel model = load_model(args.model_path);
  const SpectralContext ctx = is_bmp(model) ? eigensystem(as_bmp(model))
                                            : eigensystem(as_sp(model));
  RunManifest manifest = make_manifest("simulate", model, args);
  const InitState init = default_init(model, to_vector(args.init));

  const double horizon =
      args.horizon > 0.0 ? args.horizon : 6.0 / std::max(ctx.principal.lambda1, 1e-6);
  std::vector<double> times;
  for (int k = 0; k <= 10; ++k) times.push_back(horizon * k / 10.0);

  Ensemble ens;
  if (is_bmp(model)) {
    ens = simulate_ensemble(as_bmp(model), init, times, args.replicas, args.seed, args.jobs);
  } else {
    const double dt = args.dt > 0.0 ? args.dt : default_sp_dt(as_sp(model));
    ens = simulate_sp_ensemble(as_sp(model), init, horizon, dt, times, args.replicas,
                               args.seed, args.jobs);
  }

  std::string csv = csv_hash_header(manifest) + "replica,t";
  for (int x = 0; x < ens.d; ++x) csv += ",n_" + std::to_string(x);
  csv += "\n";
  for (int r = 0; r < ens.replicas(); ++r)
    for (std::size_t i = 0; i < ens.sample_times.size(); ++i) {
      csv += std::to_string(r) + "," + format_double(ens.sample_times[i]);
      for (int x = 0; x < ens.d; ++x) csv += "," + format_double(ens.states[r](i, x));
      csv += "\n";
    }

  json summary;
  summary["manifest_hash"] = manifest.hash();
  summary["model"] = model_name(model);
  summary["replicas"] = args.replicas;
  if (!is_bmp(model)) summary["dt"] = ens.dt;
  json rows = json::array();
  for (std::size_t i = 0; i < ens.sample_times.size(); ++i) {
    json row;
    row["t"] = ens.sample_times[i];
    json mean = json::array(), var = json::array(), se = json::array();
    const VectorXd m = ens.mean_at(static_cast<int>(i));
    const VectorXd v = ens.variance_at(static_cast<int>(i));
    const VectorXd s = ens.stderr_at(static_cast<int>(i));
    for (int x = 0; x < ens.d; ++x) {
      mean.push_back(m(x));
      var.push_back(v(x));
      se.push_back(s(x));
    }
    row["mean"] = mean;
    row["variance"] = var;
    row["stderr"] = se;
    rows.push_back(row);
  }
  summary["samples"] = rows;

  emit(args.out_dir, "trajectories.csv", csv);
  emit(args.out_dir, "summary.json", summary.dump(2) + "\n");
  if (!args.out_dir.empty())
    write_text_file((fs::path(args.out_dir) / "manifest.json").string(), manifest.to_json());
  return 0;
}

int cmd_battery(const CommonArgs& args, const std::string& battery) {
  const AnyModel model = load_model(args.model_path);
  BatteryConfig cfg;
  cfg.battery = battery;
  cfg.seed = args.seed;
  cfg.replicas = args.replicas;
  cfg.horizon = args.horizon;
  cfg.dt = args.dt;
  cfg.sigma = args.sigma;
  cfg.convention = to_convention(args.convention);
  cfg.jobs = args.jobs;
  cfg.init = to_vector(args.init);
  cfg.band_lo = args.band_lo;
  cfg.band_hi = args.band_hi;

  const auto start = std::chrono::steady_clock::now();
  BatteryResult result = run_battery(model, cfg);
  result.manifest.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  for (const auto& v : result.verdicts)
    std::cout << "[" << verdict_status_name(v.status) << "] " << v.name
              << (v.details.empty() ? "" : "  " + v.details) << "\n";
  if (!args.out_dir.empty()) write_battery_artifacts(result, args.out_dir);
  return result.exit_code;
}

int cmd_manifest(const CommonArgs& args) {
  const AnyModel model = load_model(args.model_path);
  RunManifest manifest = make_manifest("manifest", model, args);
  manifest.set("battery", args.battery);
  std::cout << manifest.to_json();
  if (!args.out_dir.empty()) {
    fs::create_directories(args.out_dir);
    write_text_file((fs::path(args.out_dir) / "manifest.json").string(), manifest.to_json());
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"branching-process simulation and limit-theorem verification"};
  app.require_subcommand(1);

  CommonArgs common;
  auto* spectral = app.add_subcommand("spectral", "eigensystem and equilibrium-distance table");
  add_common(spectral, common);

  auto* constants = app.add_subcommand("constants", "regime constants and combination constants");
  add_common(constants, common);
  constants->add_option("--ep", common.ep_index, "eigenpair index (default: all)");
  constants->add_option("--sigma", common.sigma, "window length for G_sigma");

  auto* moments = app.add_subcommand("moments", "moment oracle table");
  add_common(moments, common);
  moments->add_option("--ep", common.ep_index, "eigenpair for the variance asymptote");

  auto* simulate_cmd = app.add_subcommand("simulate", "event-driven / Euler ensembles");
  add_common(simulate_cmd, common);

  auto* verify = app.add_subcommand("verify", "run a named verification battery");
  add_common(verify, common);
  verify->add_option("--battery", common.battery, "battery name (standard)");

  auto* lil = app.add_subcommand("lil", "soft iterated-logarithm envelope scan");
  add_common(lil, common);
  lil->add_option("--sigma", common.sigma, "lattice spacing");
  lil->add_option("--band-lo", common.band_lo, "soft band lower edge");
  lil->add_option("--band-hi", common.band_hi, "soft band upper edge");

  auto* manifest_cmd = app.add_subcommand("manifest", "print the reproducibility manifest");
  add_common(manifest_cmd, common);
  manifest_cmd->add_option("--battery", common.battery, "battery name");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 64;
  }

  try {
    if (spectral->parsed()) return cmd_spectral(common);
    if (constants->parsed()) return cmd_constants(common);
    if (moments->parsed()) return cmd_moments(common);
    if (simulate_cmd->parsed()) return cmd_simulate(common);
    if (verify->parsed()) return cmd_battery(common, common.battery);
    if (lil->parsed()) return cmd_battery(common, "lil");
    if (manifest_cmd->parsed()) return cmd_manifest(common);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return e.code() == ErrorCode::UsageError ? 64 : 2;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  return 64;
}

}  // namespace branchlab
