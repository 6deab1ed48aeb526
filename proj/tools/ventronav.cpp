// ventronav command-line tool.
//
// Exit codes: 0 ok, 1 usage, 2 degenerate input or parse failure, 3 I/O.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ventronav.hpp"
#include "ventronav/service.hpp"

namespace vn = ventronav;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kIo = 3 };

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string output;
  bool quiet = false;

  std::uint64_t seed_or(std::uint64_t fallback) const {
    if (seed) return *seed;
    if (const char* env = std::getenv("VENTRONAV_SEED")) {
      try {
        return std::stoull(env);
      } catch (const std::exception&) {
        throw vn::Error(vn::ErrorCode::InvalidArgument, "VENTRONAV_SEED is not an unsigned integer");
      }
    }
    return fallback;
  }
};

int exit_code(const vn::Error& e) {
  switch (e.code()) {
    case vn::ErrorCode::IoError: return kIo;
    case vn::ErrorCode::InvalidArgument: return kUsage;
    default: return kData;
  }
}

void emit(const Globals& g, const vn::Json& j, const std::string& human) {
  if (g.quiet) {
    std::cout << vn::dump_json(j);
  } else {
    std::cout << human;
  }
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// --- register ---------------------------------------------------------------

struct RegisterArgs {
  std::string model;
  std::string world;
  std::string scale_mode = "estimated";
};

int run_register(const Globals& g, const RegisterArgs& a) {
  const auto model = vn::load_landmarks_file(a.model);
  const auto world = vn::load_landmarks_file(a.world);
  const auto reg = vn::estimate_similarity(model, world, vn::parse_scale_mode(a.scale_mode));
  const auto j = vn::registration_to_json(reg);
  if (!g.output.empty()) {
    std::filesystem::create_directories(g.output);
    vn::save_json(j, std::filesystem::path(g.output) / "registration.json");
  }
  std::string human = "scale  " + fmt("%.6f", reg.transform.scale()) + "\nrotation\n";
  const auto r = reg.transform.rotation().matrix();
  for (int i = 0; i < 3; ++i) {
    human += "  " + fmt("% .6f", r(i, 0)) + " " + fmt("% .6f", r(i, 1)) + " " + fmt("% .6f", r(i, 2)) + "\n";
  }
  const auto& t = reg.transform.translation();
  human += "translation  " + fmt("%.3f", t.x()) + " " + fmt("%.3f", t.y()) + " " + fmt("%.3f", t.z()) + " mm\n";
  human += "RMSE  " + fmt("%.3f", reg.rmse) + " mm\nresiduals (mm)\n";
  for (std::size_t i = 0; i < reg.ids.size(); ++i) {
    human += "  " + std::string(vn::display_name(reg.ids[i])) + std::string(22 - vn::display_name(reg.ids[i]).size(), ' ') +
             fmt("%.3f", reg.residuals[i]) + "\n";
  }
  emit(g, j, human);
  return kOk;
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string scenario;
  int trials = 1000;
  std::string noise_profile;
  int picks = 1;
  double noise_scale = 1.0;
  int workers = 1;
};

vn::NoiseProfiles load_profiles(const Globals& g, const std::filesystem::path& scenario_dir) {
  if (!g.config.empty()) return vn::profiles_from_json(vn::load_json(g.config));
  const auto local = scenario_dir / "noise_profiles.json";
  if (std::filesystem::exists(local)) return vn::profiles_from_json(vn::load_json(local));
  return vn::default_noise_profiles();
}

std::string summary_text(const vn::Json& s) {
  const auto& r = s["rmse_mm"];
  std::string out = "trials      " + std::to_string(s["trials"].get<std::size_t>()) + " (" +
                    std::to_string(s["rejected"].get<std::size_t>()) + " rejected)\n";
  out += "RMSE        " + fmt("%.3f", r["mean"].get<double>()) + " +/- " + fmt("%.3f", r["sd"].get<double>()) +
         " mm   (reference " + fmt("%.2f", vn::kReferenceRmseMean) + " +/- " + fmt("%.2f", vn::kReferenceRmseSd) +
         ")\n";
  out += "TRE entry   " + fmt("%.3f", s["tre_entry_mm"]["mean"].get<double>()) + " mm mean, " +
         fmt("%.3f", s["tre_entry_mm"]["p95"].get<double>()) + " mm p95\n";
  out += "TRE target  " + fmt("%.3f", s["tre_target_mm"]["mean"].get<double>()) + " mm mean\n";
  out += "TRE < " + fmt("%.0f", vn::kTreThresholdMm) + " mm  " +
         fmt("%.4f", s["fraction_tre_under_threshold"].get<double>()) + "\n";
  return out;
}

int run_simulate(const Globals& g, const SimulateArgs& a) {
  const std::filesystem::path scenario_path(a.scenario);
  const auto sc = vn::load_scenario(scenario_path);
  vn::StudyConfig cfg;
  cfg.trials = a.trials;
  cfg.seed = g.seed_or(sc.scenario.seed);
  cfg.picks_per_landmark = a.picks;
  cfg.workers = a.workers;
  std::string profile = a.noise_profile.empty() ? sc.scenario.noise_profile : a.noise_profile;
  const auto base = vn::find_profile(load_profiles(g, scenario_path.parent_path()), profile);
  if (!(a.noise_scale >= 0.0)) throw vn::Error(vn::ErrorCode::InvalidArgument, "noise scale must be >= 0");
  cfg.noise = base.scaled(a.noise_scale);

  const auto records = vn::run_study(sc, cfg);
  const std::filesystem::path out = g.output.empty() ? "ventronav-out" : g.output;
  vn::write_report(records, out);
  vn::save_json(vn::Json{{"schema_version", vn::kSchemaVersion},
                         {"scenario", sc.scenario.id},
                         {"trials", cfg.trials},
                         {"seed", cfg.seed},
                         {"noise_profile", profile},
                         {"noise_scale", a.noise_scale},
                         {"noise", vn::noise_to_json(cfg.noise)},
                         {"picks_per_landmark", cfg.picks_per_landmark}},
                out / "run.json");
  const auto summary = vn::summarize(records);
  emit(g, summary, summary_text(summary) + "wrote " + (out / "trials.csv").string() + "\n");
  return kOk;
}

// --- report -----------------------------------------------------------------

int run_report(const Globals& g, const std::string& in) {
  const auto records = vn::parse_csv(vn::detail::read_file(in));
  const auto summary = vn::summarize(records);
  if (!g.output.empty()) {
    std::filesystem::create_directories(g.output);
    vn::save_json(summary, std::filesystem::path(g.output) / "summary.json");
  }
  emit(g, summary, summary_text(summary));
  return kOk;
}

// --- phantom ----------------------------------------------------------------

int run_phantom(const Globals& g, const std::string& out, const std::string& params_file) {
  vn::PhantomParams params;
  if (!params_file.empty()) params = vn::phantom_params_from_json(vn::load_json(params_file));
  vn::Rng rng(g.seed_or(1));
  auto data = vn::generate_phantom(params, rng);
  data.scenario.seed = g.seed_or(1);
  const auto profiles = g.config.empty() ? vn::default_noise_profiles() : vn::profiles_from_json(vn::load_json(g.config));
  data.scenario.noise = vn::find_profile(profiles, data.scenario.noise_profile);
  const auto path = vn::write_phantom(data, out, profiles);
  emit(g, vn::Json{{"scenario", path.string()}, {"id", data.scenario.id}},
       "wrote phantom scenario " + path.string() + "\n");
  return kOk;
}

// --- calibrate --------------------------------------------------------------

struct CalibrateArgs {
  std::string scenario;
  int trials = 10000;
  double target = vn::kReferenceRmseMean;
  std::string base_profile = "base";
  int workers = 1;
};

int run_calibrate(const Globals& g, const CalibrateArgs& a) {
  const std::filesystem::path scenario_path(a.scenario);
  const auto sc = vn::load_scenario(scenario_path);
  auto profiles = load_profiles(g, scenario_path.parent_path());
  const auto base = vn::find_profile(profiles, a.base_profile);
  vn::StudyConfig cfg;
  cfg.trials = a.trials;
  cfg.seed = g.seed_or(sc.scenario.seed);
  cfg.workers = a.workers;
  const auto result = vn::calibrate_noise(sc, base, a.target, cfg);
  profiles.profiles["calibrated"] = result.noise;
  profiles.calibration = vn::Json{{"procedure", "bisection on a common multiplier of the base profile, "
                                                "common random numbers across evaluations"},
                                  {"scenario", sc.scenario.id},
                                  {"base_profile", vn::noise_to_json(base)},
                                  {"target_mean_rmse_mm", a.target},
                                  {"trials", a.trials},
                                  {"seed", cfg.seed},
                                  {"multiplier", result.noise_scale},
                                  {"achieved_mean_rmse_mm", result.mean_rmse},
                                  {"evaluations", result.evaluations}};
  const std::filesystem::path out =
      g.output.empty() ? scenario_path.parent_path() / "noise_profiles.json" : std::filesystem::path(g.output);
  vn::save_json(vn::profiles_to_json(profiles), out);
  emit(g, profiles.calibration,
       "multiplier " + fmt("%.6f", result.noise_scale) + "  mean RMSE " + fmt("%.4f", result.mean_rmse) +
           " mm\nwrote " + out.string() + "\n");
  return kOk;
}

// --- serve ------------------------------------------------------------------

int run_serve(const Globals& g, const std::string& host, int port, const std::string& scenarios) {
  auto found = vn::discover_scenarios(scenarios);
  if (found.empty()) throw vn::Error(vn::ErrorCode::IoError, "no scenario.json found under " + scenarios);
  vn::ServiceConfig cfg;
  if (!g.output.empty()) {
    std::filesystem::create_directories(g.output);
    cfg.log_dir = g.output;
  }
  vn::Service service(std::move(found), cfg);
  if (!g.quiet) std::cerr << "serving on http://" << host << ":" << port << "\n";
  if (!service.listen(host, port)) {
    std::cerr << "error: cannot listen on " << host << ":" << port << " (port in use?)\n";
    return kIo;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ventronav: landmark registration and guidance simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "RNG seed (default: VENTRONAV_SEED, then the scenario's)");
  app.add_option("--config", g.config, "noise profiles JSON");
  app.add_option("--output", g.output, "output directory");
  app.add_flag("--quiet", g.quiet, "machine-readable JSON on stdout");

  RegisterArgs reg;
  auto* c_register = app.add_subcommand("register", "fit model landmarks to world landmarks");
  c_register->add_option("--model-landmarks", reg.model)->required();
  c_register->add_option("--world-landmarks", reg.world)->required();
  c_register->add_option("--scale-mode", reg.scale_mode)->check(CLI::IsMember({"estimated", "fixed"}));

  SimulateArgs sim;
  auto* c_simulate = app.add_subcommand("simulate", "Monte Carlo acquire/register/TRE study");
  c_simulate->add_option("--scenario", sim.scenario)->required();
  c_simulate->add_option("--trials", sim.trials)->check(CLI::PositiveNumber);
  c_simulate->add_option("--noise-profile", sim.noise_profile);
  c_simulate->add_option("--picks-per-landmark", sim.picks)->check(CLI::PositiveNumber);
  c_simulate->add_option("--noise-scale", sim.noise_scale)->check(CLI::NonNegativeNumber);
  c_simulate->add_option("--workers", sim.workers)->check(CLI::PositiveNumber);

  std::string phantom_out, phantom_params;
  auto* c_phantom = app.add_subcommand("phantom", "generate the procedural phantom scenario");
  c_phantom->add_option("--out", phantom_out)->required();
  c_phantom->add_option("--params", phantom_params);

  std::string report_in;
  auto* c_report = app.add_subcommand("report", "recompute summary.json from trials.csv");
  c_report->add_option("--in", report_in)->required();

  CalibrateArgs cal;
  auto* c_calibrate = app.add_subcommand("calibrate", "fit the calibrated noise profile to a target mean RMSE");
  c_calibrate->add_option("--scenario", cal.scenario)->required();
  c_calibrate->add_option("--trials", cal.trials)->check(CLI::PositiveNumber);
  c_calibrate->add_option("--target-rmse", cal.target)->check(CLI::PositiveNumber);
  c_calibrate->add_option("--base-profile", cal.base_profile);
  c_calibrate->add_option("--workers", cal.workers)->check(CLI::PositiveNumber);

  int port = 8080;
  std::string host = "127.0.0.1";
  std::string scenarios = "data";
  auto* c_serve = app.add_subcommand("serve", "run the HTTP session service");
  c_serve->add_option("--port", port)->check(CLI::Range(0, 65535));
  c_serve->add_option("--host", host);
  c_serve->add_option("--scenarios", scenarios, "directory holding scenario folders");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  if (seed_opt->count() > 0) g.seed = seed_value;

  try {
    if (*c_register) return run_register(g, reg);
    if (*c_simulate) return run_simulate(g, sim);
    if (*c_phantom) return run_phantom(g, phantom_out, phantom_params);
    if (*c_report) return run_report(g, report_in);
    if (*c_calibrate) return run_calibrate(g, cal);
    if (*c_serve) return run_serve(g, host, port, scenarios);
  } catch (const vn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}
