#pragma once

// Monte Carlo harness: independent end-to-end trials (acquire -> register ->
// TRE) with per-trial RNG streams, and the noise-scale calibration sweep.

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

#include "ventronav/acquisition.hpp"
#include "ventronav/guidance.hpp"
#include "ventronav/registration.hpp"
#include "ventronav/report.hpp"
#include "ventronav/scenario.hpp"

namespace ventronav {

struct StudyConfig {
  int trials = 1;
  std::uint64_t seed = 1;
  NoiseModel noise;
  int picks_per_landmark = 1;
  int workers = 1;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of trial `trial`, independent of how trials are spread over workers.
inline std::uint64_t trial_seed(std::uint64_t base, std::int64_t trial, std::uint64_t stream = 0) {
  return splitmix64(splitmix64(base ^ splitmix64(stream)) + static_cast<std::uint64_t>(trial));
}

inline TrialRecord run_trial(const LoadedScenario& sc, const StudyConfig& cfg, std::int64_t trial) {
  TrialRecord rec;
  rec.trial = trial;
  rec.seed = trial_seed(cfg.seed, trial, cfg.noise.stream);
  rec.residuals.fill(std::numeric_limits<double>::quiet_NaN());
  Rng rng(rec.seed);
  try {
    const auto session = simulate_session(*sc.scene, sc.acquisition(), cfg.noise, rng, cfg.picks_per_landmark);
    const auto reg = estimate_similarity(sc.scene->model_landmarks(), session.world, sc.scenario.scale_mode,
                                         sc.scenario.scale_bounds);
    rec.rmse = reg.rmse;
    rec.scale = reg.transform.scale();
    for (auto id : kLandmarkOrder) rec.residuals[index_of(id)] = reg.residual(id);
    const auto& truth = sc.scene->model_to_world();
    if (sc.scenario.planned_entry_model) {
      rec.tre_entry = compute_tre(reg, *sc.scenario.planned_entry_model, truth.apply(*sc.scenario.planned_entry_model));
    }
    rec.tre_target = compute_tre(reg, sc.scenario.planned_target_model, truth.apply(sc.scenario.planned_target_model));
  } catch (const Error& e) {
    rec.status = "rejected:" + std::string(to_string(e.code()));
    rec.rmse = rec.scale = rec.tre_entry = rec.tre_target = std::numeric_limits<double>::quiet_NaN();
    rec.residuals.fill(std::numeric_limits<double>::quiet_NaN());
  }
  return rec;
}

/// Runs trials 0..N-1. Output order (and bytes) do not depend on `workers`.
inline std::vector<TrialRecord> run_study(const LoadedScenario& sc, const StudyConfig& cfg) {
  if (cfg.trials < 1) throw Error(ErrorCode::InvalidArgument, "trials must be >= 1");
  if (cfg.workers < 1) throw Error(ErrorCode::InvalidArgument, "workers must be >= 1");
  cfg.noise.validate();
  std::vector<TrialRecord> out(static_cast<std::size_t>(cfg.trials));
  const int workers = std::min(cfg.workers, cfg.trials);
  auto work = [&](int w) {
    for (int i = w; i < cfg.trials; i += workers) out[static_cast<std::size_t>(i)] = run_trial(sc, cfg, i);
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  return out;
}

inline double mean_rmse(const std::vector<TrialRecord>& records) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (r.ok()) {
      sum += r.rmse;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

struct CalibrationResult {
  double noise_scale = 1.0;  ///< multiplier applied to the base profile
  double mean_rmse = 0.0;
  int evaluations = 0;
  NoiseModel noise;
};

/// Bisection on a multiplier of `base` until the mean RMSE over `cfg.trials`
/// trials hits `target_rmse`. Every evaluation reuses the same trial seeds, so
/// the mean is a smooth, increasing function of the multiplier.
inline CalibrationResult calibrate_noise(const LoadedScenario& sc, const NoiseModel& base, double target_rmse,
                                         StudyConfig cfg, double tol = 1e-4, int max_evaluations = 60) {
  CalibrationResult out;
  auto eval = [&](double k) {
    cfg.noise = base.scaled(k);
    ++out.evaluations;
    return mean_rmse(run_study(sc, cfg));
  };
  double lo = 0.0;
  double hi = 1.0;
  while (eval(hi) < target_rmse) {
    lo = hi;
    hi *= 2.0;
    if (out.evaluations > max_evaluations) throw Error(ErrorCode::InvalidArgument, "calibration did not bracket");
  }
  double mid = hi;
  double value = 0.0;
  while (out.evaluations < max_evaluations) {
    mid = 0.5 * (lo + hi);
    value = eval(mid);
    if (std::abs(value - target_rmse) < tol) break;
    (value < target_rmse ? lo : hi) = mid;
  }
  out.noise_scale = mid;
  out.mean_rmse = value;
  out.noise = base.scaled(mid);
  return out;
}

}  // namespace ventronav
