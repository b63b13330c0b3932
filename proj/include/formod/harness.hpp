#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "formod/astro.hpp"
#include "formod/dynamics.hpp"
#include "formod/filters.hpp"
#include "formod/measurement.hpp"
#include "formod/optimize.hpp"

namespace formod::harness {

using dynamics::Vector6d;

/// SplitMix64 output for one state advance; used to derive all scenario
/// sub-seeds so runs are reproducible regardless of worker count.
std::uint64_t splitmix64(std::uint64_t& state);

/// Deterministic per-index seed: splitmix64 of master + (index+1)*golden.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Runs fn(0..n-1) on a small worker pool; results must be written to
/// per-index slots so the outcome is independent of scheduling.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

/// Auxiliary spacecraft attached to the formation.
struct NewSpacecraft {
    astro::Coe coe;
    optimize::SensorType sensor = optimize::SensorType::rf_vision;
    double alpha_new = 1e4;   // scales the relative process noise intensity
};

struct FilterInitConfig {
    filters::Variant variant = filters::Variant::absrel;
    double init_rel_pos_err_km = 0.1;      // 100 m
    double init_rel_vel_err_km_s = 1e-5;   // 1 cm/s
    double init_abs_pos_err_km = 0.1;
    double init_abs_vel_err_km_s = 1e-5;
    double init_accel_var = 1e-14;         // (km/s^2)^2, PVA acceleration entries
    double gate_sigma = 5.0;               // <= 0 disables innovation gating
    double q_pva = 1e-20;                  // (km/s^3)^2
    double q_abs = 1e-12;                  // (km/s^2)^2
    double q_rel = 1e-18;                  // (km/s^2)^2
};

struct ScenarioConfig {
    astro::Coe chief{43399.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    /// Initial offsets of each formation spacecraft from the chief orbit,
    /// [dx dy dz dvx dvy dvz] in km and km/s; spacecraft 1 is the chief.
    std::vector<Vector6d> formation_offsets;
    std::optional<NewSpacecraft> new_sc;
    measurement::ScheduleKind schedule = measurement::ScheduleKind::original;
    bool range_only_formation = false;   // strip bearings except chief-new
    dynamics::TruthModelConfig truth;
    measurement::NoiseSpec noise;        // base (vision-grade) noise
    FilterInitConfig filter;
    double duration_orbits = 2.0;
    double window_start_s = 200.0 * 60.0;   // RMS window begins here
    std::uint64_t seed = 1;

    ScenarioConfig();   // fills formation_offsets with the six baseline rows
};

/// The six baseline formation offsets from the chief orbit.
std::vector<Vector6d> default_formation_offsets();

/// Optimized auxiliary-orbit presets by name: obs_lui, rf_vision_cn,
/// rf_vision_lui, rf_only_cn, rf_only_lui.
NewSpacecraft aux_preset(const std::string& name);

/// Number of spacecraft (formation + optional auxiliary).
int spacecraft_count(const ScenarioConfig& cfg);

/// Absolute initial truth states of every spacecraft, chief first.
std::vector<Vector6d> initial_truth_states(const ScenarioConfig& cfg,
                                           const astro::Constants& c = {});

/// Per-pair sensing modes/noise implied by the scenario.
measurement::MeasKind scenario_modes(const ScenarioConfig& cfg);

/// One filter-vs-truth run.
struct TrialResult {
    bool diverged = false;
    double abs_pos_rms_km = 0.0;        // chief, absrel variant only
    double mean_rel_pos_rms_m = 0.0;    // original deputies
    double new_sc_rel_rms_m = 0.0;      // auxiliary spacecraft when present
    // Error time series decimated to one sample per minute.
    std::vector<double> series_t;
    std::vector<double> series_abs_err_km;
    std::vector<double> series_mean_rel_err_m;
};

/// Sampled truth for every spacecraft at 1 Hz (shared across trials).
struct SampledTruth {
    int n_spacecraft = 0;
    std::vector<Vector6d> states;   // [epoch * n_spacecraft + sc]

    const Vector6d& at(long epoch, int sc) const {
        return states[static_cast<std::size_t>(epoch) * n_spacecraft + sc];
    }
};

SampledTruth make_truth(const ScenarioConfig& cfg, const astro::Constants& c = {});

/// Runs one trial. `truth` may be null, in which case the truth is
/// integrated in lockstep with the filter (no full-horizon storage).
/// `on_epoch`, when given, receives every 1 Hz estimate.
TrialResult run_trial(const ScenarioConfig& cfg, const SampledTruth* truth,
                      std::uint64_t trial_seed, const astro::Constants& c = {},
                      const filters::EpochCallback* on_epoch = nullptr);

struct RmsReport {
    double abs_pos_rms_km = 0.0;
    double mean_rel_pos_rms_m = 0.0;
    double new_sc_rel_rms_m = 0.0;
    double window_start_s = 0.0;
    int diverged_count = 0;
    std::vector<TrialResult> trials;
};

/// Monte Carlo over independent initial-estimate draws and measurement
/// noise. Deterministic for a given config seed, independent of `workers`.
RmsReport monte_carlo(const ScenarioConfig& cfg, int trials, int workers = 0,
                      const astro::Constants& c = {});

/// RMS statistics of materialized filter outputs against sampled truth.
RmsReport rms_report(const ScenarioConfig& cfg, std::span<const filters::FilterOutput> outputs,
                     const SampledTruth& truth, double window_start_s);

/// Derives the bearing-starved configuration: range-only formation pairs,
/// chief-new pair keeps bearings, parallel schedule, 10 orbits, 10 km
/// initial absolute error. Requires an auxiliary spacecraft.
ScenarioConfig sensor_reduced_scenario(const ScenarioConfig& cfg);

}  // namespace formod::harness
