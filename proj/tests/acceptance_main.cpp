// End-to-end acceptance runs: each criterion prints exactly one PASS/FAIL
// line; the exit code is the number of failed criteria. Heavier scenarios
// reuse earlier results (the robustness thresholds reference the converged
// baseline statistics).

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "formod/astro.hpp"
#include "formod/dynamics.hpp"
#include "formod/filters.hpp"
#include "formod/harness.hpp"
#include "formod/measurement.hpp"
#include "formod/observability.hpp"
#include "formod/optimize.hpp"

using namespace formod;

namespace {

constexpr std::uint64_t kSeed = 20250810;
int g_failures = 0;

struct Line {
    bool pass;
    std::string detail;
};

void report(int id, const std::string& name, const Line& line, double seconds) {
    std::printf("[%s] criterion %d: %s — %s (%.1f s)\n", line.pass ? "PASS" : "FAIL", id,
                name.c_str(), line.detail.c_str(), seconds);
    std::fflush(stdout);
    if (!line.pass) ++g_failures;
}

template <typename Fn>
void run(int id, const std::string& name, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    Line line;
    try {
        line = fn();
    } catch (const std::exception& e) {
        line = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report(id, name, line, seconds);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

harness::ScenarioConfig baseline_scenario(filters::Variant variant) {
    harness::ScenarioConfig cfg;
    cfg.filter.variant = variant;
    cfg.duration_orbits = 2.0;
    cfg.seed = kSeed;
    return cfg;
}

// shared across criteria
double g_pva_rel_rms = 0.0;
double g_absrel_rel_rms = 0.0;
double g_absrel_abs_rms = 0.0;

Line criterion_pva_baseline() {
    const auto cfg = baseline_scenario(filters::Variant::pva);
    const auto report = harness::monte_carlo(cfg, 40);
    g_pva_rel_rms = report.mean_rel_pos_rms_m;

    double first20 = 0.0;
    for (int i = 0; i < 20; ++i) first20 += report.trials[i].mean_rel_pos_rms_m;
    first20 /= 20.0;
    const double drift = std::abs(first20 - report.mean_rel_pos_rms_m) /
                         report.mean_rel_pos_rms_m;

    const bool in_band = report.mean_rel_pos_rms_m >= 2.0 && report.mean_rel_pos_rms_m <= 6.0;
    const bool stable = drift < 0.15;
    return {in_band && stable && report.diverged_count == 0,
            "mean relative RMS " + fmt(report.mean_rel_pos_rms_m) +
                " m (band [2, 6]), 20-vs-40-trial drift " + fmt(100.0 * drift) + "%"};
}

Line criterion_absrel_baseline() {
    const auto cfg = baseline_scenario(filters::Variant::absrel);
    const auto report = harness::monte_carlo(cfg, 40);
    g_absrel_rel_rms = report.mean_rel_pos_rms_m;
    g_absrel_abs_rms = report.abs_pos_rms_km;

    const bool rel_ok = report.mean_rel_pos_rms_m >= 0.05 && report.mean_rel_pos_rms_m <= 0.5;
    const bool abs_ok = report.abs_pos_rms_km >= 1.0 && report.abs_pos_rms_km <= 15.0;
    const double improvement = g_pva_rel_rms / report.mean_rel_pos_rms_m;
    const bool improved = improvement >= 10.0;
    return {rel_ok && abs_ok && improved && report.diverged_count == 0,
            "relative RMS " + fmt(report.mean_rel_pos_rms_m) + " m (band [0.05, 0.5]), absolute RMS " +
                fmt(report.abs_pos_rms_km) + " km (band [1, 15]), improvement over the kinematic filter " +
                fmt(improvement) + "x (>= 10)"};
}

Line criterion_robustness() {
    const double steady = g_absrel_abs_rms > 0.0 ? g_absrel_abs_rms : 5.0;
    std::string detail;
    bool ok = true;

    for (const double err0 : {10.0, 1000.0}) {
        auto cfg = baseline_scenario(filters::Variant::absrel);
        cfg.duration_orbits = 1.0;
        cfg.filter.init_abs_pos_err_km = err0;
        const auto trial = harness::run_trial(cfg, nullptr, harness::derive_seed(cfg.seed, 0));
        const double final_err = trial.series_abs_err_km.back();
        const bool converged = !trial.diverged && final_err <= 2.0 * steady;
        ok = ok && converged;
        detail += fmt(err0) + " km init -> " + fmt(final_err) + " km at one period" +
                  (converged ? "" : " (no convergence)") + "; ";
    }

    {
        auto cfg = baseline_scenario(filters::Variant::absrel);
        cfg.duration_orbits = 1.0;
        cfg.filter.init_abs_pos_err_km = 10000.0;
        const auto trial = harness::run_trial(cfg, nullptr, harness::derive_seed(cfg.seed, 0));
        const double start_err = trial.series_abs_err_km.front();
        const double final_err = trial.series_abs_err_km.back();
        const bool decreasing = !trial.diverged && final_err < start_err;
        ok = ok && decreasing;
        detail += "10000 km init -> " + fmt(final_err) + " km (decreasing: " +
                  (decreasing ? "yes" : "no") + ")";
    }
    return {ok, detail + "; threshold 2x " + fmt(steady) + " km"};
}

Line criterion_discrete_observability() {
    // three-spacecraft system: chief and one formation deputy ranging only,
    // chief and the vision-grade optimized auxiliary with full measurements
    harness::ScenarioConfig cfg;
    const auto offsets = harness::default_formation_offsets();
    const astro::CartesianState ref = astro::coe_to_cartesian(cfg.chief);
    harness::Vector6d chief6;
    chief6 << ref.r, ref.v;
    const harness::Vector6d sc1 = chief6 + offsets[0];
    const harness::Vector6d sc2 = chief6 + offsets[1];
    const astro::CartesianState aux =
        astro::coe_to_cartesian(harness::aux_preset("rf_vision_lui").coe);
    harness::Vector6d aux6;
    aux6 << aux.r, aux.v;

    Eigen::VectorXd x0(18);
    x0 << sc1, sc2 - sc1, aux6 - sc1;

    std::vector<double> epochs(1000);
    for (int k = 0; k < 1000; ++k) epochs[static_cast<std::size_t>(k)] = 90.0 * k;
    const auto traj = dynamics::propagate_with_stm_grid(x0, epochs, {});

    const std::vector<observability::PairSpec> pairs = {
        {1, 2, measurement::MeasMode::range_only, measurement::NoiseSpec{}},
        {1, 3, measurement::MeasMode::range_and_bearing, measurement::NoiseSpec{}}};
    const Eigen::MatrixXd obs = observability::discrete_obs_matrix(traj, pairs);
    const auto metrics = observability::sv_metrics(obs);

    const bool rank_ok = metrics.rank == 18;
    const bool cn_ok = metrics.cn >= 5e8 && metrics.cn <= 5e10;
    return {rank_ok && cn_ok,
            "rank " + std::to_string(metrics.rank) + " (expect 18), condition number " +
                fmt(metrics.cn) + " (band [5e8, 5e10])"};
}

Line criterion_sfim_fixtures() {
    optimize::ObjectiveSpec spec;
    spec.kind = optimize::ObjectiveKind::sfim_lui;

    spec.sensor = optimize::SensorType::rf_vision;
    const auto vision = optimize::eval_objective(
        optimize::DesignVector::from_coe(harness::aux_preset("rf_vision_lui").coe), spec);

    spec.sensor = optimize::SensorType::rf_only;
    const auto rf = optimize::eval_objective(
        optimize::DesignVector::from_coe(harness::aux_preset("rf_only_lui").coe), spec);

    const bool vision_band = vision.objective <= -4.276 / 3.0 && vision.objective >= -4.276 * 3.0;
    const bool rf_band = rf.objective <= -4.173e-2 / 3.0 && rf.objective >= -4.173e-2 * 3.0;
    const bool vision_assoc = vision.metrics.dominant_state_min == 1;   // chief ry
    const bool rf_assoc = rf.metrics.dominant_state_min == 1;

    return {vision_band && rf_band && vision_assoc && rf_assoc,
            "vision objective " + fmt(vision.objective) + " (x3 band of -4.276), ranging objective " +
                fmt(rf.objective) + " (x3 band of -4.173e-2), weakest state " +
                observability::absrel_state_label(vision.metrics.dominant_state_min) + "/" +
                observability::absrel_state_label(rf.metrics.dominant_state_min) +
                " (expect ry/ry)"};
}

Line criterion_radius_sweep() {
    const astro::Constants c;
    const astro::CartesianState chief = astro::coe_to_cartesian({43399.0, 0, 0, 0, 0, 0});
    const auto lui_at = [&](double radius) {
        astro::RelativeState rel;
        rel.dr << radius - 43399.0, 0.0, 0.0;
        rel.dv << 0.0, std::sqrt(c.mu_earth / radius) - chief.v.y(), 0.0;
        return std::abs(
            observability::sv_metrics(observability::local_obs_matrix(chief, rel, c).m).lui);
    };

    const double lo = 6678.0, hi = 3.0e5;
    int argmax = 0;
    double best = -1.0;
    std::vector<double> values(100);
    for (int k = 0; k < 100; ++k) {
        const double r = lo * std::pow(hi / lo, k / 99.0);
        values[static_cast<std::size_t>(k)] = lui_at(r);
        if (values[static_cast<std::size_t>(k)] > best) {
            best = values[static_cast<std::size_t>(k)];
            argmax = k;
        }
    }
    const bool ends_ordered = values.front() > values.back();
    const bool max_at_floor = argmax == 0;
    return {ends_ordered && max_at_floor,
            "|LUI| " + fmt(values.front()) + " at 6678 km vs " + fmt(values.back()) +
                " at 3e5 km; sweep maximum at sample " + std::to_string(argmax)};
}

Line criterion_property_suites() {
    std::string detail;
    bool ok = true;

    {   // element/state round trips
        std::mt19937_64 rng(kSeed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        double worst = 0.0;
        for (int k = 0; k < 1000; ++k) {
            astro::Coe coe{7000.0 + 80000.0 * unit(rng), 0.01 + 0.8 * unit(rng),
                           0.05 + 3.0 * unit(rng), 6.28 * unit(rng), 6.28 * unit(rng),
                           6.28 * unit(rng)};
            const auto back = astro::cartesian_to_coe(astro::coe_to_cartesian(coe));
            worst = std::max(worst, std::abs(back.a - coe.a) / coe.a);
            worst = std::max(worst, std::abs(back.e - coe.e));
            worst = std::max(worst, std::abs(astro::wrap_pi(back.nu - coe.nu)));
        }
        ok = ok && worst < 1e-8;
        detail += "round-trip worst " + fmt(worst) + "; ";
    }
    {   // gravity-gradient trace
        std::mt19937_64 rng(kSeed + 1);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        double worst = 0.0;
        for (int k = 0; k < 1000; ++k) {
            Eigen::Vector3d r(u(rng), u(rng), u(rng));
            if (r.norm() < 0.1) continue;
            r *= 50000.0;
            worst = std::max(worst, std::abs(dynamics::gravity_gradient(r).trace()));
        }
        ok = ok && worst < 1e-15;
        detail += "gradient trace " + fmt(worst) + "; ";
    }
    {   // finite-difference state transition matrix
        const astro::CartesianState chief = astro::coe_to_cartesian({43399.0, 0, 0, 0, 0, 0});
        Eigen::VectorXd x0(12);
        x0 << chief.r, chief.v, 3.266, 0.0, -1.0, 0.0, -0.2281e-3, -0.1210e-3;
        const double dt = 600.0, eps = 1e-4;
        const Eigen::MatrixXd stm = dynamics::propagate(x0, dt, {}, true).stm;
        double worst = 0.0;
        for (int j = 0; j < 12; ++j) {
            Eigen::VectorXd dx = Eigen::VectorXd::Zero(12);
            dx[j] = eps;
            const Eigen::VectorXd col =
                (dynamics::propagate(x0 + dx, dt, {}, false).state -
                 dynamics::propagate(x0 - dx, dt, {}, false).state) /
                (2.0 * eps);
            worst = std::max(worst, (stm.col(j) - col).norm() / col.norm());
        }
        ok = ok && worst < 1e-4;
        detail += "STM-vs-FD " + fmt(worst) + "; ";
    }
    {   // measurement jacobian finite differences
        std::mt19937_64 rng(kSeed + 2);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        double worst = 0.0;
        for (int k = 0; k < 300; ++k) {
            Eigen::Vector3d dr(u(rng), u(rng), u(rng));
            if (dr.norm() < 0.2 || std::hypot(dr.x(), dr.y()) < 0.1) continue;
            dr *= 10.0;
            const auto jac = measurement::measurement_jacobian(dr);
            const double h = 1e-6 * dr.norm();
            for (int j = 0; j < 3; ++j) {
                Eigen::Vector3d dp = Eigen::Vector3d::Zero();
                dp[j] = h;
                const auto plus = measurement::ideal_measurement(dr + dp);
                const auto minus = measurement::ideal_measurement(dr - dp);
                worst = std::max(worst, std::abs(jac.d_range[j] -
                                                 (plus.range - minus.range) / (2.0 * h)));
                worst = std::max(
                    worst, std::abs(jac.d_ra[j] -
                                    astro::wrap_pi(plus.ra - minus.ra) / (2.0 * h)) *
                               dr.norm());
                worst = std::max(worst, std::abs(jac.d_dec[j] -
                                                 (plus.dec - minus.dec) / (2.0 * h)) *
                                            dr.norm());
            }
        }
        ok = ok && worst < 1e-7;
        detail += "measurement-jacobian-vs-FD " + fmt(worst) + "; ";
    }
    {   // covariance PSD through a measured cycle, both filters
        for (const auto variant : {filters::Variant::pva, filters::Variant::absrel}) {
            harness::ScenarioConfig cfg;
            cfg.filter.variant = variant;
            cfg.duration_orbits = 3100.0 / 89976.8;
            cfg.window_start_s = 0.0;
            cfg.seed = kSeed;
            double min_ratio = 1.0;
            const filters::EpochCallback psd = [&min_ratio](double, bool,
                                                            const Eigen::VectorXd&,
                                                            const Eigen::MatrixXd& p) {
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p);
                min_ratio = std::min(min_ratio, es.eigenvalues().minCoeff() / p.trace());
            };
            const auto trial = harness::run_trial(cfg, nullptr, kSeed, {}, &psd);
            ok = ok && !trial.diverged && min_ratio > -1e-10;
            detail += std::string(variant == filters::Variant::pva ? "pva" : "absrel") +
                      " min-eig/trace " + fmt(min_ratio) + "; ";
        }
    }
    {   // bit-exact reproducibility across runs and worker counts
        harness::ScenarioConfig cfg;
        cfg.duration_orbits = 0.08;
        cfg.window_start_s = 3600.0;
        cfg.seed = kSeed;
        const auto a = harness::monte_carlo(cfg, 4, 1);
        const auto b = harness::monte_carlo(cfg, 4, 4);
        bool identical = true;
        for (std::size_t i = 0; i < 4; ++i)
            identical = identical &&
                        a.trials[i].mean_rel_pos_rms_m == b.trials[i].mean_rel_pos_rms_m &&
                        a.trials[i].abs_pos_rms_km == b.trials[i].abs_pos_rms_km;
        ok = ok && identical;
        detail += std::string("seed reproducibility ") + (identical ? "exact" : "BROKEN");
    }
    return {ok, detail};
}

Line criterion_optimizer_sanity() {
    optimize::ObjectiveSpec spec;
    spec.kind = optimize::ObjectiveKind::sfim_lui;
    spec.sensor = optimize::SensorType::rf_only;
    const optimize::ConstraintSet cs;

    const auto result =
        optimize::optimize(spec, cs, optimize::SolverKind::multistart_local, 2000, kSeed);
    if (!result.found_feasible) return {false, "no feasible point found"};

    double best_random = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 100; ++k) {
        const auto x = optimize::sample_feasible(optimize::Parametrization::coe_fixed_period, cs,
                                                 spec.sensor, harness::derive_seed(kSeed, k));
        best_random = std::min(best_random, optimize::eval_objective(x, spec).objective);
    }

    const auto reference = optimize::eval_objective(
        optimize::DesignVector::from_coe(harness::aux_preset("rf_only_lui").coe), spec);

    const bool beats_random = result.best_report.objective <= best_random;
    // the published optimum may be better, but not by more than 3x
    const bool close_to_reference = reference.objective >= 3.0 * result.best_report.objective;
    return {beats_random && close_to_reference,
            "solver " + fmt(result.best_report.objective) + ", best of 100 random " +
                fmt(best_random) + ", published configuration " + fmt(reference.objective)};
}

Line criterion_sensor_reduced() {
    harness::ScenarioConfig base;
    base.seed = kSeed;
    base.new_sc = harness::aux_preset("rf_vision_lui");
    const auto reduced = harness::sensor_reduced_scenario(base);
    const auto with_aux = harness::run_trial(reduced, nullptr, harness::derive_seed(kSeed, 0));

    // bearing-starved baseline without the auxiliary spacecraft
    harness::ScenarioConfig baseline;
    baseline.seed = kSeed;
    baseline.range_only_formation = true;
    baseline.schedule = measurement::ScheduleKind::original;
    baseline.duration_orbits = 10.0;
    baseline.filter.variant = filters::Variant::absrel;
    baseline.filter.init_abs_pos_err_km = 10.0;
    const auto no_aux = harness::run_trial(baseline, nullptr, harness::derive_seed(kSeed, 0));

    const bool aux_bounded = !with_aux.diverged && with_aux.mean_rel_pos_rms_m < 10.0;

    // per-orbit mean absolute error of the unobservable baseline
    const double period = astro::orbital_period(43399.0);
    std::vector<double> orbit_mean(10, 0.0);
    std::vector<int> orbit_count(10, 0);
    for (std::size_t i = 0; i < no_aux.series_t.size(); ++i) {
        const int orbit = std::min(9, static_cast<int>(no_aux.series_t[i] / period));
        orbit_mean[static_cast<std::size_t>(orbit)] += no_aux.series_abs_err_km[i];
        orbit_count[static_cast<std::size_t>(orbit)]++;
    }
    for (int k = 0; k < 10; ++k)
        if (orbit_count[static_cast<std::size_t>(k)] > 0)
            orbit_mean[static_cast<std::size_t>(k)] /= orbit_count[static_cast<std::size_t>(k)];
    int growth_steps = 0;
    for (int k = 1; k < 10; ++k)
        if (orbit_mean[static_cast<std::size_t>(k)] > orbit_mean[static_cast<std::size_t>(k - 1)])
            ++growth_steps;
    const bool baseline_grows =
        orbit_mean[9] > 3.0 * orbit_mean[0] && orbit_mean[9] > orbit_mean[4] &&
        growth_steps >= 6;

    return {aux_bounded && baseline_grows,
            "with auxiliary: relative RMS " + fmt(with_aux.mean_rel_pos_rms_m) +
                " m (< 10); baseline orbit-mean absolute error " + fmt(orbit_mean[0]) +
                " km -> " + fmt(orbit_mean[9]) + " km over 10 orbits (" +
                std::to_string(growth_steps) + "/9 growth steps)"};
}

}  // namespace

int main() {
    std::printf("acceptance suite, seed %llu\n", static_cast<unsigned long long>(kSeed));
    run(1, "kinematic filter baseline accuracy", criterion_pva_baseline);
    run(2, "absolute+relative filter accuracy", criterion_absrel_baseline);
    run(3, "robustness to poor initial absolute position", criterion_robustness);
    run(4, "sensor-reduced discrete observability", criterion_discrete_observability);
    run(5, "information-matrix fixtures and state association", criterion_sfim_fixtures);
    run(6, "local observability radius sweep", criterion_radius_sweep);
    run(7, "property suites", criterion_property_suites);
    run(8, "optimizer sanity", criterion_optimizer_sanity);
    run(9, "sensor-reduced long-horizon run", criterion_sensor_reduced);
    std::printf("%d of 9 criteria passed\n", 9 - g_failures);
    return g_failures;
}
