// Command-line front end: every subcommand reads a JSON config, writes CSV
// outputs plus a run manifest into --out, and exits 0 on success, 2 when a
// run finished with an infeasible/diverged flag, 1 on error.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "formod/config.hpp"
#include "formod/harness.hpp"
#include "formod/observability.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace formod;

namespace {

constexpr const char* kVersion = "0.1.0";

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    json j;
    in >> j;
    return j;
}

void write_manifest(const fs::path& out_dir, const std::string& command, const json& config_echo,
                    std::uint64_t seed, double wall_s) {
    json manifest = {{"command", command},
                     {"version", kVersion},
                     {"seed", seed},
                     {"wall_time_s", wall_s},
                     {"config", config_echo}};
    std::ofstream out(out_dir / "manifest.json");
    out << manifest.dump(2) << '\n';
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

harness::ScenarioConfig scenario_of(const json& cfg) {
    return cfg.contains("scenario") ? config::scenario_from_json(cfg.at("scenario"))
                                    : harness::ScenarioConfig{};
}

json trial_json(const harness::TrialResult& r) {
    return {{"diverged", r.diverged},
            {"abs_pos_rms_km", r.abs_pos_rms_km},
            {"mean_rel_pos_rms_m", r.mean_rel_pos_rms_m},
            {"new_sc_rel_rms_m", r.new_sc_rel_rms_m}};
}

void write_series_csv(const fs::path& path, const harness::TrialResult& r) {
    std::ofstream out(path);
    out << "epoch_s,abs_err_km,mean_rel_err_m\n";
    for (std::size_t i = 0; i < r.series_t.size(); ++i)
        out << r.series_t[i] << ',' << r.series_abs_err_km[i] << ','
            << r.series_mean_rel_err_m[i] << '\n';
}

int cmd_propagate(const json& cfg, const fs::path& out_dir) {
    const harness::ScenarioConfig scenario = scenario_of(cfg);
    const double decimation = cfg.value("propagate", json::object()).value("output_step_s", 60.0);
    const harness::SampledTruth truth = harness::make_truth(scenario);

    std::ofstream out(out_dir / "trajectory.csv");
    out << "epoch_s,sc,x_km,y_km,z_km,vx_km_s,vy_km_s,vz_km_s\n";
    const long n_epochs = static_cast<long>(truth.states.size()) / truth.n_spacecraft;
    for (long k = 0; k < n_epochs; k += static_cast<long>(decimation)) {
        for (int s = 0; s < truth.n_spacecraft; ++s) {
            const auto& v = truth.at(k, s);
            out << k << ',' << (s + 1);
            for (int i = 0; i < 6; ++i) out << ',' << v[i];
            out << '\n';
        }
    }
    return 0;
}

int cmd_measure(const json& cfg, const fs::path& out_dir) {
    const harness::ScenarioConfig scenario = scenario_of(cfg);
    const harness::SampledTruth truth = harness::make_truth(scenario);
    const double t_end =
        scenario.duration_orbits * astro::orbital_period(scenario.chief.a);
    const auto schedule = measurement::build_schedule(scenario.schedule, 0.0, t_end,
                                                      harness::spacecraft_count(scenario));
    const auto position = [&truth](int sc, double t) {
        return Eigen::Vector3d(truth.at(static_cast<long>(t), sc - 1).head<3>());
    };
    const auto measurements = measurement::synthesize_measurements(
        position, schedule, harness::scenario_modes(scenario), scenario.noise,
        harness::derive_seed(scenario.seed, 1));

    std::ofstream out(out_dir / "measurements.csv");
    measurement::write_measurements_csv(out, measurements);
    return 0;
}

int cmd_filter(const json& cfg, const fs::path& out_dir) {
    const harness::ScenarioConfig scenario = scenario_of(cfg);
    std::ofstream out(out_dir / "filter_output.csv");
    bool header_written = false;
    const filters::EpochCallback writer = [&out, &header_written](
                                              double epoch, bool posterior,
                                              const Eigen::VectorXd& x, const Eigen::MatrixXd& p) {
        if (!header_written) {
            out << "epoch_s,flag";
            for (Eigen::Index i = 0; i < x.size(); ++i) out << ",x_" << i;
            for (Eigen::Index i = 0; i < x.size(); ++i) out << ",sigma_" << i;
            out << '\n';
            header_written = true;
        }
        out << epoch << ',' << (posterior ? "a_posteriori" : "a_priori");
        for (Eigen::Index i = 0; i < x.size(); ++i) out << ',' << x[i];
        for (Eigen::Index i = 0; i < x.size(); ++i)
            out << ',' << std::sqrt(std::max(0.0, p(i, i)));
        out << '\n';
    };

    const harness::TrialResult r =
        harness::run_trial(scenario, nullptr, harness::derive_seed(scenario.seed, 0), {}, &writer);
    write_series_csv(out_dir / "errors.csv", r);
    std::ofstream rep(out_dir / "report.json");
    rep << trial_json(r).dump(2) << '\n';
    return r.diverged ? 2 : 0;
}

int cmd_montecarlo(const json& cfg, const fs::path& out_dir) {
    const harness::ScenarioConfig scenario = scenario_of(cfg);
    const json mc = cfg.value("montecarlo", json::object());
    const int trials = mc.value("trials", 40);
    const int workers = mc.value("workers", 0);

    const harness::RmsReport report = harness::monte_carlo(scenario, trials, workers);

    std::ofstream trials_csv(out_dir / "trials.csv");
    trials_csv << "trial,diverged,abs_pos_rms_km,mean_rel_pos_rms_m,new_sc_rel_rms_m\n";
    for (std::size_t i = 0; i < report.trials.size(); ++i) {
        const auto& t = report.trials[i];
        trials_csv << i << ',' << (t.diverged ? 1 : 0) << ',' << t.abs_pos_rms_km << ','
                   << t.mean_rel_pos_rms_m << ',' << t.new_sc_rel_rms_m << '\n';
    }
    json rep = {{"trials", trials},
                {"diverged_count", report.diverged_count},
                {"window_start_s", report.window_start_s},
                {"abs_pos_rms_km", report.abs_pos_rms_km},
                {"mean_rel_pos_rms_m", report.mean_rel_pos_rms_m},
                {"new_sc_rel_rms_m", report.new_sc_rel_rms_m}};
    std::ofstream repf(out_dir / "report.json");
    repf << rep.dump(2) << '\n';
    std::cout << "mean relative RMS: " << report.mean_rel_pos_rms_m
              << " m, chief absolute RMS: " << report.abs_pos_rms_km << " km\n";
    return report.diverged_count > 0 ? 2 : 0;
}

int cmd_obs_eval(const json& cfg, const fs::path& out_dir) {
    const json& section = cfg.at("obs_eval");
    config::OptimizeRunConfig run = config::optimize_from_json(section);
    const optimize::DesignVector x = config::design_from_json(section.at("design"), run.spec.chief);

    const optimize::ObjectiveReport report = optimize::eval_objective(x, run.spec);

    json rep = {{"objective", report.objective},
                {"evaluable", report.evaluable},
                {"uneclipsed_ratio", report.uneclipsed_ratio},
                {"sigma_min", report.metrics.sigma_min},
                {"sigma_max", report.metrics.sigma_max},
                {"cn", std::isfinite(report.metrics.cn) ? json(report.metrics.cn) : json("inf")},
                {"rank", report.metrics.rank},
                {"dominant_state_min",
                 observability::absrel_state_label(report.metrics.dominant_state_min)},
                {"dominant_state_max",
                 observability::absrel_state_label(report.metrics.dominant_state_max)}};
    std::ofstream repf(out_dir / "report.json");
    repf << rep.dump(2) << '\n';

    // Per-epoch local-observability series on the same grid.
    const astro::Coe coe2 = x.to_coe(run.spec.chief);
    const astro::CartesianState chief_state = astro::coe_to_cartesian(run.spec.chief);
    const astro::CartesianState new_state = astro::coe_to_cartesian(coe2);
    Eigen::VectorXd state(12);
    state << chief_state.r, chief_state.v, new_state.r - chief_state.r,
        new_state.v - chief_state.v;
    dynamics::PropagatorConfig prop;
    std::vector<std::pair<double, observability::SvMetrics>> series;
    const int n = 1000;
    for (int k = 0; k < n; ++k) {
        if (k > 0)
            state = dynamics::propagate(state, run.spec.sample_period, prop, false).state;
        astro::CartesianState chief_k{state.segment<3>(0), state.segment<3>(3),
                                      run.spec.sample_period * k};
        astro::RelativeState rel_k{state.segment<3>(6), state.segment<3>(9)};
        series.emplace_back(run.spec.sample_period * k,
                            observability::sv_metrics(
                                observability::local_obs_matrix(chief_k, rel_k).m));
    }
    std::ofstream metrics(out_dir / "metrics.csv");
    observability::write_metrics_csv(metrics, series);

    std::cout << "objective: " << report.objective << '\n';
    return report.evaluable ? 0 : 2;
}

int cmd_optimize(const json& cfg, const fs::path& out_dir) {
    config::OptimizeRunConfig run = config::optimize_from_json(cfg.at("optimize"));
    const optimize::OptimizeResult result =
        optimize::optimize(run.spec, run.constraints, run.solver, run.budget, run.seed, run.starts);

    std::ofstream trace(out_dir / "trace.csv");
    optimize::write_trace_csv(trace, result.trace);

    json best = {{"found_feasible", result.found_feasible},
                 {"evaluations", result.trace.size()}};
    if (result.found_feasible) {
        const astro::Coe coe = result.best.to_coe(run.spec.chief);
        best["best"] = {{"a_km", coe.a},
                        {"e", coe.e},
                        {"i_deg", coe.i * astro::kRadToDeg},
                        {"raan_deg", coe.raan * astro::kRadToDeg},
                        {"argp_deg", coe.argp * astro::kRadToDeg},
                        {"nu_deg", coe.nu * astro::kRadToDeg}};
        best["objective"] = result.best_report.objective;
        best["uneclipsed_ratio"] = result.best_report.uneclipsed_ratio;
    }
    std::ofstream bestf(out_dir / "best.json");
    bestf << best.dump(2) << '\n';
    if (result.found_feasible)
        std::cout << "best objective: " << result.best_report.objective << " after "
                  << result.trace.size() << " evaluations\n";
    else
        std::cout << "no feasible point found within the budget\n";
    return result.found_feasible ? 0 : 2;
}

int cmd_sensor_reduced(const json& cfg, const fs::path& out_dir) {
    harness::ScenarioConfig scenario = scenario_of(cfg);
    if (!scenario.new_sc) {
        // default to the vision-grade LUI-optimized auxiliary orbit
        scenario.new_sc = harness::aux_preset("rf_vision_lui");
    }
    const harness::ScenarioConfig reduced = harness::sensor_reduced_scenario(scenario);

    const harness::TrialResult r =
        harness::run_trial(reduced, nullptr, harness::derive_seed(reduced.seed, 0));
    write_series_csv(out_dir / "errors.csv", r);
    json rep = trial_json(r);
    rep["schedule"] = "parallel7";
    rep["duration_orbits"] = reduced.duration_orbits;
    std::ofstream repf(out_dir / "report.json");
    repf << rep.dump(2) << '\n';
    std::cout << "mean formation relative RMS: " << r.mean_rel_pos_rms_m << " m"
              << (r.diverged ? " (diverged)" : "") << '\n';
    return r.diverged ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Formation orbit determination toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path = "out";
    app.add_option("--config", config_path, "JSON config file")->required();
    app.add_option("--out", out_path, "output directory");

    for (const char* name : {"propagate", "measure", "filter", "montecarlo", "obs-eval",
                             "optimize", "sensor-reduced"})
        app.add_subcommand(name);

    CLI11_PARSE(app, argc, argv);

    try {
        const json cfg = load_config(config_path);
        const fs::path out_dir(out_path);
        fs::create_directories(out_dir);
        const std::string command = app.get_subcommands().front()->get_name();

        Timer timer;
        int rc = 1;
        if (command == "propagate") rc = cmd_propagate(cfg, out_dir);
        else if (command == "measure") rc = cmd_measure(cfg, out_dir);
        else if (command == "filter") rc = cmd_filter(cfg, out_dir);
        else if (command == "montecarlo") rc = cmd_montecarlo(cfg, out_dir);
        else if (command == "obs-eval") rc = cmd_obs_eval(cfg, out_dir);
        else if (command == "optimize") rc = cmd_optimize(cfg, out_dir);
        else if (command == "sensor-reduced") rc = cmd_sensor_reduced(cfg, out_dir);

        std::uint64_t seed = 0;
        if (cfg.contains("scenario")) seed = cfg.at("scenario").value("seed", 1);
        else if (cfg.contains("optimize")) seed = cfg.at("optimize").value("seed", 1);
        else if (cfg.contains("obs_eval")) seed = cfg.at("obs_eval").value("seed", 1);
        write_manifest(out_dir, command, cfg, seed, timer.seconds());
        return rc;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
