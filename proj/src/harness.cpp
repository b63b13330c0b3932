#include "formod/harness.hpp"

#include <atomic>
#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

namespace formod::harness {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t state = master + (index + 1) * 0x9E3779B97F4A7C15ULL;
    return splitmix64(state);
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    if (workers <= 0)
        workers = static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&next, n, &fn]() {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    }
    for (std::thread& t : pool) t.join();
}

std::vector<Vector6d> default_formation_offsets() {
    // [dx dy dz] km, [dvx dvy dvz] m/s (converted to km/s below).
    constexpr double rows[6][6] = {
        {1.633, 4.155, -2.165, -0.1289, -0.1140, 8.729e-2},
        {3.266, 0.0, -1.0, 0.0, -0.2281, -0.1210},
        {1.633, -3.655, 1.5, 9.394e-2, -0.1140, 0.1814},
        {-2.041, -3.443, -3.0, 3.887e-2, 0.1425, 0.0},
        {-3.266, 0.0, 1.0, 0.0, 0.2281, -0.1210},
        {-2.041, 4.443, -1.5, -0.1087, 0.1425, 0.1814},
    };
    std::vector<Vector6d> out(6);
    for (int i = 0; i < 6; ++i) {
        out[i] << rows[i][0], rows[i][1], rows[i][2], rows[i][3] * 1e-3, rows[i][4] * 1e-3,
            rows[i][5] * 1e-3;
    }
    return out;
}

ScenarioConfig::ScenarioConfig() : formation_offsets(default_formation_offsets()) {}

NewSpacecraft aux_preset(const std::string& name) {
    using astro::kDegToRad;
    NewSpacecraft sc;
    if (name == "obs_lui") {
        sc.coe = {6678.0, 0.0, 88.34 * kDegToRad, 129.1 * kDegToRad, 351.5 * kDegToRad,
                  121.2 * kDegToRad};
        sc.sensor = optimize::SensorType::rf_vision;
        sc.alpha_new = 1e4;
    } else if (name == "rf_vision_cn") {
        sc.coe = {43399.0, 5.203e-4, 0.629 * kDegToRad, 195.3 * kDegToRad, 354.9 * kDegToRad,
                  169.9 * kDegToRad};
        sc.sensor = optimize::SensorType::rf_vision;
        sc.alpha_new = 1e4;
    } else if (name == "rf_vision_lui") {
        sc.coe = {43399.0, 1.714e-3, 0.404 * kDegToRad, 208.2 * kDegToRad, 175.4 * kDegToRad,
                  336.5 * kDegToRad};
        sc.sensor = optimize::SensorType::rf_vision;
        sc.alpha_new = 1e4;
    } else if (name == "rf_only_cn") {
        sc.coe = {43399.0, 8.439e-1, 89.46 * kDegToRad, 198.2 * kDegToRad, 284.8 * kDegToRad,
                  190.1 * kDegToRad};
        sc.sensor = optimize::SensorType::rf_only;
        sc.alpha_new = 1e8;
    } else if (name == "rf_only_lui") {
        sc.coe = {43399.0, 3.632e-1, 18.62 * kDegToRad, 90.79 * kDegToRad, 149.9 * kDegToRad,
                  119.4 * kDegToRad};
        sc.sensor = optimize::SensorType::rf_only;
        sc.alpha_new = 1e7;
    } else {
        throw std::invalid_argument("unknown auxiliary orbit preset: " + name);
    }
    return sc;
}

int spacecraft_count(const ScenarioConfig& cfg) {
    return static_cast<int>(cfg.formation_offsets.size()) + (cfg.new_sc ? 1 : 0);
}

std::vector<Vector6d> initial_truth_states(const ScenarioConfig& cfg, const astro::Constants& c) {
    const astro::CartesianState ref = astro::coe_to_cartesian(cfg.chief, c);
    Vector6d ref6;
    ref6 << ref.r, ref.v;
    std::vector<Vector6d> out;
    out.reserve(static_cast<std::size_t>(spacecraft_count(cfg)));
    for (const Vector6d& offset : cfg.formation_offsets) out.push_back(ref6 + offset);
    if (cfg.new_sc) {
        const astro::CartesianState aux = astro::coe_to_cartesian(cfg.new_sc->coe, c);
        Vector6d aux6;
        aux6 << aux.r, aux.v;
        out.push_back(aux6);
    }
    return out;
}

measurement::MeasKind scenario_modes(const ScenarioConfig& cfg) {
    measurement::MeasKind modes;
    modes.default_mode = cfg.range_only_formation ? measurement::MeasMode::range_only
                                                  : measurement::MeasMode::range_and_bearing;
    if (cfg.new_sc) {
        const int aux = spacecraft_count(cfg);
        if (cfg.range_only_formation)
            modes.mode_overrides[{1, aux}] = measurement::MeasMode::range_and_bearing;
        if (cfg.new_sc->sensor == optimize::SensorType::rf_only) {
            for (int other = 1; other < aux; ++other)
                modes.noise_overrides[{other, aux}] = measurement::NoiseSpec::rf_only();
        }
    }
    return modes;
}

namespace {

long step_count(const ScenarioConfig& cfg, const astro::Constants& c) {
    const double t_end = cfg.duration_orbits * astro::orbital_period(cfg.chief.a, c);
    return static_cast<long>(std::floor(t_end));
}

filters::FilterSetup make_setup(const ScenarioConfig& cfg, const std::vector<Vector6d>& truth0,
                                std::uint64_t init_seed) {
    const int n_deputies = spacecraft_count(cfg) - 1;
    const FilterInitConfig& init = cfg.filter;

    std::mt19937_64 rng(init_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto random_direction = [&rng, &gauss]() {
        Eigen::Vector3d d;
        do {
            d << gauss(rng), gauss(rng), gauss(rng);
        } while (d.norm() < 1e-12);
        return Eigen::Vector3d(d.normalized());
    };

    filters::FilterSetup setup;
    setup.variant = init.variant;
    setup.modes = scenario_modes(cfg);
    setup.noise = cfg.noise;
    setup.update.gate_sigma = init.gate_sigma;

    if (init.variant == filters::Variant::pva) {
        setup.x0 = Eigen::VectorXd::Zero(9 * n_deputies);
        Eigen::VectorXd p_diag(9 * n_deputies);
        for (int j = 0; j < n_deputies; ++j) {
            const Vector6d rel = truth0[static_cast<std::size_t>(j) + 1] - truth0[0];
            const int base = 9 * j;
            setup.x0.segment<3>(base) =
                rel.head<3>() + init.init_rel_pos_err_km * random_direction();
            setup.x0.segment<3>(base + 3) =
                rel.tail<3>() + init.init_rel_vel_err_km_s * random_direction();
            // acceleration estimate starts at zero
            p_diag.segment<3>(base).setConstant(init.init_rel_pos_err_km *
                                                init.init_rel_pos_err_km);
            p_diag.segment<3>(base + 3).setConstant(init.init_rel_vel_err_km_s *
                                                    init.init_rel_vel_err_km_s);
            p_diag.segment<3>(base + 6).setConstant(init.init_accel_var);
        }
        setup.P0 = p_diag.asDiagonal();
        setup.q_pva = init.q_pva;
    } else {
        setup.x0 = Eigen::VectorXd::Zero(6 + 6 * n_deputies);
        Eigen::VectorXd p_diag(6 + 6 * n_deputies);
        setup.x0.segment<3>(0) =
            truth0[0].head<3>() + init.init_abs_pos_err_km * random_direction();
        setup.x0.segment<3>(3) =
            truth0[0].tail<3>() + init.init_abs_vel_err_km_s * random_direction();
        p_diag.segment<3>(0).setConstant(init.init_abs_pos_err_km * init.init_abs_pos_err_km);
        p_diag.segment<3>(3).setConstant(init.init_abs_vel_err_km_s *
                                         init.init_abs_vel_err_km_s);
        for (int j = 0; j < n_deputies; ++j) {
            const Vector6d rel = truth0[static_cast<std::size_t>(j) + 1] - truth0[0];
            const int base = 6 + 6 * j;
            setup.x0.segment<3>(base) =
                rel.head<3>() + init.init_rel_pos_err_km * random_direction();
            setup.x0.segment<3>(base + 3) =
                rel.tail<3>() + init.init_rel_vel_err_km_s * random_direction();
            p_diag.segment<3>(base).setConstant(init.init_rel_pos_err_km *
                                                init.init_rel_pos_err_km);
            p_diag.segment<3>(base + 3).setConstant(init.init_rel_vel_err_km_s *
                                                    init.init_rel_vel_err_km_s);
        }
        setup.P0 = p_diag.asDiagonal();
        setup.q_abs = init.q_abs;
        setup.q_rel = Eigen::VectorXd::Constant(n_deputies, init.q_rel);
        if (cfg.new_sc) setup.q_rel[n_deputies - 1] = cfg.new_sc->alpha_new * init.q_rel;
    }
    return setup;
}

// Shared error bookkeeping for streaming and materialized paths.
struct ErrorAccumulator {
    int n_deputies = 0;
    int n_original = 0;   // deputies of the original formation
    bool has_new_sc = false;
    bool absolute = false;
    double window_start = 0.0;

    std::vector<double> rel_sq_sum;
    double abs_sq_sum = 0.0;
    long window_count = 0;

    TrialResult result;

    void init(const ScenarioConfig& cfg) {
        n_deputies = spacecraft_count(cfg) - 1;
        has_new_sc = cfg.new_sc.has_value();
        n_original = n_deputies - (has_new_sc ? 1 : 0);
        absolute = cfg.filter.variant == filters::Variant::absrel;
        window_start = cfg.window_start_s;
        rel_sq_sum.assign(static_cast<std::size_t>(n_deputies), 0.0);
    }

    void step(double t, const Eigen::VectorXd& x, const std::vector<Vector6d>& truth_row) {
        double abs_err = 0.0;
        if (absolute) abs_err = (x.head<3>() - truth_row[0].head<3>()).norm();

        double rel_sum = 0.0;
        for (int j = 0; j < n_deputies; ++j) {
            const int base = absolute ? 6 + 6 * j : 9 * j;
            const Eigen::Vector3d truth_rel =
                truth_row[static_cast<std::size_t>(j) + 1].head<3>() - truth_row[0].head<3>();
            const double err = (x.segment<3>(base) - truth_rel).norm();
            if (j < n_original) rel_sum += err;
            if (t >= window_start) rel_sq_sum[static_cast<std::size_t>(j)] += err * err;
        }
        if (t >= window_start) {
            abs_sq_sum += abs_err * abs_err;
            ++window_count;
        }
        if (std::fmod(t, 60.0) == 0.0) {
            result.series_t.push_back(t);
            result.series_abs_err_km.push_back(abs_err);
            result.series_mean_rel_err_m.push_back(1e3 * rel_sum / n_original);
        }
    }

    void finalize() {
        if (window_count > 0) {
            double mean_rel = 0.0;
            for (int j = 0; j < n_original; ++j)
                mean_rel += std::sqrt(rel_sq_sum[static_cast<std::size_t>(j)] /
                                      static_cast<double>(window_count));
            result.mean_rel_pos_rms_m = 1e3 * mean_rel / n_original;
            if (has_new_sc)
                result.new_sc_rel_rms_m =
                    1e3 * std::sqrt(rel_sq_sum[static_cast<std::size_t>(n_deputies - 1)] /
                                    static_cast<double>(window_count));
            result.abs_pos_rms_km = std::sqrt(abs_sq_sum / static_cast<double>(window_count));
        }
    }
};

}  // namespace

SampledTruth make_truth(const ScenarioConfig& cfg, const astro::Constants& c) {
    const long n_steps = step_count(cfg, c);
    const int n_sc = spacecraft_count(cfg);
    SampledTruth truth;
    truth.n_spacecraft = n_sc;
    truth.states.reserve(static_cast<std::size_t>(n_steps + 1) * n_sc);

    std::vector<Vector6d> row = initial_truth_states(cfg, c);
    truth.states.insert(truth.states.end(), row.begin(), row.end());
    for (long k = 1; k <= n_steps; ++k) {
        dynamics::truth_step(row, static_cast<double>(k - 1), 1.0, cfg.truth, c);
        truth.states.insert(truth.states.end(), row.begin(), row.end());
    }
    return truth;
}

TrialResult run_trial(const ScenarioConfig& cfg, const SampledTruth* truth,
                      std::uint64_t trial_seed, const astro::Constants& c,
                      const filters::EpochCallback* on_epoch) {
    const long n_steps = step_count(cfg, c);
    const int n_sc = spacecraft_count(cfg);

    std::vector<Vector6d> row = initial_truth_states(cfg, c);
    const std::uint64_t init_seed = derive_seed(trial_seed, 0);
    const std::uint64_t meas_seed = derive_seed(trial_seed, 1);

    filters::FilterSetup setup = make_setup(cfg, row, init_seed);
    measurement::SlotSynthesizer synth(setup.modes, cfg.noise, meas_seed, c.r_earth);

    const measurement::Schedule schedule = measurement::build_schedule(
        cfg.schedule, 0.0, static_cast<double>(n_steps) + 1.0, n_sc);
    const std::vector<measurement::SlotEpoch> slots = measurement::measurement_epochs(schedule);

    ErrorAccumulator acc;
    acc.init(cfg);

    const bool pva = setup.variant == filters::Variant::pva;
    filters::PvaFilterState pva_state;
    filters::AbsRelFilterState absrel_state;
    if (pva) {
        pva_state.x = setup.x0;
        pva_state.P = setup.P0;
        pva_state.q = setup.q_pva;
    } else {
        absrel_state.x = setup.x0;
        absrel_state.P = setup.P0;
        absrel_state.q_abs = setup.q_abs;
        absrel_state.q_rel = setup.q_rel;
    }

    std::size_t slot_idx = 0;
    try {
        for (long k = 0; k <= n_steps; ++k) {
            const double t = static_cast<double>(k);
            if (k > 0) {
                if (truth) {
                    for (int s = 0; s < n_sc; ++s) row[static_cast<std::size_t>(s)] =
                        truth->at(k, s);
                } else {
                    dynamics::truth_step(row, t - 1.0, 1.0, cfg.truth, c);
                }
                if (pva)
                    pva_state = filters::predict_pva(std::move(pva_state), 1.0);
                else
                    absrel_state = filters::predict_absrel(std::move(absrel_state), 1.0, c);
            }

            bool posterior = false;
            while (slot_idx < slots.size() && slots[slot_idx].t <= t + 1e-9) {
                if (slots[slot_idx].t >= t - 1e-9) {
                    const auto position = [&row](int sc, double) {
                        return Eigen::Vector3d(row[static_cast<std::size_t>(sc - 1)].head<3>());
                    };
                    const std::vector<measurement::Measurement> group =
                        synth.at_epoch(slots[slot_idx], position);
                    if (!group.empty()) {
                        Eigen::VectorXd& x = pva ? pva_state.x : absrel_state.x;
                        Eigen::MatrixXd& p = pva ? pva_state.P : absrel_state.P;
                        const filters::StackedUpdate update =
                            pva ? filters::linearize_pva(x, group, setup.modes, setup.noise)
                                : filters::linearize_absrel(x, group, setup.modes, setup.noise);
                        filters::ekf_update(x, p, update, setup.update);
                        posterior = true;
                    }
                }
                ++slot_idx;
            }

            acc.step(t, pva ? pva_state.x : absrel_state.x, row);
            if (on_epoch)
                (*on_epoch)(t, posterior, pva ? pva_state.x : absrel_state.x,
                            pva ? pva_state.P : absrel_state.P);
        }
    } catch (const filters::FilterDivergence&) {
        acc.result.diverged = true;
    }

    acc.finalize();
    return acc.result;
}

RmsReport monte_carlo(const ScenarioConfig& cfg, int trials, int workers,
                      const astro::Constants& c) {
    if (trials < 1) throw std::invalid_argument("monte_carlo: trials must be >= 1");

    const long n_steps = step_count(cfg, c);
    const int n_sc = spacecraft_count(cfg);
    // Share a materialized truth across trials unless the horizon makes the
    // 1 Hz table unreasonably large; then each trial integrates in lockstep.
    const double table_bytes =
        static_cast<double>(n_steps + 1) * n_sc * sizeof(Vector6d);
    SampledTruth truth;
    const bool materialize = table_bytes < 2.5e8;
    if (materialize) truth = make_truth(cfg, c);

    std::vector<TrialResult> results(static_cast<std::size_t>(trials));
    parallel_for(trials, workers, [&](int i) {
        results[static_cast<std::size_t>(i)] =
            run_trial(cfg, materialize ? &truth : nullptr, derive_seed(cfg.seed, i), c);
    });

    RmsReport report;
    report.window_start_s = cfg.window_start_s;
    int ok = 0;
    for (const TrialResult& r : results) {
        if (r.diverged) {
            ++report.diverged_count;
            continue;
        }
        report.abs_pos_rms_km += r.abs_pos_rms_km;
        report.mean_rel_pos_rms_m += r.mean_rel_pos_rms_m;
        report.new_sc_rel_rms_m += r.new_sc_rel_rms_m;
        ++ok;
    }
    if (ok > 0) {
        report.abs_pos_rms_km /= ok;
        report.mean_rel_pos_rms_m /= ok;
        report.new_sc_rel_rms_m /= ok;
    }
    report.trials = std::move(results);
    return report;
}

RmsReport rms_report(const ScenarioConfig& cfg, std::span<const filters::FilterOutput> outputs,
                     const SampledTruth& truth, double window_start_s) {
    if (outputs.empty()) throw std::invalid_argument("rms_report: no filter outputs");
    if (outputs.back().epoch < window_start_s)
        throw std::invalid_argument("rms_report: window starts beyond the data");

    ScenarioConfig windowed = cfg;
    windowed.window_start_s = window_start_s;
    ErrorAccumulator acc;
    acc.init(windowed);

    std::vector<Vector6d> row(static_cast<std::size_t>(truth.n_spacecraft));
    for (const filters::FilterOutput& o : outputs) {
        const long k = static_cast<long>(std::llround(o.epoch));
        for (int s = 0; s < truth.n_spacecraft; ++s) row[static_cast<std::size_t>(s)] =
            truth.at(k, s);
        acc.step(o.epoch, o.x, row);
    }
    acc.finalize();

    RmsReport report;
    report.window_start_s = window_start_s;
    report.abs_pos_rms_km = acc.result.abs_pos_rms_km;
    report.mean_rel_pos_rms_m = acc.result.mean_rel_pos_rms_m;
    report.new_sc_rel_rms_m = acc.result.new_sc_rel_rms_m;
    report.trials.push_back(std::move(acc.result));
    return report;
}

ScenarioConfig sensor_reduced_scenario(const ScenarioConfig& cfg) {
    if (!cfg.new_sc)
        throw std::invalid_argument("sensor_reduced_scenario: auxiliary spacecraft required");
    ScenarioConfig out = cfg;
    out.schedule = measurement::ScheduleKind::parallel7;
    out.range_only_formation = true;
    out.duration_orbits = 10.0;
    out.filter.variant = filters::Variant::absrel;
    out.filter.init_abs_pos_err_km = 10.0;
    return out;
}

}  // namespace formod::harness
