#include "formod/config.hpp"

#include <nlohmann/json.hpp>
#include <stdexcept>

namespace formod::config {

using nlohmann::json;

namespace {

astro::Coe coe_from_json(const json& j) {
    astro::Coe coe;
    coe.a = j.at("a_km").get<double>();
    coe.e = j.value("e", 0.0);
    coe.i = j.value("i_deg", 0.0) * astro::kDegToRad;
    coe.raan = j.value("raan_deg", 0.0) * astro::kDegToRad;
    coe.argp = j.value("argp_deg", 0.0) * astro::kDegToRad;
    coe.nu = j.value("nu_deg", 0.0) * astro::kDegToRad;
    return coe;
}

json coe_to_json(const astro::Coe& coe) {
    return {{"a_km", coe.a},
            {"e", coe.e},
            {"i_deg", coe.i * astro::kRadToDeg},
            {"raan_deg", coe.raan * astro::kRadToDeg},
            {"argp_deg", coe.argp * astro::kRadToDeg},
            {"nu_deg", coe.nu * astro::kRadToDeg}};
}

measurement::ScheduleKind schedule_from_string(const std::string& s) {
    if (s == "original") return measurement::ScheduleKind::original;
    if (s == "adapted7") return measurement::ScheduleKind::adapted7;
    if (s == "parallel7") return measurement::ScheduleKind::parallel7;
    if (s == "fixed_period") return measurement::ScheduleKind::fixed_period;
    throw std::invalid_argument("unknown schedule kind: " + s);
}

std::string schedule_to_string(measurement::ScheduleKind k) {
    switch (k) {
        case measurement::ScheduleKind::original: return "original";
        case measurement::ScheduleKind::adapted7: return "adapted7";
        case measurement::ScheduleKind::parallel7: return "parallel7";
        case measurement::ScheduleKind::fixed_period: return "fixed_period";
    }
    return "original";
}

optimize::SensorType sensor_from_string(const std::string& s) {
    if (s == "rf_vision") return optimize::SensorType::rf_vision;
    if (s == "rf_only") return optimize::SensorType::rf_only;
    throw std::invalid_argument("unknown sensor type: " + s);
}

harness::NewSpacecraft new_sc_from_json(const json& j) {
    if (j.contains("preset")) {
        harness::NewSpacecraft sc = harness::aux_preset(j.at("preset").get<std::string>());
        if (j.contains("sensor")) sc.sensor = sensor_from_string(j.at("sensor"));
        if (j.contains("alpha_new")) sc.alpha_new = j.at("alpha_new").get<double>();
        return sc;
    }
    harness::NewSpacecraft sc;
    sc.coe = coe_from_json(j.at("coe"));
    if (j.contains("sensor")) sc.sensor = sensor_from_string(j.at("sensor"));
    sc.alpha_new = j.value("alpha_new", 1e4);
    return sc;
}

}  // namespace

harness::ScenarioConfig scenario_from_json(const json& j) {
    harness::ScenarioConfig cfg;
    if (j.contains("chief_coe")) cfg.chief = coe_from_json(j.at("chief_coe"));
    if (j.contains("formation_offsets")) {
        cfg.formation_offsets.clear();
        for (const auto& row : j.at("formation_offsets")) {
            if (row.size() != 6)
                throw std::invalid_argument("formation_offsets rows need 6 entries");
            harness::Vector6d v;
            for (int k = 0; k < 6; ++k) v[k] = row[static_cast<std::size_t>(k)].get<double>();
            cfg.formation_offsets.push_back(v);
        }
    }
    if (j.contains("new_sc") && !j.at("new_sc").is_null())
        cfg.new_sc = new_sc_from_json(j.at("new_sc"));
    if (j.contains("schedule")) cfg.schedule = schedule_from_string(j.at("schedule"));
    cfg.range_only_formation = j.value("range_only_formation", cfg.range_only_formation);

    if (j.contains("truth")) {
        const json& t = j.at("truth");
        cfg.truth.enable_j2 = t.value("enable_j2", cfg.truth.enable_j2);
        cfg.truth.enable_lunisolar = t.value("enable_lunisolar", cfg.truth.enable_lunisolar);
        cfg.truth.enable_srp = t.value("enable_srp", cfg.truth.enable_srp);
        cfg.truth.srp_area_to_mass = t.value("srp_area_to_mass", cfg.truth.srp_area_to_mass);
    }
    if (j.contains("noise")) {
        const json& n = j.at("noise");
        cfg.noise.sigma_range = n.value("sigma_range_m", cfg.noise.sigma_range * 1e3) * 1e-3;
        cfg.noise.sigma_ra =
            n.value("sigma_ra_deg", cfg.noise.sigma_ra * astro::kRadToDeg) * astro::kDegToRad;
        cfg.noise.sigma_dec =
            n.value("sigma_dec_deg", cfg.noise.sigma_dec * astro::kRadToDeg) * astro::kDegToRad;
    }
    if (j.contains("filter")) {
        const json& f = j.at("filter");
        if (f.contains("variant")) {
            const std::string v = f.at("variant");
            if (v == "pva")
                cfg.filter.variant = filters::Variant::pva;
            else if (v == "absrel")
                cfg.filter.variant = filters::Variant::absrel;
            else
                throw std::invalid_argument("unknown filter variant: " + v);
        }
        cfg.filter.init_rel_pos_err_km =
            f.value("init_rel_pos_err_m", cfg.filter.init_rel_pos_err_km * 1e3) * 1e-3;
        cfg.filter.init_rel_vel_err_km_s =
            f.value("init_rel_vel_err_cm_s", cfg.filter.init_rel_vel_err_km_s * 1e5) * 1e-5;
        cfg.filter.init_abs_pos_err_km =
            f.value("init_abs_pos_err_km", cfg.filter.init_abs_pos_err_km);
        cfg.filter.init_abs_vel_err_km_s =
            f.value("init_abs_vel_err_cm_s", cfg.filter.init_abs_vel_err_km_s * 1e5) * 1e-5;
        cfg.filter.gate_sigma = f.value("gate_sigma", cfg.filter.gate_sigma);
        cfg.filter.q_pva = f.value("q_pva", cfg.filter.q_pva);
        cfg.filter.q_abs = f.value("q_abs", cfg.filter.q_abs);
        cfg.filter.q_rel = f.value("q_rel", cfg.filter.q_rel);
    }
    cfg.duration_orbits = j.value("duration_orbits", cfg.duration_orbits);
    cfg.window_start_s = j.value("window_start_min", cfg.window_start_s / 60.0) * 60.0;
    cfg.seed = j.value("seed", cfg.seed);
    return cfg;
}

json scenario_to_json(const harness::ScenarioConfig& cfg) {
    json j;
    j["chief_coe"] = coe_to_json(cfg.chief);
    json offsets = json::array();
    for (const harness::Vector6d& v : cfg.formation_offsets)
        offsets.push_back({v[0], v[1], v[2], v[3], v[4], v[5]});
    j["formation_offsets"] = offsets;
    if (cfg.new_sc) {
        j["new_sc"] = {{"coe", coe_to_json(cfg.new_sc->coe)},
                       {"sensor", cfg.new_sc->sensor == optimize::SensorType::rf_vision
                                      ? "rf_vision"
                                      : "rf_only"},
                       {"alpha_new", cfg.new_sc->alpha_new}};
    }
    j["schedule"] = schedule_to_string(cfg.schedule);
    j["range_only_formation"] = cfg.range_only_formation;
    j["truth"] = {{"enable_j2", cfg.truth.enable_j2},
                  {"enable_lunisolar", cfg.truth.enable_lunisolar},
                  {"enable_srp", cfg.truth.enable_srp},
                  {"srp_area_to_mass", cfg.truth.srp_area_to_mass}};
    j["noise"] = {{"sigma_range_m", cfg.noise.sigma_range * 1e3},
                  {"sigma_ra_deg", cfg.noise.sigma_ra * astro::kRadToDeg},
                  {"sigma_dec_deg", cfg.noise.sigma_dec * astro::kRadToDeg}};
    j["filter"] = {{"variant", cfg.filter.variant == filters::Variant::pva ? "pva" : "absrel"},
                   {"init_rel_pos_err_m", cfg.filter.init_rel_pos_err_km * 1e3},
                   {"init_rel_vel_err_cm_s", cfg.filter.init_rel_vel_err_km_s * 1e5},
                   {"init_abs_pos_err_km", cfg.filter.init_abs_pos_err_km},
                   {"init_abs_vel_err_cm_s", cfg.filter.init_abs_vel_err_km_s * 1e5},
                   {"gate_sigma", cfg.filter.gate_sigma},
                   {"q_pva", cfg.filter.q_pva},
                   {"q_abs", cfg.filter.q_abs},
                   {"q_rel", cfg.filter.q_rel}};
    j["duration_orbits"] = cfg.duration_orbits;
    j["window_start_min"] = cfg.window_start_s / 60.0;
    j["seed"] = cfg.seed;
    return j;
}

optimize::DesignVector design_from_json(const json& j, const astro::Coe& chief) {
    if (j.contains("preset"))
        return optimize::DesignVector::from_coe(
            harness::aux_preset(j.at("preset").get<std::string>()).coe);
    if (j.contains("coe"))
        return optimize::DesignVector::from_coe(coe_from_json(j.at("coe")));
    if (j.contains("apsis")) {
        const json& a = j.at("apsis");
        optimize::DesignVector x;
        x.param = optimize::Parametrization::apsis;
        x.v.resize(6);
        x.v << a.at("r1_km").get<double>(), a.at("r2_km").get<double>(),
            a.value("i_deg", 0.0) * astro::kDegToRad,
            a.value("raan_deg", 0.0) * astro::kDegToRad,
            a.value("argp_deg", 0.0) * astro::kDegToRad,
            a.value("nu_deg", 0.0) * astro::kDegToRad;
        return x;
    }
    (void)chief;
    throw std::invalid_argument("design vector needs a preset, coe, or apsis block");
}

OptimizeRunConfig optimize_from_json(const json& j) {
    OptimizeRunConfig cfg;
    const std::string kind = j.value("objective", "sfim_lui");
    if (kind == "obs_lui")
        cfg.spec.kind = optimize::ObjectiveKind::obs_lui;
    else if (kind == "sfim_lui")
        cfg.spec.kind = optimize::ObjectiveKind::sfim_lui;
    else if (kind == "sfim_cn")
        cfg.spec.kind = optimize::ObjectiveKind::sfim_cn;
    else
        throw std::invalid_argument("unknown objective kind: " + kind);

    cfg.spec.sensor = sensor_from_string(j.value("sensor", "rf_vision"));
    cfg.spec.sample_period = j.value("sample_period_s", cfg.spec.sample_period);
    cfg.spec.sfim_samples = j.value("sfim_samples", cfg.spec.sfim_samples);
    cfg.spec.horizon = j.value("horizon_s", cfg.spec.horizon);
    if (j.contains("chief_coe")) cfg.spec.chief = coe_from_json(j.at("chief_coe"));

    if (j.contains("constraints")) {
        const json& cset = j.at("constraints");
        cfg.constraints.min_perigee = cset.value("min_perigee_km", cfg.constraints.min_perigee);
        cfg.constraints.max_ecc = cset.value("max_ecc", cfg.constraints.max_ecc);
        cfg.constraints.d_max = cset.value("d_max_km", cfg.constraints.d_max);
        cfg.constraints.r_min = cset.value("r_min_km", cfg.constraints.r_min);
        cfg.constraints.r_max = cset.value("r_max_km", cfg.constraints.r_max);
    }

    const std::string solver = j.value("solver", "multistart_local");
    if (solver == "multistart_local")
        cfg.solver = optimize::SolverKind::multistart_local;
    else if (solver == "swarm")
        cfg.solver = optimize::SolverKind::swarm;
    else
        throw std::invalid_argument("unknown solver: " + solver);

    cfg.budget = j.value("budget", cfg.budget);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("starts"))
        for (const json& s : j.at("starts"))
            cfg.starts.push_back(design_from_json(s, cfg.spec.chief));
    return cfg;
}

}  // namespace formod::config
