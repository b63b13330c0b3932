#pragma once

#include <nlohmann/json_fwd.hpp>
#include <string>

#include "formod/harness.hpp"
#include "formod/optimize.hpp"

namespace formod::config {

/// Scenario section of a run config. Angles arrive in degrees, range noise
/// in metres; everything is optional and falls back to the baseline
/// formation defaults.
harness::ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const harness::ScenarioConfig& cfg);

struct OptimizeRunConfig {
    optimize::ObjectiveSpec spec;
    optimize::ConstraintSet constraints;
    optimize::SolverKind solver = optimize::SolverKind::multistart_local;
    int budget = 2000;
    std::uint64_t seed = 1;
    std::vector<optimize::DesignVector> starts;
};

OptimizeRunConfig optimize_from_json(const nlohmann::json& j);

/// Design vector or named preset from an `obs_eval`/`optimize` block.
optimize::DesignVector design_from_json(const nlohmann::json& j, const astro::Coe& chief);

}  // namespace formod::config
