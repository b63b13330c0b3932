#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "formod/astro.hpp"
#include "formod/measurement.hpp"
#include "formod/observability.hpp"

namespace formod::optimize {

enum class SensorType { rf_vision, rf_only };

measurement::NoiseSpec sensor_noise(SensorType s);

enum class Parametrization {
    coe_fixed_period,   // (e, i, raan, argp, nu), semi-major axis pinned to the chief
    apsis               // (r_apsis_1, r_apsis_2, i, raan, argp, nu)
};

/// Initial orbit of the auxiliary spacecraft in one of the two
/// parametrizations. Angles in radians, radii in km.
struct DesignVector {
    Parametrization param = Parametrization::coe_fixed_period;
    Eigen::VectorXd v;

    int dim() const { return param == Parametrization::coe_fixed_period ? 5 : 6; }
    astro::Coe to_coe(const astro::Coe& chief) const;

    static DesignVector from_coe(const astro::Coe& coe);   // fixed-period form
};

enum class ObjectiveKind { obs_lui, sfim_lui, sfim_cn };

struct ObjectiveSpec {
    ObjectiveKind kind = ObjectiveKind::sfim_lui;
    SensorType sensor = SensorType::rf_vision;
    double sample_period = 90.0;          // s
    int sfim_samples = 1000;
    double horizon = 0.0;                 // s; 0 picks the natural horizon
    astro::Coe chief{43399.0, 0.0, 0.0, 0.0, 0.0, 0.0};
};

struct ConstraintSet {
    double min_perigee = 6678.0;    // km
    double max_ecc = 0.85;          // fixed-period eccentricity cap
    double d_max = 480.0;           // km, vision functional range
    double r_min = 6678.0;          // km, apsis box
    double r_max = 3.0e5;           // km, apsis box
};

struct ObjectiveReport {
    double objective = 0.0;                   // to minimize
    observability::SvMetrics metrics;
    double uneclipsed_ratio = 1.0;
    bool evaluable = true;                    // false: propagation failed (+inf objective)
};

/// Evaluates the requested observability objective for the two-spacecraft
/// system (chief + candidate). SFIM objectives are scaled by the uneclipsed
/// sample ratio; the local-observability objective averages the per-epoch
/// metric with eclipsed epochs contributing zero.
ObjectiveReport eval_objective(const DesignVector& x, const ObjectiveSpec& spec,
                               const astro::Constants& c = {});

/// Left-hand side of the approximate maximum-distance constraint for the
/// vision sensor; <= 0 is feasible. Assumes equal semi-major axes.
double vision_constraint(const DesignVector& x, const astro::Coe& chief, double d_max);

/// Small-element LVLH relative-motion approximation (radial, along-track,
/// cross-track offsets) at time t for equal-period near-circular orbits.
Eigen::Vector3d hcw_relative(const DesignVector& x, const astro::Coe& chief, double t,
                             const astro::Constants& c = {});

struct Feasibility {
    bool ok = true;
    std::vector<std::string> violations;
};

Feasibility feasible(const DesignVector& x, const ConstraintSet& cs, SensorType sensor,
                     const astro::Coe& chief = ObjectiveSpec{}.chief);

/// Uniform random design vector from the feasible set (rejection sampling
/// with a deterministic near-chief fallback).
DesignVector sample_feasible(Parametrization param, const ConstraintSet& cs, SensorType sensor,
                             std::uint64_t seed, const astro::Coe& chief = ObjectiveSpec{}.chief);

enum class SolverKind { multistart_local, swarm };

/// Bound-constrained minimization problem for the generic solvers. The
/// objective sees box-clipped points only; nonlinear constraints are the
/// caller's business (penalty terms inside `objective`).
struct BoxProblem {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    std::function<double(const Eigen::VectorXd&)> objective;
    /// Optional start-point sampler; uniform over the box when absent.
    std::function<Eigen::VectorXd(std::mt19937_64&)> sample_start;
};

/// Runs multistart Nelder-Mead or a particle swarm over the box with at most
/// `budget` objective calls; explicit starts are consumed first. Returns the
/// best point seen.
Eigen::VectorXd minimize_box(const BoxProblem& problem, SolverKind solver, int budget,
                             std::uint64_t seed, const std::vector<Eigen::VectorXd>& starts = {});

struct TraceEntry {
    int eval_id = 0;
    Eigen::VectorXd v;
    double objective = 0.0;
    bool feasible = false;
};

struct OptimizeResult {
    bool found_feasible = false;
    DesignVector best;
    ObjectiveReport best_report;
    std::vector<TraceEntry> trace;
};

/// Minimizes the objective over the constrained design space with the given
/// evaluation budget. Deterministic for a given seed. Explicit start points
/// are evaluated first. Never returns an infeasible point; when no feasible
/// point was found, `found_feasible` is false.
OptimizeResult optimize(const ObjectiveSpec& spec, const ConstraintSet& cs, SolverKind solver,
                        int budget, std::uint64_t seed,
                        const std::vector<DesignVector>& starts = {},
                        const astro::Constants& c = {});

/// CSV with header `eval_id,x_0..x_{d-1},objective,feasible`.
void write_trace_csv(std::ostream& out, const std::vector<TraceEntry>& trace);

}  // namespace formod::optimize
