#include "formod/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>

#include "formod/dynamics.hpp"

namespace formod::optimize {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}  // namespace

measurement::NoiseSpec sensor_noise(SensorType s) {
    return s == SensorType::rf_vision ? measurement::NoiseSpec::rf_vision()
                                      : measurement::NoiseSpec::rf_only();
}

astro::Coe DesignVector::to_coe(const astro::Coe& chief) const {
    if (v.size() != dim()) throw std::invalid_argument("DesignVector: wrong value count");
    if (param == Parametrization::coe_fixed_period)
        return astro::Coe{chief.a, v[0], v[1], astro::wrap_two_pi(v[2]),
                          astro::wrap_two_pi(v[3]), astro::wrap_two_pi(v[4])};
    const auto [a, e] = astro::apsides_to_shape(v[0], v[1]);
    return astro::Coe{a, e, v[2], astro::wrap_two_pi(v[3]), astro::wrap_two_pi(v[4]),
                      astro::wrap_two_pi(v[5])};
}

DesignVector DesignVector::from_coe(const astro::Coe& coe) {
    DesignVector x;
    x.param = Parametrization::coe_fixed_period;
    x.v.resize(5);
    x.v << coe.e, coe.i, coe.raan, coe.argp, coe.nu;
    return x;
}

double vision_constraint(const DesignVector& x, const astro::Coe& chief, double d_max) {
    const astro::Coe coe = x.to_coe(chief);
    const double m1 = astro::true_to_mean_anomaly(chief.nu, chief.e);
    const double m2 = astro::true_to_mean_anomaly(coe.nu, coe.e);
    const double phase_gap =
        astro::wrap_pi(coe.argp + m2 + coe.raan - chief.argp - m1 - chief.raan);
    const double along_track = std::abs(phase_gap) + 2.0 * coe.e;
    const double cross_track = coe.i - chief.i;
    return chief.a * std::sqrt(along_track * along_track + cross_track * cross_track) - d_max;
}

Eigen::Vector3d hcw_relative(const DesignVector& x, const astro::Coe& chief, double t,
                             const astro::Constants& c) {
    const astro::Coe coe = x.to_coe(chief);
    const double n = kTwoPi / astro::orbital_period(chief.a, c);
    const double m1 = astro::true_to_mean_anomaly(chief.nu, chief.e) + n * t;
    const double m2 = astro::true_to_mean_anomaly(coe.nu, coe.e) + n * t;
    const double phase = chief.argp + m1;
    const double a = chief.a;
    const double radial = -a * coe.e * std::cos(phase - coe.argp);
    const double along = a * (astro::wrap_pi(coe.argp + m2 - chief.argp - m1 + coe.raan -
                                             chief.raan) +
                              2.0 * coe.e * std::sin(phase - coe.argp));
    const double cross = a * coe.i * std::sin(phase);
    return {radial, along, cross};
}

Feasibility feasible(const DesignVector& x, const ConstraintSet& cs, SensorType sensor,
                     const astro::Coe& chief) {
    Feasibility out;
    const auto fail = [&out](std::string what) {
        out.ok = false;
        out.violations.push_back(std::move(what));
    };

    if (x.v.size() != x.dim()) {
        fail("design vector has the wrong dimension");
        return out;
    }

    if (x.param == Parametrization::apsis) {
        for (int k = 0; k < 2; ++k)
            if (x.v[k] < cs.r_min || x.v[k] > cs.r_max) fail("apsis radius outside bounds");
        if (x.v[2] < 0.0 || x.v[2] > std::numbers::pi) fail("inclination outside [0, pi]");
        if (std::min(x.v[0], x.v[1]) < cs.min_perigee) fail("perigee below minimum altitude");
    } else {
        const double e = x.v[0];
        if (e < 0.0 || e > cs.max_ecc) fail("eccentricity outside cap");
        if (x.v[1] < 0.0 || x.v[1] > std::numbers::pi) fail("inclination outside [0, pi]");
        if (e >= 0.0 && e < 1.0 && chief.a * (1.0 - e) < cs.min_perigee)
            fail("perigee below minimum altitude");
        if (sensor == SensorType::rf_vision && vision_constraint(x, chief, cs.d_max) > 0.0)
            fail("vision range constraint violated");
    }
    return out;
}

namespace {

std::vector<double> sample_grid(double sample_period, int n_samples) {
    std::vector<double> epochs(static_cast<std::size_t>(n_samples));
    for (int k = 0; k < n_samples; ++k) epochs[static_cast<std::size_t>(k)] = sample_period * k;
    return epochs;
}

}  // namespace

ObjectiveReport eval_objective(const DesignVector& x, const ObjectiveSpec& spec,
                               const astro::Constants& c) {
    ObjectiveReport report;
    try {
        const astro::Coe coe2 = x.to_coe(spec.chief);
        const astro::CartesianState chief_state = astro::coe_to_cartesian(spec.chief, c);
        const astro::CartesianState new_state = astro::coe_to_cartesian(coe2, c);

        Eigen::VectorXd x0(12);
        x0 << chief_state.r, chief_state.v, new_state.r - chief_state.r,
            new_state.v - chief_state.v;

        const double t_chief = astro::orbital_period(spec.chief.a, c);
        const measurement::NoiseSpec noise = sensor_noise(spec.sensor);

        dynamics::PropagatorConfig prop;
        prop.max_step = spec.sample_period;

        if (spec.kind == ObjectiveKind::obs_lui) {
            const double horizon =
                spec.horizon > 0.0
                    ? spec.horizon
                    : std::max(t_chief, astro::orbital_period(coe2.a, c));
            const int n = static_cast<int>(std::floor(horizon / spec.sample_period)) + 1;

            // States only; the local matrix needs no STM.
            Eigen::VectorXd state = x0;
            double metric_sum = 0.0;
            int eclipsed_count = 0;
            bool have_metrics = false;
            for (int k = 0; k < n; ++k) {
                if (k > 0)
                    state = dynamics::propagate(state, spec.sample_period, prop, false, c).state;
                const Eigen::Vector3d r_chief = state.segment<3>(0);
                const Eigen::Vector3d dr = state.segment<3>(6);
                if (measurement::is_eclipsed(r_chief, r_chief + dr, c.r_earth)) {
                    ++eclipsed_count;
                    continue;   // contributes zero
                }
                astro::CartesianState chief_k{r_chief, state.segment<3>(3),
                                              spec.sample_period * k};
                astro::RelativeState rel_k{dr, state.segment<3>(9)};
                const auto local = observability::local_obs_matrix(chief_k, rel_k, c);
                const auto metrics = observability::sv_metrics(local.m);
                metric_sum += metrics.lui;
                if (!have_metrics) {
                    report.metrics = metrics;
                    have_metrics = true;
                }
            }
            report.uneclipsed_ratio = 1.0 - static_cast<double>(eclipsed_count) / n;
            report.objective = metric_sum / n;
            return report;
        }

        const int n = spec.horizon > 0.0
                          ? static_cast<int>(std::floor(spec.horizon / spec.sample_period)) + 1
                          : spec.sfim_samples;
        const std::vector<double> epochs = sample_grid(spec.sample_period, n);
        const dynamics::StmTrajectory traj = dynamics::propagate_with_stm_grid(x0, epochs, prop, c);

        std::vector<bool> eclipse(epochs.size());
        for (std::size_t k = 0; k < epochs.size(); ++k) {
            const Eigen::Vector3d r_chief = traj.states[k].segment<3>(0);
            eclipse[k] =
                measurement::is_eclipsed(r_chief, r_chief + traj.states[k].segment<3>(6), c.r_earth);
        }

        const std::vector<observability::PairSpec> pairs = {
            {1, 2, measurement::MeasMode::range_and_bearing, noise}};
        const observability::SrSfim info = observability::srsfim(traj, pairs, eclipse);
        report.metrics = observability::sv_metrics(info.m);
        report.uneclipsed_ratio =
            static_cast<double>(info.uneclipsed_count()) / static_cast<double>(epochs.size());
        const double raw = spec.kind == ObjectiveKind::sfim_lui ? report.metrics.lui
                                                                : report.metrics.neg_recip_cn;
        report.objective = raw * report.uneclipsed_ratio;
        return report;
    } catch (const std::exception&) {
        report.objective = kInf;
        report.evaluable = false;
        return report;
    }
}

namespace {

struct Box {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
};

Box design_box(Parametrization param, const ConstraintSet& cs) {
    Box box;
    if (param == Parametrization::coe_fixed_period) {
        box.lo.resize(5);
        box.hi.resize(5);
        box.lo << 0.0, 0.0, 0.0, 0.0, 0.0;
        box.hi << cs.max_ecc, std::numbers::pi, kTwoPi, kTwoPi, kTwoPi;
    } else {
        box.lo.resize(6);
        box.hi.resize(6);
        box.lo << cs.r_min, cs.r_min, 0.0, 0.0, 0.0, 0.0;
        box.hi << cs.r_max, cs.r_max, std::numbers::pi, kTwoPi, kTwoPi, kTwoPi;
    }
    return box;
}

// Scaled constraint violation magnitude (0 when feasible). Each term is
// normalized by its bound so km-valued and dimensionless constraints mix.
double violation_magnitude(const DesignVector& x, const ConstraintSet& cs, SensorType sensor,
                           const astro::Coe& chief) {
    double total = 0.0;
    if (x.param == Parametrization::coe_fixed_period) {
        const double e = x.v[0];
        if (e > cs.max_ecc) total += (e - cs.max_ecc) / cs.max_ecc;
        if (e >= 0.0 && e < 1.0) {
            const double perigee = chief.a * (1.0 - e);
            if (perigee < cs.min_perigee) total += (cs.min_perigee - perigee) / cs.min_perigee;
        }
        if (sensor == SensorType::rf_vision) {
            const double slack = vision_constraint(x, chief, cs.d_max);
            if (slack > 0.0) total += slack / cs.d_max;
        }
    } else {
        const double perigee = std::min(x.v[0], x.v[1]);
        if (perigee < cs.min_perigee) total += (cs.min_perigee - perigee) / cs.min_perigee;
    }
    return total;
}

}  // namespace

namespace {

// Budget-aware wrapper over BoxProblem::objective.
class BoxEvaluator {
  public:
    BoxEvaluator(const BoxProblem& p, int budget) : p_(p), budget_(budget) {}

    bool exhausted() const { return used_ >= budget_; }
    int remaining() const { return budget_ - used_; }

    Eigen::VectorXd clip(const Eigen::VectorXd& v) const {
        return v.cwiseMax(p_.lo).cwiseMin(p_.hi);
    }

    double operator()(const Eigen::VectorXd& v) {
        if (exhausted()) return kInf;
        ++used_;
        const Eigen::VectorXd x = clip(v);
        const double f = p_.objective(x);
        if (f < best_f_) {
            best_f_ = f;
            best_x_ = x;
        }
        return f;
    }

    const Eigen::VectorXd& best() const { return best_x_; }
    bool has_best() const { return best_x_.size() > 0; }

  private:
    const BoxProblem& p_;
    int budget_;
    int used_ = 0;
    double best_f_ = kInf;
    Eigen::VectorXd best_x_;
};

void nelder_mead(BoxEvaluator& eval, const Eigen::VectorXd& span, const Eigen::VectorXd& start,
                 int max_evals, std::mt19937_64& rng) {
    const int n = static_cast<int>(start.size());

    std::vector<Eigen::VectorXd> simplex;
    std::vector<double> value;
    simplex.push_back(start);
    value.push_back(eval(start));
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);
    for (int k = 0; k < n; ++k) {
        Eigen::VectorXd p = start;
        p[k] += 0.1 * span[k] * (1.0 + jitter(rng));
        simplex.push_back(p);
        value.push_back(eval(p));
    }

    int used = n + 1;
    while (used < max_evals && !eval.exhausted()) {
        std::vector<std::size_t> order(simplex.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&value](std::size_t a, std::size_t b) { return value[a] < value[b]; });

        const std::size_t best = order.front(), worst = order.back();
        const std::size_t second_worst = order[order.size() - 2];
        if (std::abs(value[worst] - value[best]) < 1e-14 * (1.0 + std::abs(value[best])))
            break;

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (std::size_t i : order)
            if (i != worst) centroid += simplex[i];
        centroid /= static_cast<double>(n);

        const auto try_point = [&](double coeff) {
            Eigen::VectorXd p = centroid + coeff * (centroid - simplex[worst]);
            const double f = eval(p);
            ++used;
            return std::make_pair(p, f);
        };

        auto [reflect, f_reflect] = try_point(1.0);
        if (f_reflect < value[best]) {
            auto [expand, f_expand] = try_point(2.0);
            if (f_expand < f_reflect) {
                simplex[worst] = expand;
                value[worst] = f_expand;
            } else {
                simplex[worst] = reflect;
                value[worst] = f_reflect;
            }
        } else if (f_reflect < value[second_worst]) {
            simplex[worst] = reflect;
            value[worst] = f_reflect;
        } else {
            auto [contract, f_contract] = try_point(-0.5);
            if (f_contract < value[worst]) {
                simplex[worst] = contract;
                value[worst] = f_contract;
            } else {
                for (std::size_t i : order) {
                    if (i == best) continue;
                    simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
                    value[i] = eval(simplex[i]);
                    ++used;
                }
            }
        }
    }
}

void particle_swarm(BoxEvaluator& eval, const BoxProblem& p,
                    const std::vector<Eigen::VectorXd>& seeds, int budget,
                    std::mt19937_64& rng) {
    const int n = static_cast<int>(p.lo.size());
    const int n_particles = std::clamp(budget / 50, 8, 40);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Eigen::VectorXd span = p.hi - p.lo;

    std::vector<Eigen::VectorXd> pos(n_particles), vel(n_particles), pbest(n_particles);
    std::vector<double> pbest_f(n_particles, kInf);
    Eigen::VectorXd gbest;
    double gbest_f = kInf;

    for (int i = 0; i < n_particles; ++i) {
        if (i < static_cast<int>(seeds.size())) {
            pos[i] = eval.clip(seeds[static_cast<std::size_t>(i)]);
        } else {
            pos[i].resize(n);
            for (int k = 0; k < n; ++k) pos[i][k] = p.lo[k] + unit(rng) * span[k];
        }
        vel[i].resize(n);
        for (int k = 0; k < n; ++k) vel[i][k] = 0.1 * span[k] * (unit(rng) - 0.5);
    }

    const double inertia = 0.7298, c_personal = 1.49618, c_global = 1.49618;
    while (!eval.exhausted()) {
        for (int i = 0; i < n_particles && !eval.exhausted(); ++i) {
            const double f = eval(pos[i]);
            if (f < pbest_f[i]) {
                pbest_f[i] = f;
                pbest[i] = pos[i];
            }
            if (f < gbest_f) {
                gbest_f = f;
                gbest = pos[i];
            }
        }
        if (eval.exhausted() || gbest.size() == 0) break;
        for (int i = 0; i < n_particles; ++i) {
            for (int k = 0; k < n; ++k) {
                vel[i][k] = inertia * vel[i][k] +
                            c_personal * unit(rng) * (pbest[i][k] - pos[i][k]) +
                            c_global * unit(rng) * (gbest[k] - pos[i][k]);
                const double v_max = 0.25 * span[k];
                vel[i][k] = std::clamp(vel[i][k], -v_max, v_max);
            }
            pos[i] += vel[i];
            pos[i] = pos[i].cwiseMax(p.lo).cwiseMin(p.hi);
        }
    }
}

}  // namespace

Eigen::VectorXd minimize_box(const BoxProblem& problem, SolverKind solver, int budget,
                             std::uint64_t seed, const std::vector<Eigen::VectorXd>& starts) {
    if (budget <= 0) throw std::invalid_argument("minimize_box: budget must be positive");
    BoxEvaluator eval(problem, budget);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int n = static_cast<int>(problem.lo.size());
    const Eigen::VectorXd span = problem.hi - problem.lo;

    const auto draw_start = [&]() -> Eigen::VectorXd {
        if (problem.sample_start) return problem.sample_start(rng);
        Eigen::VectorXd v(n);
        for (int k = 0; k < n; ++k) v[k] = problem.lo[k] + unit(rng) * span[k];
        return v;
    };

    if (solver == SolverKind::multistart_local) {
        const int per_start = std::max(4 * (n + 1), budget / 8);
        std::size_t next_start = 0;
        while (!eval.exhausted()) {
            const Eigen::VectorXd start =
                next_start < starts.size() ? starts[next_start++] : draw_start();
            if (eval.remaining() <= n + 1) {
                eval(start);
                break;
            }
            nelder_mead(eval, span, start, std::min(per_start, eval.remaining()), rng);
        }
    } else {
        std::vector<Eigen::VectorXd> seeds = starts;
        seeds.push_back(draw_start());
        particle_swarm(eval, problem, seeds, budget, rng);
    }

    if (!eval.has_best()) throw std::runtime_error("minimize_box: no evaluation succeeded");
    return eval.best();
}

DesignVector sample_feasible(Parametrization param, const ConstraintSet& cs, SensorType sensor,
                             std::uint64_t seed, const astro::Coe& chief) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Box box = design_box(param, cs);
    DesignVector x;
    x.param = param;
    x.v.resize(box.lo.size());
    for (int attempt = 0; attempt < 200000; ++attempt) {
        for (int k = 0; k < box.lo.size(); ++k)
            x.v[k] = box.lo[k] + unit(rng) * (box.hi[k] - box.lo[k]);
        if (feasible(x, cs, sensor, chief).ok) return x;
    }
    // Constraint set too tight for rejection sampling: fall back to a small
    // feasible neighbourhood of the chief orbit.
    if (param == Parametrization::coe_fixed_period) {
        const double e_max = 0.4 * cs.d_max / (2.0 * chief.a);
        x.v << unit(rng) * e_max, unit(rng) * 0.4 * cs.d_max / chief.a, chief.raan, chief.argp,
            chief.nu;
    } else {
        x.v << cs.r_min, cs.r_min, unit(rng) * std::numbers::pi, unit(rng) * kTwoPi,
            unit(rng) * kTwoPi, unit(rng) * kTwoPi;
    }
    if (!feasible(x, cs, sensor, chief).ok)
        throw std::runtime_error("sample_feasible: could not construct a feasible point");
    return x;
}

OptimizeResult optimize(const ObjectiveSpec& spec, const ConstraintSet& cs, SolverKind solver,
                        int budget, std::uint64_t seed, const std::vector<DesignVector>& starts,
                        const astro::Constants& c) {
    if (budget <= 0) throw std::invalid_argument("optimize: budget must be positive");
    const Parametrization param = spec.kind == ObjectiveKind::obs_lui
                                      ? Parametrization::apsis
                                      : Parametrization::coe_fixed_period;
    const Box box = design_box(param, cs);

    OptimizeResult result;
    std::map<std::vector<double>, ObjectiveReport> cache;
    double best_feasible = kInf;
    double penalty_mult = 1.0;
    int since_improvement = 0;

    BoxProblem problem;
    problem.lo = box.lo;
    problem.hi = box.hi;
    problem.objective = [&](const Eigen::VectorXd& v) {
        DesignVector x;
        x.param = param;
        x.v = v;
        const bool is_feasible = feasible(x, cs, spec.sensor, spec.chief).ok;

        std::vector<double> key(v.data(), v.data() + v.size());
        ObjectiveReport report;
        if (auto it = cache.find(key); it != cache.end()) {
            report = it->second;
        } else {
            report = eval_objective(x, spec, c);
            cache.emplace(std::move(key), report);
        }
        result.trace.push_back(
            {static_cast<int>(result.trace.size()) + 1, v, report.objective, is_feasible});

        if (is_feasible && report.objective < best_feasible) {
            best_feasible = report.objective;
            result.best = x;
            result.best_report = report;
            result.found_feasible = true;
            since_improvement = 0;
        } else if (++since_improvement > 64) {
            // Stagnating against the constraint boundary: lean harder on it.
            penalty_mult *= 2.0;
            since_improvement = 0;
        }

        if (is_feasible || !std::isfinite(report.objective)) return report.objective;
        const double viol = violation_magnitude(x, cs, spec.sensor, spec.chief);
        return report.objective + penalty_mult * (1e3 * std::abs(report.objective) + viol);
    };
    problem.sample_start = [&](std::mt19937_64& rng) {
        return sample_feasible(param, cs, spec.sensor, rng(), spec.chief).v;
    };

    std::vector<Eigen::VectorXd> start_points;
    for (const DesignVector& s : starts) {
        if (s.param != param)
            throw std::invalid_argument("optimize: start parametrization mismatch");
        start_points.push_back(s.v);
    }

    minimize_box(problem, solver, budget, seed, start_points);
    return result;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceEntry>& trace) {
    if (trace.empty()) return;
    out << "eval_id";
    for (Eigen::Index k = 0; k < trace.front().v.size(); ++k) out << ",x_" << k;
    out << ",objective,feasible\n";
    char buf[64];
    for (const TraceEntry& t : trace) {
        out << t.eval_id;
        for (Eigen::Index k = 0; k < t.v.size(); ++k) {
            std::snprintf(buf, sizeof(buf), "%.17g", t.v[k]);
            out << ',' << buf;
        }
        std::snprintf(buf, sizeof(buf), "%.17g", t.objective);
        out << ',' << buf << ',' << (t.feasible ? 1 : 0) << '\n';
    }
}

}  // namespace formod::optimize
