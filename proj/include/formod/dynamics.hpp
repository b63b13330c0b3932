#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "formod/astro.hpp"

namespace formod::dynamics {

/// Gravity-gradient tensor and its time derivative at one point.
struct GravityGradient {
    Eigen::Matrix3d g;      // 1/s^2, symmetric, trace-free
    Eigen::Matrix3d gdot;   // 1/s^3, symmetric
};

/// Circular-orbit analytic ephemeris for a perturbing body.
struct CircularEphemeris {
    double radius_km = 0.0;
    double rate_rad_s = 0.0;
    double phase0_rad = 0.0;
    double inclination_rad = 0.0;

    Eigen::Vector3d position(double t) const;
};

/// Reduced-fidelity force model for truth trajectories: zonal J2,
/// point-mass Sun/Moon on circular analytic ephemerides, cannonball SRP
/// with a cylindrical Earth shadow.
struct TruthModelConfig {
    bool enable_j2 = true;
    bool enable_lunisolar = true;
    bool enable_srp = true;
    double srp_area_to_mass = 0.01;   // m^2/kg
    double j2 = 1.08262668e-3;
    double mu_sun = 1.32712440018e11;   // km^3/s^2
    double mu_moon = 4902.800066;       // km^3/s^2
    CircularEphemeris sun{1.495978707e8, 2.0 * 3.14159265358979324 / (365.25 * 86400.0), 0.0, 0.0};
    CircularEphemeris moon{384400.0, 2.0 * 3.14159265358979324 / (27.32 * 86400.0), 0.0,
                           5.14 * astro::kDegToRad};
};

enum class IntegrationMethod { adaptive_rk45, fixed_rk4, euler };

struct PropagatorConfig {
    IntegrationMethod method = IntegrationMethod::adaptive_rk45;
    double rel_tol = 1e-3;
    double abs_tol = 1e-6;
    double max_step = 300.0;   // s
};

Eigen::Vector3d two_body_accel(const Eigen::Vector3d& r, const astro::Constants& c = {});

/// Exact differential gravity between deputy (chief + dr) and chief.
Eigen::Vector3d relative_accel(const Eigen::Vector3d& r_chief, const Eigen::Vector3d& dr,
                               const astro::Constants& c = {});

/// d(two_body_accel)/dr = mu/|r|^3 (3 r_hat r_hat^T - I).
Eigen::Matrix3d gravity_gradient(const Eigen::Vector3d& r, const astro::Constants& c = {});

/// Time derivative of the gravity gradient along a trajectory with velocity v.
Eigen::Matrix3d gravity_gradient_rate(const Eigen::Vector3d& r, const Eigen::Vector3d& v,
                                      const astro::Constants& c = {});

// ---------------------------------------------------------------------------
// Stacked chief-absolute + deputies-relative state, keplerian dynamics.
// Layout: [r1 (3), v1 (3), dr_2 (3), dv_2 (3), ..., dr_N (3), dv_N (3)].
// ---------------------------------------------------------------------------

/// Number of deputies implied by a stacked state vector size.
int absrel_deputy_count(Eigen::Index state_size);

Eigen::VectorXd absrel_derivative(const Eigen::VectorXd& x, const astro::Constants& c = {});

/// Dense Jacobian F = d(absrel_derivative)/dx assembled from gravity gradients.
Eigen::MatrixXd absrel_jacobian(const Eigen::VectorXd& x, const astro::Constants& c = {});

struct PropagationResult {
    Eigen::VectorXd state;
    Eigen::MatrixXd stm;   // empty unless requested
};

/// Propagates the stacked absolute+relative state by dt. With `with_stm` the
/// state transition matrix comes from the variational equations for the RK
/// methods, or I + F dt for the single-step Euler method.
PropagationResult propagate(const Eigen::VectorXd& x, double dt, const PropagatorConfig& cfg,
                            bool with_stm, const astro::Constants& c = {});

/// States and accumulated STMs Phi_{k|0} on a caller-supplied epoch grid.
struct StmTrajectory {
    std::vector<double> epochs;
    std::vector<Eigen::VectorXd> states;
    std::vector<Eigen::MatrixXd> stms;
};

StmTrajectory propagate_with_stm_grid(const Eigen::VectorXd& x0,
                                      const std::vector<double>& epochs,
                                      const PropagatorConfig& cfg,
                                      const astro::Constants& c = {});

// ---------------------------------------------------------------------------
// Truth model over absolute states.
// ---------------------------------------------------------------------------

/// Perturbed acceleration of one spacecraft at absolute position r, time t.
Eigen::Vector3d truth_accel(const Eigen::Vector3d& r, double t, const TruthModelConfig& cfg,
                            const astro::Constants& c = {});

using Vector6d = Eigen::Matrix<double, 6, 1>;

/// truth_accel applied to every spacecraft of a formation.
std::vector<Eigen::Vector3d> truth_accel_all(const std::vector<Vector6d>& states, double t,
                                             const TruthModelConfig& cfg,
                                             const astro::Constants& c = {});

/// Fixed-step RK4 advance of all spacecraft absolute states under the truth
/// model. Steps the formation from t to t + dt in one RK4 step; callers pick
/// dt small enough for their accuracy needs (1 s in the simulation harness).
void truth_step(std::vector<Vector6d>& states, double t, double dt, const TruthModelConfig& cfg,
                const astro::Constants& c = {});

}  // namespace formod::dynamics
