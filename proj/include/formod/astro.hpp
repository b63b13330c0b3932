#pragma once

#include <Eigen/Core>

namespace formod::astro {

/// Physical constants. Distances in km, times in s, pressure in N/m^2.
struct Constants {
    double mu_earth = 398600.4418;    // km^3/s^2, WGS-84
    double r_earth = 6378.137;        // km, equatorial radius
    double au = 1.495978707e8;        // km
    double srp_pressure = 4.56e-6;    // N/m^2 at 1 AU
};

inline constexpr double kDegToRad = 0.017453292519943295;
inline constexpr double kRadToDeg = 57.29577951308232;
inline constexpr double kArcsecToRad = kDegToRad / 3600.0;

/// Classical orbital elements, elliptic orbits only. Angles in radians.
struct Coe {
    double a;       // semi-major axis, km
    double e;       // eccentricity
    double i;       // inclination, [0, pi]
    double raan;    // right ascension of ascending node, [0, 2pi)
    double argp;    // argument of perigee, [0, 2pi)
    double nu;      // true anomaly, [0, 2pi)
};

/// Inertial position/velocity at an epoch (seconds past scenario start).
struct CartesianState {
    Eigen::Vector3d r{Eigen::Vector3d::Zero()};   // km
    Eigen::Vector3d v{Eigen::Vector3d::Zero()};   // km/s
    double epoch = 0.0;                           // s
};

/// Position/velocity of a deputy relative to the chief, inertial axes.
struct RelativeState {
    Eigen::Vector3d dr{Eigen::Vector3d::Zero()};  // km
    Eigen::Vector3d dv{Eigen::Vector3d::Zero()};  // km/s
};

/// Wraps an angle to [0, 2pi).
double wrap_two_pi(double angle);

/// Wraps an angle to (-pi, pi].
double wrap_pi(double angle);

CartesianState coe_to_cartesian(const Coe& coe, const Constants& c = {});

/// Inverse of coe_to_cartesian. Near-circular and near-equatorial
/// degeneracies are resolved by folding the undefined angle into the next
/// one down the chain (argp into nu, raan into argp), never by failing.
Coe cartesian_to_coe(const CartesianState& s, const Constants& c = {});

/// Semi-major axis and eccentricity from the two apsis radii (order-free).
std::pair<double, double> apsides_to_shape(double r_apsis_1, double r_apsis_2);

/// True anomaly -> mean anomaly through the eccentric anomaly. e in [0, 1).
double true_to_mean_anomaly(double nu, double e);

/// Mean anomaly -> true anomaly; Newton iteration on Kepler's equation,
/// residual below 1e-12 rad.
double mean_to_true_anomaly(double mean_anomaly, double e);

double orbital_period(double a, const Constants& c = {});

/// v^2/2 - mu/r, km^2/s^2.
double specific_energy(const CartesianState& s, const Constants& c = {});

/// |r x v|, km^2/s.
double angular_momentum(const CartesianState& s);

}  // namespace formod::astro
