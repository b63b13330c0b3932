#include "formod/astro.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace formod::astro {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Below these thresholds the node/perigee direction is numerically
// meaningless; the chief orbit sits exactly on both degeneracies.
constexpr double kCircularTol = 1e-11;
constexpr double kEquatorialTol = 1e-11;
}  // namespace

double wrap_two_pi(double angle) {
    double w = std::fmod(angle, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    return w;
}

double wrap_pi(double angle) {
    double w = std::fmod(angle, kTwoPi);
    if (w > std::numbers::pi) w -= kTwoPi;
    if (w <= -std::numbers::pi) w += kTwoPi;
    return w;
}

CartesianState coe_to_cartesian(const Coe& coe, const Constants& c) {
    if (!(coe.a > 0.0)) throw std::invalid_argument("coe_to_cartesian: a must be positive");
    if (!(coe.e >= 0.0 && coe.e < 1.0))
        throw std::invalid_argument("coe_to_cartesian: only elliptic orbits (0 <= e < 1)");

    const double p = coe.a * (1.0 - coe.e * coe.e);
    const double cnu = std::cos(coe.nu);
    const double snu = std::sin(coe.nu);
    const double r_mag = p / (1.0 + coe.e * cnu);

    // Perifocal position/velocity.
    const Eigen::Vector3d r_pf(r_mag * cnu, r_mag * snu, 0.0);
    const double vscale = std::sqrt(c.mu_earth / p);
    const Eigen::Vector3d v_pf(-vscale * snu, vscale * (coe.e + cnu), 0.0);

    const double cO = std::cos(coe.raan), sO = std::sin(coe.raan);
    const double co = std::cos(coe.argp), so = std::sin(coe.argp);
    const double ci = std::cos(coe.i), si = std::sin(coe.i);

    Eigen::Matrix3d rot;
    rot << cO * co - sO * so * ci, -cO * so - sO * co * ci, sO * si,
           sO * co + cO * so * ci, -sO * so + cO * co * ci, -cO * si,
           so * si,                 co * si,                 ci;

    CartesianState out;
    out.r = rot * r_pf;
    out.v = rot * v_pf;
    return out;
}

Coe cartesian_to_coe(const CartesianState& s, const Constants& c) {
    const double r_mag = s.r.norm();
    if (!(r_mag > 0.0)) throw std::invalid_argument("cartesian_to_coe: zero position");

    const Eigen::Vector3d h = s.r.cross(s.v);
    const double h_mag = h.norm();
    if (!(h_mag > 0.0)) throw std::invalid_argument("cartesian_to_coe: rectilinear orbit");

    const double v2 = s.v.squaredNorm();
    const double energy = 0.5 * v2 - c.mu_earth / r_mag;
    if (!(energy < 0.0)) throw std::invalid_argument("cartesian_to_coe: orbit is not elliptic");
    const double a = -c.mu_earth / (2.0 * energy);

    const Eigen::Vector3d e_vec =
        ((v2 - c.mu_earth / r_mag) * s.r - s.r.dot(s.v) * s.v) / c.mu_earth;
    double e = e_vec.norm();

    const double i = std::acos(std::clamp(h.z() / h_mag, -1.0, 1.0));

    // Node vector; undefined for equatorial orbits.
    const Eigen::Vector3d n(-h.y(), h.x(), 0.0);
    const double n_mag = n.norm();

    const bool equatorial = i < kEquatorialTol || n_mag == 0.0;
    const bool circular = e < kCircularTol;

    double raan, argp, nu;
    if (!equatorial) {
        raan = wrap_two_pi(std::atan2(n.y(), n.x()));
        if (!circular) {
            argp = std::acos(std::clamp(n.dot(e_vec) / (n_mag * e), -1.0, 1.0));
            if (e_vec.z() < 0.0) argp = kTwoPi - argp;
            nu = std::acos(std::clamp(e_vec.dot(s.r) / (e * r_mag), -1.0, 1.0));
            if (s.r.dot(s.v) < 0.0) nu = kTwoPi - nu;
        } else {
            // Circular inclined: measure the argument of latitude from the node.
            argp = 0.0;
            e = 0.0;
            nu = std::acos(std::clamp(n.dot(s.r) / (n_mag * r_mag), -1.0, 1.0));
            if (s.r.z() < 0.0) nu = kTwoPi - nu;
        }
    } else {
        raan = 0.0;
        if (!circular) {
            // Equatorial eccentric: true longitude of perigee folded into argp.
            argp = wrap_two_pi(std::atan2(e_vec.y(), e_vec.x()));
            if (h.z() < 0.0) argp = kTwoPi - argp;
            nu = std::acos(std::clamp(e_vec.dot(s.r) / (e * r_mag), -1.0, 1.0));
            if (s.r.dot(s.v) < 0.0) nu = kTwoPi - nu;
        } else {
            // Circular equatorial: true longitude folded into nu.
            argp = 0.0;
            e = 0.0;
            nu = wrap_two_pi(std::atan2(s.r.y(), s.r.x()));
            if (h.z() < 0.0) nu = kTwoPi - nu;
        }
    }

    return Coe{a, e, i, wrap_two_pi(raan), wrap_two_pi(argp), wrap_two_pi(nu)};
}

std::pair<double, double> apsides_to_shape(double r_apsis_1, double r_apsis_2) {
    if (!(r_apsis_1 > 0.0 && r_apsis_2 > 0.0))
        throw std::invalid_argument("apsides_to_shape: radii must be positive");
    const double a = 0.5 * (r_apsis_1 + r_apsis_2);
    const double e = std::abs(r_apsis_1 - r_apsis_2) / (r_apsis_1 + r_apsis_2);
    return {a, e};
}

double true_to_mean_anomaly(double nu, double e) {
    if (!(e >= 0.0 && e < 1.0))
        throw std::invalid_argument("true_to_mean_anomaly: e must be in [0, 1)");
    const double ecc_anom =
        std::atan2(std::sqrt(1.0 - e * e) * std::sin(nu), e + std::cos(nu));
    double m = ecc_anom - e * std::sin(ecc_anom);
    // Keep M on the same revolution as nu so callers can add multiples of 2pi.
    m += nu - wrap_pi(nu);
    return m;
}

double mean_to_true_anomaly(double mean_anomaly, double e) {
    if (!(e >= 0.0 && e < 1.0))
        throw std::invalid_argument("mean_to_true_anomaly: e must be in [0, 1)");
    const double m = wrap_pi(mean_anomaly);
    double ecc_anom = e < 0.8 ? m : std::numbers::pi * (m >= 0 ? 1.0 : -1.0);
    for (int iter = 0; iter < 50; ++iter) {
        const double f = ecc_anom - e * std::sin(ecc_anom) - m;
        if (std::abs(f) < 1e-13) break;
        ecc_anom -= f / (1.0 - e * std::cos(ecc_anom));
    }
    const double nu = 2.0 * std::atan2(std::sqrt(1.0 + e) * std::sin(0.5 * ecc_anom),
                                       std::sqrt(1.0 - e) * std::cos(0.5 * ecc_anom));
    return wrap_two_pi(nu + (mean_anomaly - m));
}

double orbital_period(double a, const Constants& c) {
    if (!(a > 0.0)) throw std::invalid_argument("orbital_period: a must be positive");
    return kTwoPi * std::sqrt(a * a * a / c.mu_earth);
}

double specific_energy(const CartesianState& s, const Constants& c) {
    return 0.5 * s.v.squaredNorm() - c.mu_earth / s.r.norm();
}

double angular_momentum(const CartesianState& s) {
    return s.r.cross(s.v).norm();
}

}  // namespace formod::astro
