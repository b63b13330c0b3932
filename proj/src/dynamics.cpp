#include "formod/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace formod::dynamics {

Eigen::Vector3d CircularEphemeris::position(double t) const {
    const double phase = phase0_rad + rate_rad_s * t;
    const double cp = std::cos(phase), sp = std::sin(phase);
    const double ci = std::cos(inclination_rad), si = std::sin(inclination_rad);
    return radius_km * Eigen::Vector3d(cp, sp * ci, sp * si);
}

Eigen::Vector3d two_body_accel(const Eigen::Vector3d& r, const astro::Constants& c) {
    const double r_mag = r.norm();
    if (!(r_mag > 0.0)) throw std::invalid_argument("two_body_accel: zero position");
    return -c.mu_earth / (r_mag * r_mag * r_mag) * r;
}

Eigen::Vector3d relative_accel(const Eigen::Vector3d& r_chief, const Eigen::Vector3d& dr,
                               const astro::Constants& c) {
    const Eigen::Vector3d r_dep = r_chief + dr;
    const double rc = r_chief.norm();
    const double rd = r_dep.norm();
    if (!(rc > 0.0 && rd > 0.0))
        throw std::invalid_argument("relative_accel: spacecraft at Earth center");
    return -c.mu_earth * (r_dep / (rd * rd * rd) - r_chief / (rc * rc * rc));
}

Eigen::Matrix3d gravity_gradient(const Eigen::Vector3d& r, const astro::Constants& c) {
    const double r_mag = r.norm();
    if (!(r_mag > 0.0)) throw std::invalid_argument("gravity_gradient: zero position");
    const Eigen::Vector3d r_hat = r / r_mag;
    return c.mu_earth / (r_mag * r_mag * r_mag) *
           (3.0 * r_hat * r_hat.transpose() - Eigen::Matrix3d::Identity());
}

Eigen::Matrix3d gravity_gradient_rate(const Eigen::Vector3d& r, const Eigen::Vector3d& v,
                                      const astro::Constants& c) {
    const double r_mag = r.norm();
    if (!(r_mag > 0.0)) throw std::invalid_argument("gravity_gradient_rate: zero position");
    const Eigen::Vector3d r_hat = r / r_mag;
    const double radial_rate = r_hat.dot(v);
    const double scale = 3.0 * c.mu_earth / (r_mag * r_mag * r_mag * r_mag);
    return scale * (v * r_hat.transpose() + r_hat * v.transpose() -
                    radial_rate * (5.0 * r_hat * r_hat.transpose() - Eigen::Matrix3d::Identity()));
}

int absrel_deputy_count(Eigen::Index state_size) {
    if (state_size < 6 || state_size % 6 != 0)
        throw std::invalid_argument("absrel state size must be a positive multiple of 6");
    return static_cast<int>(state_size / 6) - 1;
}

Eigen::VectorXd absrel_derivative(const Eigen::VectorXd& x, const astro::Constants& c) {
    const int nd = absrel_deputy_count(x.size());
    Eigen::VectorXd dx(x.size());
    const Eigen::Vector3d r1 = x.segment<3>(0);
    dx.segment<3>(0) = x.segment<3>(3);
    dx.segment<3>(3) = two_body_accel(r1, c);
    for (int j = 0; j < nd; ++j) {
        const int base = 6 + 6 * j;
        dx.segment<3>(base) = x.segment<3>(base + 3);
        dx.segment<3>(base + 3) = relative_accel(r1, x.segment<3>(base), c);
    }
    return dx;
}

Eigen::MatrixXd absrel_jacobian(const Eigen::VectorXd& x, const astro::Constants& c) {
    const int nd = absrel_deputy_count(x.size());
    const Eigen::Index n = x.size();
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(n, n);
    const Eigen::Vector3d r1 = x.segment<3>(0);
    const Eigen::Matrix3d g1 = gravity_gradient(r1, c);
    f.block<3, 3>(0, 3).setIdentity();
    f.block<3, 3>(3, 0) = g1;
    for (int j = 0; j < nd; ++j) {
        const int base = 6 + 6 * j;
        const Eigen::Matrix3d gj = gravity_gradient(r1 + x.segment<3>(base), c);
        f.block<3, 3>(base, base + 3).setIdentity();
        f.block<3, 3>(base + 3, 0) = gj - g1;
        f.block<3, 3>(base + 3, base) = gj;
    }
    return f;
}

namespace {

using Rhs = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;

// Dormand-Prince 5(4) tableau.
constexpr double kA21 = 1.0 / 5.0;
constexpr double kA31 = 3.0 / 40.0, kA32 = 9.0 / 40.0;
constexpr double kA41 = 44.0 / 45.0, kA42 = -56.0 / 15.0, kA43 = 32.0 / 9.0;
constexpr double kA51 = 19372.0 / 6561.0, kA52 = -25360.0 / 2187.0, kA53 = 64448.0 / 6561.0,
                 kA54 = -212.0 / 729.0;
constexpr double kA61 = 9017.0 / 3168.0, kA62 = -355.0 / 33.0, kA63 = 46732.0 / 5247.0,
                 kA64 = 49.0 / 176.0, kA65 = -5103.0 / 18656.0;
constexpr double kB1 = 35.0 / 384.0, kB3 = 500.0 / 1113.0, kB4 = 125.0 / 192.0,
                 kB5 = -2187.0 / 6784.0, kB6 = 11.0 / 84.0;
// 5th-order minus embedded 4th-order weights (error estimate).
constexpr double kE1 = 71.0 / 57600.0, kE3 = -71.0 / 16695.0, kE4 = 71.0 / 1920.0,
                 kE5 = -17253.0 / 339200.0, kE6 = 22.0 / 525.0, kE7 = -1.0 / 40.0;

struct Dopri5Step {
    Eigen::VectorXd y_next;
    Eigen::VectorXd k_last;   // FSAL stage, valid as k1 of the next step
    double err_norm;
};

Dopri5Step dopri5_step(const Rhs& f, double t, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& k1, double h, const PropagatorConfig& cfg) {
    const Eigen::VectorXd k2 = f(t + kA21 * h, y + h * (kA21 * k1));
    const Eigen::VectorXd k3 = f(t + 0.3 * h, y + h * (kA31 * k1 + kA32 * k2));
    const Eigen::VectorXd k4 = f(t + 0.8 * h, y + h * (kA41 * k1 + kA42 * k2 + kA43 * k3));
    const Eigen::VectorXd k5 =
        f(t + 8.0 / 9.0 * h, y + h * (kA51 * k1 + kA52 * k2 + kA53 * k3 + kA54 * k4));
    const Eigen::VectorXd k6 =
        f(t + h, y + h * (kA61 * k1 + kA62 * k2 + kA63 * k3 + kA64 * k4 + kA65 * k5));
    Eigen::VectorXd y_next = y + h * (kB1 * k1 + kB3 * k3 + kB4 * k4 + kB5 * k5 + kB6 * k6);
    const Eigen::VectorXd k7 = f(t + h, y_next);

    const Eigen::VectorXd err =
        h * (kE1 * k1 + kE3 * k3 + kE4 * k4 + kE5 * k5 + kE6 * k6 + kE7 * k7);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double scale =
            cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[i]), std::abs(y_next[i]));
        const double e = err[i] / scale;
        acc += e * e;
    }
    return {std::move(y_next), k7, std::sqrt(acc / static_cast<double>(y.size()))};
}

Eigen::VectorXd integrate_dopri5(const Rhs& f, Eigen::VectorXd y, double t0, double t1,
                                 const PropagatorConfig& cfg) {
    const double span = t1 - t0;
    double t = t0;
    double h = std::min(cfg.max_step, span);
    Eigen::VectorXd k1 = f(t, y);
    while (t < t1) {
        h = std::min({h, cfg.max_step, t1 - t});
        if (!(h > std::abs(span) * 1e-14))
            throw std::runtime_error("adaptive step size underflow: integration diverged");
        Dopri5Step step = dopri5_step(f, t, y, k1, h, cfg);
        if (step.err_norm <= 1.0) {
            t += h;
            y = std::move(step.y_next);
            k1 = std::move(step.k_last);
            const double grow =
                step.err_norm > 0.0 ? 0.9 * std::pow(step.err_norm, -0.2) : 5.0;
            h *= std::clamp(grow, 0.2, 5.0);
        } else {
            h *= std::max(0.2, 0.9 * std::pow(step.err_norm, -0.2));
        }
    }
    return y;
}

Eigen::VectorXd integrate_rk4(const Rhs& f, Eigen::VectorXd y, double t0, double t1,
                              double max_step) {
    const double span = t1 - t0;
    const int n_steps = std::max(1, static_cast<int>(std::ceil(span / max_step)));
    const double h = span / n_steps;
    double t = t0;
    for (int s = 0; s < n_steps; ++s) {
        const Eigen::VectorXd c1 = f(t, y);
        const Eigen::VectorXd c2 = f(t + 0.5 * h, y + 0.5 * h * c1);
        const Eigen::VectorXd c3 = f(t + 0.5 * h, y + 0.5 * h * c2);
        const Eigen::VectorXd c4 = f(t + h, y + h * c3);
        y += h / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4);
        t += h;
    }
    return y;
}

// RHS of state + column-stacked STM under the variational equations.
Eigen::VectorXd augmented_derivative(const Eigen::VectorXd& z, Eigen::Index n,
                                     const astro::Constants& c) {
    const Eigen::VectorXd x = z.head(n);
    const Eigen::MatrixXd phi = Eigen::Map<const Eigen::MatrixXd>(z.data() + n, n, n);
    const Eigen::MatrixXd f = absrel_jacobian(x, c);
    Eigen::VectorXd dz(z.size());
    dz.head(n) = absrel_derivative(x, c);
    Eigen::Map<Eigen::MatrixXd>(dz.data() + n, n, n) = f * phi;
    return dz;
}

}  // namespace

PropagationResult propagate(const Eigen::VectorXd& x, double dt, const PropagatorConfig& cfg,
                            bool with_stm, const astro::Constants& c) {
    if (!(dt > 0.0)) throw std::invalid_argument("propagate: dt must be positive");
    const Eigen::Index n = x.size();
    absrel_deputy_count(n);   // validates the layout

    if (cfg.method == IntegrationMethod::euler) {
        PropagationResult out;
        out.state = x + dt * absrel_derivative(x, c);
        if (with_stm)
            out.stm = Eigen::MatrixXd::Identity(n, n) + dt * absrel_jacobian(x, c);
        return out;
    }

    const Rhs plain = [&c](double, const Eigen::VectorXd& y) { return absrel_derivative(y, c); };
    const Rhs augmented = [&c, n](double, const Eigen::VectorXd& z) {
        return augmented_derivative(z, n, c);
    };

    Eigen::VectorXd z0;
    const Rhs* rhs = &plain;
    if (with_stm) {
        z0.resize(n + n * n);
        z0.head(n) = x;
        Eigen::Map<Eigen::MatrixXd>(z0.data() + n, n, n).setIdentity();
        rhs = &augmented;
    } else {
        z0 = x;
    }

    Eigen::VectorXd z1;
    if (cfg.method == IntegrationMethod::adaptive_rk45)
        z1 = integrate_dopri5(*rhs, std::move(z0), 0.0, dt, cfg);
    else
        z1 = integrate_rk4(*rhs, std::move(z0), 0.0, dt, cfg.max_step);

    PropagationResult out;
    out.state = z1.head(n);
    if (with_stm) out.stm = Eigen::Map<const Eigen::MatrixXd>(z1.data() + n, n, n);
    return out;
}

StmTrajectory propagate_with_stm_grid(const Eigen::VectorXd& x0,
                                      const std::vector<double>& epochs,
                                      const PropagatorConfig& cfg, const astro::Constants& c) {
    if (epochs.empty()) throw std::invalid_argument("propagate_with_stm_grid: empty epoch grid");
    const Eigen::Index n = x0.size();
    StmTrajectory traj;
    traj.epochs = epochs;
    traj.states.reserve(epochs.size());
    traj.stms.reserve(epochs.size());

    Eigen::VectorXd x = x0;
    Eigen::MatrixXd phi_acc = Eigen::MatrixXd::Identity(n, n);
    double t = epochs.front();
    if (t != 0.0) {
        PropagationResult head = propagate(x, t, cfg, false, c);
        x = head.state;
    }
    traj.states.push_back(x);
    traj.stms.push_back(phi_acc);

    for (std::size_t k = 1; k < epochs.size(); ++k) {
        const double dt = epochs[k] - t;
        if (!(dt > 0.0))
            throw std::invalid_argument("propagate_with_stm_grid: epochs must increase");
        PropagationResult seg = propagate(x, dt, cfg, true, c);
        x = seg.state;
        phi_acc = seg.stm * phi_acc;
        t = epochs[k];
        traj.states.push_back(x);
        traj.stms.push_back(phi_acc);
    }
    return traj;
}

Eigen::Vector3d truth_accel(const Eigen::Vector3d& r, double t, const TruthModelConfig& cfg,
                            const astro::Constants& c) {
    Eigen::Vector3d a = two_body_accel(r, c);

    if (cfg.enable_j2) {
        const double r_mag = r.norm();
        const double z_ratio2 = (r.z() / r_mag) * (r.z() / r_mag);
        const double k = -1.5 * cfg.j2 * c.mu_earth * c.r_earth * c.r_earth /
                         (r_mag * r_mag * r_mag * r_mag);
        a += k * Eigen::Vector3d((1.0 - 5.0 * z_ratio2) * r.x() / r_mag,
                                 (1.0 - 5.0 * z_ratio2) * r.y() / r_mag,
                                 (3.0 - 5.0 * z_ratio2) * r.z() / r_mag);
    }

    if (cfg.enable_lunisolar) {
        const auto third_body = [&r](double mu, const Eigen::Vector3d& r_body) {
            const Eigen::Vector3d d = r_body - r;
            return mu * (d / std::pow(d.norm(), 3) - r_body / std::pow(r_body.norm(), 3));
        };
        a += third_body(cfg.mu_sun, cfg.sun.position(t));
        a += third_body(cfg.mu_moon, cfg.moon.position(t));
    }

    if (cfg.enable_srp && cfg.srp_area_to_mass > 0.0) {
        const Eigen::Vector3d r_sun = cfg.sun.position(t);
        const Eigen::Vector3d sun_hat = r_sun.normalized();
        // Cylindrical shadow: behind Earth relative to the Sun and inside the
        // Earth-radius cylinder.
        const double along = r.dot(sun_hat);
        const bool shadowed =
            along < 0.0 && (r - along * sun_hat).norm() < c.r_earth;
        if (!shadowed) {
            const Eigen::Vector3d d = r - r_sun;
            const double d_mag = d.norm();
            const double accel_m_s2 =
                c.srp_pressure * cfg.srp_area_to_mass * (c.au / d_mag) * (c.au / d_mag);
            a += 1e-3 * accel_m_s2 * (d / d_mag);
        }
    }

    return a;
}

std::vector<Eigen::Vector3d> truth_accel_all(const std::vector<Vector6d>& states, double t,
                                             const TruthModelConfig& cfg,
                                             const astro::Constants& c) {
    std::vector<Eigen::Vector3d> out;
    out.reserve(states.size());
    for (const Vector6d& s : states) out.push_back(truth_accel(s.head<3>(), t, cfg, c));
    return out;
}

void truth_step(std::vector<Vector6d>& states, double t, double dt, const TruthModelConfig& cfg,
                const astro::Constants& c) {
    for (Vector6d& s : states) {
        const auto deriv = [&](double tau, const Vector6d& y) {
            Vector6d dy;
            dy.head<3>() = y.tail<3>();
            dy.tail<3>() = truth_accel(y.head<3>(), tau, cfg, c);
            return dy;
        };
        const Vector6d c1 = deriv(t, s);
        const Vector6d c2 = deriv(t + 0.5 * dt, s + 0.5 * dt * c1);
        const Vector6d c3 = deriv(t + 0.5 * dt, s + 0.5 * dt * c2);
        const Vector6d c4 = deriv(t + dt, s + dt * c3);
        s += dt / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4);
    }
}

}  // namespace formod::dynamics
