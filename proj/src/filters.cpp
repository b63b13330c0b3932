#include "formod/filters.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <ostream>

#include "formod/dynamics.hpp"

namespace formod::filters {

namespace {

void check_finite(const Eigen::VectorXd& x) {
    if (!x.allFinite()) throw FilterDivergence("filter state is not finite");
}

// Applies the PVA transition in place to the covariance: first Phi * P over
// block rows, then (.) * Phi^T over block columns. The ordering r before v
// keeps the in-place update exact (r reads old v and a, v reads old a).
void pva_apply_transition(Eigen::MatrixXd& p, int n_deputies, double dt) {
    const double half_dt2 = 0.5 * dt * dt;
    for (int d = 0; d < n_deputies; ++d) {
        const int base = 9 * d;
        p.middleRows(base, 3) +=
            dt * p.middleRows(base + 3, 3) + half_dt2 * p.middleRows(base + 6, 3);
        p.middleRows(base + 3, 3) += dt * p.middleRows(base + 6, 3);
    }
    for (int d = 0; d < n_deputies; ++d) {
        const int base = 9 * d;
        p.middleCols(base, 3) +=
            dt * p.middleCols(base + 3, 3) + half_dt2 * p.middleCols(base + 6, 3);
        p.middleCols(base + 3, 3) += dt * p.middleCols(base + 6, 3);
    }
}

// F * M for the chief-absolute + relative keplerian Jacobian, given the
// chief gradient g1 and per-deputy gradients g_dep evaluated at the deputies.
Eigen::MatrixXd absrel_jacobian_times(const Eigen::Matrix3d& g1,
                                      const std::vector<Eigen::Matrix3d>& g_dep,
                                      const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out(m.rows(), m.cols());
    out.middleRows(0, 3) = m.middleRows(3, 3);
    out.middleRows(3, 3) = g1 * m.middleRows(0, 3);
    for (std::size_t j = 0; j < g_dep.size(); ++j) {
        const int base = 6 + 6 * static_cast<int>(j);
        out.middleRows(base, 3) = m.middleRows(base + 3, 3);
        out.middleRows(base + 3, 3) =
            (g_dep[j] - g1) * m.middleRows(0, 3) + g_dep[j] * m.middleRows(base, 3);
    }
    return out;
}

}  // namespace

Eigen::MatrixXd pva_transition(int n_deputies, double dt) {
    const int n = 9 * n_deputies;
    Eigen::MatrixXd phi = Eigen::MatrixXd::Identity(n, n);
    for (int d = 0; d < n_deputies; ++d) {
        const int base = 9 * d;
        phi.block<3, 3>(base, base + 3) = dt * Eigen::Matrix3d::Identity();
        phi.block<3, 3>(base, base + 6) = 0.5 * dt * dt * Eigen::Matrix3d::Identity();
        phi.block<3, 3>(base + 3, base + 6) = dt * Eigen::Matrix3d::Identity();
    }
    return phi;
}

Eigen::MatrixXd pva_process_noise(int n_deputies, double dt, double q) {
    const int n = 9 * n_deputies;
    const double dt2 = dt * dt, dt3 = dt2 * dt, dt4 = dt3 * dt, dt5 = dt4 * dt;
    Eigen::Matrix3d coeff;
    coeff << dt5 / 20.0, dt4 / 8.0, dt3 / 6.0,
             dt4 / 8.0,  dt3 / 3.0, dt2 / 2.0,
             dt3 / 6.0,  dt2 / 2.0, dt;
    Eigen::MatrixXd qd = Eigen::MatrixXd::Zero(n, n);
    for (int d = 0; d < n_deputies; ++d)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                qd.block<3, 3>(9 * d + 3 * a, 9 * d + 3 * b) =
                    q * coeff(a, b) * Eigen::Matrix3d::Identity();
    return qd;
}

Eigen::MatrixXd absrel_process_noise(const Eigen::VectorXd& q_all, double dt) {
    const int n = 6 * static_cast<int>(q_all.size());
    const double dt2 = dt * dt, dt3 = dt2 * dt;
    Eigen::MatrixXd qd = Eigen::MatrixXd::Zero(n, n);
    for (int s = 0; s < q_all.size(); ++s) {
        const int base = 6 * s;
        const double q = q_all[s];
        qd.block<3, 3>(base, base) = 0.5 * q * dt3 * Eigen::Matrix3d::Identity();
        qd.block<3, 3>(base, base + 3) = 0.5 * q * dt2 * Eigen::Matrix3d::Identity();
        qd.block<3, 3>(base + 3, base) = 0.5 * q * dt2 * Eigen::Matrix3d::Identity();
        qd.block<3, 3>(base + 3, base + 3) = q * dt * Eigen::Matrix3d::Identity();
    }
    return qd;
}

PvaFilterState predict_pva(PvaFilterState s, double dt) {
    if (dt == 0.0) return s;
    const int nd = s.n_deputies();
    const double half_dt2 = 0.5 * dt * dt;
    for (int d = 0; d < nd; ++d) {
        const int base = 9 * d;
        s.x.segment<3>(base) +=
            dt * s.x.segment<3>(base + 3) + half_dt2 * s.x.segment<3>(base + 6);
        s.x.segment<3>(base + 3) += dt * s.x.segment<3>(base + 6);
    }
    pva_apply_transition(s.P, nd, dt);

    const double dt2 = dt * dt, dt3 = dt2 * dt, dt4 = dt3 * dt, dt5 = dt4 * dt;
    Eigen::Matrix3d coeff;
    coeff << dt5 / 20.0, dt4 / 8.0, dt3 / 6.0,
             dt4 / 8.0,  dt3 / 3.0, dt2 / 2.0,
             dt3 / 6.0,  dt2 / 2.0, dt;
    for (int d = 0; d < nd; ++d)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                s.P.block<3, 3>(9 * d + 3 * a, 9 * d + 3 * b).diagonal().array() +=
                    s.q * coeff(a, b);
    s.epoch += dt;
    return s;
}

AbsRelFilterState predict_absrel(AbsRelFilterState s, double dt, const astro::Constants& c) {
    if (!(dt > 0.0)) throw std::invalid_argument("predict_absrel: dt must be positive");
    const int nd = s.n_deputies();
    if (s.q_rel.size() != nd)
        throw std::invalid_argument("predict_absrel: q_rel size does not match deputies");
    const Eigen::Vector3d r1 = s.x.segment<3>(0);
    if (!(r1.norm() > 1.0)) throw FilterDivergence("chief position estimate collapsed");

    const Eigen::Matrix3d g1 = dynamics::gravity_gradient(r1, c);
    std::vector<Eigen::Matrix3d> g_dep(nd);
    for (int j = 0; j < nd; ++j)
        g_dep[j] = dynamics::gravity_gradient(r1 + s.x.segment<3>(6 + 6 * j), c);

    // Euler state prediction.
    s.x += dt * dynamics::absrel_derivative(s.x, c);

    // P <- (I + F dt) P (I + F dt)^T + Qd, without forming F.
    const Eigen::MatrixXd fp = absrel_jacobian_times(g1, g_dep, s.P);
    const Eigen::MatrixXd fpf = absrel_jacobian_times(g1, g_dep, fp.transpose());
    s.P += dt * (fp + fp.transpose()) + dt * dt * fpf;

    Eigen::VectorXd q_all(1 + nd);
    q_all[0] = s.q_abs;
    q_all.tail(nd) = s.q_rel;
    s.P += absrel_process_noise(q_all, dt);
    s.P = 0.5 * (s.P + s.P.transpose()).eval();
    s.epoch += dt;
    return s;
}

namespace {

// Position block offset of spacecraft `sc` in the given layout; -1 for the
// chief (its motion does not shift the relative geometry).
int position_block(Variant variant, int sc) {
    if (sc == 1) return -1;
    return variant == Variant::pva ? 9 * (sc - 2) : 6 + 6 * (sc - 2);
}

StackedUpdate linearize(Variant variant, const Eigen::VectorXd& x,
                        std::span<const measurement::Measurement> measurements,
                        const measurement::MeasKind& modes,
                        const measurement::NoiseSpec& noise) {
    const Eigen::Index n = x.size();
    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> innov, rdiag;

    for (const measurement::Measurement& m : measurements) {
        const measurement::PairKey pair(m.sc_a, m.sc_b);
        const int block_a = position_block(variant, m.sc_a);
        const int block_b = position_block(variant, m.sc_b);

        Eigen::Vector3d dr = Eigen::Vector3d::Zero();
        if (block_b >= 0) dr += x.segment<3>(block_b);
        if (block_a >= 0) dr -= x.segment<3>(block_a);

        const measurement::IdealMeasurement predicted = measurement::ideal_measurement(dr);
        const measurement::MeasurementJacobian jac = measurement::measurement_jacobian(dr);
        const measurement::NoiseSpec sigma = modes.noise(pair, noise);

        const auto push_row = [&](const Eigen::RowVector3d& d_meas, double residual,
                                  double sigma_1) {
            Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
            if (block_b >= 0) row.segment<3>(block_b) = d_meas;
            if (block_a >= 0) row.segment<3>(block_a) -= d_meas;
            rows.push_back(std::move(row));
            innov.push_back(residual);
            rdiag.push_back(sigma_1 * sigma_1);
        };

        if (m.range)
            push_row(jac.d_range, *m.range - predicted.range, sigma.sigma_range);
        if (m.ra && jac.ra_valid)
            push_row(jac.d_ra, astro::wrap_pi(*m.ra - predicted.ra), sigma.sigma_ra);
        if (m.dec)
            push_row(jac.d_dec, *m.dec - predicted.dec, sigma.sigma_dec);
    }

    StackedUpdate update;
    update.h.resize(static_cast<Eigen::Index>(rows.size()), n);
    update.innovation.resize(static_cast<Eigen::Index>(rows.size()));
    update.r_diag.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        update.h.row(static_cast<Eigen::Index>(i)) = rows[i];
        update.innovation[static_cast<Eigen::Index>(i)] = innov[i];
        update.r_diag[static_cast<Eigen::Index>(i)] = rdiag[i];
    }
    return update;
}

}  // namespace

StackedUpdate linearize_pva(const Eigen::VectorXd& x,
                            std::span<const measurement::Measurement> measurements,
                            const measurement::MeasKind& modes,
                            const measurement::NoiseSpec& noise) {
    return linearize(Variant::pva, x, measurements, modes, noise);
}

StackedUpdate linearize_absrel(const Eigen::VectorXd& x,
                               std::span<const measurement::Measurement> measurements,
                               const measurement::MeasKind& modes,
                               const measurement::NoiseSpec& noise) {
    return linearize(Variant::absrel, x, measurements, modes, noise);
}

void ekf_update(Eigen::VectorXd& x, Eigen::MatrixXd& P, const StackedUpdate& update,
                const UpdateConfig& cfg) {
    if (update.rows() == 0) return;
    const Eigen::Index n = x.size();

    Eigen::MatrixXd h = update.h;
    Eigen::VectorXd innovation = update.innovation;
    Eigen::VectorXd r_diag = update.r_diag;

    Eigen::MatrixXd ph_t = P * h.transpose();
    Eigen::MatrixXd s = h * ph_t;
    s.diagonal() += r_diag;

    if (cfg.gate_sigma > 0.0) {
        std::vector<Eigen::Index> keep;
        for (Eigen::Index i = 0; i < innovation.size(); ++i)
            if (innovation[i] * innovation[i] <= cfg.gate_sigma * cfg.gate_sigma * s(i, i))
                keep.push_back(i);
        if (keep.empty()) return;   // nothing credible this epoch
        if (static_cast<Eigen::Index>(keep.size()) != innovation.size()) {
            Eigen::MatrixXd h2(keep.size(), n);
            Eigen::VectorXd y2(keep.size()), r2(keep.size());
            for (std::size_t i = 0; i < keep.size(); ++i) {
                h2.row(static_cast<Eigen::Index>(i)) = h.row(keep[i]);
                y2[static_cast<Eigen::Index>(i)] = innovation[keep[i]];
                r2[static_cast<Eigen::Index>(i)] = r_diag[keep[i]];
            }
            h = std::move(h2);
            innovation = std::move(y2);
            r_diag = std::move(r2);
            ph_t = P * h.transpose();
            s = h * ph_t;
            s.diagonal() += r_diag;
        }
    }

    const Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success)
        throw FilterDivergence("innovation covariance is not positive definite");
    const Eigen::MatrixXd k = llt.solve(ph_t.transpose()).transpose();

    x += k * innovation;
    check_finite(x);

    // Joseph form keeps P symmetric PSD under roundoff.
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - k * h;
    P = a * P * a.transpose() + k * r_diag.asDiagonal() * k.transpose();
    P = 0.5 * (P + P.transpose()).eval();
    if ((P.diagonal().array() < -1e-10 * P.trace()).any())
        throw FilterDivergence("covariance lost positive semidefiniteness");
}

void run_filter_streaming(const FilterSetup& setup,
                          std::span<const measurement::Measurement> measurements, double t_end,
                          const EpochCallback& on_epoch) {
    const bool pva = setup.variant == Variant::pva;

    PvaFilterState pva_state;
    AbsRelFilterState absrel_state;
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

    std::size_t next = 0;
    const long n_steps = static_cast<long>(std::floor(t_end + 0.5));
    for (long k = 0; k <= n_steps; ++k) {
        if (k > 0) {
            if (pva)
                pva_state = predict_pva(std::move(pva_state), 1.0);
            else
                absrel_state = predict_absrel(std::move(absrel_state), 1.0);
        }
        const double t = static_cast<double>(k);

        std::size_t first = next;
        while (next < measurements.size() && measurements[next].epoch <= t + 1e-9) ++next;

        bool posterior = false;
        if (next > first) {
            const auto group = measurements.subspan(first, next - first);
            Eigen::VectorXd& x = pva ? pva_state.x : absrel_state.x;
            Eigen::MatrixXd& P = pva ? pva_state.P : absrel_state.P;
            const StackedUpdate update =
                pva ? linearize_pva(x, group, setup.modes, setup.noise)
                    : linearize_absrel(x, group, setup.modes, setup.noise);
            ekf_update(x, P, update, setup.update);
            posterior = true;
        }

        if (pva)
            on_epoch(t, posterior, pva_state.x, pva_state.P);
        else
            on_epoch(t, posterior, absrel_state.x, absrel_state.P);
    }
}

std::vector<FilterOutput> run_filter(const FilterSetup& setup,
                                     std::span<const measurement::Measurement> measurements,
                                     double t_end) {
    std::vector<FilterOutput> outputs;
    outputs.reserve(static_cast<std::size_t>(t_end) + 1);
    run_filter_streaming(setup, measurements, t_end,
                         [&outputs](double epoch, bool posterior, const Eigen::VectorXd& x,
                                    const Eigen::MatrixXd& p) {
                             FilterOutput o;
                             o.epoch = epoch;
                             o.posterior = posterior;
                             o.x = x;
                             o.sigma = p.diagonal().cwiseMax(0.0).cwiseSqrt();
                             outputs.push_back(std::move(o));
                         });
    return outputs;
}

void write_filter_csv(std::ostream& out, std::span<const FilterOutput> outputs) {
    if (outputs.empty()) return;
    const Eigen::Index n = outputs.front().x.size();
    out << "epoch_s,flag";
    for (Eigen::Index i = 0; i < n; ++i) out << ",x_" << i;
    for (Eigen::Index i = 0; i < n; ++i) out << ",sigma_" << i;
    out << '\n';
    char buf[64];
    for (const FilterOutput& o : outputs) {
        std::snprintf(buf, sizeof(buf), "%.17g", o.epoch);
        out << buf << ',' << (o.posterior ? "a_posteriori" : "a_priori");
        for (Eigen::Index i = 0; i < n; ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", o.x[i]);
            out << ',' << buf;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", o.sigma[i]);
            out << ',' << buf;
        }
        out << '\n';
    }
}

}  // namespace formod::filters
