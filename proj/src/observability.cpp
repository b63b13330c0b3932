#include "formod/observability.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace formod::observability {

LocalObsMatrix local_obs_matrix(const astro::CartesianState& chief,
                                const astro::RelativeState& deputy,
                                const astro::Constants& c) {
    const Eigen::Vector3d r0 = chief.r;
    const Eigen::Vector3d v0 = chief.v;
    const Eigen::Vector3d r1 = r0 + deputy.dr;
    const Eigen::Vector3d v1 = v0 + deputy.dv;

    const Eigen::Matrix3d g0 = dynamics::gravity_gradient(r0, c);
    const Eigen::Matrix3d g1 = dynamics::gravity_gradient(r1, c);
    const Eigen::Matrix3d g0dot = dynamics::gravity_gradient_rate(r0, v0, c);
    const Eigen::Matrix3d g1dot = dynamics::gravity_gradient_rate(r1, v1, c);

    const Eigen::Matrix3d zero = Eigen::Matrix3d::Zero();
    const Eigen::Matrix3d eye = Eigen::Matrix3d::Identity();

    LocalObsMatrix out;
    out.epoch = chief.epoch;
    out.m << zero,            zero,     eye,   zero,
             zero,            zero,     zero,  eye,
             g1 - g0,         zero,     g1,    zero,
             g1dot - g0dot,   g1 - g0,  g1dot, g1;
    return out;
}

SvMetrics sv_metrics(const Eigen::MatrixXd& m) {
    SvMetrics out;
    if (m.size() == 0) return out;

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    out.sigma_max = sv(0);
    out.sigma_min = sv(sv.size() - 1);
    out.lui = -out.sigma_min;

    if (out.sigma_min > 0.0) {
        out.cn = out.sigma_max / out.sigma_min;
        out.neg_recip_cn = -1.0 / out.cn;
    } else {
        out.cn = std::numeric_limits<double>::infinity();
        out.neg_recip_cn = 0.0;
    }

    const double rank_tol =
        out.sigma_max * static_cast<double>(std::max(m.rows(), m.cols())) *
        std::numeric_limits<double>::epsilon();
    out.rank = static_cast<int>((sv.array() > rank_tol).count());

    if (out.sigma_max > 0.0) {
        Eigen::Index imax, imin;
        svd.matrixV().col(0).cwiseAbs().maxCoeff(&imax);
        svd.matrixV().col(sv.size() - 1).cwiseAbs().maxCoeff(&imin);
        out.dominant_state_max = static_cast<int>(imax);
        out.dominant_state_min = static_cast<int>(imin);
    }
    return out;
}

Eigen::MatrixXd stacked_measurement_matrix(const Eigen::VectorXd& x,
                                           const std::vector<PairSpec>& pairs, bool whiten) {
    const Eigen::Index n = x.size();
    Eigen::Index n_rows = 0;
    for (const PairSpec& p : pairs)
        n_rows += p.mode == measurement::MeasMode::range_and_bearing ? 3 : 1;

    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n_rows, n);
    Eigen::Index row = 0;
    for (const PairSpec& p : pairs) {
        const int block_a = p.a == 1 ? -1 : 6 + 6 * (p.a - 2);
        const int block_b = p.b == 1 ? -1 : 6 + 6 * (p.b - 2);
        Eigen::Vector3d dr = Eigen::Vector3d::Zero();
        if (block_b >= 0) dr += x.segment<3>(block_b);
        if (block_a >= 0) dr -= x.segment<3>(block_a);

        const bool bearing = p.mode == measurement::MeasMode::range_and_bearing;
        const Eigen::Index pair_rows = bearing ? 3 : 1;
        if (dr.norm() < 1e-9) {   // coincident geometry carries no information
            row += pair_rows;
            continue;
        }

        const measurement::MeasurementJacobian jac = measurement::measurement_jacobian(dr);
        const auto place = [&](Eigen::Index r, const Eigen::RowVector3d& d_meas, double sigma) {
            const double w = whiten ? 1.0 / sigma : 1.0;
            if (block_b >= 0) h.block<1, 3>(r, block_b) = w * d_meas;
            if (block_a >= 0) h.block<1, 3>(r, block_a) -= w * d_meas;
        };
        place(row, jac.d_range, p.noise.sigma_range);
        if (bearing) {
            if (jac.ra_valid) place(row + 1, jac.d_ra, p.noise.sigma_ra);
            place(row + 2, jac.d_dec, p.noise.sigma_dec);
        }
        row += pair_rows;
    }
    return h;
}

int SrSfim::uneclipsed_count() const {
    int n = 0;
    for (bool e : eclipsed)
        if (!e) ++n;
    return n;
}

SrSfim srsfim(const dynamics::StmTrajectory& traj, const std::vector<PairSpec>& pairs,
              const std::vector<bool>& eclipse_mask) {
    const std::size_t n_samples = traj.epochs.size();
    if (traj.states.size() != n_samples || traj.stms.size() != n_samples)
        throw std::invalid_argument("srsfim: trajectory is missing states or STMs");
    if (!eclipse_mask.empty() && eclipse_mask.size() != n_samples)
        throw std::invalid_argument("srsfim: eclipse mask size mismatch");

    Eigen::Index rows_per_sample = 0;
    for (const PairSpec& p : pairs)
        rows_per_sample += p.mode == measurement::MeasMode::range_and_bearing ? 3 : 1;

    SrSfim out;
    out.epochs = traj.epochs;
    out.eclipsed.assign(n_samples, false);
    out.m = Eigen::MatrixXd::Zero(rows_per_sample * static_cast<Eigen::Index>(n_samples),
                                  traj.states.front().size());

    for (std::size_t k = 0; k < n_samples; ++k) {
        const bool eclipsed = !eclipse_mask.empty() && eclipse_mask[k];
        out.eclipsed[k] = eclipsed;
        if (eclipsed) continue;   // rows stay zero
        const Eigen::MatrixXd h = stacked_measurement_matrix(traj.states[k], pairs, true);
        out.m.middleRows(rows_per_sample * static_cast<Eigen::Index>(k), rows_per_sample) =
            h * traj.stms[k];
    }
    return out;
}

Eigen::MatrixXd discrete_obs_matrix(const dynamics::StmTrajectory& traj,
                                    const std::vector<Eigen::MatrixXd>& h_per_epoch) {
    if (h_per_epoch.size() != traj.epochs.size())
        throw std::invalid_argument("discrete_obs_matrix: one H block per epoch required");
    Eigen::Index n_rows = 0;
    for (const Eigen::MatrixXd& h : h_per_epoch) n_rows += h.rows();

    Eigen::MatrixXd obs(n_rows, traj.states.front().size());
    Eigen::Index row = 0;
    for (std::size_t k = 0; k < h_per_epoch.size(); ++k) {
        obs.middleRows(row, h_per_epoch[k].rows()) = h_per_epoch[k] * traj.stms[k];
        row += h_per_epoch[k].rows();
    }
    return obs;
}

Eigen::MatrixXd discrete_obs_matrix(const dynamics::StmTrajectory& traj,
                                    const std::vector<PairSpec>& pairs) {
    std::vector<Eigen::MatrixXd> h_per_epoch;
    h_per_epoch.reserve(traj.epochs.size());
    for (const Eigen::VectorXd& x : traj.states)
        h_per_epoch.push_back(stacked_measurement_matrix(x, pairs, false));
    return discrete_obs_matrix(traj, h_per_epoch);
}

std::string absrel_state_label(int index) {
    static const char* axes = "xyz";
    const int block = index / 3;
    const char axis = axes[index % 3];
    if (block == 0) return std::string("r") + axis;
    if (block == 1) return std::string("v") + axis;
    const int deputy = (block - 2) / 2 + 2;
    const bool velocity = (block % 2) == 1;
    return std::string(velocity ? "dv" : "dr") + axis + "_" + std::to_string(deputy);
}

void write_metrics_csv(std::ostream& out,
                       const std::vector<std::pair<double, SvMetrics>>& series) {
    out << "epoch_s,sigma_min,sigma_max,cn,dominant_state_min,dominant_state_max\n";
    char buf[64];
    for (const auto& [epoch, m] : series) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g", epoch, m.sigma_min,
                      m.sigma_max, m.cn);
        out << buf << ',' << m.dominant_state_min << ',' << m.dominant_state_max << '\n';
    }
}

}  // namespace formod::observability
