#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <vector>

#include "formod/astro.hpp"
#include "formod/dynamics.hpp"
#include "formod/measurement.hpp"

namespace formod::observability {

/// Continuous-time observability matrix of the two-spacecraft relative
/// positioning system, built from the observation function and its first
/// three Lie derivatives. State ordering: [r0, v0, dr, dv] with index 0 the
/// chief.
struct LocalObsMatrix {
    Eigen::Matrix<double, 12, 12> m;
    double epoch = 0.0;
};

LocalObsMatrix local_obs_matrix(const astro::CartesianState& chief,
                                const astro::RelativeState& deputy,
                                const astro::Constants& c = {});

/// Singular-value diagnostics of an observability or information matrix.
struct SvMetrics {
    double sigma_min = 0.0;
    double sigma_max = 0.0;
    double lui = 0.0;            // -sigma_min
    double cn = 0.0;             // sigma_max / sigma_min, +inf when singular
    double neg_recip_cn = 0.0;   // -1/cn, 0 when singular
    int rank = 0;
    int dominant_state_min = -1; // strongest component of the weakest direction
    int dominant_state_max = -1;
};

SvMetrics sv_metrics(const Eigen::MatrixXd& m);

/// One observed crosslink in a stacked-state system; a and b are spacecraft
/// numbers in the stacked layout (1 = chief, j >= 2 = deputy j-1).
struct PairSpec {
    int a = 1;
    int b = 2;
    measurement::MeasMode mode = measurement::MeasMode::range_and_bearing;
    measurement::NoiseSpec noise;
};

/// Measurement rows at one stacked state. Bearing rows at singular geometry
/// and all rows of degenerate (near-zero) baselines are zeroed. With
/// `whiten`, each row is scaled by 1/sigma.
Eigen::MatrixXd stacked_measurement_matrix(const Eigen::VectorXd& x,
                                           const std::vector<PairSpec>& pairs, bool whiten);

/// Square-root sample Fisher information: rows R^{-1/2} H_k Phi_{k|0} stacked
/// over the trajectory grid. Eclipsed samples keep their rows, zeroed.
struct SrSfim {
    Eigen::MatrixXd m;
    std::vector<double> epochs;
    std::vector<bool> eclipsed;

    int uneclipsed_count() const;
};

SrSfim srsfim(const dynamics::StmTrajectory& traj, const std::vector<PairSpec>& pairs,
              const std::vector<bool>& eclipse_mask);

/// Unwhitened discrete observability matrix [H_0; H_1 Phi_{1|0}; ...].
Eigen::MatrixXd discrete_obs_matrix(const dynamics::StmTrajectory& traj,
                                    const std::vector<Eigen::MatrixXd>& h_per_epoch);

/// Convenience: builds H_k from the pair list at every trajectory sample.
Eigen::MatrixXd discrete_obs_matrix(const dynamics::StmTrajectory& traj,
                                    const std::vector<PairSpec>& pairs);

/// Human-readable name of a stacked-state component ("ry", "drx_2", ...).
std::string absrel_state_label(int index);

/// CSV with header
/// `epoch_s,sigma_min,sigma_max,cn,dominant_state_min,dominant_state_max`.
void write_metrics_csv(std::ostream& out,
                       const std::vector<std::pair<double, SvMetrics>>& series);

}  // namespace formod::observability
