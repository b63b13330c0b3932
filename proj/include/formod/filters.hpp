#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "formod/astro.hpp"
#include "formod/measurement.hpp"

namespace formod::filters {

/// Thrown when a filter loses numerical validity (non-PSD covariance,
/// non-finite state, innovation solve failure).
struct FilterDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Variant { pva, absrel };

/// Relative-only kinematic filter state: [dr, dv, da] stacked per deputy
/// (9 states each), driven by white jerk with intensity q.
struct PvaFilterState {
    Eigen::VectorXd x;        // km, km/s, km/s^2
    Eigen::MatrixXd P;
    double q = 1e-20;         // (km/s^3)^2, white-jerk PSD per axis
    double epoch = 0.0;

    int n_deputies() const { return static_cast<int>(x.size() / 9); }
};

/// Chief-absolute + deputies-relative keplerian filter state:
/// [r1, v1, dr_2, dv_2, ...]. Process noise enters the velocity rates with
/// intensity q_abs for the chief and q_rel[j] for deputy j.
struct AbsRelFilterState {
    Eigen::VectorXd x;        // km, km/s
    Eigen::MatrixXd P;
    double q_abs = 1e-12;     // (km/s^2)^2
    Eigen::VectorXd q_rel;    // (km/s^2)^2, one entry per deputy
    double epoch = 0.0;

    int n_deputies() const { return static_cast<int>(x.size() / 6) - 1; }
};

/// Exact discrete transition matrix of the PVA model (nilpotent exponential).
Eigen::MatrixXd pva_transition(int n_deputies, double dt);

/// Closed-form discrete white-jerk process noise of the PVA model.
Eigen::MatrixXd pva_process_noise(int n_deputies, double dt, double q);

/// Trapezoidal discrete process noise for the Euler-discretized keplerian
/// model; q_all holds one intensity per spacecraft, chief first.
Eigen::MatrixXd absrel_process_noise(const Eigen::VectorXd& q_all, double dt);

PvaFilterState predict_pva(PvaFilterState s, double dt);

/// One Euler prediction step (dt is expected at the 1 s measurement cadence).
AbsRelFilterState predict_absrel(AbsRelFilterState s, double dt, const astro::Constants& c = {});

struct UpdateConfig {
    double gate_sigma = 5.0;   // innovation gate; <= 0 disables gating
};

/// Stacked linearized measurement at a single epoch.
struct StackedUpdate {
    Eigen::MatrixXd h;
    Eigen::VectorXd innovation;
    Eigen::VectorXd r_diag;

    Eigen::Index rows() const { return innovation.size(); }
};

/// Builds innovation/H/R rows for the PVA state layout. Bearing rows with
/// singular geometry (line of sight on the z-axis) are dropped.
StackedUpdate linearize_pva(const Eigen::VectorXd& x,
                            std::span<const measurement::Measurement> measurements,
                            const measurement::MeasKind& modes,
                            const measurement::NoiseSpec& noise);

/// Same for the chief-absolute + relative layout; measurement rows carry no
/// direct absolute-state sensitivity.
StackedUpdate linearize_absrel(const Eigen::VectorXd& x,
                               std::span<const measurement::Measurement> measurements,
                               const measurement::MeasKind& modes,
                               const measurement::NoiseSpec& noise);

/// Joseph-form EKF measurement update with optional 5-sigma innovation
/// gating. Throws FilterDivergence on numerical failure.
void ekf_update(Eigen::VectorXd& x, Eigen::MatrixXd& P, const StackedUpdate& update,
                const UpdateConfig& cfg = {});

/// One 1 Hz output sample: a priori at unmeasured epochs, a posteriori at
/// measurement epochs.
struct FilterOutput {
    double epoch = 0.0;
    bool posterior = false;
    Eigen::VectorXd x;
    Eigen::VectorXd sigma;   // sqrt of the covariance diagonal
};

struct FilterSetup {
    Variant variant = Variant::absrel;
    Eigen::VectorXd x0;
    Eigen::MatrixXd P0;
    double q_pva = 1e-20;
    double q_abs = 1e-12;
    Eigen::VectorXd q_rel;
    measurement::MeasKind modes;
    measurement::NoiseSpec noise;
    UpdateConfig update;
};

/// Callback invoked once per 1 Hz step with the current estimate.
using EpochCallback =
    std::function<void(double epoch, bool posterior, const Eigen::VectorXd& x,
                       const Eigen::MatrixXd& p)>;

/// Runs the filter at 1 Hz over [0, t_end], consuming measurements sorted by
/// epoch, and streams every step to the callback.
void run_filter_streaming(const FilterSetup& setup,
                          std::span<const measurement::Measurement> measurements, double t_end,
                          const EpochCallback& on_epoch);

/// Materialized variant of run_filter_streaming.
std::vector<FilterOutput> run_filter(const FilterSetup& setup,
                                     std::span<const measurement::Measurement> measurements,
                                     double t_end);

/// CSV with header `epoch_s,flag,x_0..x_{n-1},sigma_0..sigma_{n-1}`; flag is
/// `a_posteriori` or `a_priori`.
void write_filter_csv(std::ostream& out, std::span<const FilterOutput> outputs);

}  // namespace formod::filters
