#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "formod/astro.hpp"

namespace formod::measurement {

/// Unordered spacecraft pair, stored with the smaller index first.
/// Spacecraft are numbered from 1 (chief).
struct PairKey {
    int a;
    int b;

    PairKey(int first, int second) : a(std::min(first, second)), b(std::max(first, second)) {}
    auto operator<=>(const PairKey&) const = default;
};

/// One range and/or bearing observation of spacecraft `b` seen from `a`.
/// The measured vector is r_b - r_a in inertial axes.
struct Measurement {
    int sc_a = 0;
    int sc_b = 0;
    double epoch = 0.0;                  // s
    std::optional<double> range;         // km
    std::optional<double> ra;            // rad, right ascension of the LOS
    std::optional<double> dec;           // rad, declination of the LOS
};

/// 1-sigma measurement noise, km and rad.
struct NoiseSpec {
    double sigma_range = (1.0 / 3.0) * 1e-3;            // 1/3 m
    double sigma_ra = 35.0 * astro::kArcsecToRad;
    double sigma_dec = 35.0 * astro::kArcsecToRad;

    static NoiseSpec rf_vision() { return {}; }
    static NoiseSpec rf_only() {
        return {(1.0 / 3.0) * 1e-3, astro::kDegToRad, astro::kDegToRad};
    }
};

enum class MeasMode { range_only, range_and_bearing };

/// Per-pair sensing mode, with optional per-pair noise overrides (the
/// auxiliary spacecraft may carry a different sensor than the formation).
struct MeasKind {
    MeasMode default_mode = MeasMode::range_and_bearing;
    std::map<PairKey, MeasMode> mode_overrides;
    std::map<PairKey, NoiseSpec> noise_overrides;

    MeasMode mode(PairKey p) const {
        auto it = mode_overrides.find(p);
        return it == mode_overrides.end() ? default_mode : it->second;
    }
    NoiseSpec noise(PairKey p, const NoiseSpec& base) const {
        auto it = noise_overrides.find(p);
        return it == noise_overrides.end() ? base : it->second;
    }
};

enum class ScheduleKind { original, adapted7, parallel7, fixed_period };

/// A crosslink window: every listed pair observes at 1 Hz in [t_begin, t_end).
struct Window {
    double t_begin = 0.0;
    double t_end = 0.0;
    std::vector<PairKey> pairs;
};

struct Schedule {
    ScheduleKind kind = ScheduleKind::original;
    std::vector<Window> windows;
    double obs_cadence = 1.0;   // s, within a window
};

/// All pairs active at one epoch.
struct SlotEpoch {
    double t = 0.0;
    std::vector<PairKey> pairs;
};

struct IdealMeasurement {
    double range;   // km
    double ra;      // rad
    double dec;     // rad
};

/// Range, right ascension and declination of the line of sight `dr`.
/// ra uses four-quadrant atan2; on the poles (dr_x = dr_y = 0) ra is 0 by
/// convention.
IdealMeasurement ideal_measurement(const Eigen::Vector3d& dr);

/// Partials of (range, ra, dec) with respect to the relative position.
/// On the z-axis the ra row is undefined; `ra_valid` is false and callers
/// must drop that row.
struct MeasurementJacobian {
    Eigen::RowVector3d d_range;
    Eigen::RowVector3d d_ra;
    Eigen::RowVector3d d_dec;
    bool ra_valid = true;
};

MeasurementJacobian measurement_jacobian(const Eigen::Vector3d& dr);

/// True when the segment between the two positions passes within
/// `body_radius` of the origin at a strictly interior point.
bool is_eclipsed(const Eigen::Vector3d& r_a, const Eigen::Vector3d& r_b, double body_radius);

/// Expands the cyclic crosslink tables into concrete windows over
/// [t0, t0 + horizon). The original 6-spacecraft cycle is 50 min, the
/// 7-spacecraft adapted cycle 70 min; parallel7 adds the chief-new pair to
/// every original window; fixed_period yields one epoch each 90 s for every
/// pair of `n_spacecraft`.
Schedule build_schedule(ScheduleKind kind, double t0, double horizon, int n_spacecraft = 6);

/// Concrete measurement epochs of a schedule, in time order.
std::vector<SlotEpoch> measurement_epochs(const Schedule& schedule);

/// Positions of spacecraft `sc` (1-based) at time t, km.
using PositionLookup = std::function<Eigen::Vector3d(int sc, double t)>;

/// Draws noisy measurements one slot epoch at a time. Streaming consumers
/// and whole-schedule synthesis share this so a seed produces one stream.
class SlotSynthesizer {
  public:
    SlotSynthesizer(MeasKind modes, NoiseSpec noise, std::uint64_t seed,
                    double body_radius = astro::Constants{}.r_earth);

    /// Measurements for one slot epoch; eclipsed pairs yield none.
    std::vector<Measurement> at_epoch(const SlotEpoch& slot, const PositionLookup& position);

  private:
    MeasKind modes_;
    NoiseSpec noise_;
    double body_radius_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> gauss_;
};

/// Noisy measurements on the schedule. Deterministic for a given seed;
/// Earth-occulted sightlines produce no measurement.
std::vector<Measurement> synthesize_measurements(const PositionLookup& position,
                                                 const Schedule& schedule, const MeasKind& modes,
                                                 const NoiseSpec& noise, std::uint64_t seed,
                                                 double body_radius = astro::Constants{}.r_earth);

/// CSV with header `epoch_s,sc_a,sc_b,range_km,ra_rad,dec_rad`; absent
/// components are empty fields.
void write_measurements_csv(std::ostream& out, const std::vector<Measurement>& measurements);
std::vector<Measurement> read_measurements_csv(std::istream& in);

}  // namespace formod::measurement
