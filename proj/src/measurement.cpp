#include "formod/measurement.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace formod::measurement {

IdealMeasurement ideal_measurement(const Eigen::Vector3d& dr) {
    const double range = dr.norm();
    if (!(range > 0.0)) throw std::invalid_argument("ideal_measurement: zero baseline");
    const double planar = std::hypot(dr.x(), dr.y());
    const double ra = planar > 0.0 ? std::atan2(dr.y(), dr.x()) : 0.0;
    const double dec = std::asin(std::clamp(dr.z() / range, -1.0, 1.0));
    return {range, ra, dec};
}

MeasurementJacobian measurement_jacobian(const Eigen::Vector3d& dr) {
    const double range = dr.norm();
    if (!(range > 0.0)) throw std::invalid_argument("measurement_jacobian: zero baseline");
    const double planar2 = dr.x() * dr.x() + dr.y() * dr.y();
    const double planar = std::sqrt(planar2);

    MeasurementJacobian jac;
    jac.d_range = dr.transpose() / range;
    if (planar > 0.0) {
        jac.d_ra << -dr.y() / planar2, dr.x() / planar2, 0.0;
        jac.ra_valid = true;
    } else {
        jac.d_ra.setZero();
        jac.ra_valid = false;
    }
    const double r2 = range * range;
    if (planar > 0.0) {
        jac.d_dec << -dr.x() * dr.z() / (r2 * planar), -dr.y() * dr.z() / (r2 * planar),
            planar / r2;
    } else {
        // At the pole dec is stationary in z and undefined in x/y jointly with
        // ra; keep the zero row so only the ra row needs dropping.
        jac.d_dec.setZero();
    }
    return jac;
}

bool is_eclipsed(const Eigen::Vector3d& r_a, const Eigen::Vector3d& r_b, double body_radius) {
    const Eigen::Vector3d seg = r_b - r_a;
    const double seg2 = seg.squaredNorm();
    if (seg2 == 0.0) return false;
    const double t_closest = -r_a.dot(seg) / seg2;
    if (t_closest <= 0.0 || t_closest >= 1.0) return false;
    return (r_a + t_closest * seg).norm() < body_radius;
}

namespace {

struct CycleRow {
    double start_min;
    std::array<std::pair<int, int>, 3> pairs;
};

// Six-spacecraft crosslink cycle, 50 min: one minute of 1 Hz observations
// per row, nine idle minutes between rows for slewing and radio lock.
constexpr std::array<CycleRow, 5> kOriginalCycle = {{
    {9.0, {{{1, 2}, {3, 4}, {5, 6}}}},
    {19.0, {{{1, 3}, {2, 5}, {4, 6}}}},
    {29.0, {{{1, 4}, {2, 6}, {3, 5}}}},
    {39.0, {{{1, 5}, {2, 4}, {3, 6}}}},
    {49.0, {{{1, 6}, {2, 3}, {4, 5}}}},
}};

// Seven-spacecraft cycle, 70 min, covering all 21 pairs.
constexpr std::array<CycleRow, 7> kAdapted7Cycle = {{
    {9.0, {{{1, 2}, {3, 4}, {5, 6}}}},
    {19.0, {{{1, 3}, {2, 4}, {5, 7}}}},
    {29.0, {{{1, 4}, {2, 7}, {3, 6}}}},
    {39.0, {{{1, 5}, {2, 6}, {3, 7}}}},
    {49.0, {{{1, 6}, {2, 5}, {4, 7}}}},
    {59.0, {{{1, 7}, {3, 5}, {4, 6}}}},
    {69.0, {{{2, 3}, {4, 5}, {6, 7}}}},
}};

template <std::size_t N>
void expand_cycle(const std::array<CycleRow, N>& cycle, double cycle_min, double t0,
                  double horizon, bool add_chief_new, Schedule& out) {
    const double cycle_s = cycle_min * 60.0;
    for (double cycle_start = t0; cycle_start < t0 + horizon; cycle_start += cycle_s) {
        for (const CycleRow& row : cycle) {
            Window w;
            w.t_begin = cycle_start + row.start_min * 60.0;
            w.t_end = w.t_begin + 60.0;
            if (w.t_begin >= t0 + horizon) continue;
            for (const auto& [a, b] : row.pairs) w.pairs.emplace_back(a, b);
            if (add_chief_new) w.pairs.emplace_back(1, 7);
            out.windows.push_back(std::move(w));
        }
    }
}

}  // namespace

Schedule build_schedule(ScheduleKind kind, double t0, double horizon, int n_spacecraft) {
    Schedule out;
    out.kind = kind;
    switch (kind) {
        case ScheduleKind::original:
            if (horizon <= 50.0 * 60.0)
                throw std::invalid_argument("build_schedule: horizon below one 50 min cycle");
            expand_cycle(kOriginalCycle, 50.0, t0, horizon, false, out);
            break;
        case ScheduleKind::adapted7:
            if (horizon <= 70.0 * 60.0)
                throw std::invalid_argument("build_schedule: horizon below one 70 min cycle");
            expand_cycle(kAdapted7Cycle, 70.0, t0, horizon, false, out);
            break;
        case ScheduleKind::parallel7:
            if (horizon <= 50.0 * 60.0)
                throw std::invalid_argument("build_schedule: horizon below one 50 min cycle");
            expand_cycle(kOriginalCycle, 50.0, t0, horizon, true, out);
            break;
        case ScheduleKind::fixed_period: {
            out.obs_cadence = 90.0;
            std::vector<PairKey> all_pairs;
            for (int a = 1; a <= n_spacecraft; ++a)
                for (int b = a + 1; b <= n_spacecraft; ++b) all_pairs.emplace_back(a, b);
            for (double t = t0; t < t0 + horizon; t += 90.0) {
                Window w;
                w.t_begin = t;
                w.t_end = t;   // single epoch
                w.pairs = all_pairs;
                out.windows.push_back(std::move(w));
            }
            break;
        }
        default:
            throw std::invalid_argument("build_schedule: unknown schedule kind");
    }
    return out;
}

std::vector<SlotEpoch> measurement_epochs(const Schedule& schedule) {
    std::vector<SlotEpoch> epochs;
    for (const Window& w : schedule.windows) {
        if (w.t_end <= w.t_begin) {
            epochs.push_back({w.t_begin, w.pairs});
            continue;
        }
        for (double t = w.t_begin; t < w.t_end; t += schedule.obs_cadence)
            epochs.push_back({t, w.pairs});
    }
    return epochs;
}

SlotSynthesizer::SlotSynthesizer(MeasKind modes, NoiseSpec noise, std::uint64_t seed,
                                 double body_radius)
    : modes_(std::move(modes)),
      noise_(noise),
      body_radius_(body_radius),
      rng_(seed),
      gauss_(0.0, 1.0) {}

std::vector<Measurement> SlotSynthesizer::at_epoch(const SlotEpoch& slot,
                                                   const PositionLookup& position) {
    std::vector<Measurement> out;
    for (const PairKey& pair : slot.pairs) {
        const Eigen::Vector3d r_a = position(pair.a, slot.t);
        const Eigen::Vector3d r_b = position(pair.b, slot.t);
        if (is_eclipsed(r_a, r_b, body_radius_)) continue;

        const IdealMeasurement ideal = ideal_measurement(r_b - r_a);
        const NoiseSpec sigma = modes_.noise(pair, noise_);

        Measurement m;
        m.sc_a = pair.a;
        m.sc_b = pair.b;
        m.epoch = slot.t;
        m.range = ideal.range + sigma.sigma_range * gauss_(rng_);
        if (modes_.mode(pair) == MeasMode::range_and_bearing) {
            m.ra = astro::wrap_pi(ideal.ra + sigma.sigma_ra * gauss_(rng_));
            m.dec = ideal.dec + sigma.sigma_dec * gauss_(rng_);
        }
        out.push_back(m);
    }
    return out;
}

std::vector<Measurement> synthesize_measurements(const PositionLookup& position,
                                                 const Schedule& schedule, const MeasKind& modes,
                                                 const NoiseSpec& noise, std::uint64_t seed,
                                                 double body_radius) {
    SlotSynthesizer synth(modes, noise, seed, body_radius);
    std::vector<Measurement> out;
    for (const SlotEpoch& slot : measurement_epochs(schedule)) {
        std::vector<Measurement> batch = synth.at_epoch(slot, position);
        out.insert(out.end(), batch.begin(), batch.end());
    }
    return out;
}

void write_measurements_csv(std::ostream& out, const std::vector<Measurement>& measurements) {
    out << "epoch_s,sc_a,sc_b,range_km,ra_rad,dec_rad\n";
    char buf[64];
    const auto field = [&buf](std::optional<double> v) -> std::string {
        if (!v) return "";
        std::snprintf(buf, sizeof(buf), "%.17g", *v);
        return buf;
    };
    for (const Measurement& m : measurements) {
        std::snprintf(buf, sizeof(buf), "%.17g", m.epoch);
        out << buf << ',' << m.sc_a << ',' << m.sc_b << ',' << field(m.range) << ','
            << field(m.ra) << ',' << field(m.dec) << '\n';
    }
}

std::vector<Measurement> read_measurements_csv(std::istream& in) {
    std::vector<Measurement> out;
    std::string line;
    if (!std::getline(in, line)) return out;   // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        Measurement m;
        std::getline(ss, tok, ',');
        m.epoch = std::stod(tok);
        std::getline(ss, tok, ',');
        m.sc_a = std::stoi(tok);
        std::getline(ss, tok, ',');
        m.sc_b = std::stoi(tok);
        const auto opt_field = [&ss, &tok]() -> std::optional<double> {
            if (!std::getline(ss, tok, ',') || tok.empty()) return std::nullopt;
            return std::stod(tok);
        };
        m.range = opt_field();
        m.ra = opt_field();
        m.dec = opt_field();
        out.push_back(m);
    }
    return out;
}

}  // namespace formod::measurement
