#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "formod/measurement.hpp"

using namespace formod;
using measurement::PairKey;

namespace {
constexpr double kPi = std::numbers::pi;

Eigen::Vector3d random_baseline(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::Vector3d dr;
    do {
        dr << u(rng), u(rng), u(rng);
    } while (dr.norm() < 0.1 || std::hypot(dr.x(), dr.y()) < 0.05);
    return 10.0 * dr;
}
}  // namespace

TEST_CASE("ideal_measurement geometry") {
    SUBCASE("3-4-5 triangle") {
        const auto m = measurement::ideal_measurement({3.0, 4.0, 0.0});
        CHECK(m.range == doctest::Approx(5.0));
        CHECK(m.ra == doctest::Approx(std::atan2(4.0, 3.0)));
        CHECK(m.dec == doctest::Approx(0.0));
    }
    SUBCASE("pole convention") {
        const auto m = measurement::ideal_measurement({0.0, 0.0, 1.0});
        CHECK(m.dec == doctest::Approx(kPi / 2));
        CHECK(m.ra == 0.0);
    }
    SUBCASE("four-quadrant right ascension") {
        const auto m = measurement::ideal_measurement({-1.0, 0.0, 0.0});
        CHECK(m.ra == doctest::Approx(kPi));
    }
    SUBCASE("zero baseline rejected") {
        CHECK_THROWS(measurement::ideal_measurement(Eigen::Vector3d::Zero()));
    }
    SUBCASE("scale invariance of the angles") {
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> scale(0.1, 100.0);
        for (int k = 0; k < 200; ++k) {
            const Eigen::Vector3d dr = random_baseline(rng);
            const double c = scale(rng);
            const auto a = measurement::ideal_measurement(dr);
            const auto b = measurement::ideal_measurement(c * dr);
            CHECK(b.range == doctest::Approx(c * a.range).epsilon(1e-12));
            CHECK(b.ra == doctest::Approx(a.ra).epsilon(1e-12));
            CHECK(b.dec == doctest::Approx(a.dec).epsilon(1e-12));
        }
    }
}

TEST_CASE("measurement_jacobian") {
    SUBCASE("range row is the unit line of sight") {
        const auto jac = measurement::measurement_jacobian({3.0, 4.0, 0.0});
        CHECK(jac.d_range(0) == doctest::Approx(0.6));
        CHECK(jac.d_range(1) == doctest::Approx(0.8));
        CHECK(jac.d_range(2) == doctest::Approx(0.0));
        CHECK(jac.d_dec(2) == doctest::Approx(0.2));   // 1/range with dr_z = 0
    }
    SUBCASE("rows match central finite differences") {
        std::mt19937_64 rng(4);
        for (int k = 0; k < 100; ++k) {
            const Eigen::Vector3d dr = random_baseline(rng);
            const auto jac = measurement::measurement_jacobian(dr);
            const double h = 1e-6 * dr.norm();
            Eigen::RowVector3d fd_range, fd_ra, fd_dec;
            for (int j = 0; j < 3; ++j) {
                Eigen::Vector3d dp = Eigen::Vector3d::Zero();
                dp[j] = h;
                const auto plus = measurement::ideal_measurement(dr + dp);
                const auto minus = measurement::ideal_measurement(dr - dp);
                fd_range[j] = (plus.range - minus.range) / (2.0 * h);
                fd_ra[j] = astro::wrap_pi(plus.ra - minus.ra) / (2.0 * h);
                fd_dec[j] = (plus.dec - minus.dec) / (2.0 * h);
            }
            CHECK((jac.d_range - fd_range).norm() / fd_range.norm() < 1e-7);
            CHECK((jac.d_ra - fd_ra).norm() / fd_ra.norm() < 1e-7);
            CHECK((jac.d_dec - fd_dec).norm() / fd_dec.norm() < 1e-7);
            CHECK(jac.d_range.norm() == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    SUBCASE("line of sight on the z-axis flags the ra row") {
        const auto jac = measurement::measurement_jacobian({0.0, 0.0, 2.0});
        CHECK_FALSE(jac.ra_valid);
    }
}

TEST_CASE("is_eclipsed") {
    const double re = 6378.137;
    SUBCASE("antipodal spacecraft are occulted") {
        CHECK(measurement::is_eclipsed({43399.0, 0, 0}, {-43399.0, 0, 0}, re));
    }
    SUBCASE("nearby spacecraft on the same side are not") {
        CHECK_FALSE(measurement::is_eclipsed({43399.0, 0, 0}, {43399.0, 10.0, 0}, re));
    }
    SUBCASE("grazing geometry checked against a point-segment oracle") {
        // independent closest-approach computation decides each case
        const auto closest = [](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
            const Eigen::Vector3d seg = b - a;
            const double t = -a.dot(seg) / seg.squaredNorm();
            return (a + t * seg).norm();
        };
        const Eigen::Vector3d a(43399.0, 0, 0);
        const Eigen::Vector3d near_graze(-43399.0, 2.0 * re, 0);
        CHECK(closest(a, near_graze) < re);   // 6310 km, still blocked
        CHECK(measurement::is_eclipsed(a, near_graze, re));
        const Eigen::Vector3d clear_pass(-43399.0, 3.0 * re, 0);
        CHECK(closest(a, clear_pass) > re);   // 9343 km, line of sight clear
        CHECK_FALSE(measurement::is_eclipsed(a, clear_pass, re));
    }
    SUBCASE("symmetric in its arguments") {
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int k = 0; k < 500; ++k) {
            Eigen::Vector3d a, b;
            a << u(rng), u(rng), u(rng);
            b << u(rng), u(rng), u(rng);
            a *= 50000.0;
            b *= 50000.0;
            if (a.norm() < re || b.norm() < re) continue;
            CHECK(measurement::is_eclipsed(a, b, re) == measurement::is_eclipsed(b, a, re));
        }
    }
}

TEST_CASE("build_schedule expansion") {
    SUBCASE("six-spacecraft cycle starts at nine minutes") {
        const auto s = measurement::build_schedule(measurement::ScheduleKind::original, 0.0,
                                                   50.0 * 60.0 + 1.0);
        REQUIRE(!s.windows.empty());
        CHECK(s.windows.front().t_begin == 9.0 * 60.0);
        CHECK(s.windows.front().t_end == 10.0 * 60.0);
        const std::vector<PairKey> expected = {{1, 2}, {3, 4}, {5, 6}};
        CHECK(s.windows.front().pairs == expected);
    }
    SUBCASE("seven-spacecraft cycle has its seventh row at 69 minutes") {
        const auto s = measurement::build_schedule(measurement::ScheduleKind::adapted7, 0.0,
                                                   70.0 * 60.0 + 1.0, 7);
        REQUIRE(s.windows.size() >= 7);
        CHECK(s.windows[6].t_begin == 69.0 * 60.0);
        const std::vector<PairKey> expected = {{2, 3}, {4, 5}, {6, 7}};
        CHECK(s.windows[6].pairs == expected);
    }
    SUBCASE("one original cycle covers every pair of six exactly once") {
        const auto s = measurement::build_schedule(measurement::ScheduleKind::original, 0.0,
                                                   50.0 * 60.0 + 1.0);
        std::multiset<std::pair<int, int>> seen;
        for (const auto& w : s.windows)
            for (const auto& p : w.pairs) seen.insert({p.a, p.b});
        CHECK(seen.size() == 15);
        for (int a = 1; a <= 6; ++a)
            for (int b = a + 1; b <= 6; ++b) CHECK(seen.count({a, b}) == 1);
    }
    SUBCASE("no spacecraft is double-booked except the chief under the parallel schedule") {
        for (const auto kind : {measurement::ScheduleKind::original,
                                measurement::ScheduleKind::adapted7,
                                measurement::ScheduleKind::parallel7}) {
            const int n = kind == measurement::ScheduleKind::original ? 6 : 7;
            const auto s = measurement::build_schedule(kind, 0.0, 71.0 * 60.0, n);
            for (const auto& w : s.windows) {
                std::multiset<int> members;
                for (const auto& p : w.pairs) {
                    members.insert(p.a);
                    members.insert(p.b);
                }
                for (int sc = 1; sc <= n; ++sc) {
                    const bool chief_parallel =
                        sc == 1 && kind == measurement::ScheduleKind::parallel7;
                    CHECK(members.count(sc) <= (chief_parallel ? 2u : 1u));
                }
            }
        }
    }
    SUBCASE("fixed-period epochs every 90 s for all pairs") {
        const auto s = measurement::build_schedule(measurement::ScheduleKind::fixed_period, 0.0,
                                                   450.0, 3);
        const auto epochs = measurement::measurement_epochs(s);
        REQUIRE(epochs.size() == 5);
        CHECK(epochs[1].t == 90.0);
        CHECK(epochs[0].pairs.size() == 3);
    }
    SUBCASE("horizon below one cycle is rejected") {
        CHECK_THROWS(
            measurement::build_schedule(measurement::ScheduleKind::original, 0.0, 600.0));
    }
}

TEST_CASE("synthesize_measurements") {
    // two static spacecraft; geometry never changes, only the noise
    const measurement::PositionLookup position = [](int sc, double) {
        return sc == 1 ? Eigen::Vector3d(43399.0, 0.0, 0.0)
                       : Eigen::Vector3d(43399.0, 3.0, 4.0);
    };
    measurement::Schedule schedule =
        measurement::build_schedule(measurement::ScheduleKind::fixed_period, 0.0, 9000.0, 2);
    measurement::MeasKind modes;

    SUBCASE("zero noise reproduces the ideal geometry") {
        measurement::NoiseSpec zero{0.0, 0.0, 0.0};
        const auto out = measurement::synthesize_measurements(position, schedule, modes, zero, 1);
        REQUIRE(out.size() == 100);
        const auto ideal = measurement::ideal_measurement({0.0, 3.0, 4.0});
        for (const auto& m : out) {
            CHECK(*m.range == doctest::Approx(ideal.range).epsilon(1e-15));
            CHECK(*m.ra == doctest::Approx(ideal.ra).epsilon(1e-15));
            CHECK(*m.dec == doctest::Approx(ideal.dec).epsilon(1e-15));
        }
    }
    SUBCASE("identical seeds give identical streams") {
        const auto a = measurement::synthesize_measurements(position, schedule, modes,
                                                            measurement::NoiseSpec{}, 77);
        const auto b = measurement::synthesize_measurements(position, schedule, modes,
                                                            measurement::NoiseSpec{}, 77);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(*a[i].range == *b[i].range);
            CHECK(*a[i].ra == *b[i].ra);
        }
    }
    SUBCASE("range residual variance matches the configured sigma") {
        measurement::Schedule long_schedule = measurement::build_schedule(
            measurement::ScheduleKind::fixed_period, 0.0, 90.0 * 100000, 2);
        const measurement::NoiseSpec noise;
        const auto out = measurement::synthesize_measurements(position, long_schedule, modes,
                                                              noise, 1234);
        REQUIRE(out.size() == 100000);
        const double ideal_range = 5.0;
        double sum_sq = 0.0;
        for (const auto& m : out) {
            const double r = *m.range - ideal_range;
            sum_sq += r * r;
        }
        const double var = sum_sq / static_cast<double>(out.size());
        CHECK(var == doctest::Approx(noise.sigma_range * noise.sigma_range).epsilon(0.03));
    }
    SUBCASE("range-only mode omits bearings") {
        modes.default_mode = measurement::MeasMode::range_only;
        const auto out = measurement::synthesize_measurements(position, schedule, modes,
                                                              measurement::NoiseSpec{}, 5);
        for (const auto& m : out) {
            CHECK(m.range.has_value());
            CHECK_FALSE(m.ra.has_value());
            CHECK_FALSE(m.dec.has_value());
        }
    }
    SUBCASE("occulted geometry yields no measurement") {
        const measurement::PositionLookup behind = [](int sc, double) {
            return sc == 1 ? Eigen::Vector3d(43399.0, 0.0, 0.0)
                           : Eigen::Vector3d(-43399.0, 0.0, 0.0);
        };
        const auto out = measurement::synthesize_measurements(behind, schedule, modes,
                                                              measurement::NoiseSpec{}, 5);
        CHECK(out.empty());
    }
}

TEST_CASE("measurement CSV round trip") {
    std::vector<measurement::Measurement> in;
    measurement::Measurement a;
    a.sc_a = 1;
    a.sc_b = 2;
    a.epoch = 540.0;
    a.range = 5.123456789012345;
    a.ra = 0.9273;
    a.dec = -0.1;
    measurement::Measurement b;
    b.sc_a = 3;
    b.sc_b = 4;
    b.epoch = 541.0;
    b.range = 7.5;   // range-only entry
    in.push_back(a);
    in.push_back(b);

    std::stringstream ss;
    measurement::write_measurements_csv(ss, in);
    const auto out = measurement::read_measurements_csv(ss);
    REQUIRE(out.size() == 2);
    CHECK(out[0].epoch == 540.0);
    CHECK(*out[0].range == *in[0].range);
    CHECK(*out[0].ra == *in[0].ra);
    CHECK(*out[0].dec == *in[0].dec);
    CHECK(out[1].sc_b == 4);
    CHECK_FALSE(out[1].ra.has_value());
    CHECK_FALSE(out[1].dec.has_value());
}
