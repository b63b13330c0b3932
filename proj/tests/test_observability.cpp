#include <doctest.h>

#include <cmath>

#include "formod/astro.hpp"
#include "formod/observability.hpp"

using namespace formod;

namespace {
astro::CartesianState reference_chief() {
    return astro::coe_to_cartesian({43399.0, 0, 0, 0, 0, 0});
}

astro::RelativeState first_formation_offset() {
    astro::RelativeState rel;
    rel.dr << 1.633, 4.155, -2.165;
    rel.dv << -0.1289e-3, -0.1140e-3, 8.729e-5;
    return rel;
}
}  // namespace

TEST_CASE("local observability matrix block structure") {
    const auto chief = reference_chief();
    const auto rel = first_formation_offset();
    const auto local = observability::local_obs_matrix(chief, rel);

    // first block row reads the relative position directly
    CHECK((local.m.block<3, 3>(0, 6) - Eigen::Matrix3d::Identity()).norm() == 0.0);
    CHECK(local.m.block<3, 3>(0, 0).norm() == 0.0);
    CHECK(local.m.block<3, 3>(0, 3).norm() == 0.0);
    CHECK(local.m.block<3, 3>(0, 9).norm() == 0.0);
    // second block row reads the relative velocity
    CHECK((local.m.block<3, 3>(3, 9) - Eigen::Matrix3d::Identity()).norm() == 0.0);

    SUBCASE("generic offset geometry has full rank") {
        const auto metrics = observability::sv_metrics(local.m);
        CHECK(metrics.rank == 12);
    }
    SUBCASE("coincident spacecraft lose rank") {
        const auto degenerate =
            observability::local_obs_matrix(chief, astro::RelativeState{});
        CHECK(observability::sv_metrics(degenerate.m).rank < 12);
    }
    SUBCASE("mirrored equal-radius geometry loses rank") {
        // antipodal deputy: same radius, same outer product, G1 == G0
        astro::RelativeState mirror;
        mirror.dr = -2.0 * chief.r;
        mirror.dv = -2.0 * chief.v;
        const auto degenerate = observability::local_obs_matrix(chief, mirror);
        CHECK(observability::sv_metrics(degenerate.m).rank < 12);
    }
}

TEST_CASE("sv_metrics") {
    SUBCASE("identity matrix") {
        const auto m = observability::sv_metrics(Eigen::MatrixXd::Identity(4, 4));
        CHECK(m.lui == doctest::Approx(-1.0));
        CHECK(m.cn == doctest::Approx(1.0));
        CHECK(m.rank == 4);
    }
    SUBCASE("diagonal 2,1") {
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
        d(0, 0) = 2.0;
        d(1, 1) = 1.0;
        const auto m = observability::sv_metrics(d);
        CHECK(m.lui == doctest::Approx(-1.0));
        CHECK(m.cn == doctest::Approx(2.0));
        CHECK(m.dominant_state_min == 1);
        CHECK(m.dominant_state_max == 0);
    }
    SUBCASE("scaling moves the LUI, not the condition number") {
        Eigen::MatrixXd a(3, 2);
        a << 1.0, 0.2, -0.4, 2.0, 0.3, 0.7;
        const auto base = observability::sv_metrics(a);
        const auto scaled = observability::sv_metrics(5.0 * a);
        CHECK(scaled.lui == doctest::Approx(5.0 * base.lui).epsilon(1e-12));
        CHECK(scaled.cn == doctest::Approx(base.cn).epsilon(1e-12));
    }
    SUBCASE("all-zero matrix reports the singular sentinels") {
        const auto m = observability::sv_metrics(Eigen::MatrixXd::Zero(3, 3));
        CHECK(m.lui == 0.0);
        CHECK(std::isinf(m.cn));
        CHECK(m.neg_recip_cn == 0.0);
        CHECK(m.rank == 0);
    }
}

TEST_CASE("discrete stacking on a whitened scalar toy") {
    // one state, H = 1, Phi = I, sigma = 2, two samples: rows are 0.5 each
    dynamics::StmTrajectory traj;
    traj.epochs = {0.0, 1.0};
    traj.states = {Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)};
    traj.stms = {Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1)};
    std::vector<Eigen::MatrixXd> h(2, Eigen::MatrixXd::Constant(1, 1, 0.5));
    const Eigen::MatrixXd info = observability::discrete_obs_matrix(traj, h);
    REQUIRE(info.rows() == 2);
    CHECK(info(0, 0) == 0.5);
    CHECK(info(1, 0) == 0.5);
    CHECK(observability::sv_metrics(info).sigma_min ==
          doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("srsfim zeroes eclipsed samples and loses information monotonically") {
    const auto chief = reference_chief();
    const auto rel = first_formation_offset();
    Eigen::VectorXd x0(12);
    x0 << chief.r, chief.v, rel.dr, rel.dv;

    std::vector<double> epochs;
    for (int k = 0; k < 40; ++k) epochs.push_back(90.0 * k);
    const auto traj = dynamics::propagate_with_stm_grid(x0, epochs, {});

    const std::vector<observability::PairSpec> pairs = {
        {1, 2, measurement::MeasMode::range_and_bearing, measurement::NoiseSpec{}}};

    const auto clear = observability::srsfim(traj, pairs, {});
    CHECK(clear.m.rows() == 3 * 40);
    CHECK(clear.uneclipsed_count() == 40);

    SUBCASE("all samples eclipsed gives a zero matrix") {
        const std::vector<bool> all(40, true);
        const auto dark = observability::srsfim(traj, pairs, all);
        CHECK(dark.m.norm() == 0.0);
        CHECK(observability::sv_metrics(dark.m).sigma_min == 0.0);
    }
    SUBCASE("masking any sample cannot raise the smallest singular value") {
        const double base = observability::sv_metrics(clear.m).sigma_min;
        for (int masked : {0, 7, 20, 39}) {
            std::vector<bool> mask(40, false);
            mask[static_cast<std::size_t>(masked)] = true;
            const auto metrics =
                observability::sv_metrics(observability::srsfim(traj, pairs, mask).m);
            CHECK(metrics.sigma_min <= base + 1e-12);
        }
    }
}

TEST_CASE("single-epoch discrete matrix with identity observation") {
    dynamics::StmTrajectory traj;
    traj.epochs = {0.0};
    traj.states = {Eigen::VectorXd::Zero(4)};
    traj.stms = {Eigen::MatrixXd::Identity(4, 4)};
    std::vector<Eigen::MatrixXd> h = {Eigen::MatrixXd::Identity(4, 4)};
    const Eigen::MatrixXd obs = observability::discrete_obs_matrix(traj, h);
    CHECK((obs - Eigen::MatrixXd::Identity(4, 4)).norm() == 0.0);
    CHECK(observability::sv_metrics(obs).rank == 4);
}

TEST_CASE("radially aligned deputy: low orbits are more observable") {
    const astro::Constants c;
    const auto chief = reference_chief();
    const auto local_lui = [&](double radius) {
        astro::RelativeState rel;
        rel.dr << radius - 43399.0, 0.0, 0.0;
        const double v_dep = std::sqrt(c.mu_earth / radius);
        rel.dv << 0.0, v_dep - chief.v.y(), 0.0;
        const auto m = observability::local_obs_matrix(chief, rel, c);
        return std::abs(observability::sv_metrics(m.m).lui);
    };
    CHECK(local_lui(6678.0) > local_lui(3.0e5));
}

TEST_CASE("state labels for the stacked layout") {
    CHECK(observability::absrel_state_label(0) == "rx");
    CHECK(observability::absrel_state_label(1) == "ry");
    CHECK(observability::absrel_state_label(5) == "vz");
    CHECK(observability::absrel_state_label(6) == "drx_2");
    CHECK(observability::absrel_state_label(11) == "dvz_2");
    CHECK(observability::absrel_state_label(12) == "drx_3");
}
