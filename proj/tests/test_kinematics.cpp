#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "agridrive/kinematics.hpp"
#include "agridrive/rng.hpp"
#include "agridrive/units.hpp"

using namespace agridrive;
using Catch::Approx;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

VehicleGeometry test_geometry() {
    VehicleGeometry g;
    g.wheelbase_m = 3.0;
    g.track_width_m = 2.0;
    g.rolling_radius_m = 0.78;
    return g;
}

// Angle between the wheel's velocity direction (its heading) and the circle
// tangent at the wheel, for a turn about `icr`. Zero means a clean roll.
double perpendicularity_residual(const Vec2& wheel, double steer, const Vec2& icr) {
    const double radial_x = wheel.x - icr.x;
    const double radial_y = wheel.y - icr.y;
    const double hx = std::cos(steer);
    const double hy = std::sin(steer);
    // heading must be orthogonal to the radial direction
    const double dot = radial_x * hx + radial_y * hy;
    return std::abs(std::asin(dot / std::hypot(radial_x, radial_y)));
}

}  // namespace

TEST_CASE("dof_count covers all concept/steering combinations", "[kinematics]") {
    CHECK(dof_count(DriveConcept::AxleModule, false) == 2);
    CHECK(dof_count(DriveConcept::AxleModule, true) == 4);
    CHECK(dof_count(DriveConcept::WheelModule, false) == 4);
    CHECK(dof_count(DriveConcept::WheelModule, true) == 8);
}

TEST_CASE("dof_count: wheel modules double the axle-module count", "[kinematics][property]") {
    for (bool steer : {false, true})
        CHECK(dof_count(DriveConcept::WheelModule, steer) == 2 * dof_count(DriveConcept::AxleModule, steer));
}

TEST_CASE("ackermann_angles straight line is the identity", "[kinematics]") {
    const auto a = ackermann_angles(test_geometry(), SteeringMode::FrontOnly, kInf);
    for (double v : a) CHECK(v == 0.0);
}

TEST_CASE("ackermann_angles front steering matches the ICR oracle", "[kinematics]") {
    // oracle: atan(L / (R -+ T/2)) about the rear-axle line
    const auto a = ackermann_angles(test_geometry(), SteeringMode::FrontOnly, 6.0);
    CHECK(a[0] == Approx(0.5404195002705842).epsilon(1e-12));  // inner (left), 30.96 deg
    CHECK(a[1] == Approx(0.4048917862850834).epsilon(1e-12));  // outer, 23.20 deg
    CHECK(a[2] == 0.0);
    CHECK(a[3] == 0.0);
}

TEST_CASE("ackermann_angles four-wheel symmetric uses the half wheelbase", "[kinematics]") {
    const auto a = ackermann_angles(test_geometry(), SteeringMode::FourWheelSymmetric, 6.0);
    CHECK(a[0] == Approx(0.2914567944778671).epsilon(1e-12));  // front inner, 16.70 deg
    CHECK(a[2] == Approx(-a[0]).epsilon(1e-12));               // rear mirrors front
    CHECK(a[3] == Approx(-a[1]).epsilon(1e-12));
}

TEST_CASE("ackermann_angles rejects radii inside the track", "[kinematics]") {
    CHECK_THROWS_AS(ackermann_angles(test_geometry(), SteeringMode::FrontOnly, 0.9), RadiusTooSmall);
    CHECK_THROWS_AS(ackermann_angles(test_geometry(), SteeringMode::FrontOnly, -1.0), RadiusTooSmall);
}

TEST_CASE("wheel axes always pass through the ICR", "[kinematics][property]") {
    Rng rng(7);
    for (int trial = 0; trial < 500; ++trial) {
        VehicleGeometry g;
        g.wheelbase_m = rng.uniform(1.5, 5.0);
        g.track_width_m = rng.uniform(1.0, 3.0);
        g.rolling_radius_m = rng.uniform(0.3, 1.1);
        const double radius = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(g.track_width_m, 40.0);
        const auto mode = rng.bernoulli(0.5) ? SteeringMode::FrontOnly : SteeringMode::FourWheelSymmetric;
        const auto angles = ackermann_angles(g, mode, radius);
        const Vec2 icr{mode == SteeringMode::FrontOnly ? 0.0 : g.wheelbase_m / 2.0, radius};
        for (int w = 0; w < kWheelCount; ++w) {
            const auto pos = wheel_position(g, static_cast<Wheel>(w));
            REQUIRE(perpendicularity_residual(pos, angles[static_cast<std::size_t>(w)], icr) <= 1e-9);
        }
    }
}

TEST_CASE("wheel_speeds_for_icr straight line gives equal speeds", "[kinematics]") {
    std::array<WheelPose, kWheelCount> poses{};
    const auto g = test_geometry();
    for (int w = 0; w < kWheelCount; ++w) poses[static_cast<std::size_t>(w)].position = wheel_position(g, static_cast<Wheel>(w));
    const auto speeds = wheel_speeds_for_icr(g, poses, 3.33);
    for (double s : speeds) CHECK(s == Approx(4.269230769230769).epsilon(1e-12));
}

TEST_CASE("wheel_speeds_for_icr rear-axle turn keeps the 5:7 distance ratio", "[kinematics]") {
    const auto g = test_geometry();
    std::array<WheelPose, kWheelCount> poses{};
    const auto angles = ackermann_angles(g, SteeringMode::FrontOnly, 6.0);
    for (int w = 0; w < kWheelCount; ++w) {
        poses[static_cast<std::size_t>(w)].position = wheel_position(g, static_cast<Wheel>(w));
        poses[static_cast<std::size_t>(w)].steer_angle = angles[static_cast<std::size_t>(w)];
    }
    const auto speeds = wheel_speeds_for_icr(g, poses, 2.0);
    // rear wheels sit 5 m and 7 m from the ICR
    CHECK(speeds[2] / speeds[3] == Approx(5.0 / 7.0).epsilon(1e-9));
}

TEST_CASE("wheel at the ICR has zero speed", "[kinematics]") {
    const auto g = test_geometry();
    const Vec2 icr = wheel_position(g, Wheel::RearLeft);
    const auto speeds = wheel_speeds_for_icr(g, icr, 1.0);
    CHECK(speeds[2] == 0.0);
    CHECK(speeds[3] > 0.0);
}

TEST_CASE("inconsistent steering is rejected, analysis reports it", "[kinematics]") {
    const auto g = test_geometry();
    std::array<WheelPose, kWheelCount> poses{};
    for (int w = 0; w < kWheelCount; ++w) poses[static_cast<std::size_t>(w)].position = wheel_position(g, static_cast<Wheel>(w));
    poses[0].steer_angle = 0.5;
    poses[1].steer_angle = -0.4;  // axes cross on the wrong side
    CHECK_THROWS_AS(wheel_speeds_for_icr(g, poses, 2.0), InconsistentSteering);
    // the IndependentPerWheel path reports instead of throwing
    const auto analysis = analyze_steering(poses);
    CHECK_FALSE(analysis.straight);
    CHECK(analysis.residual_m > 1e-3);
}

TEST_CASE("ackermann then speeds implies slip-free rolling", "[kinematics][property]") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        VehicleGeometry g;
        g.wheelbase_m = rng.uniform(2.0, 4.5);
        g.track_width_m = rng.uniform(1.2, 2.8);
        g.rolling_radius_m = rng.uniform(0.4, 1.0);
        const double radius = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(g.track_width_m, 25.0);
        const auto mode = rng.bernoulli(0.5) ? SteeringMode::FrontOnly : SteeringMode::FourWheelSymmetric;
        const auto angles = ackermann_angles(g, mode, radius);
        std::array<WheelPose, kWheelCount> poses{};
        for (int w = 0; w < kWheelCount; ++w) {
            poses[static_cast<std::size_t>(w)].position = wheel_position(g, static_cast<Wheel>(w));
            poses[static_cast<std::size_t>(w)].steer_angle = angles[static_cast<std::size_t>(w)];
        }
        const double v = rng.uniform(0.5, 10.0);
        const auto speeds = wheel_speeds_for_icr(g, poses, v);
        // slip-free: ground speed at each wheel equals omega * r, and the wheel
        // travels on its circle, so speed must scale with ICR distance.
        const Vec2 icr{mode == SteeringMode::FrontOnly ? 0.0 : g.wheelbase_m / 2.0, radius};
        const Vec2 ref = reference_point(g);
        const double d_ref = std::hypot(ref.x - icr.x, ref.y - icr.y);
        for (int w = 0; w < kWheelCount; ++w) {
            const auto pos = wheel_position(g, static_cast<Wheel>(w));
            const double d = std::hypot(pos.x - icr.x, pos.y - icr.y);
            REQUIRE(speeds[static_cast<std::size_t>(w)] * g.rolling_radius_m ==
                    Approx(v * d / d_ref).epsilon(1e-9));
        }
    }
}

TEST_CASE("independent per-wheel steering realizes the symmetric solution", "[kinematics]") {
    const auto g = test_geometry();
    const auto a = ackermann_angles(g, SteeringMode::IndependentPerWheel, 6.0);
    const auto b = ackermann_angles(g, SteeringMode::FourWheelSymmetric, 6.0);
    for (int i = 0; i < kWheelCount; ++i)
        CHECK(a[static_cast<std::size_t>(i)] == b[static_cast<std::size_t>(i)]);
    CHECK(min_turning_radius(g, SteeringMode::IndependentPerWheel, 0.5) ==
          min_turning_radius(g, SteeringMode::FourWheelSymmetric, 0.5));
}

TEST_CASE("min_turning_radius matches the ICR oracle", "[kinematics]") {
    const auto g = test_geometry();
    const double limit = deg_to_rad(35.0);
    CHECK(min_turning_radius(g, SteeringMode::FrontOnly, limit) ==
          Approx(5.284444020226344).epsilon(1e-12));
    CHECK(min_turning_radius(g, SteeringMode::FourWheelSymmetric, limit) ==
          Approx(3.142222010113172).epsilon(1e-12));
}

TEST_CASE("min_turning_radius limit cases", "[kinematics]") {
    const auto g = test_geometry();
    CHECK(std::isinf(min_turning_radius(g, SteeringMode::FrontOnly, 0.0)));
    CHECK(min_turning_radius(g, SteeringMode::FrontOnly, 1e-6) > 1e5);
}

TEST_CASE("four-wheel steering always turns tighter than front steering", "[kinematics][property]") {
    Rng rng(3);
    for (int trial = 0; trial < 300; ++trial) {
        VehicleGeometry g;
        g.wheelbase_m = rng.uniform(1.5, 5.0);
        g.track_width_m = rng.uniform(1.0, 3.0);
        const double limit = rng.uniform(0.05, 1.2);
        REQUIRE(min_turning_radius(g, SteeringMode::FourWheelSymmetric, limit) <
                min_turning_radius(g, SteeringMode::FrontOnly, limit));
    }
}

TEST_CASE("geometry validation catches bad fields", "[kinematics]") {
    VehicleGeometry g = test_geometry();
    g.cog_offset_m = 5.0;  // beyond the wheelbase
    CHECK_THROWS_AS(g.validate(), ConfigError);
    g = test_geometry();
    g.track_width_m = -1.0;
    CHECK_THROWS_AS(g.validate(), ConfigError);
}
