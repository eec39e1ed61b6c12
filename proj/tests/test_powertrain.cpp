#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>

#include "agridrive/powertrain.hpp"
#include "agridrive/rng.hpp"
#include "agridrive/units.hpp"

using namespace agridrive;
using Catch::Approx;

namespace {

MotorSpec spec_100kw() {
    MotorSpec m;
    m.continuous_power_w = 100e3;
    m.peak_power_w = 200e3;
    m.base_speed_rad_s = rpm_to_rad_s(2000.0);
    m.max_speed_rad_s = rpm_to_rad_s(6000.0);
    return m;
}

VehicleGeometry geometry_ht06() {
    VehicleGeometry g;
    g.wheelbase_m = 3.0;
    g.track_width_m = 2.0;
    g.cog_height_m = 1.2;  // h/T = 0.6
    g.cog_offset_m = 1.5;
    return g;
}

// Moment balance about the contact line of one axle: the downhill wheel's
// share of the axle weight.
double downhill_share_oracle(double side_slope_rad, double h_over_t) {
    return std::cos(side_slope_rad) / 2.0 + h_over_t * std::sin(side_slope_rad);
}

DutyCycle flat_duty(double torque_nm, double speed_kmh) {
    DutyCycle d;
    d.segments.push_back({600.0, speed_kmh, torque_nm, Direction::Forward});
    return d;
}

}  // namespace

TEST_CASE("motor torque envelope: constant torque then constant power", "[powertrain]") {
    const auto m = spec_100kw();
    CHECK(motor_torque_limit(m, 100.0, TorqueMode::Continuous) ==
          Approx(477.46482927568604).epsilon(1e-12));
    CHECK(motor_torque_limit(m, 418.87902047863906, TorqueMode::Continuous) ==
          Approx(238.73241463784302).epsilon(1e-12));
    CHECK(motor_torque_limit(m, 100.0, TorqueMode::Peak) ==
          Approx(2.0 * 477.46482927568604).epsilon(1e-12));
    CHECK_THROWS_AS(motor_torque_limit(m, m.max_speed_rad_s * 1.01, TorqueMode::Peak), SpeedOutOfRange);
    CHECK_THROWS_AS(motor_torque_limit(m, -1.0, TorqueMode::Peak), SpeedOutOfRange);
}

TEST_CASE("torque envelope is continuous at base speed", "[powertrain][property]") {
    Rng rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        MotorSpec m;
        m.continuous_power_w = rng.uniform(10e3, 400e3);
        m.peak_power_w = m.continuous_power_w * rng.uniform(1.0, 2.5);
        m.base_speed_rad_s = rng.uniform(50.0, 400.0);
        m.max_speed_rad_s = m.base_speed_rad_s * rng.uniform(1.5, 4.0);
        const double below = motor_torque_limit(m, m.base_speed_rad_s * (1.0 - 1e-12), TorqueMode::Peak);
        const double above = motor_torque_limit(m, m.base_speed_rad_s * (1.0 + 1e-12), TorqueMode::Peak);
        REQUIRE(std::abs(below - above) / below < 1e-9);
    }
}

TEST_CASE("drive efficiency conventions", "[powertrain]") {
    const auto m = spec_100kw();
    CHECK(drive_efficiency(m, 0.0, 100.0) == 0.0);  // all power is loss
    const double eta = drive_efficiency(m, 100.0, 300.0);
    CHECK(eta > 0.0);
    CHECK(eta < 1.0);
    CHECK_THROWS_AS(drive_efficiency(m, 1e6, 300.0), OutOfEnvelope);

    const HydrostaticBaseline h = default_hydrostatic_baseline();
    CHECK(drive_efficiency(h, 0.0, 1.0) == 0.0);
    CHECK_THROWS_AS(drive_efficiency(h, h.rated_torque_nm * 1.1, 1.0), OutOfEnvelope);
}

TEST_CASE("hydrostatic map: partial load strictly below full load at equal speed",
          "[powertrain][property]") {
    const HydrostaticBaseline h = default_hydrostatic_baseline();
    Rng rng(17);
    for (int trial = 0; trial < 500; ++trial) {
        const double sigma = rng.uniform(0.05, 1.0);
        const double tau = rng.uniform(0.02, 0.999);
        const double speed = sigma * h.rated_speed_rad_s;
        REQUIRE(drive_efficiency(h, tau * h.rated_torque_nm, speed) <
                drive_efficiency(h, h.rated_torque_nm, speed));
    }
}

TEST_CASE("electric drive holds up better at quarter load than the hydrostatic", "[powertrain]") {
    const MotorSpec m = default_wheel_motor();
    const HydrostaticBaseline h = default_hydrostatic_baseline();
    // compare at a common speed fraction, full vs quarter torque
    const double motor_speed = 300.0;
    const double motor_full = motor_torque_limit(m, motor_speed, TorqueMode::Continuous);
    const double e_full = drive_efficiency(m, motor_full, motor_speed);
    const double e_quarter = drive_efficiency(m, motor_full / 4.0, motor_speed);
    const double hydro_speed = 0.6 * h.rated_speed_rad_s;
    const double h_full = drive_efficiency(h, h.rated_torque_nm, hydro_speed);
    const double h_quarter = drive_efficiency(h, h.rated_torque_nm / 4.0, hydro_speed);
    CHECK(e_quarter / e_full > h_quarter / h_full);
}

TEST_CASE("wheel loads: flat ground, centered CoG", "[powertrain]") {
    const auto g = geometry_ht06();
    const auto loads = wheel_load_distribution(30000.0, g, 0.0, 0.0);
    for (double n : loads) CHECK(n == Approx(30000.0 * kGravity / 4.0).epsilon(1e-12));
}

TEST_CASE("wheel loads: 10 deg side slope matches the moment-balance oracle", "[powertrain]") {
    const auto g = geometry_ht06();
    const double beta = deg_to_rad(10.0);
    const auto loads = wheel_load_distribution(30000.0, g, beta, 0.0);
    const double axle_weight = 30000.0 * kGravity / 2.0;
    const double share = downhill_share_oracle(beta, 0.6);  // 0.5966 -> 59.7 %
    CHECK(loads[1] == Approx(axle_weight * share).epsilon(1e-12));  // FR is downhill
    CHECK(loads[3] == Approx(axle_weight * share).epsilon(1e-12));
    CHECK(share == Approx(0.5965927831062622).epsilon(1e-12));
}

TEST_CASE("wheel loads: longitudinal slope keeps lateral symmetry", "[powertrain]") {
    const auto g = geometry_ht06();
    const auto loads = wheel_load_distribution(30000.0, g, 0.0, deg_to_rad(10.0));
    CHECK(loads[0] == Approx(loads[1]).epsilon(1e-12));
    CHECK(loads[2] == Approx(loads[3]).epsilon(1e-12));
    CHECK(loads[2] > loads[0]);  // climbing shifts load to the rear
}

TEST_CASE("wheel loads sum to the slope-projected weight", "[powertrain][property]") {
    Rng rng(29);
    for (int trial = 0; trial < 500; ++trial) {
        VehicleGeometry g;
        g.wheelbase_m = rng.uniform(2.0, 4.5);
        g.track_width_m = rng.uniform(1.5, 3.0);
        g.cog_height_m = rng.uniform(0.5, 1.4);
        g.cog_offset_m = rng.uniform(0.3, g.wheelbase_m - 0.3);
        const double mass = rng.uniform(5e3, 6e4);
        const double beta = rng.uniform(-0.3, 0.3);
        const double alpha = rng.uniform(-0.3, 0.3);
        std::array<double, 4> loads{};
        try {
            loads = wheel_load_distribution(mass, g, beta, alpha);
        } catch (const TipOver&) {
            continue;
        }
        const double sum = loads[0] + loads[1] + loads[2] + loads[3];
        REQUIRE(sum == Approx(mass * kGravity * std::cos(beta) * std::cos(alpha)).epsilon(1e-12));
    }
}

TEST_CASE("downhill load is monotone in the side slope", "[powertrain][property]") {
    const auto g = geometry_ht06();
    double prev = 0.0;
    for (double deg = 0.0; deg <= 20.0; deg += 0.5) {
        const auto loads = wheel_load_distribution(30000.0, g, deg_to_rad(deg), 0.0);
        REQUIRE(loads[1] >= prev);
        prev = loads[1];
    }
}

TEST_CASE("tip over is detected", "[powertrain]") {
    VehicleGeometry g = geometry_ht06();
    g.cog_height_m = 2.6;  // h/T = 1.3
    CHECK_THROWS_AS(wheel_load_distribution(30000.0, g, deg_to_rad(25.0), 0.0), TipOver);
}

TEST_CASE("size_motors: symmetric duty on level ground gives factor 1", "[powertrain]") {
    const auto g = geometry_ht06();
    const auto duty = flat_duty(3000.0, 6.0);
    const auto sizing = size_motors(DriveConcept::WheelModule, g, duty, WorstCase{});
    CHECK(sizing.overdimensioning_factor == 1.0);
    CHECK(sizing.per_motor_wheel_torque_nm == Approx(3000.0));
    CHECK(sizing.axle_wheel_torque_nm == Approx(6000.0));
}

TEST_CASE("size_motors: 10 deg side slope overdimensions the wheel motor", "[powertrain]") {
    const auto g = geometry_ht06();
    const auto duty = flat_duty(3000.0, 6.0);
    WorstCase worst;
    worst.side_slope_rad = deg_to_rad(10.0);
    const auto sizing = size_motors(DriveConcept::WheelModule, g, duty, worst);
    const double oracle = downhill_share_oracle(worst.side_slope_rad, 0.6) / 0.5;
    CHECK(std::abs(sizing.overdimensioning_factor - oracle) <= 1e-9);
    CHECK(sizing.overdimensioning_factor == Approx(1.1931855662125244).epsilon(1e-9));
}

TEST_CASE("size_motors: axle rating does not depend on the side slope", "[powertrain]") {
    const auto g = geometry_ht06();
    const auto duty = flat_duty(3000.0, 6.0);
    WorstCase flat;
    WorstCase sloped;
    sloped.side_slope_rad = deg_to_rad(10.0);
    const auto a = size_motors(DriveConcept::AxleModule, g, duty, flat);
    const auto b = size_motors(DriveConcept::AxleModule, g, duty, sloped);
    CHECK(a.per_motor_wheel_torque_nm == b.per_motor_wheel_torque_nm);
    CHECK(b.overdimensioning_factor == 1.0);
}

TEST_CASE("size_motors: overdimensioning factor is at least 1", "[powertrain][property]") {
    const auto g = geometry_ht06();
    const auto duty = flat_duty(2500.0, 5.0);
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        WorstCase worst;
        worst.side_slope_rad = rng.uniform(0.0, 0.45);
        const auto sizing = size_motors(DriveConcept::WheelModule, g, duty, worst);
        REQUIRE(sizing.overdimensioning_factor >= 1.0);
        if (worst.side_slope_rad == 0.0) REQUIRE(sizing.overdimensioning_factor == 1.0);
    }
}

TEST_CASE("size_motors: ceiling produces InfeasibleDuty", "[powertrain]") {
    const auto g = geometry_ht06();
    const auto duty = flat_duty(3000.0, 6.0);
    WorstCase worst;
    worst.torque_ceiling_nm = 100.0;
    CHECK_THROWS_AS(size_motors(DriveConcept::WheelModule, g, duty, worst), InfeasibleDuty);
}

TEST_CASE("dc bus: balanced step leaves the buffer unchanged", "[powertrain]") {
    DcBus bus;
    const std::array<double, 2> sinks{100e3, 50e3};
    const auto r = dc_bus_step(bus, 150e3, sinks, 0.01);
    CHECK(r.bus.buffer_state_j == bus.buffer_state_j);
    CHECK(r.residual_w == 0.0);
    CHECK_FALSE(r.underrun);
}

TEST_CASE("dc bus: regeneration charges the buffer", "[powertrain]") {
    DcBus bus;
    bus.buffer_state_j = 100e3;
    const std::array<double, 1> sinks{-20e3};
    const auto r = dc_bus_step(bus, 0.0, sinks, 1.0);
    CHECK(r.bus.buffer_state_j == Approx(120e3));
    CHECK_FALSE(r.underrun);
}

TEST_CASE("dc bus: demand beyond source and buffer underruns", "[powertrain]") {
    DcBus bus;
    bus.buffer_state_j = 0.0;
    bus.max_source_power_w = 200e3;
    const std::array<double, 1> sinks{300e3};
    const auto r = dc_bus_step(bus, 200e3, sinks, 1.0);
    CHECK(r.underrun);
    CHECK(r.residual_w < 0.0);
    CHECK(r.bus.buffer_state_j == 0.0);
}

TEST_CASE("calibration: anchor and cycle deltas hit the published comparison", "[powertrain]") {
    const auto report = efficiency_calibration(default_wheel_motor(), default_hydrostatic_baseline(),
                                               default_field_cycle());
    INFO("anchor electric " << report.anchor_electric << " hydro " << report.anchor_hydrostatic);
    INFO("cycle electric " << report.cycle_electric << " hydro " << report.cycle_hydrostatic);
    CHECK(report.anchor_delta >= 0.17);
    CHECK(report.cycle_delta >= 0.23);
    CHECK(report.cycle_delta <= 0.27);
}
