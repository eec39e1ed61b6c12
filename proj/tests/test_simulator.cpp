#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <sstream>

#include "agridrive/rng.hpp"
#include "agridrive/simulator.hpp"
#include "agridrive/units.hpp"
#include "test_vehicles.hpp"

using namespace agridrive;
using namespace agridrive::testing;
using Catch::Approx;

namespace {

Scenario flat_speed_scenario(double kmh, double duration_s = 30.0, double dt = 1e-3) {
    Scenario sc;
    sc.name = "flat";
    sc.duration_s = duration_s;
    sc.dt_s = dt;
    sc.maneuvers.push_back({0.0, ManeuverKind::SetSpeed, kmh, RangeTarget::RangeA});
    return sc;
}

double column_max_abs(const SimTrace& trace, const std::string& column) {
    const int c = trace.col(column);
    double m = 0.0;
    for (const auto& row : trace.rows) m = std::max(m, std::abs(row[static_cast<std::size_t>(c)]));
    return m;
}

}  // namespace

TEST_CASE("traction force: zero slip, saturation and antisymmetry", "[simulator]") {
    TireParams tire;
    tire.mu_peak = 0.6;
    tire.slip_at_peak = 0.15;
    CHECK(traction_force(tire, 0.0, 50e3) == 0.0);
    CHECK(traction_force(tire, 0.15, 50e3) == Approx(30e3));
    CHECK(traction_force(tire, 0.8, 50e3) == Approx(30e3));  // saturated
    Rng rng(13);
    for (int i = 0; i < 300; ++i) {
        const double s = rng.uniform(-1.5, 1.5);
        const double n = rng.uniform(0.0, 1e5);
        REQUIRE(traction_force(tire, -s, n) == Approx(-traction_force(tire, s, n)).margin(1e-12));
    }
    CHECK_THROWS_AS(traction_force(tire, 0.1, -1.0), Error);
}

TEST_CASE("a vehicle at rest with zero demand stays at rest", "[simulator]") {
    auto cfg = wheel_vehicle();
    auto sc = flat_speed_scenario(0.0, 5.0);
    const auto res = run_scenario(cfg, sc);
    CHECK(res.metrics.max_speed_mps == 0.0);
    CHECK(res.metrics.final_speed_mps == 0.0);
}

TEST_CASE("steady speed matches the power-balance oracle on the flat", "[simulator]") {
    // 4 x 50 kW at the wheels, f_r = 0.08, 30 t: v = P / (m g f_r) = 8.49 m/s
    auto cfg = wheel_vehicle();
    cfg.tire.mu_peak = 0.8;
    cfg.tire.slip_at_peak = 0.05;
    for (auto& p : cfg.modules) {
        p.module.motor.continuous_power_w = 50e3;
        p.module.motor.peak_power_w = 50e3;
        p.module.motor.overload_budget_j = 0.0;
        p.module.rangebox.stage1.mesh_efficiency = 1.0;
        p.module.rangebox.stage2_range_a.mesh_efficiency = 1.0;
        p.module.rangebox.stage2_range_b.mesh_efficiency = 1.0;
        p.module.rangebox.brake_b1 = BrakeState::Open;
        p.module.rangebox.brake_b2 = BrakeState::Closed;  // road range for ~30 km/h
    }
    auto sc = flat_speed_scenario(35.0, 120.0);
    const auto res = run_scenario(cfg, sc);
    const double oracle = 200e3 / (30000.0 * kGravity * 0.08);
    CHECK(res.metrics.final_speed_mps == Approx(oracle).epsilon(0.02));
    CHECK(res.max_ledger_residual_rel <= 1e-6);
}

TEST_CASE("steady speed on a 10 degree climb follows the grade term", "[simulator]") {
    auto cfg = wheel_vehicle();
    cfg.tire.mu_peak = 0.8;
    cfg.tire.slip_at_peak = 0.05;
    for (auto& p : cfg.modules) {
        p.module.motor.continuous_power_w = 50e3;
        p.module.motor.peak_power_w = 50e3;
        p.module.motor.overload_budget_j = 0.0;
        p.module.rangebox.stage1.mesh_efficiency = 1.0;
        p.module.rangebox.stage2_range_a.mesh_efficiency = 1.0;
        p.module.rangebox.stage2_range_b.mesh_efficiency = 1.0;
    }
    auto sc = flat_speed_scenario(15.0, 90.0);
    sc.terrain.push_back({0.0, 0.0, deg_to_rad(10.0), 1.0});
    const auto res = run_scenario(cfg, sc);
    const double a = deg_to_rad(10.0);
    const double oracle = 200e3 / (30000.0 * kGravity * (std::sin(a) + 0.08 * std::cos(a)));
    CHECK(res.metrics.final_speed_mps == Approx(oracle).epsilon(0.03));
}

TEST_CASE("identical runs give bit-identical traces", "[simulator]") {
    auto cfg = wheel_vehicle();
    auto sc = flat_speed_scenario(6.0, 8.0);
    sc.maneuvers.push_back({3.0, ManeuverKind::Steer, 5.0, RangeTarget::RangeA});
    const auto a = run_scenario(cfg, sc);
    const auto b = run_scenario(cfg, sc);
    REQUIRE(a.trace.rows == b.trace.rows);
    std::ostringstream ca, cb;
    csv::write_table(ca, a.trace.to_table());
    csv::write_table(cb, b.trace.to_table());
    REQUIRE(ca.str() == cb.str());
}

TEST_CASE("metrics recomputed from the exported CSV equal the reported metrics", "[simulator]") {
    auto cfg = wheel_vehicle();
    auto sc = flat_speed_scenario(7.0, 10.0);
    const auto res = run_scenario(cfg, sc);
    std::ostringstream os;
    csv::write_table(os, res.trace.to_table());
    std::istringstream is(os.str());
    const auto replay = SimTrace::from_table(csv::read_table(is));
    const auto metrics = compute_metrics(replay, cfg.efficiency_target, res.events, sc.seed);
    REQUIRE(metrics.total_energy_wh == res.metrics.total_energy_wh);
    REQUIRE(metrics.driveline_efficiency == res.metrics.driveline_efficiency);
    REQUIRE(metrics.field_target_fraction == res.metrics.field_target_fraction);
    REQUIRE(metrics.peak_motor_torque_nm == res.metrics.peak_motor_torque_nm);
    REQUIRE(metrics.min_turning_radius_m == res.metrics.min_turning_radius_m);
    REQUIRE(metrics.final_speed_mps == res.metrics.final_speed_mps);
    REQUIRE(metrics.max_speed_mps == res.metrics.max_speed_mps);
    REQUIRE(metrics.fault_event_count == res.metrics.fault_event_count);
}

TEST_CASE("energy ledger closes through turns, slopes and a range shift", "[simulator]") {
    auto cfg = wheel_vehicle();
    Scenario sc;
    sc.duration_s = 40.0;
    sc.dt_s = 1e-3;
    sc.terrain.push_back({0.0, deg_to_rad(6.0), deg_to_rad(3.0), 1.0});
    sc.maneuvers.push_back({0.0, ManeuverKind::SetSpeed, 9.0, RangeTarget::RangeA});
    sc.maneuvers.push_back({5.0, ManeuverKind::Steer, 12.0, RangeTarget::RangeA});
    sc.maneuvers.push_back({15.0, ManeuverKind::Steer, 0.0, RangeTarget::RangeA});
    sc.maneuvers.push_back({25.0, ManeuverKind::SetRange, 0.0, RangeTarget::RangeB});
    sc.maneuvers.push_back({34.0, ManeuverKind::SetSpeed, 0.0, RangeTarget::RangeA});  // regen braking
    const auto res = run_scenario(cfg, sc);
    CHECK(res.max_ledger_residual_rel <= 1e-6);
    CHECK(res.metrics.fault_event_count == 0);
    // deceleration recovered energy into the buffer at some point
    const int c_buf = res.trace.col("buffer_j");
    double peak_buffer = 0.0;
    for (const auto& row : res.trace.rows)
        peak_buffer = std::max(peak_buffer, row[static_cast<std::size_t>(c_buf)]);
    CHECK(peak_buffer > cfg.dc_bus.buffer_state_j);
}

TEST_CASE("parked modules never show wheel speed; overload raises a fault", "[simulator]") {
    auto cfg = wheel_vehicle();
    for (auto& p : cfg.modules) {
        p.module.state = ModuleState::Parked;
        p.module.rangebox.brake_b1 = BrakeState::Closed;
        p.module.rangebox.brake_b2 = BrakeState::Closed;
    }
    Scenario sc;
    sc.duration_s = 10.0;
    sc.dt_s = 1e-3;
    sc.terrain.push_back({0.0, 0.0, deg_to_rad(10.0), 1.0});
    const auto res = run_scenario(cfg, sc);
    for (const char* col : {"wheel_speed_rads_fl", "wheel_speed_rads_fr", "wheel_speed_rads_rl",
                            "wheel_speed_rads_rr"})
        REQUIRE(column_max_abs(res.trace, col) == 0.0);
    CHECK(res.metrics.final_speed_mps == 0.0);
    CHECK(res.events.empty());
    CHECK(res.max_ledger_residual_rel <= 1e-6);

    // beyond the brake torque limit the model raises a fault, never slips silently
    for (auto& p : cfg.modules) p.module.rangebox.brake_torque_limit_nm = 1e3;
    const auto overloaded = run_scenario(cfg, sc);
    bool brake_fault = false;
    for (const auto& e : overloaded.events)
        if (e.kind == FaultKind::BrakeOverload) brake_fault = true;
    CHECK(brake_fault);
    // once the brakes fold the modules latch Fault, so no row shows a parked
    // module with a turning wheel
    const int c_state = overloaded.trace.col("state_m0");
    const int c_wheel = overloaded.trace.col("wheel_speed_rads_fl");
    for (const auto& row : overloaded.trace.rows)
        if (row[static_cast<std::size_t>(c_state)] == static_cast<double>(static_cast<int>(ModuleState::Parked)))
            REQUIRE(row[static_cast<std::size_t>(c_wheel)] == 0.0);
}

TEST_CASE("free-wheeling wheels transmit no torque and roll from gravity alone", "[simulator]") {
    auto cfg = wheel_vehicle();
    for (auto& p : cfg.modules) {
        p.module.state = ModuleState::FreeWheel;
        p.module.rangebox.brake_b1 = BrakeState::Open;
        p.module.rangebox.brake_b2 = BrakeState::Open;
    }
    Scenario sc;
    sc.duration_s = 10.0;
    sc.dt_s = 1e-3;
    sc.terrain.push_back({-1e6, 0.0, deg_to_rad(8.0), 1.0});
    const auto res = run_scenario(cfg, sc);
    for (const char* col : {"wheel_torque_nm_fl", "wheel_torque_nm_fr", "wheel_torque_nm_rl",
                            "wheel_torque_nm_rr"})
        REQUIRE(column_max_abs(res.trace, col) == 0.0);
    CHECK(res.metrics.final_speed_mps < -1.0);  // rolled backwards down the slope
    CHECK(res.max_ledger_residual_rel <= 1e-6);
}

TEST_CASE("halving dt changes the terminal speed by less than 0.5 percent", "[simulator]") {
    auto cfg = wheel_vehicle();
    const auto coarse = run_scenario(cfg, flat_speed_scenario(10.0, 25.0, 1e-3));
    const auto fine = run_scenario(cfg, flat_speed_scenario(10.0, 25.0, 5e-4));
    const double rel = std::abs(coarse.metrics.final_speed_mps - fine.metrics.final_speed_mps) /
                       fine.metrics.final_speed_mps;
    CHECK(rel < 0.005);
}

TEST_CASE("four-wheel steering turns tighter than front steering on the same command",
          "[simulator]") {
    auto wheel_cfg = wheel_vehicle();
    auto axle_cfg = axle_vehicle();
    Scenario sc;
    sc.duration_s = 35.0;
    sc.dt_s = 1e-3;
    sc.maneuvers.push_back({0.0, ManeuverKind::SetSpeed, 5.0, RangeTarget::RangeA});
    sc.maneuvers.push_back({8.0, ManeuverKind::Steer, 3.4, RangeTarget::RangeA});
    const auto wheel_res = run_scenario(wheel_cfg, sc);
    const auto axle_res = run_scenario(axle_cfg, sc);
    CHECK(wheel_res.metrics.min_turning_radius_m < axle_res.metrics.min_turning_radius_m);
    CHECK(wheel_res.metrics.min_turning_radius_m ==
          Approx(3.4).margin(0.15));  // reaches the commanded radius
    CHECK(axle_res.metrics.min_turning_radius_m ==
          Approx(min_turning_radius(axle_cfg.geometry, SteeringMode::FrontOnly, axle_cfg.max_steer_rad))
              .margin(0.15));
}

TEST_CASE("motor speed equals ratio times wheel speed outside shift transients", "[simulator]") {
    auto cfg = wheel_vehicle();
    Scenario sc;
    sc.duration_s = 40.0;
    sc.dt_s = 1e-3;
    sc.maneuvers.push_back({0.0, ManeuverKind::SetSpeed, 10.0, RangeTarget::RangeA});
    sc.maneuvers.push_back({25.0, ManeuverKind::SetRange, 0.0, RangeTarget::RangeB});
    const auto res = run_scenario(cfg, sc);
    const int c_range = res.trace.col("range_m0");
    const int c_ms = res.trace.col("motor_speed_rads_fl");
    const int c_ws = res.trace.col("wheel_speed_rads_fl");
    const double ratio_a = 6.0 * 24.5;
    const double ratio_b = 6.0 * 7.4;
    for (const auto& row : res.trace.rows) {
        const double range = row[static_cast<std::size_t>(c_range)];
        const double ms = row[static_cast<std::size_t>(c_ms)];
        const double ws = row[static_cast<std::size_t>(c_ws)];
        if (range == 0.0) {
            REQUIRE(ms == Approx(ratio_a * ws).margin(1e-9));
        } else if (range == 1.0) {
            REQUIRE(ms == Approx(ratio_b * ws).margin(1e-9));
        }
    }
    // the shift actually happened
    bool saw_b = false;
    for (const auto& row : res.trace.rows)
        if (row[static_cast<std::size_t>(c_range)] == 1.0) saw_b = true;
    CHECK(saw_b);
}

TEST_CASE("side-slope torque split reproduces the sizing asymmetry factor", "[simulator]") {
    auto cfg = wheel_vehicle();
    Scenario sc;
    sc.duration_s = 60.0;
    sc.dt_s = 1e-3;
    sc.terrain.push_back({0.0, deg_to_rad(10.0), 0.0, 1.0});
    sc.maneuvers.push_back({0.0, ManeuverKind::SetSpeed, 5.0, RangeTarget::RangeA});
    const auto res = run_scenario(cfg, sc);
    const auto& last = res.trace.rows.back();
    const double t_rl = last[static_cast<std::size_t>(res.trace.col("wheel_torque_nm_rl"))];
    const double t_rr = last[static_cast<std::size_t>(res.trace.col("wheel_torque_nm_rr"))];
    const double factor = 2.0 * t_rr / (t_rl + t_rr);  // downhill wheel vs axle mean
    const double beta = deg_to_rad(10.0);
    const double oracle = (std::cos(beta) / 2.0 + 0.6 * std::sin(beta)) / 0.5;
    CHECK(factor == Approx(oracle).epsilon(0.05));
}

TEST_CASE("limp-home check agrees with the full simulation on the shipped scenarios",
          "[simulator]") {
    const auto wheel_cfg = wheel_vehicle();
    const auto axle_cfg = axle_vehicle();
    struct Case {
        const VehicleConfig* cfg;
        double slope_deg;
        bool expect_feasible;
    };
    const Case cases[] = {
        {&wheel_cfg, 0.0, true},
        {&wheel_cfg, 14.0, true},
        {&axle_cfg, 0.0, true},
        {&axle_cfg, 14.0, false},
    };
    for (const auto& c : cases) {
        // rear module (axle) / rear-right module (wheel) fails at t = 2 s
        const int failed_id = (c.cfg->concept_kind == VehicleConcept::AxleModules) ? 1 : 3;
        LimpScenario limp;
        limp.longitudinal_slope_rad = deg_to_rad(c.slope_deg);
        limp.target_speed_kmh = 5.0;
        const auto verdict = limp_home_check(*c.cfg, {failed_id}, limp);
        REQUIRE(verdict.feasible == c.expect_feasible);

        Scenario sc;
        sc.duration_s = 40.0;
        sc.dt_s = 1e-3;
        if (c.slope_deg != 0.0) sc.terrain.push_back({0.0, 0.0, deg_to_rad(c.slope_deg), 1.0});
        sc.maneuvers.push_back({0.0, ManeuverKind::SetSpeed, 5.0, RangeTarget::RangeA});
        sc.faults.push_back({failed_id, 2.0, FaultKind::TotalLoss});
        const auto res = run_scenario(*c.cfg, sc);
        const double target = kmh_to_mps(5.0);
        if (c.expect_feasible) {
            REQUIRE(res.metrics.final_speed_mps >= 0.8 * target);
        } else {
            REQUIRE(res.metrics.final_speed_mps < 0.5 * target);
        }
    }
}

TEST_CASE("comms loss silences a module into fail-safe zero torque", "[simulator]") {
    auto cfg = wheel_vehicle();
    Scenario sc;
    sc.duration_s = 20.0;
    sc.dt_s = 1e-3;
    sc.maneuvers.push_back({0.0, ManeuverKind::SetSpeed, 5.0, RangeTarget::RangeA});
    sc.faults.push_back({2, 10.0, FaultKind::CommsLoss});
    const auto res = run_scenario(cfg, sc);
    // watchdog fault shows up shortly after the injection
    bool timeout_fault = false;
    for (const auto& e : res.events)
        if (e.module_id == 2 && e.kind == FaultKind::CommsTimeout) timeout_fault = true;
    CHECK(timeout_fault);
    // zero torque from that module after the watchdog horizon
    const int c_t = res.trace.col("t_s");
    const int c_trq = res.trace.col("wheel_torque_nm_rl");
    for (const auto& row : res.trace.rows)
        if (row[static_cast<std::size_t>(c_t)] > 10.3)
            REQUIRE(row[static_cast<std::size_t>(c_trq)] == 0.0);
    // no frames from module 2 delivered after the fault instant
    for (const auto& f : res.frames)
        if (f.sender == 2) REQUIRE(f.send_tick <= 10001);
}

TEST_CASE("parking out of a rolling stop keeps the ledger closed", "[simulator]") {
    auto cfg = wheel_vehicle();
    Scenario sc;
    sc.duration_s = 25.0;
    sc.dt_s = 1e-3;
    sc.terrain.push_back({0.0, 0.0, deg_to_rad(4.0), 1.0});
    sc.maneuvers.push_back({0.0, ManeuverKind::SetSpeed, 2.0, RangeTarget::RangeA});
    sc.maneuvers.push_back({10.0, ManeuverKind::SetSpeed, 0.0, RangeTarget::RangeA});
    sc.maneuvers.push_back({20.0, ManeuverKind::Park, 0.0, RangeTarget::RangeA});
    const auto res = run_scenario(cfg, sc);
    // park accepted: all modules end parked with wheels at rest
    const auto& last = res.trace.rows.back();
    for (int m = 0; m < 4; ++m)
        REQUIRE(last[static_cast<std::size_t>(res.trace.col("state_m" + std::to_string(m)))] ==
                static_cast<double>(static_cast<int>(ModuleState::Parked)));
    CHECK(last[static_cast<std::size_t>(res.trace.col("speed_mps"))] == 0.0);
    CHECK(res.max_ledger_residual_rel <= 1e-6);
    // wheel speed is identically zero on every parked row
    const int c_state = res.trace.col("state_m0");
    const int c_ws = res.trace.col("wheel_speed_rads_fl");
    for (const auto& row : res.trace.rows)
        if (row[static_cast<std::size_t>(c_state)] == static_cast<double>(static_cast<int>(ModuleState::Parked)))
            REQUIRE(row[static_cast<std::size_t>(c_ws)] == 0.0);
}

TEST_CASE("torque mode with a small setpoint emulates free-wheeling", "[simulator]") {
    auto cfg = wheel_vehicle();
    Scenario sc;
    sc.duration_s = 15.0;
    sc.dt_s = 1e-3;
    sc.terrain.push_back({0.0, 0.0, deg_to_rad(8.0), 1.0});
    sc.maneuvers.push_back({0.0, ManeuverKind::SetTorque, 25.0, RangeTarget::RangeA});
    const auto res = run_scenario(cfg, sc);
    // ranges stay engaged (no decoupling), but the drive barely resists and
    // the vehicle rolls back down the slope
    const int c_range = res.trace.col("range_m0");
    for (const auto& row : res.trace.rows)
        REQUIRE(row[static_cast<std::size_t>(c_range)] ==
                static_cast<double>(static_cast<int>(RangeState::RangeA)));
    CHECK(res.metrics.final_speed_mps < -0.5);
    CHECK(column_max_abs(res.trace, "wheel_torque_nm_fl") <= 25.0 + 1e-9);
    CHECK(res.max_ledger_residual_rel <= 1e-6);
}

TEST_CASE("an undersized source raises a bus underrun fault", "[simulator]") {
    auto cfg = wheel_vehicle();
    cfg.source_power_w = 5e3;
    cfg.dc_bus.max_source_power_w = 5e3;
    cfg.dc_bus.buffer_state_j = 1e3;
    cfg.dc_bus.buffer_capacity_j = 1e3;
    const auto res = run_scenario(cfg, flat_speed_scenario(8.0, 10.0));
    bool underrun = false;
    for (const auto& e : res.events)
        if (e.kind == FaultKind::BusUnderrun) underrun = true;
    CHECK(underrun);
}

TEST_CASE("config validation: brake upstream of the differential needs the lock", "[simulator]") {
    auto cfg = axle_vehicle();
    cfg.brake_upstream_of_differential = true;
    cfg.differential_lock = false;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.differential_lock = true;
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("shipped scenario files load and replay deterministically", "[simulator]") {
    const auto sc = load_scenario("scenario_accel.json");
    const auto cfg = wheel_vehicle();
    const auto a = run_scenario(cfg, sc);
    const auto b = run_scenario(cfg, sc);
    REQUIRE(a.trace.rows == b.trace.rows);
    CHECK(a.metrics.final_speed_mps > kmh_to_mps(9.0));
}
