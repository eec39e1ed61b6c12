#pragma once

// Shared test fixtures: the reference wheel- and axle-module vehicles
// (mirroring the shipped configs) plus helpers for loading them.

#include <string>

#include "agridrive/config.hpp"
#include "agridrive/simulator.hpp"

namespace agridrive::testing {

inline RangeBox reference_rangebox(double brake_limit = 2.0e5) {
    RangeBox box;
    box.stage1 = {20, 100, 3};          // 6
    box.stage2_range_a = {12, 282, 3};  // 24.5 -> 147 overall
    box.stage2_range_b = {15, 96, 3};   // 7.4  -> 44.4 overall
    box.brake_b1 = BrakeState::Closed;
    box.brake_torque_limit_nm = brake_limit;
    return box;
}

inline VehicleConfig wheel_vehicle() {
    VehicleConfig c;
    c.name = "test-wheel";
    c.concept_kind = VehicleConcept::WheelModules;
    c.steering_mode = SteeringMode::FourWheelSymmetric;
    c.tire.mu_peak = 0.55;
    c.source_power_w = 260e3;
    c.dc_bus.max_source_power_w = 260e3;
    for (int i = 0; i < 4; ++i) {
        ModulePlacement p;
        p.module.module_id = i;
        p.module.kind = DriveConcept::WheelModule;
        p.module.state = ModuleState::Drive;
        p.module.motor = default_wheel_motor();
        p.module.overload_credit_j = p.module.motor.overload_budget_j;
        p.module.rangebox = reference_rangebox();
        p.wheels = {i};
        c.modules.push_back(p);
    }
    return c;
}

inline VehicleConfig axle_vehicle() {
    VehicleConfig c = wheel_vehicle();
    c.name = "test-axle";
    c.concept_kind = VehicleConcept::AxleModules;
    c.steering_mode = SteeringMode::FrontOnly;
    c.modules.clear();
    for (int i = 0; i < 2; ++i) {
        ModulePlacement p;
        p.module.module_id = i;
        p.module.kind = DriveConcept::AxleModule;
        p.module.state = ModuleState::Drive;
        p.module.motor = default_axle_motor();
        p.module.overload_credit_j = p.module.motor.overload_budget_j;
        p.module.rangebox = reference_rangebox(4.0e5);
        p.module.speed_gains = {16000.0, 12000.0};
        p.wheels = (i == 0) ? std::vector<int>{0, 1} : std::vector<int>{2, 3};
        c.modules.push_back(p);
    }
    return c;
}

inline std::string config_path(const std::string& name) {
    return std::string(AGRIDRIVE_CONFIG_DIR) + "/" + name;
}

inline Scenario load_scenario(const std::string& name) {
    const auto parsed = parse_config(config_path(name));
    if (!parsed.scenario) throw Error("test fixture lacks a scenario: " + name);
    return *parsed.scenario;
}

}  // namespace agridrive::testing
