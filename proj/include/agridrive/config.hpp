#pragma once

#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "agridrive/simulator.hpp"

namespace agridrive {

using json = nlohmann::json;

namespace cfg_detail {

// Strict mode: every object is checked against its schema before reading, so
// a typo fails loudly with the offending path instead of silently defaulting.
inline void check_keys(const json& obj, const std::string& path,
                       std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(path, "expected an object");
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw ConfigError(path + "." + key, "unknown key");
    }
}

inline double num(const json& obj, const std::string& path, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) throw ConfigError(path + "." + key, "expected a number");
    return obj[key].get<double>();
}

inline double require_num(const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) throw ConfigError(path + "." + key, "missing required field");
    if (!obj[key].is_number()) throw ConfigError(path + "." + key, "expected a number");
    return obj[key].get<double>();
}

inline bool flag(const json& obj, const std::string& path, const char* key, bool fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_boolean()) throw ConfigError(path + "." + key, "expected a boolean");
    return obj[key].get<bool>();
}

inline std::string str(const json& obj, const std::string& path, const char* key,
                       const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_string()) throw ConfigError(path + "." + key, "expected a string");
    return obj[key].get<std::string>();
}

inline PlanetaryStage stage_from(const json& j, const std::string& path, double mesh_eff) {
    if (!j.is_array() || j.size() != 3) throw ConfigError(path, "expected [sun, ring, planets]");
    PlanetaryStage s;
    s.sun_teeth = j[0].get<int>();
    s.ring_teeth = j[1].get<int>();
    s.planet_count = j[2].get<int>();
    s.mesh_efficiency = mesh_eff;
    try {
        s.validate();
    } catch (const InvalidToothCounts& e) {
        throw ConfigError(path, e.what());
    }
    return s;
}

}  // namespace cfg_detail

// ---------------------------------------------------------------------------
// Parsing.

inline EfficiencyTarget parse_target(const json& j, const std::string& path) {
    using namespace cfg_detail;
    check_keys(j, path, {"label", "knots", "focus_low_kmh", "focus_high_kmh"});
    const std::string label = str(j, path, "label", "bernhard_harvester");
    EfficiencyTarget t;
    if (label == "renius_tractor") {
        t = default_renius_target();
    } else if (label == "bernhard_harvester") {
        t = bernhard_from_renius(default_renius_target());
    } else if (label == "custom") {
        t.label = TargetLabel::Custom;
    } else {
        throw ConfigError(path + ".label", "expected renius_tractor, bernhard_harvester or custom");
    }
    if (j.contains("knots")) {
        t.knots.clear();
        for (const auto& k : j["knots"]) {
            if (!k.is_array() || k.size() != 2) throw ConfigError(path + ".knots", "expected [speed, eta] pairs");
            t.knots.push_back({k[0].get<double>(), k[1].get<double>()});
        }
    }
    t.focus_low_kmh = num(j, path, "focus_low_kmh", t.focus_low_kmh);
    t.focus_high_kmh = num(j, path, "focus_high_kmh", t.focus_high_kmh);
    t.validate();
    return t;
}

inline MotorSpec parse_motor(const json& j, const std::string& path, DriveConcept kind) {
    using namespace cfg_detail;
    MotorSpec m = (kind == DriveConcept::AxleModule) ? default_axle_motor() : default_wheel_motor();
    if (j.is_string()) {
        const std::string name = j.get<std::string>();
        if (name == "default_wheel") return default_wheel_motor();
        if (name == "default_axle") return default_axle_motor();
        throw ConfigError(path, "expected default_wheel, default_axle or an object");
    }
    check_keys(j, path,
               {"continuous_power_w", "peak_power_w", "base_speed_rpm", "max_speed_rpm",
                "nominal_speed_rpm", "overload_budget_j", "loss"});
    m.continuous_power_w = num(j, path, "continuous_power_w", m.continuous_power_w);
    m.peak_power_w = num(j, path, "peak_power_w", m.peak_power_w);
    if (j.contains("base_speed_rpm")) m.base_speed_rad_s = rpm_to_rad_s(j["base_speed_rpm"].get<double>());
    if (j.contains("max_speed_rpm")) m.max_speed_rad_s = rpm_to_rad_s(j["max_speed_rpm"].get<double>());
    m.nominal_speed_rpm = num(j, path, "nominal_speed_rpm", m.nominal_speed_rpm);
    m.overload_budget_j = num(j, path, "overload_budget_j", m.overload_budget_j);
    if (j.contains("loss")) {
        const auto& l = j["loss"];
        check_keys(l, path + ".loss", {"copper_coeff", "iron_coeff", "inverter_fixed_w", "inverter_prop"});
        m.loss.copper_coeff = num(l, path + ".loss", "copper_coeff", m.loss.copper_coeff);
        m.loss.iron_coeff = num(l, path + ".loss", "iron_coeff", m.loss.iron_coeff);
        m.loss.inverter_fixed_w = num(l, path + ".loss", "inverter_fixed_w", m.loss.inverter_fixed_w);
        m.loss.inverter_prop = num(l, path + ".loss", "inverter_prop", m.loss.inverter_prop);
    }
    try {
        m.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(path, e.what());
    }
    return m;
}

inline ModulePlacement parse_module(const json& j, const std::string& path) {
    using namespace cfg_detail;
    check_keys(j, path,
               {"id", "kind", "wheels", "initial_state", "motor", "rangebox", "control",
                "steering_capable"});
    ModulePlacement p;
    if (!j.contains("id")) throw ConfigError(path + ".id", "missing required field");
    p.module.module_id = j["id"].get<int>();
    const std::string kind = str(j, path, "kind", "wheel");
    if (kind == "wheel") {
        p.module.kind = DriveConcept::WheelModule;
    } else if (kind == "axle") {
        p.module.kind = DriveConcept::AxleModule;
    } else {
        throw ConfigError(path + ".kind", "expected wheel or axle");
    }
    if (!j.contains("wheels")) throw ConfigError(path + ".wheels", "missing required field");
    for (const auto& w : j["wheels"]) p.wheels.push_back(w.get<int>());

    const std::string state = str(j, path, "initial_state", "drive");
    if (state == "off") {
        p.module.state = ModuleState::Off;
    } else if (state == "standby") {
        p.module.state = ModuleState::Standby;
    } else if (state == "drive") {
        p.module.state = ModuleState::Drive;
    } else if (state == "parked") {
        p.module.state = ModuleState::Parked;
    } else if (state == "freewheel") {
        p.module.state = ModuleState::FreeWheel;
    } else {
        throw ConfigError(path + ".initial_state", "expected off, standby, drive, parked or freewheel");
    }

    p.module.motor = j.contains("motor") ? parse_motor(j["motor"], path + ".motor", p.module.kind)
                                         : (p.module.kind == DriveConcept::AxleModule ? default_axle_motor()
                                                                                      : default_wheel_motor());
    p.module.overload_credit_j = p.module.motor.overload_budget_j;

    const std::string rpath = path + ".rangebox";
    if (!j.contains("rangebox")) throw ConfigError(rpath, "missing required field");
    const auto& rb = j["rangebox"];
    check_keys(rb, rpath,
               {"stage1", "stage2_range_a", "stage2_range_b", "engaged", "brake_torque_limit_nm",
                "mesh_efficiency", "min_overall_ratio", "max_overall_ratio"});
    const double mesh_eff = num(rb, rpath, "mesh_efficiency", 0.985);
    if (!rb.contains("stage1") || !rb.contains("stage2_range_a") || !rb.contains("stage2_range_b"))
        throw ConfigError(rpath, "stage1, stage2_range_a and stage2_range_b are required");
    p.module.rangebox.stage1 = stage_from(rb["stage1"], rpath + ".stage1", mesh_eff);
    p.module.rangebox.stage2_range_a = stage_from(rb["stage2_range_a"], rpath + ".stage2_range_a", mesh_eff);
    p.module.rangebox.stage2_range_b = stage_from(rb["stage2_range_b"], rpath + ".stage2_range_b", mesh_eff);
    p.module.rangebox.brake_torque_limit_nm = num(rb, rpath, "brake_torque_limit_nm", 2.0e5);
    p.module.rangebox.min_overall_ratio = num(rb, rpath, "min_overall_ratio", 1.0);
    p.module.rangebox.max_overall_ratio = num(rb, rpath, "max_overall_ratio", 200.0);
    try {
        p.module.rangebox.validate();
    } catch (const InvalidToothCounts& e) {
        throw ConfigError(rpath, e.what());
    }
    const std::string engaged = str(rb, rpath, "engaged", "a");
    if (engaged == "a") {
        p.module.rangebox.brake_b1 = BrakeState::Closed;
    } else if (engaged == "b") {
        p.module.rangebox.brake_b2 = BrakeState::Closed;
    } else if (engaged == "parked") {
        p.module.rangebox.brake_b1 = BrakeState::Closed;
        p.module.rangebox.brake_b2 = BrakeState::Closed;
    } else if (engaged == "freewheel") {
        // both open
    } else {
        throw ConfigError(rpath + ".engaged", "expected a, b, parked or freewheel");
    }

    if (j.contains("control")) {
        const auto& c = j["control"];
        const std::string cpath = path + ".control";
        check_keys(c, cpath,
                   {"kp", "ki", "telemetry_period_ticks", "comms_timeout_periods",
                    "parked_speed_threshold", "motor_inertia_kgm2"});
        p.module.speed_gains.kp = num(c, cpath, "kp", p.module.speed_gains.kp);
        p.module.speed_gains.ki = num(c, cpath, "ki", p.module.speed_gains.ki);
        p.module.telemetry_period_ticks =
            static_cast<int>(num(c, cpath, "telemetry_period_ticks", p.module.telemetry_period_ticks));
        p.module.comms_timeout_periods =
            static_cast<int>(num(c, cpath, "comms_timeout_periods", p.module.comms_timeout_periods));
        p.module.parked_speed_threshold =
            num(c, cpath, "parked_speed_threshold", p.module.parked_speed_threshold);
        p.module.motor_inertia_kgm2 = num(c, cpath, "motor_inertia_kgm2", p.module.motor_inertia_kgm2);
    }
    p.module.steering_capable = flag(j, path, "steering_capable", true);
    return p;
}

inline VehicleConfig parse_vehicle(const json& j, const std::string& path = "vehicle") {
    using namespace cfg_detail;
    check_keys(j, path,
               {"name", "geometry", "mass_kg", "concept", "steering_mode", "max_steer_deg",
                "differential_lock", "brake_upstream_of_differential", "wheel_inertia_kgm2",
                "source_power_w", "dc_bus", "tire", "efficiency_target", "hydrostatic_baseline",
                "modules"});
    VehicleConfig c;
    c.name = str(j, path, "name", "vehicle");
    if (j.contains("geometry")) {
        const auto& g = j["geometry"];
        const std::string gpath = path + ".geometry";
        check_keys(g, gpath,
                   {"wheelbase_m", "track_width_m", "rolling_radius_m", "cog_height_m", "cog_offset_m"});
        c.geometry.wheelbase_m = num(g, gpath, "wheelbase_m", c.geometry.wheelbase_m);
        c.geometry.track_width_m = num(g, gpath, "track_width_m", c.geometry.track_width_m);
        c.geometry.rolling_radius_m = num(g, gpath, "rolling_radius_m", c.geometry.rolling_radius_m);
        c.geometry.cog_height_m = num(g, gpath, "cog_height_m", c.geometry.cog_height_m);
        c.geometry.cog_offset_m = num(g, gpath, "cog_offset_m", c.geometry.cog_offset_m);
    }
    c.mass_kg = num(j, path, "mass_kg", c.mass_kg);
    if (c.mass_kg <= 0.0) throw ConfigError(path + ".mass_kg", "must be > 0");
    const std::string concept_name = str(j, path, "concept", "wheel_modules");
    if (concept_name == "wheel_modules") {
        c.concept_kind = VehicleConcept::WheelModules;
    } else if (concept_name == "axle_modules") {
        c.concept_kind = VehicleConcept::AxleModules;
    } else if (concept_name == "mixed") {
        c.concept_kind = VehicleConcept::Mixed;
    } else {
        throw ConfigError(path + ".concept", "expected wheel_modules, axle_modules or mixed");
    }
    const std::string steer = str(j, path, "steering_mode", "four_wheel_symmetric");
    if (steer == "front_only") {
        c.steering_mode = SteeringMode::FrontOnly;
    } else if (steer == "four_wheel_symmetric") {
        c.steering_mode = SteeringMode::FourWheelSymmetric;
    } else if (steer == "independent_per_wheel") {
        c.steering_mode = SteeringMode::IndependentPerWheel;
    } else {
        throw ConfigError(path + ".steering_mode",
                          "expected front_only, four_wheel_symmetric or independent_per_wheel");
    }
    c.max_steer_rad = deg_to_rad(num(j, path, "max_steer_deg", 35.0));
    c.differential_lock = flag(j, path, "differential_lock", false);
    c.brake_upstream_of_differential = flag(j, path, "brake_upstream_of_differential", false);
    c.wheel_inertia_kgm2 = num(j, path, "wheel_inertia_kgm2", c.wheel_inertia_kgm2);
    c.source_power_w = num(j, path, "source_power_w", c.source_power_w);
    if (j.contains("dc_bus")) {
        const auto& b = j["dc_bus"];
        const std::string bpath = path + ".dc_bus";
        check_keys(b, bpath,
                   {"buffer_capacity_j", "buffer_state_j", "voltage_class_v", "max_source_power_w"});
        c.dc_bus.buffer_capacity_j = num(b, bpath, "buffer_capacity_j", c.dc_bus.buffer_capacity_j);
        c.dc_bus.buffer_state_j = num(b, bpath, "buffer_state_j", c.dc_bus.buffer_state_j);
        c.dc_bus.voltage_class_v = num(b, bpath, "voltage_class_v", c.dc_bus.voltage_class_v);
        c.dc_bus.max_source_power_w = num(b, bpath, "max_source_power_w", c.dc_bus.max_source_power_w);
    }
    if (j.contains("tire")) {
        const auto& tj = j["tire"];
        const std::string tpath = path + ".tire";
        check_keys(tj, tpath, {"mu_peak", "slip_at_peak", "rolling_resistance_coeff"});
        c.tire.mu_peak = num(tj, tpath, "mu_peak", c.tire.mu_peak);
        c.tire.slip_at_peak = num(tj, tpath, "slip_at_peak", c.tire.slip_at_peak);
        c.tire.rolling_resistance_coeff =
            num(tj, tpath, "rolling_resistance_coeff", c.tire.rolling_resistance_coeff);
    }
    if (j.contains("efficiency_target"))
        c.efficiency_target = parse_target(j["efficiency_target"], path + ".efficiency_target");
    if (j.contains("hydrostatic_baseline")) {
        const auto& h = j["hydrostatic_baseline"];
        const std::string hpath = path + ".hydrostatic_baseline";
        check_keys(h, hpath,
                   {"rated_torque_nm", "rated_speed_rad_s", "loss_fixed", "loss_speed", "loss_torque"});
        c.hydrostatic_baseline.rated_torque_nm =
            num(h, hpath, "rated_torque_nm", c.hydrostatic_baseline.rated_torque_nm);
        c.hydrostatic_baseline.rated_speed_rad_s =
            num(h, hpath, "rated_speed_rad_s", c.hydrostatic_baseline.rated_speed_rad_s);
        c.hydrostatic_baseline.loss_fixed = num(h, hpath, "loss_fixed", c.hydrostatic_baseline.loss_fixed);
        c.hydrostatic_baseline.loss_speed = num(h, hpath, "loss_speed", c.hydrostatic_baseline.loss_speed);
        c.hydrostatic_baseline.loss_torque =
            num(h, hpath, "loss_torque", c.hydrostatic_baseline.loss_torque);
        c.hydrostatic_baseline.validate();
    }
    if (!j.contains("modules")) throw ConfigError(path + ".modules", "missing required field");
    int idx = 0;
    for (const auto& mj : j["modules"])
        c.modules.push_back(parse_module(mj, path + ".modules[" + std::to_string(idx++) + "]"));
    c.validate();
    return c;
}

inline Scenario parse_scenario(const json& j, const std::string& path = "scenario") {
    using namespace cfg_detail;
    check_keys(j, path, {"name", "duration_s", "dt_s", "seed", "terrain", "maneuvers"});
    Scenario s;
    s.name = str(j, path, "name", "scenario");
    s.duration_s = require_num(j, path, "duration_s");
    s.dt_s = num(j, path, "dt_s", 1e-3);
    s.seed = static_cast<std::uint64_t>(num(j, path, "seed", 0.0));
    if (j.contains("terrain")) {
        int idx = 0;
        for (const auto& tj : j["terrain"]) {
            const std::string tpath = path + ".terrain[" + std::to_string(idx++) + "]";
            check_keys(tj, tpath, {"start_m", "side_slope_deg", "longitudinal_slope_deg", "mu_scale"});
            TerrainPatch p;
            p.start_m = num(tj, tpath, "start_m", 0.0);
            p.side_slope_rad = deg_to_rad(num(tj, tpath, "side_slope_deg", 0.0));
            p.longitudinal_slope_rad = deg_to_rad(num(tj, tpath, "longitudinal_slope_deg", 0.0));
            p.mu_scale = num(tj, tpath, "mu_scale", 1.0);
            s.terrain.push_back(p);
        }
    }
    if (j.contains("maneuvers")) {
        int idx = 0;
        for (const auto& mj : j["maneuvers"]) {
            const std::string mpath = path + ".maneuvers[" + std::to_string(idx++) + "]";
            check_keys(mj, mpath,
                       {"at_s", "set_speed_kmh", "set_torque_nm", "steer_radius_m", "range", "park",
                        "enable", "disable", "fault", "module"});
            const double at = require_num(mj, mpath, "at_s");
            int actions = 0;
            if (mj.contains("set_speed_kmh")) {
                s.maneuvers.push_back({at, ManeuverKind::SetSpeed, mj["set_speed_kmh"].get<double>(),
                                       RangeTarget::RangeA});
                ++actions;
            }
            if (mj.contains("set_torque_nm")) {
                s.maneuvers.push_back({at, ManeuverKind::SetTorque, mj["set_torque_nm"].get<double>(),
                                       RangeTarget::RangeA});
                ++actions;
            }
            if (mj.contains("steer_radius_m")) {
                s.maneuvers.push_back(
                    {at, ManeuverKind::Steer, mj["steer_radius_m"].get<double>(), RangeTarget::RangeA});
                ++actions;
            }
            if (mj.contains("range")) {
                const std::string r = mj["range"].get<std::string>();
                RangeTarget target;
                if (r == "a") {
                    target = RangeTarget::RangeA;
                } else if (r == "b") {
                    target = RangeTarget::RangeB;
                } else if (r == "freewheel") {
                    target = RangeTarget::FreeWheel;
                } else {
                    throw ConfigError(mpath + ".range", "expected a, b or freewheel");
                }
                s.maneuvers.push_back({at, ManeuverKind::SetRange, 0.0, target});
                ++actions;
            }
            if (mj.contains("park")) {
                s.maneuvers.push_back({at, ManeuverKind::Park, 0.0, RangeTarget::RangeA});
                ++actions;
            }
            if (mj.contains("enable")) {
                s.maneuvers.push_back({at, ManeuverKind::Enable, 0.0, RangeTarget::RangeA});
                ++actions;
            }
            if (mj.contains("disable")) {
                s.maneuvers.push_back({at, ManeuverKind::Disable, 0.0, RangeTarget::RangeA});
                ++actions;
            }
            if (mj.contains("fault")) {
                const std::string f = mj["fault"].get<std::string>();
                FaultInjection inj;
                inj.at_time_s = at;
                if (!mj.contains("module")) throw ConfigError(mpath + ".module", "fault needs a module id");
                inj.module_id = mj["module"].get<int>();
                if (f == "total_loss") {
                    inj.kind = FaultKind::TotalLoss;
                } else if (f == "comms_loss") {
                    inj.kind = FaultKind::CommsLoss;
                } else {
                    throw ConfigError(mpath + ".fault", "expected total_loss or comms_loss");
                }
                s.faults.push_back(inj);
                ++actions;
            }
            if (actions != 1) throw ConfigError(mpath, "expected exactly one action per maneuver");
        }
    }
    std::stable_sort(s.maneuvers.begin(), s.maneuvers.end(),
                     [](const Maneuver& a, const Maneuver& b) { return a.at_time_s < b.at_time_s; });
    s.validate();
    return s;
}

struct ParsedConfig {
    std::optional<VehicleConfig> vehicle;
    std::optional<Scenario> scenario;
};

inline ParsedConfig parse_config_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("(file)", std::string("invalid JSON: ") + e.what());
    }
    cfg_detail::check_keys(root, "(root)", {"vehicle", "scenario"});
    ParsedConfig out;
    if (root.contains("vehicle")) out.vehicle = parse_vehicle(root["vehicle"]);
    if (root.contains("scenario")) out.scenario = parse_scenario(root["scenario"]);
    return out;
}

inline ParsedConfig parse_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

// ---------------------------------------------------------------------------
// Serialization (round-trip: serialize(parse(f)) parses to an equal object).

inline json to_json(const PlanetaryStage& s) { return json::array({s.sun_teeth, s.ring_teeth, s.planet_count}); }

inline json to_json(const VehicleConfig& c) {
    json j;
    j["name"] = c.name;
    j["geometry"] = {{"wheelbase_m", c.geometry.wheelbase_m},
                     {"track_width_m", c.geometry.track_width_m},
                     {"rolling_radius_m", c.geometry.rolling_radius_m},
                     {"cog_height_m", c.geometry.cog_height_m},
                     {"cog_offset_m", c.geometry.cog_offset_m}};
    j["mass_kg"] = c.mass_kg;
    j["concept"] = c.concept_kind == VehicleConcept::WheelModules  ? "wheel_modules"
                   : c.concept_kind == VehicleConcept::AxleModules ? "axle_modules"
                                                                   : "mixed";
    j["steering_mode"] = c.steering_mode == SteeringMode::FrontOnly            ? "front_only"
                         : c.steering_mode == SteeringMode::FourWheelSymmetric ? "four_wheel_symmetric"
                                                                               : "independent_per_wheel";
    j["max_steer_deg"] = rad_to_deg(c.max_steer_rad);
    j["differential_lock"] = c.differential_lock;
    j["brake_upstream_of_differential"] = c.brake_upstream_of_differential;
    j["wheel_inertia_kgm2"] = c.wheel_inertia_kgm2;
    j["source_power_w"] = c.source_power_w;
    j["dc_bus"] = {{"buffer_capacity_j", c.dc_bus.buffer_capacity_j},
                   {"buffer_state_j", c.dc_bus.buffer_state_j},
                   {"voltage_class_v", c.dc_bus.voltage_class_v},
                   {"max_source_power_w", c.dc_bus.max_source_power_w}};
    j["tire"] = {{"mu_peak", c.tire.mu_peak},
                 {"slip_at_peak", c.tire.slip_at_peak},
                 {"rolling_resistance_coeff", c.tire.rolling_resistance_coeff}};
    json knots = json::array();
    for (const auto& k : c.efficiency_target.knots) knots.push_back(json::array({k.speed_kmh, k.eta}));
    j["efficiency_target"] = {{"label", "custom"},
                              {"knots", knots},
                              {"focus_low_kmh", c.efficiency_target.focus_low_kmh},
                              {"focus_high_kmh", c.efficiency_target.focus_high_kmh}};
    j["hydrostatic_baseline"] = {{"rated_torque_nm", c.hydrostatic_baseline.rated_torque_nm},
                                 {"rated_speed_rad_s", c.hydrostatic_baseline.rated_speed_rad_s},
                                 {"loss_fixed", c.hydrostatic_baseline.loss_fixed},
                                 {"loss_speed", c.hydrostatic_baseline.loss_speed},
                                 {"loss_torque", c.hydrostatic_baseline.loss_torque}};
    j["modules"] = json::array();
    for (const auto& p : c.modules) {
        json m;
        m["id"] = p.module.module_id;
        m["kind"] = p.module.kind == DriveConcept::WheelModule ? "wheel" : "axle";
        m["wheels"] = p.wheels;
        m["initial_state"] = [&]() {
            switch (p.module.state) {
                case ModuleState::Off: return "off";
                case ModuleState::Standby: return "standby";
                case ModuleState::Parked: return "parked";
                case ModuleState::FreeWheel: return "freewheel";
                default: return "drive";
            }
        }();
        m["motor"] = {{"continuous_power_w", p.module.motor.continuous_power_w},
                      {"peak_power_w", p.module.motor.peak_power_w},
                      {"base_speed_rpm", rad_s_to_rpm(p.module.motor.base_speed_rad_s)},
                      {"max_speed_rpm", rad_s_to_rpm(p.module.motor.max_speed_rad_s)},
                      {"nominal_speed_rpm", p.module.motor.nominal_speed_rpm},
                      {"overload_budget_j", p.module.motor.overload_budget_j},
                      {"loss",
                       {{"copper_coeff", p.module.motor.loss.copper_coeff},
                        {"iron_coeff", p.module.motor.loss.iron_coeff},
                        {"inverter_fixed_w", p.module.motor.loss.inverter_fixed_w},
                        {"inverter_prop", p.module.motor.loss.inverter_prop}}}};
        const RangeState rs = rangebox_state(p.module.rangebox);
        m["rangebox"] = {{"stage1", to_json(p.module.rangebox.stage1)},
                         {"stage2_range_a", to_json(p.module.rangebox.stage2_range_a)},
                         {"stage2_range_b", to_json(p.module.rangebox.stage2_range_b)},
                         {"mesh_efficiency", p.module.rangebox.stage1.mesh_efficiency},
                         {"brake_torque_limit_nm", p.module.rangebox.brake_torque_limit_nm},
                         {"engaged", rs == RangeState::RangeA   ? "a"
                                     : rs == RangeState::RangeB ? "b"
                                     : rs == RangeState::Parked ? "parked"
                                                                : "freewheel"}};
        m["control"] = {{"kp", p.module.speed_gains.kp},
                        {"ki", p.module.speed_gains.ki},
                        {"telemetry_period_ticks", p.module.telemetry_period_ticks},
                        {"comms_timeout_periods", p.module.comms_timeout_periods},
                        {"parked_speed_threshold", p.module.parked_speed_threshold},
                        {"motor_inertia_kgm2", p.module.motor_inertia_kgm2}};
        m["steering_capable"] = p.module.steering_capable;
        j["modules"].push_back(m);
    }
    return j;
}

inline json to_json(const Scenario& s) {
    json j;
    j["name"] = s.name;
    j["duration_s"] = s.duration_s;
    j["dt_s"] = s.dt_s;
    j["seed"] = static_cast<double>(s.seed);
    j["terrain"] = json::array();
    for (const auto& p : s.terrain)
        j["terrain"].push_back({{"start_m", p.start_m},
                                {"side_slope_deg", rad_to_deg(p.side_slope_rad)},
                                {"longitudinal_slope_deg", rad_to_deg(p.longitudinal_slope_rad)},
                                {"mu_scale", p.mu_scale}});
    j["maneuvers"] = json::array();
    for (const auto& m : s.maneuvers) {
        json e;
        e["at_s"] = m.at_time_s;
        switch (m.kind) {
            case ManeuverKind::SetSpeed: e["set_speed_kmh"] = m.value; break;
            case ManeuverKind::SetTorque: e["set_torque_nm"] = m.value; break;
            case ManeuverKind::Steer: e["steer_radius_m"] = m.value; break;
            case ManeuverKind::SetRange:
                e["range"] = m.range == RangeTarget::RangeA   ? "a"
                             : m.range == RangeTarget::RangeB ? "b"
                                                              : "freewheel";
                break;
            case ManeuverKind::Park: e["park"] = true; break;
            case ManeuverKind::Enable: e["enable"] = true; break;
            case ManeuverKind::Disable: e["disable"] = true; break;
        }
        j["maneuvers"].push_back(e);
    }
    for (const auto& f : s.faults) {
        json e;
        e["at_s"] = f.at_time_s;
        e["fault"] = f.kind == FaultKind::TotalLoss ? "total_loss" : "comms_loss";
        e["module"] = f.module_id;
        j["maneuvers"].push_back(e);
    }
    return j;
}

inline std::string serialize_config(const std::optional<VehicleConfig>& vehicle,
                                    const std::optional<Scenario>& scenario) {
    json root;
    if (vehicle) root["vehicle"] = to_json(*vehicle);
    if (scenario) root["scenario"] = to_json(*scenario);
    return root.dump(2) + "\n";
}

}  // namespace agridrive
