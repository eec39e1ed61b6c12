#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "agridrive/csv.hpp"
#include "agridrive/duty.hpp"
#include "agridrive/errors.hpp"
#include "agridrive/kinematics.hpp"
#include "agridrive/modctrl.hpp"
#include "agridrive/powertrain.hpp"
#include "agridrive/transmission.hpp"
#include "agridrive/units.hpp"

namespace agridrive {

// ---------------------------------------------------------------------------
// Vehicle and scenario configuration.

enum class VehicleConcept { AxleModules, WheelModules, Mixed };

struct TireParams {
    double mu_peak = 0.6;
    double slip_at_peak = 0.15;
    double rolling_resistance_coeff = 0.08;

    void validate() const {
        if (mu_peak <= 0.0) throw ConfigError("tire.mu_peak", "must be > 0");
        if (!(slip_at_peak > 0.0 && slip_at_peak < 1.0))
            throw ConfigError("tire.slip_at_peak", "must lie in (0,1)");
        if (rolling_resistance_coeff < 0.0)
            throw ConfigError("tire.rolling_resistance_coeff", "must be >= 0");
    }
};

struct ModulePlacement {
    DriveModule module;
    std::vector<int> wheels;  // wheel indices this module drives
};

struct VehicleConfig {
    std::string name = "vehicle";
    VehicleGeometry geometry;
    double mass_kg = 30000.0;
    VehicleConcept concept_kind = VehicleConcept::WheelModules;
    std::vector<ModulePlacement> modules;
    TireParams tire;
    DcBus dc_bus;
    double source_power_w = 250e3;
    SteeringMode steering_mode = SteeringMode::FourWheelSymmetric;
    double max_steer_rad = 0.61;
    bool differential_lock = false;
    bool brake_upstream_of_differential = false;
    double wheel_inertia_kgm2 = 150.0;
    EfficiencyTarget efficiency_target = bernhard_from_renius(default_renius_target());
    HydrostaticBaseline hydrostatic_baseline;  // comparison baseline for calibration reports

    void validate() const {
        geometry.validate();
        tire.validate();
        dc_bus.validate();
        if (mass_kg <= 0.0) throw ConfigError("vehicle.mass_kg", "must be > 0");
        if (source_power_w <= 0.0) throw ConfigError("vehicle.source_power_w", "must be > 0");
        if (wheel_inertia_kgm2 <= 0.0) throw ConfigError("vehicle.wheel_inertia_kgm2", "must be > 0");
        if (modules.empty()) throw ConfigError("vehicle.modules", "at least one module required");
        std::array<int, kWheelCount> covered{0, 0, 0, 0};
        for (const auto& p : modules) {
            p.module.motor.validate();
            if (p.wheels.empty()) throw ConfigError("vehicle.modules.wheels", "module drives no wheel");
            for (int w : p.wheels) {
                if (w < 0 || w >= kWheelCount)
                    throw ConfigError("vehicle.modules.wheels", "wheel index out of range");
                covered[static_cast<std::size_t>(w)] += 1;
            }
        }
        for (int w = 0; w < kWheelCount; ++w)
            if (covered[static_cast<std::size_t>(w)] != 1)
                throw ConfigError("vehicle.modules.wheels",
                                  "module placements must cover every wheel exactly once");
        if (concept_kind == VehicleConcept::AxleModules) {
            if (modules.size() != 2 || modules[0].wheels.size() != 2)
                throw ConfigError("vehicle.modules", "axle-module concept needs 2 modules with 2 wheels each");
            if (brake_upstream_of_differential && !differential_lock)
                throw ConfigError("vehicle.differential_lock",
                                  "brakes upstream of the differential require the differential lock");
        }
        if (concept_kind == VehicleConcept::WheelModules && modules.size() != 4)
            throw ConfigError("vehicle.modules", "wheel-module concept needs 4 modules");
        efficiency_target.validate();
    }
};

struct TerrainPatch {
    double start_m = 0.0;
    double side_slope_rad = 0.0;
    double longitudinal_slope_rad = 0.0;
    double mu_scale = 1.0;
};

enum class ManeuverKind { SetSpeed, SetTorque, Steer, SetRange, Park, Enable, Disable };

struct Maneuver {
    double at_time_s = 0.0;
    ManeuverKind kind = ManeuverKind::SetSpeed;
    // SetSpeed: km/h (negative = reverse); SetTorque: per-wheel Nm (the
    // free-wheeling emulation is a small value here); Steer: signed radius m,
    // 0 = straight
    double value = 0.0;
    RangeTarget range = RangeTarget::RangeA;
};

struct Scenario {
    std::string name = "scenario";
    double duration_s = 10.0;
    double dt_s = 1e-3;
    std::vector<TerrainPatch> terrain;
    std::vector<Maneuver> maneuvers;
    std::vector<FaultInjection> faults;
    std::uint64_t seed = 0;

    void validate() const {
        if (duration_s <= 0.0) throw ConfigError("scenario.duration_s", "must be > 0");
        if (!(dt_s >= 1e-4 && dt_s <= 0.1))
            throw ConfigError("scenario.dt_s", "must lie in [1e-4, 0.1]");
        for (const auto& m : maneuvers)
            if (m.at_time_s < 0.0 || m.at_time_s > duration_s)
                throw ConfigError("scenario.maneuvers", "maneuver outside the scenario duration");
        for (const auto& f : faults) {
            if (f.at_time_s < 0.0 || f.at_time_s > duration_s)
                throw ConfigError("scenario.faults", "fault injection outside the scenario duration");
            if (f.kind != FaultKind::TotalLoss && f.kind != FaultKind::CommsLoss)
                throw ConfigError("scenario.faults", "only total_loss and comms_loss are injectable");
        }
        for (std::size_t i = 1; i < terrain.size(); ++i)
            if (terrain[i].start_m <= terrain[i - 1].start_m)
                throw ConfigError("scenario.terrain", "patches must be sorted by start_m");
    }
};

// ---------------------------------------------------------------------------
// Tire traction: antisymmetric, linear in slip up to slip_at_peak, then
// saturated at mu * load.

inline double traction_force(const TireParams& tire, double slip, double normal_load_n) {
    if (normal_load_n < 0.0) throw Error("traction_force: normal load must be >= 0");
    return tire.mu_peak * normal_load_n * std::clamp(slip / tire.slip_at_peak, -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Simulation world.

struct FaultEvent {
    double t_s = 0.0;
    int module_id = -1;  // -1: vehicle-level (bus)
    FaultKind kind = FaultKind::BusUnderrun;
};

struct SimTrace {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    int col(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return static_cast<int>(i);
        throw Error("trace: no column named '" + name + "'");
    }
    csv::Table to_table() const { return {columns, rows}; }
    static SimTrace from_table(const csv::Table& t) { return {t.header, t.rows}; }
};

struct MetricsReport {
    double total_energy_wh = 0.0;        // electrical source energy drawn
    double driveline_efficiency = 0.0;   // positive wheel work / electrical energy
    double field_target_fraction = 0.0;  // share of focus-range time meeting the target curve
    double peak_motor_torque_nm = 0.0;
    double min_turning_radius_m = std::numeric_limits<double>::infinity();
    double final_speed_mps = 0.0;
    double max_speed_mps = 0.0;
    int fault_event_count = 0;
    std::uint64_t seed = 0;
};

struct WheelSim {
    double steer_rad = 0.0;
    double steer_target_rad = 0.0;
    double omega = 0.0;  // rad/s
    double slip = 0.0;
    double normal_n = 0.0;
    double wheel_torque_nm = 0.0;
    double motor_speed_rads = 0.0;
    double motor_torque_nm = 0.0;
    double losses_w = 0.0;
    double traction_n = 0.0;
    int module_index = -1;
};

struct World {
    VehicleConfig config;
    Scenario scenario;
    long tick = 0;
    double v = 0.0;         // reference-point speed, signed
    double distance = 0.0;  // odometer, signed
    double x = 0.0, y = 0.0, yaw = 0.0;
    std::array<WheelSim, kWheelCount> wheels;
    std::vector<DriveModule> modules;
    FrameBus bus{1};
    DcBus dc;
    // coordinator state
    double target_speed_mps = 0.0;
    double target_turn_radius_m = std::numeric_limits<double>::infinity();
    ControlMode target_mode = ControlMode::SpeedLoop;
    double target_wheel_torque_nm = 0.0;
    std::size_t next_maneuver = 0;
    std::vector<char> fault_done;
    // bookkeeping
    double cum_source_j = 0.0;
    double max_ledger_residual_rel = 0.0;
    bool bus_underrun_latched = false;
    std::vector<FaultEvent> events;
    SimTrace trace;
};

namespace detail {

inline const TerrainPatch& terrain_at(const Scenario& s, double distance) {
    static const TerrainPatch flat{};
    const TerrainPatch* best = &flat;
    for (const auto& p : s.terrain)
        if (p.start_m <= std::max(0.0, distance)) best = &p;
    return *best;
}

inline std::vector<std::string> trace_columns(std::size_t module_count) {
    std::vector<std::string> cols{"t_s", "distance_m", "speed_mps", "yaw_rad", "turn_radius_m"};
    for (const char* w : {"fl", "fr", "rl", "rr"}) {
        for (const char* f : {"steer_rad_", "wheel_speed_rads_", "wheel_torque_nm_", "slip_",
                              "normal_load_n_", "motor_speed_rads_", "motor_torque_nm_", "losses_w_"})
            cols.push_back(std::string(f) + w);
    }
    for (std::size_t m = 0; m < module_count; ++m) {
        cols.push_back("state_m" + std::to_string(m));
        cols.push_back("range_m" + std::to_string(m));
    }
    cols.push_back("bus_source_w");
    cols.push_back("buffer_j");
    cols.push_back("cum_source_wh");
    return cols;
}

// Wheel angular update, implicit in the linear branch of the slip curve so
// even a bare rim stays stable at dt = 1 ms. Returns the applied force.
inline double wheel_update_implicit(double& omega, double inertia, double drive_torque_nm,
                                    double mu_n, double slip_at_peak, double r, double v_wheel,
                                    double v_norm, double dt) {
    const double k = mu_n / (slip_at_peak * v_norm);  // dF/d(omega*r)
    const double denom = inertia + dt * r * r * k;
    const double omega_lin = (inertia * omega + dt * (drive_torque_nm + r * k * v_wheel)) / denom;
    const double slip_lin = (omega_lin * r - v_wheel) / v_norm;
    if (std::abs(slip_lin) <= slip_at_peak) {
        omega = omega_lin;
        return mu_n * slip_lin / slip_at_peak;
    }
    const double force = (slip_lin > 0.0) ? mu_n : -mu_n;  // saturated: constant force
    omega += (drive_torque_nm - force * r) / inertia * dt;
    return force;
}

}  // namespace detail

inline World world_init(const VehicleConfig& config, const Scenario& scenario) {
    config.validate();
    scenario.validate();
    World w;
    w.config = config;
    w.scenario = scenario;
    w.dc = config.dc_bus;
    w.bus = FrameBus(1);
    for (std::size_t i = 0; i < config.modules.size(); ++i) {
        w.modules.push_back(config.modules[i].module);
        w.modules.back().overload_credit_j = w.modules.back().motor.overload_budget_j;
        for (int wh : config.modules[i].wheels)
            w.wheels[static_cast<std::size_t>(wh)].module_index = static_cast<int>(i);
    }
    w.fault_done.assign(scenario.faults.size(), 0);
    w.trace.columns = detail::trace_columns(w.modules.size());
    return w;
}

// One fixed step: coordinator -> bus -> module controllers -> physics ->
// energy accounting -> trace row. The per-tick energy ledger
//   electrical input = losses + kinetic-energy changes + grade + rolling
// is assembled from the same update equations the integrator uses, so it
// closes to rounding error; the worst relative residual is tracked.
inline void world_step(World& w) {
    const double dt = w.scenario.dt_s;
    const double t = static_cast<double>(w.tick) * dt;
    const auto& cfg = w.config;
    const auto& geom = cfg.geometry;
    const double r = geom.rolling_radius_m;
    const int command_period = 10;

    // --- coordinator: due maneuvers become command frames --------------------
    bool refresh_setpoints = (w.tick % command_period == 0);
    while (w.next_maneuver < w.scenario.maneuvers.size() &&
           w.scenario.maneuvers[w.next_maneuver].at_time_s <= t + 1e-12) {
        const auto& m = w.scenario.maneuvers[w.next_maneuver];
        BusFrame f;
        f.kind = FrameKind::Command;
        switch (m.kind) {
            case ManeuverKind::SetSpeed:
                w.target_speed_mps = kmh_to_mps(m.value);
                w.target_mode = ControlMode::SpeedLoop;
                refresh_setpoints = true;
                break;
            case ManeuverKind::SetTorque:
                w.target_wheel_torque_nm = m.value;
                w.target_mode = ControlMode::TorqueLoop;
                refresh_setpoints = true;
                break;
            case ManeuverKind::Steer:
                w.target_turn_radius_m =
                    (m.value == 0.0) ? std::numeric_limits<double>::infinity() : m.value;
                refresh_setpoints = true;
                break;
            case ManeuverKind::SetRange:
                f.command = CommandKind::SetRange;
                f.range = m.range;
                w.bus.send(f, w.tick);
                break;
            case ManeuverKind::Park:
                f.command = CommandKind::Park;
                w.bus.send(f, w.tick);
                break;
            case ManeuverKind::Enable:
                f.command = CommandKind::Enable;
                w.bus.send(f, w.tick);
                break;
            case ManeuverKind::Disable:
                f.command = CommandKind::Disable;
                w.bus.send(f, w.tick);
                break;
        }
        ++w.next_maneuver;
    }
    for (std::size_t i = 0; i < w.scenario.faults.size(); ++i) {
        const auto& inj = w.scenario.faults[i];
        if (w.fault_done[i] || inj.at_time_s > t + 1e-12) continue;
        w.fault_done[i] = 1;
        w.bus.isolate(inj.module_id, w.tick);
        w.events.push_back({t, inj.module_id, inj.kind});
        if (inj.kind == FaultKind::TotalLoss)
            for (auto& mod : w.modules)
                if (mod.module_id == inj.module_id) enter_fault(mod, FaultKind::TotalLoss);
    }

    if (refresh_setpoints) {
        BusFrame hb;
        hb.kind = FrameKind::Heartbeat;
        w.bus.send(hb, w.tick);
        // desired wheel angles and per-wheel speed setpoints about the commanded ICR
        std::array<double, kWheelCount> angles{0, 0, 0, 0};
        std::array<double, kWheelCount> speeds{};
        const double vref = w.target_speed_mps;
        if (std::isinf(w.target_turn_radius_m)) {
            speeds.fill(vref / r);
        } else {
            double radius = w.target_turn_radius_m;
            const double min_r = min_turning_radius(geom, cfg.steering_mode, cfg.max_steer_rad);
            if (std::abs(radius) < min_r) radius = std::copysign(min_r, radius);
            angles = ackermann_angles(geom, cfg.steering_mode, radius);
            const Vec2 icr{cfg.steering_mode == SteeringMode::FrontOnly ? 0.0 : geom.wheelbase_m / 2.0,
                           radius};
            speeds = wheel_speeds_for_icr(geom, icr, vref);
        }
        for (int wh = 0; wh < kWheelCount; ++wh)
            w.wheels[static_cast<std::size_t>(wh)].steer_target_rad =
                std::clamp(angles[static_cast<std::size_t>(wh)], -cfg.max_steer_rad, cfg.max_steer_rad);
        for (std::size_t m = 0; m < w.modules.size(); ++m) {
            double sp = 0.0;
            double steer = 0.0;
            for (int wh : cfg.modules[m].wheels) {
                sp += speeds[static_cast<std::size_t>(wh)];
                steer += angles[static_cast<std::size_t>(wh)];
            }
            sp /= static_cast<double>(cfg.modules[m].wheels.size());
            steer /= static_cast<double>(cfg.modules[m].wheels.size());
            BusFrame fm;
            fm.kind = FrameKind::Command;
            fm.command = CommandKind::SetMode;
            fm.target = w.modules[m].module_id;
            fm.mode = w.target_mode;
            w.bus.send(fm, w.tick);
            BusFrame fs;
            fs.kind = FrameKind::Command;
            fs.command = CommandKind::SetSetpoint;
            fs.target = w.modules[m].module_id;
            fs.value = (w.target_mode == ControlMode::SpeedLoop)
                           ? sp
                           : w.target_wheel_torque_nm *
                                 static_cast<double>(cfg.modules[m].wheels.size());
            w.bus.send(fs, w.tick);
            BusFrame fst;
            fst.kind = FrameKind::Command;
            fst.command = CommandKind::Steer;
            fst.target = w.modules[m].module_id;
            fst.value = steer;
            w.bus.send(fst, w.tick);
        }
    }

    // --- bus delivery ---------------------------------------------------------
    const auto delivered = w.bus.deliver(w.tick);

    // --- terrain, loads, steering geometry ------------------------------------
    const TerrainPatch& patch = detail::terrain_at(w.scenario, w.distance);
    const auto loads =
        wheel_load_distribution(cfg.mass_kg, geom, patch.side_slope_rad, patch.longitudinal_slope_rad);
    TireParams tire = cfg.tire;
    tire.mu_peak *= patch.mu_scale;

    for (auto& wheel : w.wheels) {
        const auto& mod = w.modules[static_cast<std::size_t>(wheel.module_index)];
        if (w.bus.is_isolated(mod.module_id, w.tick) || mod.state == ModuleState::Fault)
            continue;  // dead actuator holds its last angle
        const double max_delta = 0.35 * dt;  // steering actuator rate
        wheel.steer_rad += std::clamp(wheel.steer_target_rad - wheel.steer_rad, -max_delta, max_delta);
    }

    std::array<WheelPose, kWheelCount> poses;
    for (int i = 0; i < kWheelCount; ++i) {
        poses[static_cast<std::size_t>(i)].position = wheel_position(geom, static_cast<Wheel>(i));
        poses[static_cast<std::size_t>(i)].steer_angle = w.wheels[static_cast<std::size_t>(i)].steer_rad;
    }
    const SteeringAnalysis steering = analyze_steering(poses);
    std::array<double, kWheelCount> k_ratio{1.0, 1.0, 1.0, 1.0};
    double turn_radius = std::numeric_limits<double>::infinity();
    double yaw_rate = 0.0;
    if (!steering.straight) {
        const Vec2 ref = reference_point(geom);
        const double d_ref = std::hypot(ref.x - steering.icr.x, ref.y - steering.icr.y);
        if (d_ref > 1e-6) {
            // turning radius by the usual convention: lateral ICR offset from
            // the vehicle centerline (comparable with min_turning_radius)
            turn_radius = std::abs(steering.icr.y);
            yaw_rate = w.v / d_ref * ((steering.icr.y > ref.y) ? 1.0 : -1.0);
            for (int i = 0; i < kWheelCount; ++i) {
                const Vec2 pos = wheel_position(geom, static_cast<Wheel>(i));
                k_ratio[static_cast<std::size_t>(i)] =
                    std::hypot(pos.x - steering.icr.x, pos.y - steering.icr.y) / d_ref;
            }
        }
    }

    // --- module controllers ----------------------------------------------------
    struct ModuleTickInfo {
        ModuleOutput out;
        double motor_speed_before = 0.0;
        bool decoupled_dynamics = false;  // rotor integrated inside the module this tick
        double snap_from = 0.0;           // rotor speed before a brake-close snap
        bool snapped = false;
    };
    std::vector<ModuleTickInfo> infos(w.modules.size());
    std::array<double, kWheelCount> wheel_drive_torque{0, 0, 0, 0};

    for (std::size_t m = 0; m < w.modules.size(); ++m) {
        auto& mod = w.modules[m];
        const auto& placed = cfg.modules[m].wheels;
        const ModuleState state_before = mod.state;

        ModuleMeasurements meas;
        for (int wh : placed) {
            meas.wheel_speed_rad_s += w.wheels[static_cast<std::size_t>(wh)].omega;
            meas.load_torque_nm += w.wheels[static_cast<std::size_t>(wh)].traction_n * r;
        }
        meas.wheel_speed_rad_s /= static_cast<double>(placed.size());
        meas.vehicle_speed_mps = w.v;

        std::vector<BusFrame> inbox;
        if (!w.bus.is_isolated(mod.module_id, w.tick))
            for (const auto& f : delivered)
                if (f.sender == kCoordinatorId) inbox.push_back(f);

        auto& info = infos[m];
        info.motor_speed_before = mod.motor_speed_rad_s;
        const bool decoupled_before = !rangebox_ratio(mod.rangebox).has_value();
        info.out = module_step(mod, inbox, meas, dt);
        const bool decoupled_after = !rangebox_ratio(mod.rangebox).has_value();
        info.decoupled_dynamics = decoupled_before && decoupled_after &&
                                  (mod.state == ModuleState::Drive || mod.state == ModuleState::Braking);
        if (decoupled_before && !decoupled_after) {  // brake closed on a synced rotor
            info.snapped = true;
            info.snap_from = mod.motor_speed_rad_s - info.out.sync_mismatch_rad_s;
        }
        for (const auto& f : info.out.outgoing) w.bus.send(f, w.tick);
        if (mod.state == ModuleState::Fault && state_before != ModuleState::Fault &&
            mod.fault_kind != FaultKind::TotalLoss)
            w.events.push_back({t, mod.module_id, mod.fault_kind});

        for (int wh : placed)  // differential: equal torque split
            wheel_drive_torque[static_cast<std::size_t>(wh)] =
                info.out.wheel_torque_nm / static_cast<double>(placed.size());
    }

    // --- physics ----------------------------------------------------------------
    const double v_before = w.v;
    const double sin_a = std::sin(patch.longitudinal_slope_rad);
    const double cos_a = std::cos(patch.longitudinal_slope_rad);

    bool all_parked = !w.modules.empty();
    for (const auto& mod : w.modules)
        if (mod.state != ModuleState::Parked) all_parked = false;

    std::array<double, kWheelCount> omega_before{};
    std::array<double, kWheelCount> wheel_inertia{};
    for (int i = 0; i < kWheelCount; ++i) {
        omega_before[static_cast<std::size_t>(i)] = w.wheels[static_cast<std::size_t>(i)].omega;
        wheel_inertia[static_cast<std::size_t>(i)] = cfg.wheel_inertia_kgm2;
    }
    double wheel_ke_delta_j = 0.0;
    double slip_losses_j = 0.0;
    double pin_losses_j = 0.0;
    const bool pinned = all_parked && std::abs(w.v) < 5e-3;

    if (pinned) {
        // static pin: a fully parked vehicle holds position; the residual
        // creep energy dissipates in the brakes
        pin_losses_j = 0.5 * cfg.mass_kg * w.v * w.v;
        for (int i = 0; i < kWheelCount; ++i)
            pin_losses_j += 0.5 * cfg.wheel_inertia_kgm2 * omega_before[static_cast<std::size_t>(i)] *
                            omega_before[static_cast<std::size_t>(i)];
        w.v = 0.0;
        const double demand_n = std::abs(cfg.mass_kg * kGravity * sin_a);
        double total_load = 0.0;
        for (double n : loads) total_load += n;
        for (std::size_t m = 0; m < w.modules.size(); ++m) {
            auto& mod = w.modules[m];
            if (mod.state != ModuleState::Parked) continue;
            for (int wh : cfg.modules[m].wheels) {
                const double share = loads[static_cast<std::size_t>(wh)] / total_load;
                if (demand_n * share * r > mod.rangebox.brake_torque_limit_nm) {
                    enter_fault(mod, FaultKind::BrakeOverload);
                    mod.rangebox.brake_b1 = BrakeState::Open;
                    mod.rangebox.brake_b2 = BrakeState::Open;
                    w.events.push_back({t, mod.module_id, FaultKind::BrakeOverload});
                }
            }
        }
        for (int i = 0; i < kWheelCount; ++i) {
            auto& wheel = w.wheels[static_cast<std::size_t>(i)];
            wheel.normal_n = loads[static_cast<std::size_t>(i)];
            wheel.slip = 0.0;
            wheel.traction_n = 0.0;
            wheel.wheel_torque_nm = 0.0;
            wheel.omega = 0.0;
        }
    } else {
        const double v_eps = 0.3;
        for (int i = 0; i < kWheelCount; ++i) {
            auto& wheel = w.wheels[static_cast<std::size_t>(i)];
            auto& mod = w.modules[static_cast<std::size_t>(wheel.module_index)];
            wheel.normal_n = loads[static_cast<std::size_t>(i)];
            wheel.wheel_torque_nm = wheel_drive_torque[static_cast<std::size_t>(i)];

            const double v_wheel = w.v * k_ratio[static_cast<std::size_t>(i)];
            const double v_norm = std::max(std::abs(v_wheel), v_eps);
            const double mu_n = tire.mu_peak * wheel.normal_n;
            const bool parked = mod.state == ModuleState::Parked;
            const bool coupled = rangebox_ratio(mod.rangebox).has_value();
            double inertia = cfg.wheel_inertia_kgm2;
            if (coupled && !parked) {
                const double ratio = *rangebox_ratio(mod.rangebox);
                inertia += mod.motor_inertia_kgm2 * ratio * ratio /
                           static_cast<double>(
                               cfg.modules[static_cast<std::size_t>(wheel.module_index)].wheels.size());
            }
            wheel_inertia[static_cast<std::size_t>(i)] = inertia;

            double force;
            if (parked) {
                // both brakes closed: the wheel is held; its remaining spin
                // energy goes into the brakes
                pin_losses_j += 0.5 * inertia * wheel.omega * wheel.omega;
                wheel.omega = 0.0;
                wheel.wheel_torque_nm = 0.0;
                const double s = (0.0 - v_wheel) / v_norm;
                force = traction_force(tire, s, wheel.normal_n);
                wheel.slip = s;
                // the closed brakes must carry the full sliding reaction
                if (std::abs(force * r) > mod.rangebox.brake_torque_limit_nm) {
                    enter_fault(mod, FaultKind::BrakeOverload);
                    mod.rangebox.brake_b1 = BrakeState::Open;
                    mod.rangebox.brake_b2 = BrakeState::Open;
                    w.events.push_back({t, mod.module_id, FaultKind::BrakeOverload});
                }
            } else {
                force = detail::wheel_update_implicit(wheel.omega, inertia, wheel.wheel_torque_nm, mu_n,
                                                      tire.slip_at_peak, r, v_wheel, v_norm, dt);
                wheel.slip = (wheel.omega * r - v_wheel) / v_norm;
            }
            wheel.traction_n = force;
        }

        const double weight = cfg.mass_kg * kGravity;
        double rolling = 0.0;
        if (std::abs(w.v) > 1e-9)
            rolling = tire.rolling_resistance_coeff * weight * cos_a * std::cos(patch.side_slope_rad) *
                      ((w.v > 0.0) ? 1.0 : -1.0);
        const double grade = weight * sin_a;
        double total_force = 0.0;
        for (int i = 0; i < kWheelCount; ++i)
            total_force +=
                w.wheels[static_cast<std::size_t>(i)].traction_n * k_ratio[static_cast<std::size_t>(i)];
        w.v += (total_force - rolling - grade) / cfg.mass_kg * dt;
    }

    // sync coupled motor speeds to the updated wheels
    for (std::size_t m = 0; m < w.modules.size(); ++m) {
        auto& mod = w.modules[m];
        if (mod.state == ModuleState::Parked) {
            mod.motor_speed_rad_s = 0.0;
            continue;
        }
        const auto ratio = rangebox_ratio(mod.rangebox);
        if (ratio && !infos[m].decoupled_dynamics) {
            double mean = 0.0;
            for (int wh : cfg.modules[m].wheels) mean += w.wheels[static_cast<std::size_t>(wh)].omega;
            mean /= static_cast<double>(cfg.modules[m].wheels.size());
            mod.motor_speed_rad_s = *ratio * mean;
        }
    }
    for (int i = 0; i < kWheelCount; ++i) {
        auto& wheel = w.wheels[static_cast<std::size_t>(i)];
        const auto& mod = w.modules[static_cast<std::size_t>(wheel.module_index)];
        wheel.motor_speed_rads = mod.motor_speed_rad_s;
    }

    // --- energy accounting -------------------------------------------------------
    const double v_mid = 0.5 * (v_before + w.v);
    double motor_losses_j = 0.0;
    double gear_losses_j = 0.0;
    double motor_ke_delta_j = 0.0;
    double sync_losses_j = 0.0;
    std::vector<double> elec_powers(w.modules.size(), 0.0);

    for (std::size_t m = 0; m < w.modules.size(); ++m) {
        auto& mod = w.modules[m];
        const auto& info = infos[m];
        const auto& placed = cfg.modules[m].wheels;
        const bool active = mod.state == ModuleState::Drive || mod.state == ModuleState::Braking;

        double losses = 0.0;
        double p_elec = 0.0;
        if (active && info.decoupled_dynamics) {
            // rotor integrated inside the module (synchronize phase)
            const double omega_mid = 0.5 * (info.motor_speed_before + mod.motor_speed_rad_s);
            const double p_mech = info.out.motor_torque_nm * omega_mid;
            losses = motor_electrical_losses(mod.motor, info.out.motor_torque_nm, omega_mid);
            p_elec = p_mech + losses;
            motor_ke_delta_j += 0.5 * mod.motor_inertia_kgm2 *
                                (mod.motor_speed_rad_s * mod.motor_speed_rad_s -
                                 info.motor_speed_before * info.motor_speed_before);
        } else if (active && info.out.wheel_torque_nm != 0.0) {
            // coupled drive: power against midpoint speeds so the chain closes
            double omega_mid_mean = 0.0;
            double p_wheel = 0.0;
            for (int wh : placed) {
                const double om =
                    0.5 * (omega_before[static_cast<std::size_t>(wh)] + w.wheels[static_cast<std::size_t>(wh)].omega);
                omega_mid_mean += om;
                p_wheel += w.wheels[static_cast<std::size_t>(wh)].wheel_torque_nm * om;
            }
            omega_mid_mean /= static_cast<double>(placed.size());
            const auto ratio = rangebox_ratio(mod.rangebox);
            const double motor_mid = ratio ? *ratio * omega_mid_mean : 0.0;
            const double p_motor = info.out.motor_torque_nm * motor_mid;
            losses = motor_electrical_losses(mod.motor, info.out.motor_torque_nm, motor_mid);
            p_elec = p_motor + losses;
            gear_losses_j += (p_motor - p_wheel) * dt;
        } else if (active) {
            // enabled but idle: inverter and iron losses still draw from the bus
            const double motor_mid = mod.motor_speed_rad_s;
            losses = motor_electrical_losses(mod.motor, 0.0, motor_mid);
            p_elec = losses;
        }
        if (info.snapped) {
            // rotor speed jump when the brake closed: booked against the brake
            const double from = info.snap_from;
            const double to0 = info.snap_from + info.out.sync_mismatch_rad_s;
            sync_losses_j += 0.5 * mod.motor_inertia_kgm2 * (from * from - to0 * to0);
            motor_ke_delta_j += 0.5 * mod.motor_inertia_kgm2 * (to0 * to0 - from * from);
        }
        if (mod.state == ModuleState::Parked && info.motor_speed_before != 0.0) {
            // parking kills the geared rotor's spin; the brakes absorb it
            const double from = info.motor_speed_before;
            sync_losses_j += 0.5 * mod.motor_inertia_kgm2 * from * from;
            motor_ke_delta_j -= 0.5 * mod.motor_inertia_kgm2 * from * from;
        }
        motor_losses_j += losses * dt;
        elec_powers[m] = p_elec;
        const double per_wheel_losses = losses / static_cast<double>(placed.size());
        for (int wh : placed) {
            w.wheels[static_cast<std::size_t>(wh)].losses_w = per_wheel_losses;
            w.wheels[static_cast<std::size_t>(wh)].motor_torque_nm = info.out.motor_torque_nm;
        }
    }

    // wheel-side kinetic energy and slip losses from the applied updates
    for (int i = 0; i < kWheelCount; ++i) {
        const auto& wheel = w.wheels[static_cast<std::size_t>(i)];
        const bool parked =
            w.modules[static_cast<std::size_t>(wheel.module_index)].state == ModuleState::Parked;
        const double om_mid = 0.5 * (omega_before[static_cast<std::size_t>(i)] + wheel.omega);
        wheel_ke_delta_j += wheel_inertia[static_cast<std::size_t>(i)] *
                            (wheel.omega - omega_before[static_cast<std::size_t>(i)]) * om_mid;
        if (!pinned) {
            // a parked wheel is held at zero speed while its contact force
            // acts, so its sliding work is measured against zero wheel speed
            const double om_for_slip = parked ? 0.0 : om_mid;
            const double v_wheel_mid = v_mid * k_ratio[static_cast<std::size_t>(i)];
            slip_losses_j += wheel.traction_n * (om_for_slip * r - v_wheel_mid) * dt;
        }
    }
    const double body_ke_delta_j = cfg.mass_kg * (w.v - v_before) * v_mid;
    double rolling_j = 0.0;
    double grade_j = 0.0;
    if (!pinned) {
        const double weight = cfg.mass_kg * kGravity;
        double rolling = 0.0;
        // same force the dynamics applied (sign from the pre-update speed)
        if (std::abs(v_before) > 1e-9)
            rolling = tire.rolling_resistance_coeff * weight * cos_a * std::cos(patch.side_slope_rad) *
                      ((v_before > 0.0) ? 1.0 : -1.0);
        rolling_j = rolling * v_mid * dt;
        grade_j = weight * sin_a * v_mid * dt;
    }

    // --- DC bus --------------------------------------------------------------
    double demand = 0.0;
    for (double p : elec_powers) demand += p;
    const double source = std::min({std::max(0.0, demand), cfg.source_power_w, w.dc.max_source_power_w});
    const double buffer_before = w.dc.buffer_state_j;
    const auto bus_result = dc_bus_step(w.dc, source, elec_powers, dt);
    if (bus_result.underrun) {
        if (!w.bus_underrun_latched) w.events.push_back({t, -1, FaultKind::BusUnderrun});
        w.bus_underrun_latched = true;
    } else {
        w.bus_underrun_latched = false;
    }
    const double buffer_delta = bus_result.bus.buffer_state_j - buffer_before;
    w.dc = bus_result.bus;
    w.cum_source_j += source * dt;

    // --- ledger residual -------------------------------------------------------
    {
        const double elec_j = demand * dt;
        const double mech_side = motor_losses_j + gear_losses_j + sync_losses_j + motor_ke_delta_j +
                                 wheel_ke_delta_j + slip_losses_j + body_ke_delta_j + rolling_j +
                                 grade_j + pin_losses_j;
        const double denom = std::max({1.0, std::abs(elec_j), std::abs(mech_side)});
        w.max_ledger_residual_rel =
            std::max(w.max_ledger_residual_rel, std::abs(elec_j - mech_side) / denom);
        const double bus_residual =
            std::abs(source * dt - elec_j - buffer_delta - bus_result.residual_w * dt);
        w.max_ledger_residual_rel = std::max(w.max_ledger_residual_rel, bus_residual / denom);
    }

    // --- pose and trace ---------------------------------------------------------
    w.distance += w.v * dt;
    w.yaw += yaw_rate * dt;
    w.x += w.v * std::cos(w.yaw) * dt;
    w.y += w.v * std::sin(w.yaw) * dt;

    std::vector<double> row;
    row.reserve(w.trace.columns.size());
    row.push_back(t + dt);
    row.push_back(w.distance);
    row.push_back(w.v);
    row.push_back(w.yaw);
    row.push_back(turn_radius);
    for (int i = 0; i < kWheelCount; ++i) {
        const auto& wheel = w.wheels[static_cast<std::size_t>(i)];
        row.push_back(wheel.steer_rad);
        row.push_back(wheel.omega);
        row.push_back(wheel.wheel_torque_nm);
        row.push_back(wheel.slip);
        row.push_back(wheel.normal_n);
        row.push_back(wheel.motor_speed_rads);
        row.push_back(wheel.motor_torque_nm);
        row.push_back(wheel.losses_w);
    }
    for (const auto& mod : w.modules) {
        row.push_back(static_cast<double>(static_cast<int>(mod.state)));
        row.push_back(static_cast<double>(static_cast<int>(rangebox_state(mod.rangebox))));
    }
    row.push_back(source);
    row.push_back(w.dc.buffer_state_j);
    row.push_back(w.cum_source_j / 3600.0);
    w.trace.rows.push_back(std::move(row));

    w.tick += 1;
}

// ---------------------------------------------------------------------------
// Metrics. Computed from the trace (plus the event list) only, so that a
// replay from the exported CSV reproduces the report exactly.

inline MetricsReport compute_metrics(const SimTrace& trace, const EfficiencyTarget& target,
                                     const std::vector<FaultEvent>& events, std::uint64_t seed) {
    MetricsReport rep;
    rep.seed = seed;
    rep.fault_event_count = static_cast<int>(events.size());
    if (trace.rows.size() < 2) return rep;
    const auto at = [&trace](const std::vector<double>& row, int c) {
        return row[static_cast<std::size_t>(c)];
    };
    const int c_t = trace.col("t_s");
    const int c_v = trace.col("speed_mps");
    const int c_radius = trace.col("turn_radius_m");
    const int c_source = trace.col("bus_source_w");
    const int c_buffer = trace.col("buffer_j");
    const int c_cum = trace.col("cum_source_wh");
    std::array<int, kWheelCount> c_wspd{}, c_wtrq{}, c_mtrq{};
    const char* names[kWheelCount] = {"fl", "fr", "rl", "rr"};
    for (int i = 0; i < kWheelCount; ++i) {
        c_wspd[static_cast<std::size_t>(i)] = trace.col(std::string("wheel_speed_rads_") + names[i]);
        c_wtrq[static_cast<std::size_t>(i)] = trace.col(std::string("wheel_torque_nm_") + names[i]);
        c_mtrq[static_cast<std::size_t>(i)] = trace.col(std::string("motor_torque_nm_") + names[i]);
    }
    const double dt = at(trace.rows[1], c_t) - at(trace.rows[0], c_t);

    double mech_j = 0.0;
    long focus_ticks = 0;
    long focus_met = 0;
    for (const auto& row : trace.rows) {
        double wheel_power = 0.0;
        for (int i = 0; i < kWheelCount; ++i)
            wheel_power += at(row, c_wtrq[static_cast<std::size_t>(i)]) *
                           at(row, c_wspd[static_cast<std::size_t>(i)]);
        if (wheel_power > 0.0) mech_j += wheel_power * dt;
        for (int i = 0; i < kWheelCount; ++i)
            rep.peak_motor_torque_nm =
                std::max(rep.peak_motor_torque_nm, std::abs(at(row, c_mtrq[static_cast<std::size_t>(i)])));
        const double v = at(row, c_v);
        rep.max_speed_mps = std::max(rep.max_speed_mps, std::abs(v));
        const double v_kmh = mps_to_kmh(std::abs(v));
        if (v_kmh >= target.focus_low_kmh && v_kmh <= target.focus_high_kmh) {
            ++focus_ticks;
            const double src = at(row, c_source);
            if (src > 100.0 && wheel_power / src >= target_eta(target, v_kmh)) ++focus_met;
        }
        if (std::abs(v) > 0.3)
            rep.min_turning_radius_m = std::min(rep.min_turning_radius_m, at(row, c_radius));
    }
    rep.total_energy_wh = at(trace.rows.back(), c_cum);
    const double buffer_discharge =
        std::max(0.0, at(trace.rows.front(), c_buffer) - at(trace.rows.back(), c_buffer));
    const double elec_j = rep.total_energy_wh * 3600.0 + buffer_discharge;
    rep.driveline_efficiency = (elec_j > 0.0) ? mech_j / elec_j : 0.0;
    rep.field_target_fraction =
        (focus_ticks > 0) ? static_cast<double>(focus_met) / static_cast<double>(focus_ticks) : 1.0;
    rep.final_speed_mps = at(trace.rows.back(), c_v);
    return rep;
}

struct SimResult {
    SimTrace trace;
    MetricsReport metrics;
    std::vector<FaultEvent> events;
    std::vector<BusFrame> frames;
    double max_ledger_residual_rel = 0.0;
    World final_world;
};

inline SimResult run_scenario(const VehicleConfig& config, const Scenario& scenario) {
    World w = world_init(config, scenario);
    const long steps = static_cast<long>(std::llround(scenario.duration_s / scenario.dt_s));
    for (long i = 0; i < steps; ++i) world_step(w);
    SimResult res;
    res.trace = w.trace;
    res.events = w.events;
    res.frames = w.bus.delivered_log();
    res.metrics = compute_metrics(w.trace, config.efficiency_target, w.events, scenario.seed);
    res.max_ledger_residual_rel = w.max_ledger_residual_rel;
    res.final_world = std::move(w);
    return res;
}

// ---------------------------------------------------------------------------
// Limp-home feasibility: can the surviving modules hold the target speed on
// the given slope, within both their torque envelopes and the traction limits
// of the wheels they drive?

struct LimpScenario {
    double longitudinal_slope_rad = 0.0;
    double side_slope_rad = 0.0;
    double target_speed_kmh = 5.0;
    double mu_scale = 1.0;
};

struct LimpResult {
    bool feasible = false;
    double required_force_n = 0.0;
    double available_force_n = 0.0;
    std::string reason;
};

inline LimpResult limp_home_check(const VehicleConfig& config, const std::set<int>& failed_module_ids,
                                  const LimpScenario& sc) {
    config.validate();
    const auto& g = config.geometry;
    const double weight = config.mass_kg * kGravity;
    LimpResult res;
    res.required_force_n =
        weight * (std::sin(sc.longitudinal_slope_rad) +
                  config.tire.rolling_resistance_coeff * std::cos(sc.longitudinal_slope_rad) *
                      std::cos(sc.side_slope_rad));
    const auto loads =
        wheel_load_distribution(config.mass_kg, g, sc.side_slope_rad, sc.longitudinal_slope_rad);
    const double mu = config.tire.mu_peak * sc.mu_scale;
    const double v = kmh_to_mps(sc.target_speed_kmh);

    bool any_powered = false;
    for (const auto& placed : config.modules) {
        if (failed_module_ids.count(placed.module.module_id)) continue;  // whole unit dark
        RangeBox box = placed.module.rangebox;
        if (!rangebox_ratio(box)) {
            box.brake_b1 = BrakeState::Closed;  // engage the deep range for limp-home
            box.brake_b2 = BrakeState::Open;
        }
        const double ratio = *rangebox_ratio(box);
        const double eta = *rangebox_efficiency(box);
        const double motor_speed =
            std::min(ratio * v / g.rolling_radius_m, placed.module.motor.max_speed_rad_s);
        const double motor_torque = motor_torque_limit(placed.module.motor, motor_speed, TorqueMode::Peak);
        const double per_wheel_torque =
            motor_torque * ratio * eta / static_cast<double>(placed.wheels.size());
        for (int wh : placed.wheels) {
            const double traction_cap = mu * loads[static_cast<std::size_t>(wh)];
            res.available_force_n += std::min(per_wheel_torque / g.rolling_radius_m, traction_cap);
            any_powered = true;
        }
    }
    if (!any_powered) {
        res.reason = "no operational drive modules remain";
        return res;
    }
    res.feasible = res.available_force_n >= res.required_force_n;
    if (!res.feasible) res.reason = "combined tractive force below the resistance at target speed";
    return res;
}

// ---------------------------------------------------------------------------
// CSV export for events and the frame log.

inline std::string events_to_csv(const std::vector<FaultEvent>& events) {
    std::string out = "t_s,module_id,kind\n";
    char buf[96];
    for (const auto& e : events) {
        std::snprintf(buf, sizeof(buf), "%.17g,%d,%s\n", e.t_s, e.module_id, to_string(e.kind));
        out += buf;
    }
    return out;
}

inline std::string frames_to_csv(const std::vector<BusFrame>& frames) {
    std::string out =
        "send_tick,sender,target,kind,command,value,wheel_speed_rads,motor_torque_nm,state_code\n";
    char buf[192];
    for (const auto& f : frames) {
        std::snprintf(buf, sizeof(buf), "%ld,%d,%d,%d,%d,%.17g,%.17g,%.17g,%d\n", f.send_tick, f.sender,
                      f.target, static_cast<int>(f.kind), static_cast<int>(f.command), f.value,
                      f.wheel_speed_rad_s, f.motor_torque_nm, f.state_code);
        out += buf;
    }
    return out;
}

}  // namespace agridrive
