#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "agridrive/kinematics.hpp"
#include "agridrive/powertrain.hpp"
#include "agridrive/transmission.hpp"

namespace agridrive {

// ---------------------------------------------------------------------------
// Frame bus. Modules and the coordinator exchange frames over a shared bus
// with a fixed latency; per-sender FIFO order is preserved. Faulted modules
// fall silent: nothing they sent is delivered after the fault instant, and
// nothing reaches them either.

enum class FrameKind { Telemetry, Command, Heartbeat };

enum class CommandKind { Enable, Disable, SetMode, SetSetpoint, SetRange, Steer, Park, Reset };

enum class RangeTarget { RangeA, RangeB, FreeWheel };

enum class ModuleState { Off, Standby, Drive, Braking, Parked, FreeWheel, Fault };

enum class ControlMode { SpeedLoop, TorqueLoop };

enum class FaultKind { TotalLoss, CommsLoss, CommsTimeout, BrakeOverload, BusUnderrun };

inline const char* to_string(FaultKind k) {
    switch (k) {
        case FaultKind::TotalLoss: return "total_loss";
        case FaultKind::CommsLoss: return "comms_loss";
        case FaultKind::CommsTimeout: return "comms_timeout";
        case FaultKind::BrakeOverload: return "brake_overload";
        default: return "bus_underrun";
    }
}

inline const char* to_string(ModuleState s) {
    switch (s) {
        case ModuleState::Off: return "off";
        case ModuleState::Standby: return "standby";
        case ModuleState::Drive: return "drive";
        case ModuleState::Braking: return "braking";
        case ModuleState::Parked: return "parked";
        case ModuleState::FreeWheel: return "freewheel";
        default: return "fault";
    }
}

inline constexpr int kCoordinatorId = 1000;

// One frame. The payload fields used depend on `kind`; unused fields stay at
// their defaults so frames compare and serialize deterministically.
struct BusFrame {
    int sender = kCoordinatorId;
    int target = -1;  // -1 = broadcast
    FrameKind kind = FrameKind::Heartbeat;
    long send_tick = 0;
    // command payload
    CommandKind command = CommandKind::Enable;
    double value = 0.0;
    ControlMode mode = ControlMode::SpeedLoop;
    RangeTarget range = RangeTarget::RangeA;
    // telemetry payload
    double wheel_speed_rad_s = 0.0;
    double motor_torque_nm = 0.0;
    int state_code = 0;
};

struct FaultInjection {
    int module_id = 0;
    double at_time_s = 0.0;
    FaultKind kind = FaultKind::TotalLoss;  // injectable kinds: TotalLoss, CommsLoss
};

class FrameBus {
  public:
    explicit FrameBus(int latency_ticks = 1) : latency_ticks_(std::max(0, latency_ticks)) {}

    void send(BusFrame frame, long now_tick) {
        frame.send_tick = now_tick;
        in_flight_.push_back({now_tick + latency_ticks_, seq_++, frame});
    }

    // All frames due at `now_tick`, ordered (deliver_tick, sender, seq); the
    // per-sender sequence number preserves FIFO order.
    std::vector<BusFrame> deliver(long now_tick) {
        std::vector<InFlight> due;
        std::vector<InFlight> rest;
        for (const auto& f : in_flight_) {
            if (f.deliver_tick <= now_tick) {
                due.push_back(f);
            } else {
                rest.push_back(f);
            }
        }
        in_flight_ = std::move(rest);
        std::sort(due.begin(), due.end(), [](const InFlight& a, const InFlight& b) {
            if (a.deliver_tick != b.deliver_tick) return a.deliver_tick < b.deliver_tick;
            if (a.frame.sender != b.frame.sender) return a.frame.sender < b.frame.sender;
            return a.seq < b.seq;
        });
        std::vector<BusFrame> out;
        for (const auto& f : due) {
            const auto it = faulted_.find(f.frame.sender);
            if (it != faulted_.end() && f.deliver_tick > it->second) continue;  // sender is dark
            out.push_back(f.frame);
            delivered_log_.push_back(f.frame);
        }
        return out;
    }

    // After `fault_tick` the module neither sends nor receives.
    void isolate(int module_id, long fault_tick) {
        const auto it = faulted_.find(module_id);
        if (it == faulted_.end() || it->second > fault_tick) faulted_[module_id] = fault_tick;
    }

    bool is_isolated(int module_id, long now_tick) const {
        const auto it = faulted_.find(module_id);
        return it != faulted_.end() && now_tick > it->second;
    }

    int latency_ticks() const { return latency_ticks_; }
    const std::vector<BusFrame>& delivered_log() const { return delivered_log_; }

  private:
    struct InFlight {
        long deliver_tick = 0;
        long seq = 0;
        BusFrame frame;
    };
    int latency_ticks_;
    long seq_ = 0;
    std::vector<InFlight> in_flight_;
    std::map<int, long> faulted_;
    std::vector<BusFrame> delivered_log_;
};

// ---------------------------------------------------------------------------
// Drive module: the distributed controller living in each axle or wheel unit.
// Speed/torque loops, range shifting, parking and the comms watchdog all run
// here; the vehicle only supplies DC power and frames.

enum class ShiftPhase { Idle, RampDown, OpenBrakes, Synchronize, CloseBrake, RampUp };

struct ShiftWindows {
    // vehicle speed bands in which each range may be engaged
    double range_a_min_kmh = 0.0;
    double range_a_max_kmh = 13.0;
    double range_b_min_kmh = 0.0;
    double range_b_max_kmh = 45.0;
};

struct PiGains {
    double kp = 8000.0;  // wheel-side Nm per rad/s
    double ki = 6000.0;
};

struct DriveModule {
    int module_id = 0;
    DriveConcept kind = DriveConcept::WheelModule;
    ModuleState state = ModuleState::Off;
    ControlMode control_mode = ControlMode::SpeedLoop;
    double setpoint = 0.0;  // wheel rad/s in SpeedLoop, wheel-side Nm in TorqueLoop
    RangeBox rangebox;
    MotorSpec motor;
    double steering_angle_rad = 0.0;
    int telemetry_period_ticks = 10;

    // actuator and controller parameters
    double steer_target_rad = 0.0;
    double steer_rate_rad_s = 0.35;
    double max_steer_rad = 0.61;
    PiGains speed_gains;
    double parked_speed_threshold = 0.01;  // rad/s
    int comms_timeout_periods = 10;
    double shift_torque_ramp_nm_s = 40e3;  // wheel side
    double sync_tolerance_rad_s = 2.0;
    double sync_gain_nm_per_rad_s = 10.0;
    double motor_inertia_kgm2 = 0.5;
    ShiftWindows shift_windows;
    bool steering_capable = true;

    // run-time state
    long tick = 0;
    long ticks_since_rx = 0;
    double integrator_nm = 0.0;
    double last_wheel_torque_nm = 0.0;
    double overload_credit_j = 600e3;
    ShiftPhase shift_phase = ShiftPhase::Idle;
    RangeTarget shift_target = RangeTarget::RangeA;
    double shift_ramp_nm = 0.0;
    double motor_speed_rad_s = 0.0;  // tracked while decoupled from the wheel
    FaultKind fault_kind = FaultKind::TotalLoss;
};

struct ModuleMeasurements {
    double wheel_speed_rad_s = 0.0;
    double load_torque_nm = 0.0;  // reaction seen at the wheel, for telemetry only
    double vehicle_speed_mps = 0.0;
};

struct ModuleOutput {
    double wheel_torque_nm = 0.0;  // delivered to the wheel; 0 whenever decoupled
    double motor_torque_nm = 0.0;
    double motor_speed_rad_s = 0.0;
    double steer_angle_rad = 0.0;
    bool park_rejected = false;
    bool shift_rejected = false;
    double sync_mismatch_rad_s = 0.0;  // residual motor-speed error when a brake closed
    std::vector<BusFrame> outgoing;
};

namespace detail {

inline double range_target_ratio(const RangeBox& box, RangeTarget t) {
    RangeBox probe = box;
    probe.brake_b1 = (t == RangeTarget::RangeA) ? BrakeState::Closed : BrakeState::Open;
    probe.brake_b2 = (t == RangeTarget::RangeB) ? BrakeState::Closed : BrakeState::Open;
    const auto r = rangebox_ratio(probe);
    return r ? *r : 0.0;
}

inline void engage_range(RangeBox& box, RangeTarget t) {
    box.brake_b1 = (t == RangeTarget::RangeA) ? BrakeState::Closed : BrakeState::Open;
    box.brake_b2 = (t == RangeTarget::RangeB) ? BrakeState::Closed : BrakeState::Open;
}

inline bool speed_in_window(const ShiftWindows& w, RangeTarget t, double vehicle_speed_mps) {
    const double v = std::abs(vehicle_speed_mps) * 3.6;
    if (t == RangeTarget::RangeA) return v >= w.range_a_min_kmh && v <= w.range_a_max_kmh;
    if (t == RangeTarget::RangeB) return v >= w.range_b_min_kmh && v <= w.range_b_max_kmh;
    return true;  // free-wheeling has no speed restriction
}

}  // namespace detail

inline void enter_fault(DriveModule& mod, FaultKind kind) {
    mod.state = ModuleState::Fault;
    mod.fault_kind = kind;
    mod.integrator_nm = 0.0;
    mod.shift_phase = ShiftPhase::Idle;
    mod.last_wheel_torque_nm = 0.0;
}

inline void reset_fault(DriveModule& mod) {
    if (mod.state != ModuleState::Fault) return;
    mod.state = ModuleState::Standby;
    mod.integrator_nm = 0.0;
    mod.ticks_since_rx = 0;
}

// Explicit shift request; rejected outside the target range's speed window.
inline bool begin_range_shift(DriveModule& mod, RangeTarget target, double vehicle_speed_mps) {
    if (!detail::speed_in_window(mod.shift_windows, target, vehicle_speed_mps)) return false;
    if (target == RangeTarget::FreeWheel) {
        mod.rangebox.brake_b1 = BrakeState::Open;
        mod.rangebox.brake_b2 = BrakeState::Open;
        mod.state = ModuleState::FreeWheel;
        mod.shift_phase = ShiftPhase::Idle;
        return true;
    }
    const RangeState now = rangebox_state(mod.rangebox);
    if ((now == RangeState::RangeA && target == RangeTarget::RangeA) ||
        (now == RangeState::RangeB && target == RangeTarget::RangeB))
        return true;  // already engaged
    if (mod.state == ModuleState::FreeWheel || now == RangeState::FreeWheel) {
        // engage from free-wheeling: synchronize first, then close
        mod.state = ModuleState::Drive;
        mod.shift_target = target;
        mod.shift_phase = ShiftPhase::Synchronize;
        return true;
    }
    mod.shift_target = target;
    mod.shift_phase = ShiftPhase::RampDown;
    mod.shift_ramp_nm = mod.last_wheel_torque_nm;
    return true;
}

namespace detail {

// PI speed loop / torque pass-through with envelope clamping and conditional
// anti-windup; torque values are wheel-side.
inline double control_torque(DriveModule& mod, const ModuleMeasurements& meas, double dt,
                             double ratio, double gear_eta) {
    const double motor_speed = std::abs(ratio * meas.wheel_speed_rad_s);
    double motor_limit = 0.0;
    if (motor_speed <= mod.motor.max_speed_rad_s) {
        const TorqueMode tmode =
            (mod.overload_credit_j > 0.0) ? TorqueMode::Peak : TorqueMode::Continuous;
        motor_limit = motor_torque_limit(mod.motor, motor_speed, tmode);
    }
    const double wheel_limit = motor_limit * std::abs(ratio) * gear_eta;

    double unsat;
    if (mod.control_mode == ControlMode::SpeedLoop) {
        const double err = mod.setpoint - meas.wheel_speed_rad_s;
        unsat = mod.speed_gains.kp * err + mod.integrator_nm;
        const double sat = std::clamp(unsat, -wheel_limit, wheel_limit);
        if (unsat == sat || (unsat > sat && err < 0.0) || (unsat < sat && err > 0.0))
            mod.integrator_nm += mod.speed_gains.ki * err * dt;
        return sat;
    }
    unsat = mod.setpoint;
    return std::clamp(unsat, -wheel_limit, wheel_limit);
}

inline void update_overload_credit(DriveModule& mod, double motor_torque, double motor_speed,
                                   double dt) {
    const double p = std::abs(motor_torque * motor_speed);
    if (p > mod.motor.continuous_power_w) {
        mod.overload_credit_j = std::max(0.0, mod.overload_credit_j - (p - mod.motor.continuous_power_w) * dt);
    } else {
        mod.overload_credit_j = std::min(mod.motor.overload_budget_j,
                                         mod.overload_credit_j + (mod.motor.continuous_power_w - p) * dt);
    }
}

}  // namespace detail

// One control tick. Applies delivered frames, runs the watchdog, advances the
// steering actuator and the shift sequence, and produces torque plus outgoing
// telemetry. Faults latch: once in Fault the torque output stays zero until an
// explicit Reset command.
inline ModuleOutput module_step(DriveModule& mod, std::span<const BusFrame> delivered,
                                const ModuleMeasurements& meas, double dt) {
    ModuleOutput out;
    mod.tick += 1;

    bool received = false;
    for (const auto& frame : delivered) {
        if (frame.target != -1 && frame.target != mod.module_id) continue;
        received = true;
        if (frame.kind != FrameKind::Command) continue;
        switch (frame.command) {
            case CommandKind::Enable:
                if (mod.state == ModuleState::Off) {
                    mod.state = ModuleState::Standby;
                } else if (mod.state == ModuleState::Standby) {
                    mod.state = ModuleState::Drive;
                    mod.integrator_nm = 0.0;
                }
                break;
            case CommandKind::Disable:
                if (mod.state == ModuleState::Drive || mod.state == ModuleState::Braking ||
                    mod.state == ModuleState::FreeWheel)
                    mod.state = ModuleState::Standby;
                mod.integrator_nm = 0.0;
                break;
            case CommandKind::SetMode:
                if (frame.mode != mod.control_mode) {
                    mod.control_mode = frame.mode;
                    mod.integrator_nm = 0.0;
                }
                break;
            case CommandKind::SetSetpoint:
                mod.setpoint = frame.value;
                break;
            case CommandKind::Steer:
                if (mod.steering_capable)
                    mod.steer_target_rad = std::clamp(frame.value, -mod.max_steer_rad, mod.max_steer_rad);
                break;
            case CommandKind::SetRange:
                if (mod.state == ModuleState::Drive || mod.state == ModuleState::Braking ||
                    mod.state == ModuleState::FreeWheel) {
                    if (!begin_range_shift(mod, frame.range, meas.vehicle_speed_mps))
                        out.shift_rejected = true;
                }
                break;
            case CommandKind::Park:
                if (std::abs(meas.wheel_speed_rad_s) < mod.parked_speed_threshold) {
                    mod.state = ModuleState::Parked;
                    mod.rangebox.brake_b1 = BrakeState::Closed;
                    mod.rangebox.brake_b2 = BrakeState::Closed;
                    mod.integrator_nm = 0.0;
                    mod.shift_phase = ShiftPhase::Idle;
                } else {
                    out.park_rejected = true;
                }
                break;
            case CommandKind::Reset:
                reset_fault(mod);
                break;
        }
    }
    mod.ticks_since_rx = received ? 0 : mod.ticks_since_rx + 1;

    // Comms watchdog: an operational module that stops hearing from the
    // coordinator must not keep driving.
    const bool operational = mod.state == ModuleState::Drive || mod.state == ModuleState::Braking ||
                             mod.state == ModuleState::FreeWheel;
    if (operational &&
        mod.ticks_since_rx > static_cast<long>(mod.comms_timeout_periods) * mod.telemetry_period_ticks)
        enter_fault(mod, FaultKind::CommsTimeout);

    // steering actuator: rate-limited approach to the target
    if (mod.steering_capable) {
        const double max_delta = mod.steer_rate_rad_s * dt;
        const double delta = std::clamp(mod.steer_target_rad - mod.steering_angle_rad, -max_delta, max_delta);
        mod.steering_angle_rad += delta;
    }
    out.steer_angle_rad = mod.steering_angle_rad;

    // torque production
    const auto ratio_opt = rangebox_ratio(mod.rangebox);
    const double gear_eta = rangebox_efficiency(mod.rangebox).value_or(1.0);
    if (mod.state == ModuleState::Drive || mod.state == ModuleState::Braking) {
        if (mod.shift_phase == ShiftPhase::Idle) {
            if (ratio_opt) {
                const double ratio = *ratio_opt;
                double wheel_torque = detail::control_torque(mod, meas, dt, ratio, gear_eta);
                out.wheel_torque_nm = wheel_torque;
                const bool driving = wheel_torque * meas.wheel_speed_rad_s >= 0.0;
                out.motor_torque_nm =
                    driving ? wheel_torque / (ratio * gear_eta) : wheel_torque * gear_eta / ratio;
                out.motor_speed_rad_s = ratio * meas.wheel_speed_rad_s;
                mod.motor_speed_rad_s = out.motor_speed_rad_s;
                detail::update_overload_credit(mod, out.motor_torque_nm, out.motor_speed_rad_s, dt);
                // braking is a reported sub-state of drive: slowing to a stop
                mod.state = (mod.control_mode == ControlMode::SpeedLoop && mod.setpoint == 0.0 &&
                             std::abs(meas.wheel_speed_rad_s) > 10.0 * mod.parked_speed_threshold)
                                ? ModuleState::Braking
                                : ModuleState::Drive;
            }
        } else {
            // scripted range shift
            switch (mod.shift_phase) {
                case ShiftPhase::RampDown: {
                    const double step = mod.shift_torque_ramp_nm_s * dt;
                    if (std::abs(mod.shift_ramp_nm) <= step) {
                        mod.shift_ramp_nm = 0.0;
                        mod.shift_phase = ShiftPhase::OpenBrakes;
                    } else {
                        mod.shift_ramp_nm -= std::copysign(step, mod.shift_ramp_nm);
                    }
                    out.wheel_torque_nm = mod.shift_ramp_nm;
                    if (ratio_opt) {
                        const double ratio = *ratio_opt;
                        const bool driving = out.wheel_torque_nm * meas.wheel_speed_rad_s >= 0.0;
                        out.motor_torque_nm = driving ? out.wheel_torque_nm / (ratio * gear_eta)
                                                      : out.wheel_torque_nm * gear_eta / ratio;
                        out.motor_speed_rad_s = ratio * meas.wheel_speed_rad_s;
                        mod.motor_speed_rad_s = out.motor_speed_rad_s;
                    }
                    break;
                }
                case ShiftPhase::OpenBrakes:
                    mod.rangebox.brake_b1 = BrakeState::Open;
                    mod.rangebox.brake_b2 = BrakeState::Open;
                    mod.shift_phase = ShiftPhase::Synchronize;
                    break;
                case ShiftPhase::Synchronize: {
                    const double target_speed =
                        detail::range_target_ratio(mod.rangebox, mod.shift_target) * meas.wheel_speed_rad_s;
                    const double err = target_speed - mod.motor_speed_rad_s;
                    double torque = mod.sync_gain_nm_per_rad_s * err;
                    const double abs_speed = std::min(std::abs(mod.motor_speed_rad_s), mod.motor.max_speed_rad_s);
                    const double limit = motor_torque_limit(mod.motor, abs_speed, TorqueMode::Peak);
                    torque = std::clamp(torque, -limit, limit);
                    mod.motor_speed_rad_s += torque / mod.motor_inertia_kgm2 * dt;
                    out.motor_torque_nm = torque;
                    out.motor_speed_rad_s = mod.motor_speed_rad_s;
                    if (std::abs(err) <= mod.sync_tolerance_rad_s) mod.shift_phase = ShiftPhase::CloseBrake;
                    break;
                }
                case ShiftPhase::CloseBrake: {
                    detail::engage_range(mod.rangebox, mod.shift_target);
                    const double coupled =
                        *rangebox_ratio(mod.rangebox) * meas.wheel_speed_rad_s;
                    out.sync_mismatch_rad_s = coupled - mod.motor_speed_rad_s;
                    mod.motor_speed_rad_s = coupled;
                    mod.integrator_nm = 0.0;
                    mod.shift_ramp_nm = 0.0;
                    mod.shift_phase = ShiftPhase::RampUp;
                    break;
                }
                case ShiftPhase::RampUp: {
                    mod.shift_ramp_nm += mod.shift_torque_ramp_nm_s * dt;
                    const double ratio = *rangebox_ratio(mod.rangebox);
                    double wheel_torque = detail::control_torque(mod, meas, dt, ratio, gear_eta);
                    if (std::abs(wheel_torque) <= mod.shift_ramp_nm) {
                        mod.shift_phase = ShiftPhase::Idle;
                    } else {
                        wheel_torque = std::copysign(mod.shift_ramp_nm, wheel_torque);
                    }
                    out.wheel_torque_nm = wheel_torque;
                    const bool driving = wheel_torque * meas.wheel_speed_rad_s >= 0.0;
                    out.motor_torque_nm =
                        driving ? wheel_torque / (ratio * gear_eta) : wheel_torque * gear_eta / ratio;
                    out.motor_speed_rad_s = ratio * meas.wheel_speed_rad_s;
                    mod.motor_speed_rad_s = out.motor_speed_rad_s;
                    break;
                }
                default: break;
            }
        }
    } else if (mod.state == ModuleState::FreeWheel) {
        // decoupled: the motor idles, the wheel sees no torque
        out.motor_speed_rad_s = mod.motor_speed_rad_s;
    } else if (mod.state == ModuleState::Parked) {
        out.motor_speed_rad_s = 0.0;
        mod.motor_speed_rad_s = 0.0;
    }
    mod.last_wheel_torque_nm = out.wheel_torque_nm;

    if (mod.tick % mod.telemetry_period_ticks == 0) {
        BusFrame t;
        t.sender = mod.module_id;
        t.target = kCoordinatorId;
        t.kind = FrameKind::Telemetry;
        t.wheel_speed_rad_s = meas.wheel_speed_rad_s;
        t.motor_torque_nm = out.motor_torque_nm;
        t.state_code = static_cast<int>(mod.state);
        out.outgoing.push_back(t);
    }
    return out;
}

}  // namespace agridrive
