#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "agridrive/errors.hpp"

namespace agridrive {

// Planar steering geometry.
//
// Body frame: x forward, y left. The rear axle center is the origin, the
// front axle sits at x = wheelbase. Turn radii are signed: positive radius =
// left turn (instantaneous center of rotation on the +y side). Wheel order
// everywhere is FL, FR, RL, RR.

enum class DriveConcept { AxleModule, WheelModule };

enum class SteeringMode { FrontOnly, FourWheelSymmetric, IndependentPerWheel };

enum class Wheel : int { FrontLeft = 0, FrontRight = 1, RearLeft = 2, RearRight = 3 };

inline constexpr int kWheelCount = 4;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct VehicleGeometry {
    double wheelbase_m = 3.0;
    double track_width_m = 2.0;
    double rolling_radius_m = 0.78;
    double cog_height_m = 1.2;
    double cog_offset_m = 1.5;  // longitudinal CoG position measured from the rear axle

    void validate() const {
        if (wheelbase_m <= 0.0) throw ConfigError("geometry.wheelbase_m", "must be > 0");
        if (track_width_m <= 0.0) throw ConfigError("geometry.track_width_m", "must be > 0");
        if (rolling_radius_m <= 0.0) throw ConfigError("geometry.rolling_radius_m", "must be > 0");
        if (cog_height_m <= 0.0) throw ConfigError("geometry.cog_height_m", "must be > 0");
        if (cog_offset_m < 0.0 || cog_offset_m > wheelbase_m)
            throw ConfigError("geometry.cog_offset_m", "must lie within [0, wheelbase]");
    }
};

struct WheelPose {
    Vec2 position;
    double steer_angle = 0.0;    // rad, positive = left
    double angular_speed = 0.0;  // rad/s about the axle
};

inline Vec2 wheel_position(const VehicleGeometry& g, Wheel w) {
    const double half_track = g.track_width_m / 2.0;
    switch (w) {
        case Wheel::FrontLeft: return {g.wheelbase_m, half_track};
        case Wheel::FrontRight: return {g.wheelbase_m, -half_track};
        case Wheel::RearLeft: return {0.0, half_track};
        default: return {0.0, -half_track};
    }
}

// Reference point whose speed the caller commands: the geometric center
// between the axles.
inline Vec2 reference_point(const VehicleGeometry& g) { return {g.wheelbase_m / 2.0, 0.0}; }

// Motion degrees of freedom of the driveline: one per independently driven
// unit, plus one per steered unit when steering is integrated.
inline int dof_count(DriveConcept concept_kind, bool steering_integrated) {
    const int drive = (concept_kind == DriveConcept::WheelModule) ? 4 : 2;
    return steering_integrated ? 2 * drive : drive;
}

namespace detail {

// Steer angle that points the wheel's axis through the ICR.
inline double angle_to_icr(const Vec2& wheel, const Vec2& icr) {
    return std::atan2(wheel.x - icr.x, icr.y - wheel.y);
}

}  // namespace detail

// Per-wheel steer angles for a slip-free turn of the given signed radius.
// FrontOnly places the ICR on the rear-axle line, FourWheelSymmetric (and
// IndependentPerWheel, which can realize the same exact solution) on the
// mid-wheelbase line. radius = +/-infinity means straight ahead.
inline std::array<double, kWheelCount> ackermann_angles(const VehicleGeometry& g, SteeringMode mode,
                                                        double turn_radius_m) {
    std::array<double, kWheelCount> angles{0.0, 0.0, 0.0, 0.0};
    if (std::isinf(turn_radius_m)) return angles;
    if (std::abs(turn_radius_m) <= g.track_width_m / 2.0)
        throw RadiusTooSmall("turn radius must exceed half the track width");

    const double icr_x = (mode == SteeringMode::FrontOnly) ? 0.0 : g.wheelbase_m / 2.0;
    const Vec2 icr{icr_x, turn_radius_m};
    for (int i = 0; i < kWheelCount; ++i) {
        const Vec2 pos = wheel_position(g, static_cast<Wheel>(i));
        if (mode == SteeringMode::FrontOnly && pos.x == 0.0) continue;  // rear wheels stay straight
        angles[static_cast<std::size_t>(i)] = detail::angle_to_icr(pos, icr);
    }
    return angles;
}

struct SteeringAnalysis {
    bool straight = false;    // wheel axes are (near-)parallel: no finite ICR
    Vec2 icr;                 // valid when !straight
    double residual_m = 0.0;  // max perpendicular distance of any wheel axis from the ICR
};

// Least-squares intersection of the four wheel-axis lines. Never throws;
// IndependentPerWheel steering uses the residual to judge consistency.
inline SteeringAnalysis analyze_steering(const std::array<WheelPose, kWheelCount>& poses) {
    // Each wheel axis satisfies n . (p - pos) = 0 with n the wheel heading.
    double a11 = 0, a12 = 0, a22 = 0, b1 = 0, b2 = 0;
    for (const auto& wp : poses) {
        const double nx = std::cos(wp.steer_angle);
        const double ny = std::sin(wp.steer_angle);
        const double rhs = nx * wp.position.x + ny * wp.position.y;
        a11 += nx * nx;
        a12 += nx * ny;
        a22 += ny * ny;
        b1 += nx * rhs;
        b2 += ny * rhs;
    }
    SteeringAnalysis out;
    const double det = a11 * a22 - a12 * a12;
    if (det < 1e-12) {
        out.straight = true;
        return out;
    }
    out.icr.x = (a22 * b1 - a12 * b2) / det;
    out.icr.y = (a11 * b2 - a12 * b1) / det;
    for (const auto& wp : poses) {
        const double nx = std::cos(wp.steer_angle);
        const double ny = std::sin(wp.steer_angle);
        const double d = std::abs(nx * (out.icr.x - wp.position.x) + ny * (out.icr.y - wp.position.y));
        out.residual_m = std::max(out.residual_m, d);
    }
    return out;
}

// Wheel angular speeds for rotation about an explicit ICR, scaled so the
// reference point moves at reference_speed. Zero longitudinal slip implied.
inline std::array<double, kWheelCount> wheel_speeds_for_icr(const VehicleGeometry& g, const Vec2& icr,
                                                            double reference_speed_mps) {
    const Vec2 ref = reference_point(g);
    const double d_ref = std::hypot(ref.x - icr.x, ref.y - icr.y);
    if (d_ref < 1e-9)
        throw InconsistentSteering("ICR coincides with the vehicle reference point");
    std::array<double, kWheelCount> speeds{};
    for (int i = 0; i < kWheelCount; ++i) {
        const Vec2 pos = wheel_position(g, static_cast<Wheel>(i));
        const double d = std::hypot(pos.x - icr.x, pos.y - icr.y);
        speeds[static_cast<std::size_t>(i)] = reference_speed_mps * (d / d_ref) / g.rolling_radius_m;
    }
    return speeds;
}

// Same, with the ICR recovered from the wheel poses. Axes must agree on one
// ICR within `tolerance_m` (default 1 mm), else InconsistentSteering.
inline std::array<double, kWheelCount> wheel_speeds_for_icr(const VehicleGeometry& g,
                                                            const std::array<WheelPose, kWheelCount>& poses,
                                                            double reference_speed_mps,
                                                            double tolerance_m = 1e-3) {
    const SteeringAnalysis s = analyze_steering(poses);
    if (s.straight) {
        const double w = reference_speed_mps / g.rolling_radius_m;
        return {w, w, w, w};
    }
    if (s.residual_m > tolerance_m)
        throw InconsistentSteering("wheel axes do not intersect in a single ICR");
    return wheel_speeds_for_icr(g, s.icr, reference_speed_mps);
}

// Smallest achievable turn radius (to the vehicle centerline) at the given
// steering limit. The inner wheel reaches the limit first, so the radius is
// measured from the effective axle line: full wheelbase for front steering,
// half for symmetric four-wheel steering.
inline double min_turning_radius(const VehicleGeometry& g, SteeringMode mode, double max_steer_rad) {
    if (max_steer_rad < 0.0 || max_steer_rad >= std::numbers::pi / 2.0)
        throw Error("max steer angle must lie in [0, pi/2)");
    if (max_steer_rad == 0.0) return std::numeric_limits<double>::infinity();
    const double effective_base =
        (mode == SteeringMode::FrontOnly) ? g.wheelbase_m : g.wheelbase_m / 2.0;
    return effective_base / std::tan(max_steer_rad) + g.track_width_m / 2.0;
}

}  // namespace agridrive
