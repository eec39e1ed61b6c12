#pragma once

#include <cmath>
#include <numbers>

namespace agridrive {

inline constexpr double kGravity = 9.81;  // m/s^2

constexpr double kmh_to_mps(double v_kmh) { return v_kmh / 3.6; }
constexpr double mps_to_kmh(double v_mps) { return v_mps * 3.6; }

constexpr double rpm_to_rad_s(double rpm) { return rpm * 2.0 * std::numbers::pi / 60.0; }
constexpr double rad_s_to_rpm(double w) { return w * 60.0 / (2.0 * std::numbers::pi); }

constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

}  // namespace agridrive
