#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "agridrive/errors.hpp"

namespace agridrive {

enum class Arrangement { SunInCarrierOutRingFixed, SunInRingOutCarrierFixed };

enum class BrakeState { Open, Closed };

enum class RangeState { RangeA, RangeB, Parked, FreeWheel };

struct PlanetaryStage {
    int sun_teeth = 0;
    int ring_teeth = 0;
    int planet_count = 3;
    Arrangement arrangement = Arrangement::SunInCarrierOutRingFixed;
    double mesh_efficiency = 0.985;  // per mesh; a stage has two meshes

    void validate() const {
        if (sun_teeth < 12 || ring_teeth <= sun_teeth)
            throw InvalidToothCounts("need ring_teeth > sun_teeth >= 12");
        if (planet_count < 1 || (sun_teeth + ring_teeth) % planet_count != 0)
            throw InvalidToothCounts("sun+ring must be divisible by planet_count (assembly condition)");
        if (!(mesh_efficiency > 0.9 && mesh_efficiency <= 1.0))
            throw InvalidToothCounts("mesh_efficiency must lie in (0.9, 1.0]");
    }
};

// Speed ratio input/output of one stage. With the ring fixed the carrier
// output turns the same way as the sun; with the carrier fixed the ring
// output reverses (negative ratio).
inline double planetary_ratio(const PlanetaryStage& s) {
    s.validate();
    if (s.arrangement == Arrangement::SunInCarrierOutRingFixed)
        return static_cast<double>(s.sun_teeth + s.ring_teeth) / s.sun_teeth;
    return -static_cast<double>(s.ring_teeth) / s.sun_teeth;
}

// Two meshes per stage (sun-planet, planet-ring).
inline double stage_efficiency(const PlanetaryStage& s) {
    return s.mesh_efficiency * s.mesh_efficiency;
}

// Two-range hub gearbox: a permanently engaged high-speed stage followed by
// two alternative output stages whose ring gears are held by the externally
// actuated brakes B1 and B2. Closing both parks the hub; opening both
// decouples the wheel from the motor.
struct RangeBox {
    PlanetaryStage stage1;
    PlanetaryStage stage2_range_a;
    PlanetaryStage stage2_range_b;
    BrakeState brake_b1 = BrakeState::Open;
    BrakeState brake_b2 = BrakeState::Open;
    double brake_torque_limit_nm = 2.0e5;  // holding capacity of each range brake at the wheel
    double min_overall_ratio = 1.0;        // acceptance band for either range's reduction
    double max_overall_ratio = 200.0;

    void validate() const;
};

// Hub final drives for axle modules, by layout family: designs 1-2 are the
// compact standard arrangements preferred on large vehicles, 3-5 trade
// complexity for portal-style ground clearance. A ratio of 1 is a direct
// coupling.
enum class GroundClearanceClass { Standard, Portal };

struct FinalDriveVariant {
    int variant_id = 1;  // 1..5
    double ratio = 1.0;
    GroundClearanceClass clearance = GroundClearanceClass::Standard;

    void validate() const {
        if (variant_id < 1 || variant_id > 5)
            throw Error("final drive variant_id must lie in 1..5");
        if (ratio < 1.0) throw Error("final drive ratio must be >= 1");
    }
};

inline std::array<FinalDriveVariant, 5> final_drive_variants() {
    return {{{1, 6.0, GroundClearanceClass::Standard},
             {2, 5.0, GroundClearanceClass::Standard},
             {3, 7.0, GroundClearanceClass::Portal},
             {4, 8.0, GroundClearanceClass::Portal},
             {5, 9.0, GroundClearanceClass::Portal}}};
}

inline FinalDriveVariant direct_final_drive() { return {1, 1.0, GroundClearanceClass::Standard}; }

inline RangeState rangebox_state(const RangeBox& box) {
    const bool b1 = box.brake_b1 == BrakeState::Closed;
    const bool b2 = box.brake_b2 == BrakeState::Closed;
    if (b1 && b2) return RangeState::Parked;
    if (b1) return RangeState::RangeA;
    if (b2) return RangeState::RangeB;
    return RangeState::FreeWheel;
}

// Overall reduction in the active range; empty when parked or free-wheeling
// (no kinematic speed ratio exists in either of those states).
inline std::optional<double> rangebox_ratio(const RangeBox& box) {
    switch (rangebox_state(box)) {
        case RangeState::RangeA:
            return planetary_ratio(box.stage1) * planetary_ratio(box.stage2_range_a);
        case RangeState::RangeB:
            return planetary_ratio(box.stage1) * planetary_ratio(box.stage2_range_b);
        default:
            return std::nullopt;
    }
}

inline void RangeBox::validate() const {
    RangeBox probe = *this;
    probe.brake_b1 = BrakeState::Closed;
    probe.brake_b2 = BrakeState::Open;
    const double ratio_a = *rangebox_ratio(probe);
    probe.brake_b1 = BrakeState::Open;
    probe.brake_b2 = BrakeState::Closed;
    const double ratio_b = *rangebox_ratio(probe);
    for (double ratio : {ratio_a, ratio_b})
        if (ratio < min_overall_ratio || ratio > max_overall_ratio)
            throw InvalidToothCounts("overall range reduction outside the configured bounds");
}

// Drive efficiency motor->wheel in the active range (product over the four
// engaged meshes).
inline std::optional<double> rangebox_efficiency(const RangeBox& box) {
    switch (rangebox_state(box)) {
        case RangeState::RangeA:
            return stage_efficiency(box.stage1) * stage_efficiency(box.stage2_range_a);
        case RangeState::RangeB:
            return stage_efficiency(box.stage1) * stage_efficiency(box.stage2_range_b);
        default:
            return std::nullopt;
    }
}

// Reduction from motor to ground contact: the active range times the hub
// final drive (direct coupling contributes a factor of 1).
inline std::optional<double> overall_reduction(const RangeBox& box, const FinalDriveVariant& fd) {
    fd.validate();
    const auto r = rangebox_ratio(box);
    if (!r) return std::nullopt;
    return *r * fd.ratio;
}

inline double wheel_rpm(double speed_kmh, double rolling_radius_m) {
    if (speed_kmh < 0.0 || rolling_radius_m <= 0.0)
        throw Error("wheel_rpm: speed must be >= 0 and radius > 0");
    return speed_kmh / 3.6 / (2.0 * std::numbers::pi * rolling_radius_m) * 60.0;
}

inline double required_reduction(double motor_nominal_rpm, double wheel_rpm_value) {
    if (motor_nominal_rpm <= 0.0 || wheel_rpm_value <= 0.0)
        throw Error("required_reduction: both speeds must be > 0");
    return motor_nominal_rpm / wheel_rpm_value;
}

inline double range_spread(std::span<const double> reductions) {
    if (reductions.empty()) throw Error("range_spread: no reductions given");
    const auto [mn, mx] = std::minmax_element(reductions.begin(), reductions.end());
    return *mx / *mn;
}

inline double speed_ratio_spread(double v_min_field_kmh, double v_max_road_kmh) {
    if (!(v_min_field_kmh > 0.0 && v_min_field_kmh <= v_max_road_kmh))
        throw Error("speed_ratio_spread: need 0 < v_min <= v_max");
    return v_max_road_kmh / v_min_field_kmh;
}

struct SynthesisConstraints {
    int sun_min = 12;
    int sun_max = 40;
    int ring_max = 150;
    int planet_count = 3;
    Arrangement arrangement = Arrangement::SunInCarrierOutRingFixed;
    double mesh_efficiency = 0.985;
};

struct StageCandidate {
    PlanetaryStage stage;
    double ratio = 0.0;
    double error = 0.0;  // ratio - target
};

// All tooth-count pairs whose ratio lands within tolerance*target, ordered by
// |error| (ties by sun then ring). Exhaustive within the bounds.
inline std::vector<StageCandidate> synthesize_tooth_counts(double target_ratio, double tolerance,
                                                           const SynthesisConstraints& c) {
    std::vector<StageCandidate> out;
    for (int sun = std::max(12, c.sun_min); sun <= c.sun_max; ++sun) {
        for (int ring = sun + 1; ring <= c.ring_max; ++ring) {
            if ((sun + ring) % c.planet_count != 0) continue;
            PlanetaryStage s{sun, ring, c.planet_count, c.arrangement, c.mesh_efficiency};
            const double ratio = planetary_ratio(s);
            const double err = ratio - target_ratio;
            if (std::abs(err) <= tolerance * std::abs(target_ratio))
                out.push_back({s, ratio, err});
        }
    }
    if (out.empty()) throw NoSolution("no tooth counts reach the target ratio within bounds");
    std::sort(out.begin(), out.end(), [](const StageCandidate& a, const StageCandidate& b) {
        return std::tuple(std::abs(a.error), a.stage.sun_teeth, a.stage.ring_teeth) <
               std::tuple(std::abs(b.error), b.stage.sun_teeth, b.stage.ring_teeth);
    });
    return out;
}

struct RangeBoxCandidate {
    PlanetaryStage stage1;
    PlanetaryStage stage2_range_a;
    PlanetaryStage stage2_range_b;
    double ratio_a = 0.0;
    double ratio_b = 0.0;
    double max_rel_error = 0.0;
};

// Shared-stage1 search: stage1 * stage2_a must hit target_a and
// stage1 * stage2_b target_b, both within the relative tolerance.
inline std::vector<RangeBoxCandidate> synthesize_rangebox(double target_a, double target_b,
                                                          double tolerance,
                                                          const SynthesisConstraints& stage1_c,
                                                          const SynthesisConstraints& stage2_c) {
    auto enumerate = [](const SynthesisConstraints& c) {
        std::vector<PlanetaryStage> stages;
        for (int sun = std::max(12, c.sun_min); sun <= c.sun_max; ++sun)
            for (int ring = sun + 1; ring <= c.ring_max; ++ring)
                if ((sun + ring) % c.planet_count == 0)
                    stages.push_back({sun, ring, c.planet_count, c.arrangement, c.mesh_efficiency});
        return stages;
    };
    const auto firsts = enumerate(stage1_c);
    const auto seconds = enumerate(stage2_c);

    std::vector<RangeBoxCandidate> out;
    for (const auto& s1 : firsts) {
        const double r1 = planetary_ratio(s1);
        std::vector<std::pair<const PlanetaryStage*, double>> hits_a, hits_b;
        for (const auto& s2 : seconds) {
            const double r = r1 * planetary_ratio(s2);
            if (std::abs(r - target_a) <= tolerance * target_a) hits_a.push_back({&s2, r});
            if (std::abs(r - target_b) <= tolerance * target_b) hits_b.push_back({&s2, r});
        }
        for (const auto& [sa, ra] : hits_a)
            for (const auto& [sb, rb] : hits_b) {
                RangeBoxCandidate cand{s1, *sa, *sb, ra, rb, 0.0};
                cand.max_rel_error = std::max(std::abs(ra - target_a) / target_a,
                                              std::abs(rb - target_b) / target_b);
                out.push_back(cand);
            }
    }
    if (out.empty()) throw NoSolution("no shared-stage1 configuration reaches both targets");
    std::sort(out.begin(), out.end(), [](const RangeBoxCandidate& a, const RangeBoxCandidate& b) {
        auto key = [](const RangeBoxCandidate& x) {
            return std::tuple(x.max_rel_error, x.stage1.sun_teeth, x.stage1.ring_teeth,
                              x.stage2_range_a.sun_teeth, x.stage2_range_a.ring_teeth,
                              x.stage2_range_b.sun_teeth, x.stage2_range_b.ring_teeth);
        };
        return key(a) < key(b);
    });
    return out;
}

inline std::string candidates_to_csv(const std::vector<StageCandidate>& cands) {
    std::ostringstream os;
    os << "sun,ring,planets,ratio,error\n";
    char buf[96];
    for (const auto& c : cands) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.17g,%.17g\n", c.stage.sun_teeth,
                      c.stage.ring_teeth, c.stage.planet_count, c.ratio, c.error);
        os << buf;
    }
    return os.str();
}

}  // namespace agridrive
