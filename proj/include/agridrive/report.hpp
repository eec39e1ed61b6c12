#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "agridrive/powertrain.hpp"
#include "agridrive/simulator.hpp"
#include "agridrive/transmission.hpp"

namespace agridrive {

// ---------------------------------------------------------------------------
// Published reference constants for the electric-vs-hydrostatic axle drive
// comparison (2016 study, 100 units/year assumed). Report data only; never
// used by the physics.

struct CostReference {
    double electric_axle_cost_keur = 29.5;
    double hydrostatic_axle_cost_keur = 6.5;
    double hydrostatic_weight_per_power_kg_kw = 18.2;
    double electric_weight_per_power_kg_kw = 36.3;
};

// ---------------------------------------------------------------------------
// Qualitative concept comparison, scores 1-5 (5 best).

struct ComparisonRow {
    std::string criterion;
    int wheel_module = 0;
    int axle_module = 0;
};

struct ComparisonMatrix {
    std::vector<ComparisonRow> rows;
};

inline ComparisonMatrix comparison_matrix() {
    ComparisonMatrix m;
    m.rows = {
        {"Freedom for vehicle design", 5, 3},
        {"Scalability", 5, 4},
        {"Manufacturing costs", 3, 4},
        {"Cooling", 3, 4},
        {"Steerability", 5, 4},
        {"Realization of reduction", 4, 5},
        {"Power electronics costs", 3, 5},
        {"Electric motor costs", 3, 5},
        {"Change/repair of the unit", 5, 3},
        {"Controllability (degrees of freedom)", 5, 3},
        {"Replacement of conventional axles", 2, 4},
    };
    return m;
}

inline std::string comparison_matrix_csv(const ComparisonMatrix& m) {
    std::string out = "criterion,wheel_module,axle_module\n";
    for (const auto& r : m.rows)
        out += r.criterion + "," + std::to_string(r.wheel_module) + "," + std::to_string(r.axle_module) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Sizing.

struct SizingInputs {
    double ground_power_w = 200e3;
    double rolling_radius_m = 0.78;
    double motor_nominal_rpm = 6000.0;
    double field_speed_kmh = 12.0;
    double road_speed_kmh = 40.0;
    double min_field_speed_kmh = 3.0;
    bool road_capable = true;  // field robots carried to the field need no road range
    double synthesis_tolerance = 0.05;
    SynthesisConstraints stage1_bounds{15, 30, 120, 3, Arrangement::SunInCarrierOutRingFixed, 0.985};
    SynthesisConstraints stage2_bounds{12, 20, 300, 3, Arrangement::SunInCarrierOutRingFixed, 0.985};
    VehicleGeometry geometry;
    double side_slope_deg = 10.0;
    DutyProfile duty_profile = DutyProfile::ForageHarvester;
};

struct SizingReport {
    SizingInputs inputs;
    double field_wheel_rpm = 0.0;
    double road_wheel_rpm = 0.0;
    double field_reduction = 0.0;
    double road_reduction = 0.0;
    double range_spread = 0.0;
    double overall_speed_spread = 0.0;
    bool single_range_sufficient = false;
    std::vector<RangeBoxCandidate> rangebox_candidates;
    MotorSizing wheel_sizing;
    MotorSizing axle_sizing;
    CostReference cost_reference;
};

inline SizingReport make_sizing_report(const SizingInputs& in) {
    SizingReport rep;
    rep.inputs = in;
    rep.field_wheel_rpm = wheel_rpm(in.field_speed_kmh, in.rolling_radius_m);
    rep.field_reduction = required_reduction(in.motor_nominal_rpm, rep.field_wheel_rpm);
    if (in.road_capable) {
        rep.road_wheel_rpm = wheel_rpm(in.road_speed_kmh, in.rolling_radius_m);
        rep.road_reduction = required_reduction(in.motor_nominal_rpm, rep.road_wheel_rpm);
        const std::array<double, 2> reductions{rep.field_reduction, rep.road_reduction};
        rep.range_spread = range_spread(reductions);
        rep.overall_speed_spread = speed_ratio_spread(in.min_field_speed_kmh, in.road_speed_kmh);
    } else {
        rep.range_spread = 1.0;
        rep.overall_speed_spread = speed_ratio_spread(in.min_field_speed_kmh, in.field_speed_kmh);
    }
    rep.single_range_sufficient = rep.overall_speed_spread <= 8.0;

    if (in.road_capable) {
        try {
            rep.rangebox_candidates = synthesize_rangebox(rep.road_reduction, rep.field_reduction,
                                                          in.synthesis_tolerance, in.stage1_bounds,
                                                          in.stage2_bounds);
            if (rep.rangebox_candidates.size() > 10) rep.rangebox_candidates.resize(10);
        } catch (const NoSolution&) {
            // reported as empty; wider bounds are a CLI flag away
        }
    }

    const auto duty = make_duty_cycle(in.duty_profile, in.ground_power_w / 0.3, 1.0, 0);
    WorstCase worst;
    worst.side_slope_rad = deg_to_rad(in.side_slope_deg);
    rep.wheel_sizing = size_motors(DriveConcept::WheelModule, in.geometry, duty, worst, in.rolling_radius_m);
    rep.axle_sizing = size_motors(DriveConcept::AxleModule, in.geometry, duty, worst, in.rolling_radius_m);
    return rep;
}

inline std::string sizing_report_text(const SizingReport& r) {
    std::ostringstream os;
    char buf[256];
    os << "driveline sizing report\n";
    os << "=======================\n";
    std::snprintf(buf, sizeof(buf),
                  "ground power %.0f kW, rolling radius %.2f m, motor nominal %.0f rpm\n",
                  r.inputs.ground_power_w / 1e3, r.inputs.rolling_radius_m, r.inputs.motor_nominal_rpm);
    os << buf;
    std::snprintf(buf, sizeof(buf), "wheel speed at %.0f km/h field: %.1f rpm\n",
                  r.inputs.field_speed_kmh, r.field_wheel_rpm);
    os << buf;
    if (r.inputs.road_capable) {
        std::snprintf(buf, sizeof(buf), "wheel speed at %.0f km/h road:  %.1f rpm\n",
                      r.inputs.road_speed_kmh, r.road_wheel_rpm);
        os << buf;
        std::snprintf(buf, sizeof(buf), "required reductions: field %.1f, road %.1f (spread %.2f)\n",
                      r.field_reduction, r.road_reduction, r.range_spread);
        os << buf;
    } else {
        std::snprintf(buf, sizeof(buf), "required reduction: field %.1f (no road mode)\n",
                      r.field_reduction);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "overall speed spread %.1f : %s\n", r.overall_speed_spread,
                  r.single_range_sufficient ? "a single fixed reduction may be sufficient"
                                            : "two ranges recommended");
    os << buf;

    if (!r.rangebox_candidates.empty()) {
        os << "\nshared-stage1 gearbox candidates (sun/ring teeth):\n";
        os << "  stage1      range-road    range-field   ratios\n";
        for (const auto& c : r.rangebox_candidates) {
            std::snprintf(buf, sizeof(buf), "  %2d/%-3d      %2d/%-3d        %2d/%-3d        %.1f / %.1f\n",
                          c.stage1.sun_teeth, c.stage1.ring_teeth, c.stage2_range_a.sun_teeth,
                          c.stage2_range_a.ring_teeth, c.stage2_range_b.sun_teeth,
                          c.stage2_range_b.ring_teeth, c.ratio_a, c.ratio_b);
            os << buf;
        }
    }

    os << "\nmotor dimensioning (duty peak, worst case side slope "
       << static_cast<int>(r.inputs.side_slope_deg) << " deg):\n";
    std::snprintf(buf, sizeof(buf), "  axle module:  %.0f Nm per axle (%.0f kW), slope-independent\n",
                  r.axle_sizing.per_motor_wheel_torque_nm, r.axle_sizing.per_motor_power_w / 1e3);
    os << buf;
    std::snprintf(buf, sizeof(buf),
                  "  wheel module: %.0f Nm per wheel (%.0f kW), overdimensioning factor %.3f\n",
                  r.wheel_sizing.per_motor_wheel_torque_nm, r.wheel_sizing.per_motor_power_w / 1e3,
                  r.wheel_sizing.overdimensioning_factor);
    os << buf;

    os << "\nreference axle-drive comparison data (2016, 100 units/year):\n";
    std::snprintf(buf, sizeof(buf), "  cost: electric %.1f kEUR vs hydrostatic %.1f kEUR\n",
                  r.cost_reference.electric_axle_cost_keur, r.cost_reference.hydrostatic_axle_cost_keur);
    os << buf;
    std::snprintf(buf, sizeof(buf), "  weight-to-power: %.1f -> %.1f kg/kW\n",
                  r.cost_reference.hydrostatic_weight_per_power_kg_kw,
                  r.cost_reference.electric_weight_per_power_kg_kw);
    os << buf;
    return os.str();
}

// ---------------------------------------------------------------------------
// Calibration report: how the shipped (or configured) electric and
// hydrostatic maps compare at the measured anchor point and over the field
// cycle. The default maps are fitted to reproduce these published deltas and
// are documented as calibrated, not predicted.

inline std::string calibration_report_text(const CalibrationReport& r) {
    std::ostringstream os;
    char buf[200];
    os << "electric vs hydrostatic drive calibration (calibrated targets, not predictions):\n";
    std::snprintf(buf, sizeof(buf),
                  "  anchor (5 km/h, 4.5 kNm wheel): electric %.3f, hydrostatic %.3f, delta %+.1f pp\n",
                  r.anchor_electric, r.anchor_hydrostatic, 100.0 * r.anchor_delta);
    os << buf;
    std::snprintf(buf, sizeof(buf),
                  "  field-cycle weighted:           electric %.3f, hydrostatic %.3f, delta %+.1f pp\n",
                  r.cycle_electric, r.cycle_hydrostatic, 100.0 * r.cycle_delta);
    os << buf;
    return os.str();
}

// ---------------------------------------------------------------------------
// Metrics formatting.

inline std::string metrics_kv(const MetricsReport& m) {
    std::ostringstream os;
    char buf[128];
    auto put = [&](const char* key, double v) {
        std::snprintf(buf, sizeof(buf), "%s=%.17g\n", key, v);
        os << buf;
    };
    put("total_energy_wh", m.total_energy_wh);
    put("driveline_efficiency", m.driveline_efficiency);
    put("field_target_fraction", m.field_target_fraction);
    put("peak_motor_torque_nm", m.peak_motor_torque_nm);
    put("min_turning_radius_m", m.min_turning_radius_m);
    put("final_speed_mps", m.final_speed_mps);
    put("max_speed_mps", m.max_speed_mps);
    os << "fault_event_count=" << m.fault_event_count << "\n";
    os << "seed=" << m.seed << "\n";
    return os.str();
}

inline std::string metrics_text(const MetricsReport& m, const std::string& scenario_name) {
    std::ostringstream os;
    char buf[160];
    os << "scenario: " << scenario_name << " (seed " << m.seed << ")\n";
    std::snprintf(buf, sizeof(buf), "  source energy        %.1f Wh\n", m.total_energy_wh);
    os << buf;
    std::snprintf(buf, sizeof(buf), "  driveline efficiency %.3f\n", m.driveline_efficiency);
    os << buf;
    std::snprintf(buf, sizeof(buf), "  field target met     %.1f %% of field-speed time\n",
                  100.0 * m.field_target_fraction);
    os << buf;
    std::snprintf(buf, sizeof(buf), "  peak motor torque    %.0f Nm\n", m.peak_motor_torque_nm);
    os << buf;
    if (std::isfinite(m.min_turning_radius_m)) {
        std::snprintf(buf, sizeof(buf), "  min turning radius   %.2f m\n", m.min_turning_radius_m);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "  final speed          %.2f km/h (max %.2f)\n",
                  mps_to_kmh(m.final_speed_mps), mps_to_kmh(m.max_speed_mps));
    os << buf;
    os << "  fault events         " << m.fault_event_count << "\n";
    return os.str();
}

// Quantitative companion to the qualitative matrix.
struct ScenarioComparison {
    std::string scenario_name;
    MetricsReport wheel;
    MetricsReport axle;
    LimpResult wheel_limp;
    LimpResult axle_limp;
    bool has_limp = false;
};

inline std::string compare_report_text(const ComparisonMatrix& matrix,
                                       const std::vector<ScenarioComparison>& scenarios) {
    std::ostringstream os;
    os << "concept comparison (scores 1-5, 5 best)\n";
    os << "----------------------------------------\n";
    for (const auto& r : matrix.rows) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-40s wheel %d   axle %d\n", r.criterion.c_str(), r.wheel_module,
                      r.axle_module);
        os << buf;
    }
    for (const auto& s : scenarios) {
        os << "\nscenario " << s.scenario_name << ":\n";
        char buf[200];
        std::snprintf(buf, sizeof(buf),
                      "  energy Wh: wheel %.1f, axle %.1f | min radius m: wheel %.2f, axle %.2f\n",
                      s.wheel.total_energy_wh, s.axle.total_energy_wh, s.wheel.min_turning_radius_m,
                      s.axle.min_turning_radius_m);
        os << buf;
        std::snprintf(buf, sizeof(buf), "  final speed km/h: wheel %.2f, axle %.2f | faults: %d vs %d\n",
                      mps_to_kmh(s.wheel.final_speed_mps), mps_to_kmh(s.axle.final_speed_mps),
                      s.wheel.fault_event_count, s.axle.fault_event_count);
        os << buf;
        if (s.has_limp) {
            std::snprintf(buf, sizeof(buf), "  limp-home: wheel %s, axle %s\n",
                          s.wheel_limp.feasible ? "feasible" : "infeasible",
                          s.axle_limp.feasible ? "feasible" : "infeasible");
            os << buf;
        }
    }
    return os.str();
}

}  // namespace agridrive
