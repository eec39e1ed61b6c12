#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "agridrive/errors.hpp"
#include "agridrive/rng.hpp"

namespace agridrive {

// ---------------------------------------------------------------------------
// Load spectra: mixture of a typical working band and a rare peak tail.

struct LoadSpectrumSpec {
    double typical_low = 50.0;
    double typical_high = 200.0;
    double peak_max = 450.0;
    double peak_time_fraction = 0.001;
    // Typical band: normal centered in the band, truncated to it.
    double typical_mean = 125.0;
    double typical_sd = 37.5;
    // Peak tail: exponential decay above the band edge, truncated at peak_max.
    double peak_scale = 60.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(typical_low < typical_high && typical_high < peak_max))
            throw ConfigError("spectrum", "need typical_low < typical_high < peak_max");
        if (peak_time_fraction < 0.0 || peak_time_fraction > 0.001)
            throw ConfigError("spectrum.peak_time_fraction", "must lie in [0, 0.001]");
        if (typical_sd <= 0.0 || peak_scale <= 0.0)
            throw ConfigError("spectrum", "distribution scales must be > 0");
    }
};

// Draws n loads from the two-process mixture. Reproducible bit-for-bit for a
// fixed (spec, n): the stream consumes one Bernoulli draw per sample plus the
// draws of the selected process.
inline std::vector<double> sample_load_spectrum(const LoadSpectrumSpec& spec, std::size_t n) {
    spec.validate();
    if (n == 0) throw Error("sample_load_spectrum: n must be > 0");
    Rng rng(spec.seed);
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (rng.bernoulli(spec.peak_time_fraction)) {
            out.push_back(rng.truncated_exponential(spec.typical_high, spec.peak_max, spec.peak_scale));
        } else {
            out.push_back(
                rng.truncated_gaussian(spec.typical_mean, spec.typical_sd, spec.typical_low, spec.typical_high));
        }
    }
    return out;
}

struct ExceedancePoint {
    double load = 0.0;
    double fraction_exceeding = 0.0;  // fraction of samples >= load
};

// Descending survival curve over the distinct sample values;
// fraction(min) == 1 by convention.
inline std::vector<ExceedancePoint> exceedance_curve(std::vector<double> samples) {
    if (samples.empty()) throw Error("exceedance_curve: no samples");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    std::vector<ExceedancePoint> curve;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (i > 0 && samples[i] == samples[i - 1]) continue;
        curve.push_back({samples[i], (n - static_cast<double>(i)) / n});
    }
    return curve;
}

inline double fraction_exceeding(const std::vector<ExceedancePoint>& curve, double load) {
    // Largest tabulated load <= `load` bounds the survival fraction from above;
    // between points the curve is a step function.
    double f = 1.0;
    for (const auto& p : curve) {
        if (p.load > load) break;
        f = p.fraction_exceeding;
        if (p.load == load) return f;
    }
    // strictly above the last tabulated point that is <= load
    for (const auto& p : curve)
        if (p.load > load) return p.fraction_exceeding;
    return 0.0;
}

// ---------------------------------------------------------------------------
// Duty cycles.

enum class Direction { Forward, Reverse };

struct DutySegment {
    double duration_s = 0.0;
    double speed_kmh = 0.0;
    double wheel_torque_nm = 0.0;  // per wheel
    Direction direction = Direction::Forward;
};

struct DutyCycle {
    std::vector<DutySegment> segments;

    double total_duration_s() const {
        double t = 0.0;
        for (const auto& s : segments) t += s.duration_s;
        return t;
    }
    double reverse_fraction() const {
        double rev = 0.0;
        for (const auto& s : segments)
            if (s.direction == Direction::Reverse) rev += s.duration_s;
        const double total = total_duration_s();
        return total > 0.0 ? rev / total : 0.0;
    }
};

enum class DutyProfile { ForageHarvester, Combine, RootCrop, EquipmentCarrier, FieldRobot };

struct DutyProfileParams {
    double field_speed_min_kmh;
    double field_speed_max_kmh;
    double ground_fraction_at_vmax;  // ground power / engine power at the profile's top field speed
    double reverse_time_fraction;
    double mean_fraction_low;   // acceptance band for the cycle-mean ground power share
    double mean_fraction_high;
};

inline DutyProfileParams duty_profile_params(DutyProfile p) {
    switch (p) {
        case DutyProfile::ForageHarvester: return {3.0, 8.0, 0.10, 0.13, 0.03, 0.15};
        case DutyProfile::Combine: return {3.0, 8.0, 0.25, 0.05, 0.10, 0.30};
        case DutyProfile::RootCrop: return {4.0, 7.0, 0.30, 0.05, 0.12, 0.35};
        case DutyProfile::EquipmentCarrier: return {4.0, 12.0, 0.35, 0.03, 0.15, 0.40};
        default: return {1.0, 8.0, 0.30, 0.05, 0.10, 0.35};  // FieldRobot, speed spread 8
    }
}

// Synthesizes a working cycle as repeated passes: four loaded forward
// sub-segments at the pass speed followed by a reversing shunt. The tractive
// force scales with a per-segment crop/load factor around the profile's
// nominal pull, so torque levels spread across partial load. The first pass
// runs at the top field speed with factor 1 to pin the nominal operating
// point. Torques assume a 0.78 m rolling radius and four driven wheels.
inline DutyCycle make_duty_cycle(DutyProfile profile, double engine_power_w, double hours,
                                 std::uint64_t seed) {
    if (engine_power_w <= 0.0) throw Error("make_duty_cycle: engine power must be > 0");
    if (hours <= 0.0) throw Error("make_duty_cycle: hours must be > 0");
    const DutyProfileParams p = duty_profile_params(profile);
    const double rolling_radius = 0.78;

    // Constant-force pull whose power reaches the nominal fraction at vmax.
    const double nominal_force_n = p.ground_fraction_at_vmax * engine_power_w * 3.6 / p.field_speed_max_kmh;

    const double forward_block_s = 240.0;
    const int subsegments = 4;
    const double pass_s = forward_block_s / subsegments;
    // Reverse share r of one pattern: rev / (fwd + rev) = reverse_time_fraction.
    const double reverse_s = forward_block_s * p.reverse_time_fraction / (1.0 - p.reverse_time_fraction);
    const double pattern_s = forward_block_s + reverse_s;

    const double total_s = hours * 3600.0;
    const int passes = std::max(1, static_cast<int>(total_s / pattern_s));
    const double time_scale = total_s / (passes * pattern_s);

    Rng rng(seed);
    DutyCycle duty;
    for (int pass = 0; pass < passes; ++pass) {
        const double speed =
            (pass == 0) ? p.field_speed_max_kmh : rng.uniform(p.field_speed_min_kmh, p.field_speed_max_kmh);
        for (int k = 0; k < subsegments; ++k) {
            const double load_factor = (pass == 0 && k == 0) ? 1.0 : rng.uniform(0.5, 1.2);
            DutySegment seg;
            seg.duration_s = pass_s * time_scale;
            seg.speed_kmh = speed;
            seg.wheel_torque_nm = load_factor * nominal_force_n * rolling_radius / 4.0;
            seg.direction = Direction::Forward;
            duty.segments.push_back(seg);
        }
        DutySegment rev;
        rev.duration_s = reverse_s * time_scale;
        rev.speed_kmh = 2.5;
        rev.wheel_torque_nm = 0.35 * nominal_force_n * rolling_radius / 4.0;
        rev.direction = Direction::Reverse;
        duty.segments.push_back(rev);
    }
    return duty;
}

// Mean ground power as a fraction of engine power, with the same rolling
// radius convention as make_duty_cycle.
inline double mean_ground_power_fraction(const DutyCycle& duty, double engine_power_w,
                                         double rolling_radius_m = 0.78) {
    double energy = 0.0;
    double time = 0.0;
    for (const auto& s : duty.segments) {
        const double omega = s.speed_kmh / 3.6 / rolling_radius_m;
        energy += 4.0 * s.wheel_torque_nm * omega * s.duration_s;
        time += s.duration_s;
    }
    return time > 0.0 ? energy / (time * engine_power_w) : 0.0;
}

// ---------------------------------------------------------------------------
// Efficiency targets.

enum class TargetLabel { ReniusTractor, BernhardHarvester, Custom };

struct TargetKnot {
    double speed_kmh = 0.0;
    double eta = 0.0;
};

struct EfficiencyTarget {
    std::vector<TargetKnot> knots;  // sorted by speed
    double focus_low_kmh = 0.0;
    double focus_high_kmh = 0.0;
    TargetLabel label = TargetLabel::Custom;

    void validate() const {
        if (knots.size() < 2) throw ConfigError("target.knots", "need at least two knots");
        for (std::size_t i = 0; i < knots.size(); ++i) {
            if (!(knots[i].eta > 0.0 && knots[i].eta < 1.0))
                throw ConfigError("target.knots", "eta must lie in (0,1)");
            if (i > 0 && knots[i].speed_kmh <= knots[i - 1].speed_kmh)
                throw ConfigError("target.knots", "knots must be sorted by speed");
        }
    }
};

// Illustrative full-load target curve for tractor CVTs. The knot values are a
// plausible rendering of the published figure, not digitized data; real
// curves belong in the scenario config. Only the focus range and the -10 pp
// harvester offset below are anchored facts.
inline EfficiencyTarget default_renius_target() {
    EfficiencyTarget t;
    t.knots = {{1.0, 0.74}, {3.0, 0.82}, {6.0, 0.88}, {9.0, 0.90},
               {12.0, 0.90}, {20.0, 0.88}, {30.0, 0.86}, {40.0, 0.85}};
    t.focus_low_kmh = 6.0;
    t.focus_high_kmh = 12.0;
    t.label = TargetLabel::ReniusTractor;
    return t;
}

// Piecewise-linear interpolation; speeds outside the knot range clamp to the
// end values.
inline double target_eta(const EfficiencyTarget& t, double speed_kmh) {
    t.validate();
    if (speed_kmh <= t.knots.front().speed_kmh) return t.knots.front().eta;
    if (speed_kmh >= t.knots.back().speed_kmh) return t.knots.back().eta;
    for (std::size_t i = 1; i < t.knots.size(); ++i) {
        if (speed_kmh <= t.knots[i].speed_kmh) {
            const auto& a = t.knots[i - 1];
            const auto& b = t.knots[i];
            const double u = (speed_kmh - a.speed_kmh) / (b.speed_kmh - a.speed_kmh);
            return a.eta + u * (b.eta - a.eta);
        }
    }
    return t.knots.back().eta;
}

// Harvester ground-drive target derived from the tractor curve: ten points
// lower at every knot, with the focus window moved from 6-12 km/h down to
// the 3-8 km/h harvester working range.
inline EfficiencyTarget bernhard_from_renius(const EfficiencyTarget& renius) {
    EfficiencyTarget out = renius;
    for (auto& k : out.knots) k.eta -= 0.10;
    out.focus_low_kmh = 3.0;
    out.focus_high_kmh = 8.0;
    out.label = TargetLabel::BernhardHarvester;
    out.validate();
    return out;
}

// ---------------------------------------------------------------------------
// Cycle-weighted efficiency.

// Output-energy-weighted mean of per-segment efficiency. The weight is
// |torque * speed| * duration, proportional to mechanical output energy for a
// fixed rolling radius, which makes the result invariant under segment
// reordering and splitting. `eval` maps a DutySegment to an efficiency in
// (0,1] and may throw OutOfEnvelope.
template <typename Eval>
double cycle_weighted_efficiency(const DutyCycle& duty, Eval&& eval) {
    if (duty.segments.empty()) throw Error("cycle_weighted_efficiency: empty duty cycle");
    double weighted = 0.0;
    double weight_sum = 0.0;
    for (std::size_t i = 0; i < duty.segments.size(); ++i) {
        const auto& seg = duty.segments[i];
        double eta;
        try {
            eta = eval(seg);
        } catch (const OutOfEnvelope& e) {
            throw OutOfEnvelope(std::string(e.what()) + " (segment " + std::to_string(i) + ")");
        }
        const double w = std::abs(seg.wheel_torque_nm * seg.speed_kmh) * seg.duration_s;
        weighted += w * eta;
        weight_sum += w;
    }
    if (weight_sum <= 0.0) throw Error("cycle_weighted_efficiency: cycle has no mechanical output");
    return weighted / weight_sum;
}

// ---------------------------------------------------------------------------
// CSV import/export (columns: duration_s, speed_kmh, torque_Nm, direction).

inline std::string duty_to_csv(const DutyCycle& duty) {
    std::ostringstream os;
    os << "duration_s,speed_kmh,torque_Nm,direction\n";
    char buf[96];
    for (const auto& s : duty.segments) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,", s.duration_s, s.speed_kmh,
                      s.wheel_torque_nm);
        os << buf << (s.direction == Direction::Forward ? "forward" : "reverse") << '\n';
    }
    return os.str();
}

inline DutyCycle duty_from_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("duty csv: empty input");
    DutyCycle duty;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        DutySegment seg;
        std::getline(ls, cell, ',');
        seg.duration_s = std::strtod(cell.c_str(), nullptr);
        std::getline(ls, cell, ',');
        seg.speed_kmh = std::strtod(cell.c_str(), nullptr);
        std::getline(ls, cell, ',');
        seg.wheel_torque_nm = std::strtod(cell.c_str(), nullptr);
        std::getline(ls, cell, ',');
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        if (cell == "forward") {
            seg.direction = Direction::Forward;
        } else if (cell == "reverse") {
            seg.direction = Direction::Reverse;
        } else {
            throw IoError("duty csv: bad direction '" + cell + "'");
        }
        if (seg.duration_s <= 0.0) throw IoError("duty csv: durations must be > 0");
        duty.segments.push_back(seg);
    }
    return duty;
}

}  // namespace agridrive
