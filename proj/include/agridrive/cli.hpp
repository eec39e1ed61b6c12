#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "agridrive/config.hpp"
#include "agridrive/report.hpp"
#include "agridrive/simulator.hpp"

namespace agridrive {

namespace cli_detail {

inline std::string locate_config(const std::string& path) {
    namespace fs = std::filesystem;
    if (fs::exists(path)) return path;
    if (const char* search = std::getenv("AGRIDRIVE_CONFIG_PATH")) {
        const fs::path candidate = fs::path(search) / path;
        if (fs::exists(candidate)) return candidate.string();
    }
    throw IoError("config file not found: " + path);
}

inline void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + target.parent_path().string());
    }
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot write " + tmp.string());
        f << content;
        if (!f) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " to " + path);
}

inline std::string trace_csv_text(const SimTrace& trace) {
    std::ostringstream os;
    csv::write_table(os, trace.to_table());
    return os.str();
}

struct SimOutputs {
    SimResult result;
    std::string out_dir;
};

inline void write_sim_outputs(const SimOutputs& so, const VehicleConfig& vehicle,
                              const Scenario& scenario) {
    namespace fs = std::filesystem;
    const fs::path dir(so.out_dir);
    write_file_atomic((dir / "trace.csv").string(), trace_csv_text(so.result.trace));
    write_file_atomic((dir / "events.csv").string(), events_to_csv(so.result.events));
    write_file_atomic((dir / "frames.csv").string(), frames_to_csv(so.result.frames));
    write_file_atomic((dir / "metrics.kv").string(), metrics_kv(so.result.metrics));
    std::string report = "vehicle:  " + vehicle.name + "\n" +
                         metrics_text(so.result.metrics, scenario.name);
    write_file_atomic((dir / "report.txt").string(), report);
}

}  // namespace cli_detail

// Command-line front end. Thin composition of library calls: parsing, runs
// and report formatting all live in the library so that a library-only
// caller reproduces the CLI byte for byte.
// Exit codes: 0 ok, 1 validation error, 2 runtime fault (--strict), 3 I/O.
inline int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"modular electric driveline design and simulation toolkit"};
    app.require_subcommand(1);

    // --- size ---------------------------------------------------------------
    auto* size = app.add_subcommand("size", "driveline sizing report for a ground drive");
    SizingInputs si;
    double size_power_kw = 200.0;
    std::string size_out;
    std::string size_config;
    size->add_option("--config", size_config, "vehicle config supplying geometry, motor and baseline");
    size->add_option("--ground-power-kw", size_power_kw, "ground drive power in kW");
    size->add_option("--rolling-radius-m", si.rolling_radius_m, "tire rolling radius in m");
    size->add_option("--motor-rpm", si.motor_nominal_rpm, "motor nominal speed in rpm");
    size->add_option("--field-speed-kmh", si.field_speed_kmh, "max field speed");
    size->add_option("--road-speed-kmh", si.road_speed_kmh, "max road speed");
    size->add_option("--min-field-speed-kmh", si.min_field_speed_kmh, "min working speed");
    size->add_flag("--field-robot", "no road mode: size for field speeds only");
    size->add_option("--tolerance", si.synthesis_tolerance, "ratio tolerance for tooth search");
    size->add_option("--side-slope-deg", si.side_slope_deg, "worst-case side slope");
    std::string size_profile = "forage";
    size->add_option("--duty-profile", size_profile,
                     "sizing duty: forage, combine, root_crop, equipment_carrier, field_robot");
    size->add_option("--out", size_out, "directory for report.txt and tooth candidate CSVs");

    // --- simulate -----------------------------------------------------------
    auto* simulate = app.add_subcommand("simulate", "run a scenario and export trace + metrics");
    std::string sim_config;
    std::string sim_out = "out";
    bool strict = false;
    simulate->add_option("--config", sim_config, "config file with vehicle and scenario")->required();
    simulate->add_option("--out-dir", sim_out, "output directory");
    simulate->add_flag("--strict", strict, "exit nonzero if any fault event occurred");

    // --- compare ------------------------------------------------------------
    auto* compare = app.add_subcommand("compare", "wheel vs axle module concept comparison");
    std::string cmp_wheel;
    std::string cmp_axle;
    std::vector<std::string> cmp_scenarios;
    std::string cmp_out = "out";
    compare->add_option("--wheel", cmp_wheel, "wheel-module vehicle config")->required();
    compare->add_option("--axle", cmp_axle, "axle-module vehicle config")->required();
    compare->add_option("--scenario", cmp_scenarios, "scenario file (repeatable)");
    compare->add_option("--out-dir", cmp_out, "output directory");

    // --- spectrum -----------------------------------------------------------
    auto* spectrum = app.add_subcommand("spectrum", "generate a load spectrum and exceedance curve");
    LoadSpectrumSpec spec;
    std::size_t spectrum_n = 1000000;
    std::string spec_out = "out";
    double seed_opt = 0.0;
    spectrum->add_option("--n", spectrum_n, "number of samples");
    spectrum->add_option("--band-low", spec.typical_low, "typical band lower edge");
    spectrum->add_option("--band-high", spec.typical_high, "typical band upper edge");
    spectrum->add_option("--peak-max", spec.peak_max, "maximum rare-event load");
    spectrum->add_option("--peak-fraction", spec.peak_time_fraction, "time fraction of the peak process");
    spectrum->add_option("--seed", seed_opt, "random seed");
    spectrum->add_option("--out-dir", spec_out, "output directory");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (size->parsed()) {
            si.ground_power_w = size_power_kw * 1e3;
            si.road_capable = size->count("--field-robot") == 0;
            if (size_profile == "forage") {
                si.duty_profile = DutyProfile::ForageHarvester;
            } else if (size_profile == "combine") {
                si.duty_profile = DutyProfile::Combine;
            } else if (size_profile == "root_crop") {
                si.duty_profile = DutyProfile::RootCrop;
            } else if (size_profile == "equipment_carrier") {
                si.duty_profile = DutyProfile::EquipmentCarrier;
            } else if (size_profile == "field_robot") {
                si.duty_profile = DutyProfile::FieldRobot;
            } else {
                throw ConfigError("--duty-profile", "unknown profile '" + size_profile + "'");
            }
            MotorSpec calib_motor = default_wheel_motor();
            HydrostaticBaseline calib_baseline;
            if (!size_config.empty()) {
                const auto parsed = parse_config(cli_detail::locate_config(size_config));
                if (parsed.vehicle) {
                    si.geometry = parsed.vehicle->geometry;
                    si.rolling_radius_m = parsed.vehicle->geometry.rolling_radius_m;
                    calib_motor = parsed.vehicle->modules.front().module.motor;
                    calib_baseline = parsed.vehicle->hydrostatic_baseline;
                }
            }
            const SizingReport rep = make_sizing_report(si);
            const DriveTrainRef ref{rep.field_reduction, si.rolling_radius_m};
            const auto calib =
                efficiency_calibration(calib_motor, calib_baseline, default_field_cycle(), ref);
            const std::string text = sizing_report_text(rep) + "\n" + calibration_report_text(calib);
            if (size_out.empty()) {
                std::cout << text;
            } else {
                namespace fs = std::filesystem;
                cli_detail::write_file_atomic((fs::path(size_out) / "report.txt").string(), text);
                // stage-2 tooth candidates per range, assuming the leading
                // high-speed stage of the best shared-stage1 configuration
                if (!rep.rangebox_candidates.empty()) {
                    const double stage1 = planetary_ratio(rep.rangebox_candidates.front().stage1);
                    struct Target {
                        const char* file;
                        double reduction;
                    } targets[] = {{"candidates_range_a.csv", rep.field_reduction},
                                   {"candidates_range_b.csv", rep.road_reduction}};
                    for (const auto& tgt : targets) {
                        try {
                            const auto cands = synthesize_tooth_counts(
                                tgt.reduction / stage1, si.synthesis_tolerance, si.stage2_bounds);
                            cli_detail::write_file_atomic((fs::path(size_out) / tgt.file).string(),
                                                          candidates_to_csv(cands));
                        } catch (const NoSolution&) {
                        }
                    }
                }
                std::cout << "wrote sizing report to " << size_out << "\n";
            }
            return 0;
        }

        if (simulate->parsed()) {
            const auto parsed = parse_config(cli_detail::locate_config(sim_config));
            if (!parsed.vehicle || !parsed.scenario)
                throw ConfigError("(root)", "simulate needs both a vehicle and a scenario section");
            const auto result = run_scenario(*parsed.vehicle, *parsed.scenario);
            cli_detail::write_sim_outputs({result, sim_out}, *parsed.vehicle, *parsed.scenario);
            std::cout << metrics_text(result.metrics, parsed.scenario->name);
            std::cout << "outputs in " << sim_out << " (seed " << parsed.scenario->seed << ")\n";
            if (strict && !result.events.empty()) {
                std::cerr << "fault events occurred:\n" << events_to_csv(result.events);
                return 2;
            }
            return 0;
        }

        if (compare->parsed()) {
            const auto wheel_cfg = parse_config(cli_detail::locate_config(cmp_wheel));
            const auto axle_cfg = parse_config(cli_detail::locate_config(cmp_axle));
            if (!wheel_cfg.vehicle || !axle_cfg.vehicle)
                throw ConfigError("(root)", "compare needs vehicle sections in both configs");
            const auto matrix = comparison_matrix();
            std::vector<ScenarioComparison> rows;
            for (const auto& spath : cmp_scenarios) {
                const auto sparsed = parse_config(cli_detail::locate_config(spath));
                if (!sparsed.scenario)
                    throw ConfigError("(root)", "scenario file lacks a scenario section: " + spath);
                const Scenario& sc = *sparsed.scenario;
                ScenarioComparison row;
                row.scenario_name = sc.name;
                row.wheel = run_scenario(*wheel_cfg.vehicle, sc).metrics;
                row.axle = run_scenario(*axle_cfg.vehicle, sc).metrics;
                if (!sc.faults.empty()) {
                    row.has_limp = true;
                    std::set<int> failed;
                    for (const auto& f : sc.faults)
                        if (f.kind == FaultKind::TotalLoss) failed.insert(f.module_id);
                    LimpScenario limp;
                    for (const auto& p : sc.terrain) {
                        limp.longitudinal_slope_rad =
                            std::max(limp.longitudinal_slope_rad, p.longitudinal_slope_rad);
                        limp.side_slope_rad = std::max(limp.side_slope_rad, p.side_slope_rad);
                    }
                    for (const auto& m : sc.maneuvers)
                        if (m.kind == ManeuverKind::SetSpeed)
                            limp.target_speed_kmh = std::max(limp.target_speed_kmh, m.value);
                    row.wheel_limp = limp_home_check(*wheel_cfg.vehicle, failed, limp);
                    row.axle_limp = limp_home_check(*axle_cfg.vehicle, failed, limp);
                }
                rows.push_back(row);
            }
            namespace fs = std::filesystem;
            cli_detail::write_file_atomic((fs::path(cmp_out) / "comparison.csv").string(),
                                          comparison_matrix_csv(matrix));
            const std::string text = compare_report_text(matrix, rows);
            cli_detail::write_file_atomic((fs::path(cmp_out) / "comparison.txt").string(), text);
            std::cout << text;
            return 0;
        }

        if (spectrum->parsed()) {
            spec.seed = static_cast<std::uint64_t>(seed_opt);
            const auto samples = sample_load_spectrum(spec, spectrum_n);
            const auto curve = exceedance_curve(samples);
            std::string samples_csv = "load\n";
            for (double x : samples) samples_csv += csv::format(x) + "\n";
            std::string curve_csv = "load,fraction_exceeding\n";
            for (const auto& p : curve)
                curve_csv += csv::format(p.load) + "," + csv::format(p.fraction_exceeding) + "\n";
            namespace fs = std::filesystem;
            cli_detail::write_file_atomic((fs::path(spec_out) / "samples.csv").string(), samples_csv);
            cli_detail::write_file_atomic((fs::path(spec_out) / "exceedance.csv").string(), curve_csv);
            std::cout << "wrote " << spectrum_n << " samples (seed " << spec.seed << ") to " << spec_out
                      << "\n";
            return 0;
        }
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

inline int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args);
}

}  // namespace agridrive
