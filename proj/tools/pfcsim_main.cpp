// pfcsim: scenario-driven power-factor-correction simulator.
//
// Subcommands: run, sweep, waveforms, size-bank. Output CSVs land in the
// directory named by PFC_OUT_DIR unless --out gives a path. Exit codes:
// 0 success, 2 configuration/validation failure, 3 runtime range error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "pfc/csv.hpp"
#include "pfc/scenario.hpp"
#include "pfc/simulation.hpp"

namespace fs = std::filesystem;

namespace {

fs::path resolve_out(const std::string& out_flag, const std::string& default_name) {
    if (!out_flag.empty()) return fs::path(out_flag);
    if (const char* dir = std::getenv("PFC_OUT_DIR")) return fs::path(dir) / default_name;
    return fs::path(default_name);
}

void write_file(const fs::path& path, const std::string& contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << contents;
}

pfc::ScenarioConfig base_scenario(const std::string& scenario_path, const std::string& mode) {
    pfc::ScenarioConfig cfg = scenario_path.empty()
                                  ? pfc::default_scenario()
                                  : pfc::load_scenario_file(scenario_path);
    if (mode == "lookup" || mode == "greedy") {
        const pfc::ControlMode wanted =
            mode == "lookup" ? pfc::ControlMode::kLookup : pfc::ControlMode::kGreedy;
        if (scenario_path.empty()) {
            cfg = pfc::default_scenario(wanted);
        } else {
            cfg.controller.mode = wanted;
        }
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PLC-style automatic power factor correction simulator"};
    app.require_subcommand(1);

    // run
    auto* run_cmd = app.add_subcommand("run", "Run a scenario file and log one record per scan");
    std::string run_scenario_path;
    std::string run_out;
    run_cmd->add_option("scenario", run_scenario_path, "Scenario file")->required();
    run_cmd->add_option("--out", run_out, "Output CSV path");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "Steady-state rows over a range of load currents");
    double sweep_from = 3.0, sweep_to = 7.0, sweep_step = 1.0;
    bool sweep_compensate = false;
    std::string sweep_mode, sweep_scenario_path, sweep_out;
    sweep_cmd->add_option("--from", sweep_from, "First load current (A)");
    sweep_cmd->add_option("--to", sweep_to, "Last load current (A)");
    sweep_cmd->add_option("--step", sweep_step, "Current step (A)");
    sweep_cmd->add_flag("--compensate,!--no-compensate", sweep_compensate,
                        "Close the loop and report steady-state records");
    sweep_cmd->add_option("--mode", sweep_mode, "Controller mode: lookup|greedy")
        ->check(CLI::IsMember({"lookup", "greedy"}));
    sweep_cmd->add_option("--scenario", sweep_scenario_path, "Scenario file for the setup");
    sweep_cmd->add_option("--out", sweep_out, "Output CSV path");

    // waveforms
    auto* wave_cmd = app.add_subcommand("waveforms", "Dump the measurement-chain waveforms");
    double wave_current = 4.0, wave_fs = 0.0;
    int wave_cycles = 5;
    bool wave_compensated = false;
    std::string wave_scenario_path, wave_out;
    wave_cmd->add_option("--current", wave_current, "Load current (A)")->required();
    wave_cmd->add_option("--fs", wave_fs, "Sample rate (Hz); default: scenario sample rate");
    wave_cmd->add_option("--cycles", wave_cycles, "Number of mains cycles");
    wave_cmd->add_flag("--compensated", wave_compensated, "Dump the corrected operating point");
    wave_cmd->add_option("--scenario", wave_scenario_path, "Scenario file for the setup");
    wave_cmd->add_option("--out", wave_out, "Output CSV path");

    // size-bank
    auto* size_cmd = app.add_subcommand("size-bank", "Print a binary-weighted bank sizing");
    double size_qmax = 0.0;
    int size_steps = 0;
    std::string size_connection = "star";
    double size_voltage = 400.0, size_frequency = 50.0;
    size_cmd->add_option("--qmax", size_qmax, "Total bank VAr")->required();
    size_cmd->add_option("--steps", size_steps, "Number of binary steps")->required();
    size_cmd->add_option("--connection", size_connection, "star|delta")
        ->check(CLI::IsMember({"star", "delta"}));
    size_cmd->add_option("--voltage", size_voltage, "Line voltage (V RMS)");
    size_cmd->add_option("--frequency", size_frequency, "Supply frequency (Hz)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    try {
        if (*run_cmd) {
            const pfc::ScenarioConfig cfg = pfc::load_scenario_file(run_scenario_path);
            const pfc::SimResult result = pfc::run_scenario(cfg);
            const fs::path out = resolve_out(run_out, "run.csv");
            write_file(out, pfc::records_csv(result.records));
            std::cout << "wrote " << result.records.size() << " records to " << out.string() << "\n";
        } else if (*sweep_cmd) {
            const pfc::ScenarioConfig cfg = base_scenario(sweep_scenario_path, sweep_mode);
            if (!(sweep_step > 0.0)) throw pfc::ConfigError({"sweep.step: must be > 0"});
            std::vector<double> currents;
            for (double c = sweep_from; c <= sweep_to + 1e-9; c += sweep_step) currents.push_back(c);
            const auto rows = pfc::sweep(currents, sweep_compensate, cfg);
            const fs::path out = resolve_out(sweep_out, "sweep.csv");
            write_file(out, pfc::sweep_csv(rows));
            bool any_error = false;
            for (const auto& row : rows)
                if (!row.error.empty()) {
                    any_error = true;
                    std::cerr << "sweep: " << pfc::fmt_sig6(row.current_a) << " A: " << row.error
                              << "\n";
                }
            std::cout << "wrote " << rows.size() << " rows to " << out.string() << "\n";
            if (any_error) return 3;
        } else if (*wave_cmd) {
            const pfc::ScenarioConfig cfg = base_scenario(wave_scenario_path, "");
            const double fs_hz = wave_fs > 0.0 ? wave_fs : cfg.signal_sample_rate_hz;
            const std::string csv =
                pfc::dump_waveforms(wave_current, fs_hz, wave_cycles, wave_compensated, cfg);
            const fs::path out = resolve_out(wave_out, "waveforms.csv");
            write_file(out, csv);
            std::cout << "wrote waveforms to " << out.string() << "\n";
        } else if (*size_cmd) {
            pfc::SupplySpec supply;
            supply.line_voltage_rms = size_voltage;
            supply.frequency_hz = size_frequency;
            supply.validate();
            const pfc::Connection conn = size_connection == "delta" ? pfc::Connection::kDelta
                                                                    : pfc::Connection::kStar;
            const auto units = pfc::size_binary_bank(size_qmax, size_steps, supply, conn);
            std::cout << "unit,q_var,capacitance_uf\n";
            for (std::size_t i = 0; i < units.size(); ++i)
                std::cout << i << ',' << pfc::fmt_sig6(pfc::unit_rated_var(units[i], supply)) << ','
                          << pfc::fmt_sig6(units[i].capacitance_uf) << "\n";
        }
    } catch (const pfc::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
