#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pfc/capacitor_bank.hpp"
#include "pfc/controller.hpp"
#include "pfc/load_table.hpp"

// Scenario description and its file format: a flat, sectioned key=value text
// (sections: supply, motor, bank, controller, profile, faults; duration and
// sample_rate are top-level keys). Chosen over a binary format so scenarios
// diff cleanly in tests.
//
//   duration = 1.0
//   sample_rate = 20000
//
//   [supply]
//   line_voltage = 400
//   frequency = 50
//
//   [motor]
//   row = 4 0.28 1467        # current_A pf speed_rpm
//
//   [bank]
//   sizing = binary          # or: unit = 20 delta (repeated)
//   qmax = 2700
//   steps = 4
//   connection = star
//
//   [controller]
//   mode = greedy
//
//   [profile]
//   t=0.0 i=4.0
//
//   [faults]
//   t=0.5 unit=3 health=stuck_open

namespace pfc {

class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(std::vector<std::string> issues)
        : std::runtime_error(join(issues)), issues_(std::move(issues)) {}
    const std::vector<std::string>& issues() const { return issues_; }

  private:
    static std::string join(const std::vector<std::string>& issues) {
        std::string msg = "scenario validation failed:";
        for (const std::string& issue : issues) msg += "\n  " + issue;
        return msg;
    }
    std::vector<std::string> issues_;
};

struct ProfilePoint {
    double time_s = 0.0;
    double current_a = 0.0;
};

struct FaultInjection {
    double time_s = 0.0;
    std::size_t unit = 0;
    Health health = Health::kOk;
};

struct ScenarioConfig {
    SupplySpec supply{};
    LoadTable load_table = default_load_table();
    std::vector<CapacitorUnit> bank_units;
    ControllerConfig controller{};
    bool deadband_auto = true;  // resolve deadband to half the smallest bank step
    std::vector<ProfilePoint> profile;
    std::vector<FaultInjection> faults;
    double duration_s = 1.0;
    double signal_sample_rate_hz = 20000.0;

    // Copy with derived knobs pinned: the controller sees the signal grid the
    // duty accumulator is measured on, and an auto deadband becomes half the
    // smallest unit step.
    ScenarioConfig resolved() const {
        ScenarioConfig out = *this;
        out.controller.measurement.signal_sample_rate_hz = signal_sample_rate_hz;
        if (deadband_auto && !bank_units.empty()) {
            double smallest = unit_rated_var(bank_units.front(), supply);
            for (const CapacitorUnit& unit : bank_units)
                smallest = std::min(smallest, unit_rated_var(unit, supply));
            out.controller.deadband_var = 0.5 * smallest;
            out.deadband_auto = false;
        }
        return out;
    }

    // All issues are collected (with field paths) before anything runs.
    void validate() const {
        std::vector<std::string> issues;
        auto check = [&](bool ok, const std::string& msg) {
            if (!ok) issues.push_back(msg);
        };

        try {
            supply.validate();
        } catch (const std::invalid_argument& e) {
            issues.emplace_back(e.what());
        }
        try {
            controller.validate();
        } catch (const std::invalid_argument& e) {
            issues.emplace_back(e.what());
        }

        check(duration_s > 0.0, "duration: must be > 0");
        check(signal_sample_rate_hz >= kMinSamplesPerCycle * supply.frequency_hz,
              "sample_rate: must be >= 20 x supply frequency");
        check(!controller.per_phase,
              "controller.per_phase: the scenario runner models a balanced system; use the "
              "per-phase API directly");
        check(bank_units.size() <= kMaxBankUnits, "bank: at most 16 units");
        for (std::size_t i = 0; i < bank_units.size(); ++i)
            check(bank_units[i].capacitance_uf > 0.0,
                  "bank.unit[" + std::to_string(i) + "]: capacitance must be > 0");
        const BitMask bank_span =
            bank_units.size() >= kMaxBankUnits ? ~BitMask{0}
                                               : (BitMask{1} << bank_units.size()) - 1;
        if (controller.mode == ControlMode::kLookup) {
            check(!bank_units.empty(), "bank: lookup mode needs a capacitor bank");
            check((controller.combos.a | controller.combos.b | controller.combos.c) != 0,
                  "bank.combo_a/b/c: lookup mode needs the three preset masks");
            check((controller.combos.a & ~bank_span) == 0, "bank.combo_a: unit index out of range");
            check((controller.combos.b & ~bank_span) == 0, "bank.combo_b: unit index out of range");
            check((controller.combos.c & ~bank_span) == 0, "bank.combo_c: unit index out of range");
        }

        check(!profile.empty(), "profile: needs at least one breakpoint");
        for (std::size_t i = 0; i < profile.size(); ++i) {
            const std::string path = "profile[" + std::to_string(i) + "]";
            check(profile[i].time_s >= 0.0, path + ".t: must be >= 0");
            if (i > 0) check(profile[i - 1].time_s < profile[i].time_s, path + ".t: not increasing");
            check(load_table.contains(profile[i].current_a),
                  path + ".i: current " + std::to_string(profile[i].current_a) +
                      " outside the load table range [" + std::to_string(load_table.min_current()) +
                      ", " + std::to_string(load_table.max_current()) + "]");
        }
        for (std::size_t i = 0; i < faults.size(); ++i) {
            const std::string path = "faults[" + std::to_string(i) + "]";
            check(faults[i].time_s >= 0.0, path + ".t: must be >= 0");
            check(faults[i].unit < bank_units.size(), path + ".unit: index out of range");
        }

        if (!issues.empty()) throw ConfigError(std::move(issues));
    }
};

// Built-in desk setup: 400 V / 50 Hz supply, the measured motor table, and
// either the binary-sized greedy bank or the commissioning combo bank.
inline std::vector<CapacitorUnit> default_lookup_bank() {
    return {
        {20.0, Connection::kDelta, false, Health::kOk},  // 0: combo A
        {2.5, Connection::kStar, false, Health::kOk},    // 1: combo A
        {2.5, Connection::kStar, false, Health::kOk},    // 2: combo A
        {2.5, Connection::kDelta, false, Health::kOk},   // 3: combo B
        {2.5, Connection::kDelta, false, Health::kOk},   // 4: combo B
        {20.0, Connection::kStar, false, Health::kOk},   // 5: combo B, C
        {20.0, Connection::kStar, false, Health::kOk},   // 6: combo B, C
        {20.0, Connection::kStar, false, Health::kOk},   // 7: combo C
    };
}

inline ComboPresets default_combo_presets() {
    return {/*a=*/0b00000111, /*b=*/0b01111000, /*c=*/0b11100000};
}

inline ScenarioConfig default_scenario(ControlMode mode = ControlMode::kGreedy) {
    ScenarioConfig cfg;
    cfg.controller.mode = mode;
    if (mode == ControlMode::kGreedy) {
        cfg.bank_units = size_binary_bank(2700.0, 4, cfg.supply, Connection::kStar);
    } else {
        cfg.bank_units = default_lookup_bank();
        cfg.controller.combos = default_combo_presets();
    }
    cfg.profile = {{0.0, 4.0}};
    return cfg;
}

namespace detail {

inline std::string trim(std::string_view s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string_view::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(begin, end - begin + 1));
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

struct ScenarioParser {
    std::vector<std::string> issues;
    ScenarioConfig cfg;
    std::vector<LoadRow> motor_rows;
    std::vector<CapacitorUnit> explicit_units;
    bool bank_section_seen = false;
    bool binary_requested = false;
    double qmax = 2700.0;
    int steps = 4;
    Connection connection = Connection::kStar;
    BitMask combo_a = 0, combo_b = 0, combo_c = 0;
    bool combos_given = false;

    void fail(int line_no, const std::string& msg) {
        issues.push_back("line " + std::to_string(line_no) + ": " + msg);
    }

    std::optional<double> number(const std::string& text, int line_no, const std::string& field) {
        try {
            std::size_t consumed = 0;
            const double v = std::stod(text, &consumed);
            if (consumed != text.size()) throw std::invalid_argument(text);
            return v;
        } catch (const std::exception&) {
            fail(line_no, field + ": not a number: '" + text + "'");
            return std::nullopt;
        }
    }

    std::optional<BitMask> index_mask(const std::string& value, int line_no,
                                      const std::string& field) {
        BitMask mask = 0;
        for (const std::string& tok : split_ws(value)) {
            const auto idx = number(tok, line_no, field);
            if (!idx) return std::nullopt;
            if (*idx < 0 || *idx >= static_cast<double>(kMaxBankUnits) ||
                *idx != std::floor(*idx)) {
                fail(line_no, field + ": bad unit index '" + tok + "'");
                return std::nullopt;
            }
            mask |= BitMask{1} << static_cast<unsigned>(*idx);
        }
        return mask;
    }

    void top_level(const std::string& key, const std::string& value, int line_no) {
        if (key == "duration") {
            if (auto v = number(value, line_no, "duration")) cfg.duration_s = *v;
        } else if (key == "sample_rate") {
            if (auto v = number(value, line_no, "sample_rate")) cfg.signal_sample_rate_hz = *v;
        } else {
            fail(line_no, "unknown top-level key '" + key + "'");
        }
    }

    void supply_key(const std::string& key, const std::string& value, int line_no) {
        if (key == "line_voltage") {
            if (auto v = number(value, line_no, "supply.line_voltage")) cfg.supply.line_voltage_rms = *v;
        } else if (key == "frequency") {
            if (auto v = number(value, line_no, "supply.frequency")) cfg.supply.frequency_hz = *v;
        } else {
            fail(line_no, "unknown supply key '" + key + "'");
        }
    }

    void motor_key(const std::string& key, const std::string& value, int line_no) {
        if (key != "row") {
            fail(line_no, "unknown motor key '" + key + "'");
            return;
        }
        const auto parts = split_ws(value);
        if (parts.size() != 3) {
            fail(line_no, "motor.row: expected '<current> <pf> <speed>'");
            return;
        }
        const auto current = number(parts[0], line_no, "motor.row current");
        const auto pf = number(parts[1], line_no, "motor.row pf");
        const auto speed = number(parts[2], line_no, "motor.row speed");
        if (current && pf && speed) motor_rows.push_back({*current, *pf, *speed});
    }

    void bank_key(const std::string& key, const std::string& value, int line_no) {
        bank_section_seen = true;
        if (key == "sizing") {
            if (value == "binary")
                binary_requested = true;
            else if (value == "explicit")
                binary_requested = false;
            else
                fail(line_no, "bank.sizing: expected 'binary' or 'explicit'");
        } else if (key == "qmax") {
            if (auto v = number(value, line_no, "bank.qmax")) qmax = *v;
            binary_requested = true;
        } else if (key == "steps") {
            if (auto v = number(value, line_no, "bank.steps")) steps = static_cast<int>(*v);
            binary_requested = true;
        } else if (key == "connection") {
            if (value == "star")
                connection = Connection::kStar;
            else if (value == "delta")
                connection = Connection::kDelta;
            else
                fail(line_no, "bank.connection: expected 'star' or 'delta'");
        } else if (key == "unit") {
            const auto parts = split_ws(value);
            if (parts.size() != 2) {
                fail(line_no, "bank.unit: expected '<microfarads> <star|delta>'");
                return;
            }
            const auto cap = number(parts[0], line_no, "bank.unit capacitance");
            if (!cap) return;
            Connection conn;
            if (parts[1] == "star")
                conn = Connection::kStar;
            else if (parts[1] == "delta")
                conn = Connection::kDelta;
            else {
                fail(line_no, "bank.unit: connection must be 'star' or 'delta'");
                return;
            }
            explicit_units.push_back({*cap, conn, false, Health::kOk});
        } else if (key == "combo_a" || key == "combo_b" || key == "combo_c") {
            if (auto mask = index_mask(value, line_no, "bank." + key)) {
                combos_given = true;
                if (key == "combo_a") combo_a = *mask;
                if (key == "combo_b") combo_b = *mask;
                if (key == "combo_c") combo_c = *mask;
            }
        } else {
            fail(line_no, "unknown bank key '" + key + "'");
        }
    }

    void controller_key(const std::string& key, const std::string& value, int line_no) {
        ControllerConfig& c = cfg.controller;
        if (key == "mode") {
            if (value == "lookup")
                c.mode = ControlMode::kLookup;
            else if (value == "greedy")
                c.mode = ControlMode::kGreedy;
            else
                fail(line_no, "controller.mode: expected 'lookup' or 'greedy'");
        } else if (key == "target_pf") {
            if (auto v = number(value, line_no, "controller.target_pf")) c.target_pf = *v;
        } else if (key == "deadband") {
            if (value == "auto") {
                cfg.deadband_auto = true;
            } else if (auto v = number(value, line_no, "controller.deadband")) {
                cfg.deadband_auto = false;
                c.deadband_var = *v;
            }
        } else if (key == "debounce_scans") {
            if (auto v = number(value, line_no, "controller.debounce_scans"))
                c.debounce_scans = static_cast<int>(*v);
        } else if (key == "fault_scans") {
            if (auto v = number(value, line_no, "controller.fault_scans"))
                c.fault_scans = static_cast<int>(*v);
        } else if (key == "scan_period") {
            if (auto v = number(value, line_no, "controller.scan_period")) c.scan_period_s = *v;
        } else if (key == "thresholds") {
            const auto parts = split_ws(value);
            if (parts.size() != 3) {
                fail(line_no, "controller.thresholds: expected three currents");
                return;
            }
            for (std::size_t i = 0; i < 3; ++i)
                if (auto v = number(parts[i], line_no, "controller.thresholds"))
                    c.region_thresholds[i] = *v;
        } else if (key == "per_phase") {
            if (value == "true" || value == "false")
                c.per_phase = value == "true";
            else
                fail(line_no, "controller.per_phase: expected 'true' or 'false'");
        } else if (key == "guard") {
            if (value == "auto") {
                c.guard_mode = GuardMode::kAuto;
            } else if (value == "off") {
                c.guard_mode = GuardMode::kOff;
            } else if (auto v = number(value, line_no, "controller.guard")) {
                c.guard_mode = GuardMode::kFixed;
                c.guard_var = *v;
            }
        } else if (key == "adc_full_scale") {
            if (auto v = number(value, line_no, "controller.adc_full_scale"))
                c.measurement.adc_full_scale_v = *v;
        } else if (key == "adc_bits") {
            if (auto v = number(value, line_no, "controller.adc_bits"))
                c.measurement.adc_bits = static_cast<int>(*v);
        } else if (key == "ct_ratio") {
            if (auto v = number(value, line_no, "controller.ct_ratio")) c.measurement.ct_ratio = *v;
        } else {
            fail(line_no, "unknown controller key '" + key + "'");
        }
    }

    void profile_line(const std::string& line, int line_no) {
        double t = 0.0, i = 0.0;
        bool have_t = false, have_i = false;
        for (const std::string& tok : split_ws(line)) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) {
                fail(line_no, "profile: expected 't=<s> i=<A>' tokens");
                return;
            }
            const std::string k = tok.substr(0, eq);
            const auto v = number(tok.substr(eq + 1), line_no, "profile." + k);
            if (!v) return;
            if (k == "t") {
                t = *v;
                have_t = true;
            } else if (k == "i") {
                i = *v;
                have_i = true;
            } else {
                fail(line_no, "profile: unknown field '" + k + "'");
                return;
            }
        }
        if (!have_t || !have_i) {
            fail(line_no, "profile: needs both t= and i=");
            return;
        }
        cfg.profile.push_back({t, i});
    }

    void fault_line(const std::string& line, int line_no) {
        FaultInjection fault;
        bool have_t = false, have_unit = false, have_health = false;
        for (const std::string& tok : split_ws(line)) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) {
                fail(line_no, "faults: expected 't=' 'unit=' 'health=' tokens");
                return;
            }
            const std::string k = tok.substr(0, eq);
            const std::string v = tok.substr(eq + 1);
            if (k == "t") {
                if (auto n = number(v, line_no, "faults.t")) {
                    fault.time_s = *n;
                    have_t = true;
                }
            } else if (k == "unit") {
                if (auto n = number(v, line_no, "faults.unit")) {
                    fault.unit = static_cast<std::size_t>(*n);
                    have_unit = true;
                }
            } else if (k == "health") {
                if (v == "ok")
                    fault.health = Health::kOk;
                else if (v == "stuck_open")
                    fault.health = Health::kStuckOpen;
                else if (v == "stuck_closed")
                    fault.health = Health::kStuckClosed;
                else {
                    fail(line_no, "faults.health: expected ok|stuck_open|stuck_closed");
                    return;
                }
                have_health = true;
            } else {
                fail(line_no, "faults: unknown field '" + k + "'");
                return;
            }
        }
        if (!have_t || !have_unit || !have_health) {
            fail(line_no, "faults: needs t=, unit= and health=");
            return;
        }
        cfg.faults.push_back(fault);
    }

    ScenarioConfig finish() {
        if (!motor_rows.empty()) {
            try {
                cfg.load_table = LoadTable::from_rows(motor_rows);
            } catch (const std::invalid_argument& e) {
                issues.push_back(std::string("motor: ") + e.what());
            }
        }
        if (bank_section_seen) {
            if (binary_requested && !explicit_units.empty()) {
                issues.emplace_back("bank: give either binary sizing keys or explicit units, not both");
            } else if (!binary_requested && explicit_units.empty()) {
                issues.emplace_back("bank: needs binary sizing keys (qmax/steps) or unit lines");
            } else if (binary_requested) {
                try {
                    cfg.bank_units = size_binary_bank(qmax, steps, cfg.supply, connection);
                } catch (const std::exception& e) {
                    issues.push_back(std::string("bank: ") + e.what());
                }
            } else {
                cfg.bank_units = explicit_units;
            }
            if (combos_given) cfg.controller.combos = {combo_a, combo_b, combo_c};
        } else if (cfg.controller.mode == ControlMode::kGreedy) {
            cfg.bank_units = size_binary_bank(2700.0, 4, cfg.supply, Connection::kStar);
        } else {
            cfg.bank_units = default_lookup_bank();
            cfg.controller.combos = default_combo_presets();
        }
        if (!issues.empty()) throw ConfigError(std::move(issues));
        cfg.validate();
        return cfg.resolved();
    }
};

}  // namespace detail

inline ScenarioConfig parse_scenario_text(std::string_view text) {
    detail::ScenarioParser parser;
    std::string section;
    int line_no = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const std::string line = detail::trim(raw);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                parser.fail(line_no, "malformed section header");
                continue;
            }
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section != "supply" && section != "motor" && section != "bank" &&
                section != "controller" && section != "profile" && section != "faults")
                parser.fail(line_no, "unknown section '" + section + "'");
            continue;
        }
        if (section == "profile") {
            parser.profile_line(line, line_no);
            continue;
        }
        if (section == "faults") {
            parser.fault_line(line, line_no);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            parser.fail(line_no, "expected 'key = value'");
            continue;
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (section.empty())
            parser.top_level(key, value, line_no);
        else if (section == "supply")
            parser.supply_key(key, value, line_no);
        else if (section == "motor")
            parser.motor_key(key, value, line_no);
        else if (section == "bank")
            parser.bank_key(key, value, line_no);
        else if (section == "controller")
            parser.controller_key(key, value, line_no);
    }
    return parser.finish();
}

inline ScenarioConfig load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot open scenario file '" + path + "'"});
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario_text(buffer.str());
}

}  // namespace pfc
