#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pfc/capacitor_bank.hpp"
#include "pfc/controller.hpp"
#include "pfc/csv.hpp"
#include "pfc/scenario.hpp"
#include "pfc/signal_chain.hpp"

// Closed-loop scenario runner. Each scan period: hold the load current from
// the profile, look up the motor operating point, synthesize the voltage and
// current waveforms, push them through the measurement chain into a scan
// image, run the controller, gate the switch commands through the zero
// crossings, and log one record. Everything is deterministic for a given
// config, so two runs of the same scenario produce byte-identical CSVs.

namespace pfc {

struct SimRecord {
    double time_s = 0.0;
    double load_current_a = 0.0;
    double pf_uncompensated = 1.0;
    double q_load_var = 0.0;
    BitMask engaged_mask = 0;
    double q_cap_var = 0.0;
    double pf_corrected = 1.0;
    double corrected_current_a = 0.0;
    bool lagging = true;
    bool measurement_fault = false;
    std::vector<std::pair<std::size_t, FaultKind>> active_faults;
};

struct SimResult {
    std::vector<SimRecord> records;
    std::vector<EngagementEvent> engagements;
};

namespace detail {

inline double profile_current(const std::vector<ProfilePoint>& profile, double time_s) {
    // Step-held; before the first breakpoint the first value applies.
    double current = profile.front().current_a;
    for (const ProfilePoint& point : profile) {
        if (point.time_s > time_s) break;
        current = point.current_a;
    }
    return current;
}

// The physical measurement chain for one scan: comparator squares of v and i,
// XOR through the 24 V digital input, and the clipped current peak into the
// ADC.
inline ScanImage measure(const SupplySpec& supply, const OperatingPoint& point,
                         double sample_rate_hz, const MeasurementSpec& m, const BankState& bank) {
    const double phase_lag = phase_angle_from_pf(point.power_factor);
    const SampledSignal v = synthesize(supply.line_voltage_rms, 0.0, supply, sample_rate_hz, 1);
    const SampledSignal i = synthesize(point.line_current_rms, phase_lag, supply, sample_rate_hz, 1);
    const LogicSignal v_sq = comparator(v);
    const LogicSignal i_sq = comparator(i);

    std::size_t high = 0;
    bool level = false;
    for (std::size_t k = 0; k < v_sq.levels.size(); ++k) {
        const double volts = v_sq.levels[k] != i_sq.levels[k] ? kLogicHighVolts : kLogicLowVolts;
        level = digital_input_level(volts, level);
        if (level) ++high;
    }
    const double duty = static_cast<double>(high) / static_cast<double>(v_sq.levels.size());

    const double peak_amps = peak_detect(clip_negative(i));
    const int code = adc_convert(peak_amps / m.ct_ratio, m.adc_full_scale_v, m.adc_bits);

    return ScanImage{duty, code, bank.command_bits, bank.readback_bits};
}

}  // namespace detail

inline SimResult run_scenario(const ScenarioConfig& scenario_cfg) {
    scenario_cfg.validate();
    const ScenarioConfig cfg = scenario_cfg.resolved();
    const ControllerConfig& ctl = cfg.controller;

    SimResult result;
    BankState bank = make_bank(cfg.bank_units);
    ControllerState state = ControllerState::make(bank.size());
    std::size_t next_fault = 0;
    std::vector<FaultInjection> faults = cfg.faults;
    std::sort(faults.begin(), faults.end(),
              [](const FaultInjection& a, const FaultInjection& b) { return a.time_s < b.time_s; });

    const auto scan_count =
        static_cast<std::size_t>(std::ceil(cfg.duration_s / ctl.scan_period_s - 1e-9));
    result.records.reserve(scan_count);

    for (std::size_t k = 0; k < scan_count; ++k) {
        const double now = static_cast<double>(k) * ctl.scan_period_s;

        while (next_fault < faults.size() && faults[next_fault].time_s <= now + 1e-9) {
            bank = set_unit_health(std::move(bank), faults[next_fault].unit,
                                   faults[next_fault].health);
            ++next_fault;
        }
        bank = apply_pending(std::move(bank), now, &result.engagements);

        const double load_current = detail::profile_current(cfg.profile, now);
        const OperatingPoint point = cfg.load_table.lookup(load_current, cfg.supply);

        const ScanImage image =
            detail::measure(cfg.supply, point, cfg.signal_sample_rate_hz, ctl.measurement, bank);
        const BitMask desired = scan(image, ctl, state, cfg.supply, bank);
        bank = command_switches(std::move(bank), desired, now, cfg.supply, &result.engagements);

        const double q_cap = bank_reactive_power(bank, cfg.supply);
        const OperatingPoint corrected = corrected_point(cfg.supply, point, q_cap);

        SimRecord record;
        record.time_s = now;
        record.load_current_a = load_current;
        record.pf_uncompensated = point.power_factor;
        record.q_load_var = point.reactive_power_var;
        record.engaged_mask = bank.effective_mask();
        record.q_cap_var = q_cap;
        record.pf_corrected = corrected.power_factor;
        record.corrected_current_a = corrected.line_current_rms;
        record.lagging = corrected.lagging;
        record.measurement_fault = state.measurement_fault;
        record.active_faults = state.latched_faults();
        result.records.push_back(std::move(record));
    }
    return result;
}

struct SweepRow {
    double current_a = 0.0;
    std::optional<SimRecord> record;
    std::string error;
};

// One row per requested current. compensate=false bypasses the controller and
// reports the raw table point; compensate=true runs the closed loop to steady
// state and reports the final record. A current outside the table yields a
// per-row error, the remaining rows are still produced.
inline std::vector<SweepRow> sweep(const std::vector<double>& currents, bool compensate,
                                   const ScenarioConfig& scenario_cfg) {
    std::vector<SweepRow> rows;
    rows.reserve(currents.size());
    for (double current : currents) {
        SweepRow row;
        row.current_a = current;
        try {
            if (!compensate) {
                const OperatingPoint point = scenario_cfg.load_table.lookup(current, scenario_cfg.supply);
                const OperatingPoint same = corrected_point(scenario_cfg.supply, point, 0.0);
                SimRecord record;
                record.time_s = 0.0;
                record.load_current_a = current;
                record.pf_uncompensated = point.power_factor;
                record.q_load_var = point.reactive_power_var;
                record.engaged_mask = 0;
                record.q_cap_var = 0.0;
                record.pf_corrected = same.power_factor;
                record.corrected_current_a = same.line_current_rms;
                record.lagging = same.lagging;
                row.record = std::move(record);
            } else {
                ScenarioConfig one = scenario_cfg;
                one.profile = {{0.0, current}};
                one.faults.clear();
                // Long enough for debounce plus one engagement per unit.
                const double settle_scans =
                    static_cast<double>(one.controller.debounce_scans + one.bank_units.size() + 10);
                one.duration_s = std::max(0.5, settle_scans * one.controller.scan_period_s * 4.0);
                const SimResult sim = run_scenario(one);
                row.record = sim.records.back();
            }
        } catch (const std::out_of_range& e) {
            row.error = e.what();
        } catch (const ConfigError& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace detail {

inline std::string fault_field(const SimRecord& record) {
    std::string out;
    for (const auto& [unit, kind] : record.active_faults) {
        if (!out.empty()) out += ';';
        out += std::to_string(unit);
        out += ':';
        out += to_string(kind);
    }
    if (record.measurement_fault) {
        if (!out.empty()) out += ';';
        out += "meas";
    }
    return out;
}

inline void append_record_row(std::string& csv, const SimRecord& r) {
    csv += fmt_sig6(r.time_s);
    csv += ',';
    csv += fmt_sig6(r.load_current_a);
    csv += ',';
    csv += fmt_sig6(r.pf_uncompensated);
    csv += ',';
    csv += fmt_sig6(r.q_load_var);
    csv += ',';
    csv += std::to_string(r.engaged_mask);
    csv += ',';
    csv += fmt_sig6(r.q_cap_var);
    csv += ',';
    csv += fmt_sig6(r.pf_corrected);
    csv += ',';
    csv += fmt_sig6(r.corrected_current_a);
    csv += ',';
    csv += r.lagging ? '1' : '0';
    csv += ',';
    csv += fault_field(r);
    csv += '\n';
}

}  // namespace detail

inline constexpr const char* kRecordCsvHeader =
    "t_s,i_load_a,pf_uncomp,q_load_var,mask,q_cap_var,pf_corr,i_corr_a,lagging,faults";

inline std::string records_csv(const std::vector<SimRecord>& records) {
    std::string csv = kRecordCsvHeader;
    csv += '\n';
    for (const SimRecord& record : records) detail::append_record_row(csv, record);
    return csv;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string csv = kRecordCsvHeader;
    csv += '\n';
    for (const SweepRow& row : rows)
        if (row.record) detail::append_record_row(csv, *row.record);
    return csv;
}

// Waveform dump of the measurement chain at one operating point: the voltage
// and current sinusoids, their comparator squares (0/24 V), and the XOR
// detector output.
inline std::string waveform_csv(const SupplySpec& supply, double current_rms,
                                double phase_lag_rad, double sample_rate_hz, int cycles) {
    const SampledSignal v = synthesize(supply.line_voltage_rms, 0.0, supply, sample_rate_hz, cycles);
    const SampledSignal i = synthesize(current_rms, phase_lag_rad, supply, sample_rate_hz, cycles);
    const LogicSignal v_sq = comparator(v);
    const LogicSignal i_sq = comparator(i);

    std::string csv = "t_s,v_volts,i_amperes,v_square,i_square,xor_level\n";
    for (std::size_t k = 0; k < v.samples.size(); ++k) {
        csv += fmt_sig6(static_cast<double>(k) / sample_rate_hz);
        csv += ',';
        csv += fmt_sig6(v.samples[k]);
        csv += ',';
        csv += fmt_sig6(i.samples[k]);
        csv += ',';
        csv += fmt_sig6(v_sq.levels[k] ? kLogicHighVolts : kLogicLowVolts);
        csv += ',';
        csv += fmt_sig6(i_sq.levels[k] ? kLogicHighVolts : kLogicLowVolts);
        csv += ',';
        csv += fmt_sig6(v_sq.levels[k] != i_sq.levels[k] ? kLogicHighVolts : kLogicLowVolts);
        csv += '\n';
    }
    return csv;
}

// Waveforms for a scenario load current: the raw table point, or, when
// compensation is requested, the steady-state corrected point (current
// re-synthesized at the corrected magnitude and angle; a leading residual
// shows up as a negative lag).
inline std::string dump_waveforms(double current_a, double sample_rate_hz, int cycles,
                                  bool compensated, const ScenarioConfig& cfg) {
    if (!compensated) {
        const OperatingPoint point = cfg.load_table.lookup(current_a, cfg.supply);
        return waveform_csv(cfg.supply, point.line_current_rms,
                            phase_angle_from_pf(point.power_factor), sample_rate_hz, cycles);
    }
    const std::vector<SweepRow> rows = sweep({current_a}, true, cfg);
    if (!rows.front().error.empty()) throw std::out_of_range(rows.front().error);
    const SimRecord& record = *rows.front().record;
    const double angle = std::acos(std::clamp(record.pf_corrected, 0.0, 1.0));
    const double lag = record.lagging ? angle : -angle;
    return waveform_csv(cfg.supply, record.corrected_current_a, lag, sample_rate_hz, cycles);
}

}  // namespace pfc
