#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pfc/capacitor_bank.hpp"
#include "pfc/phasor.hpp"
#include "pfc/signal_chain.hpp"

// Scan-cycle controller. Each scan reads one I/O image, decodes current
// magnitude (ADC code) and phase (XOR duty), computes the lagging VAr,
// selects a capacitor combination, debounces the command, and compares
// command vs. readback bits to latch stuck switches.
//
// Greedy mode enforces the no-leading constraint against the *true* load VAr,
// not just the measured one: the decoded value is reduced to its guaranteed
// lower bound given the duty-grid and ADC quantization before selection
// (configurable via guard_mode).

namespace pfc {

enum class ControlMode { kLookup, kGreedy };
enum class GuardMode { kAuto, kOff, kFixed };
enum class FaultKind { kNone, kStuckOpen, kStuckClosed };

inline const char* to_string(FaultKind kind) {
    switch (kind) {
        case FaultKind::kStuckOpen: return "stuck_open";
        case FaultKind::kStuckClosed: return "stuck_closed";
        default: return "none";
    }
}

struct ComboPresets {
    BitMask a = 0;
    BitMask b = 0;
    BitMask c = 0;
};

struct MeasurementSpec {
    double adc_full_scale_v = 10.0;
    int adc_bits = 12;
    double ct_ratio = 1.0;                    // ADC volts per ampere of peak current is 1/ct
    double signal_sample_rate_hz = 20000.0;   // grid the duty accumulator is measured on
};

struct ControllerConfig {
    ControlMode mode = ControlMode::kGreedy;
    std::array<double, 3> region_thresholds{3.9, 5.2, 6.0};
    ComboPresets combos;
    double target_pf = 0.95;  // reported in logs; greedy compensates maximally, it does not servo
    double deadband_var = 0.0;
    int debounce_scans = 5;
    int fault_scans = 3;
    double scan_period_s = 0.01;
    bool per_phase = false;
    GuardMode guard_mode = GuardMode::kAuto;
    double guard_var = 0.0;  // used when guard_mode == kFixed
    MeasurementSpec measurement;

    void validate() const {
        if (!(region_thresholds[0] < region_thresholds[1] &&
              region_thresholds[1] < region_thresholds[2]))
            throw std::invalid_argument("controller.thresholds: must be strictly increasing");
        if (!(target_pf > 0.0) || target_pf > 1.0)
            throw std::invalid_argument("controller.target_pf: must be in (0, 1]");
        if (debounce_scans < 1) throw std::invalid_argument("controller.debounce_scans: must be >= 1");
        if (fault_scans < 1) throw std::invalid_argument("controller.fault_scans: must be >= 1");
        if (!(scan_period_s > 0.0)) throw std::invalid_argument("controller.scan_period: must be > 0");
        if (deadband_var < 0.0) throw std::invalid_argument("controller.deadband: must be >= 0");
        if (guard_var < 0.0) throw std::invalid_argument("controller.guard: must be >= 0");
    }
};

// One PLC I/O snapshot.
struct ScanImage {
    double duty_accumulator = 0.0;  // XOR detector duty, accumulated on the signal grid
    int analog_code = 0;            // peak-detector voltage, 12-bit
    BitMask digital_out = 0;        // relay command port (wired back for fault checks)
    BitMask readback_in = 0;        // auxiliary-contact readback port
};

struct UnitMonitor {
    int mismatch_count = 0;
    FaultKind counting = FaultKind::kNone;
    FaultKind latched = FaultKind::kNone;
    int scans_since_command_change = std::numeric_limits<int>::max();
};

struct ControllerState {
    BitMask last_command = 0;
    BitMask pending_mask = 0;
    int stable_count = 0;
    bool measurement_fault = false;
    long scan_index = 0;
    int settle_scans = 0;  // mismatch counting holdoff after a command edge
    std::vector<UnitMonitor> units;

    static ControllerState make(std::size_t unit_count) {
        ControllerState state;
        state.units.resize(unit_count);
        return state;
    }

    void ensure_units(std::size_t unit_count) {
        if (units.size() < unit_count) units.resize(unit_count);
    }

    BitMask latched_mask() const {
        BitMask mask = 0;
        for (std::size_t i = 0; i < units.size(); ++i)
            if (units[i].latched != FaultKind::kNone) mask |= BitMask{1} << i;
        return mask;
    }

    std::vector<std::pair<std::size_t, FaultKind>> latched_faults() const {
        std::vector<std::pair<std::size_t, FaultKind>> faults;
        for (std::size_t i = 0; i < units.size(); ++i)
            if (units[i].latched != FaultKind::kNone) faults.emplace_back(i, units[i].latched);
        return faults;
    }
};

// Region map from the commissioning measurements: below the first threshold
// combo A, from there to the C threshold combo B, above that combo C.
// Boundary currents land in the higher region.
inline BitMask select_lookup(double current_rms_a, const ControllerConfig& cfg) {
    if (current_rms_a < cfg.region_thresholds[0]) return cfg.combos.a;
    if (current_rms_a < cfg.region_thresholds[2]) return cfg.combos.b;
    return cfg.combos.c;
}

namespace detail {

// Exhaustive subset maximization under a budget; exact for any weights up to
// kMaxBankUnits units. Ties resolve to the lowest mask so selection is
// deterministic.
inline BitMask best_subset(const std::vector<double>& weights, BitMask excluded, double budget) {
    const std::size_t n = weights.size();
    BitMask best_mask = 0;
    double best_sum = -1.0;
    const BitMask end = BitMask{1} << n;
    for (BitMask mask = 0; mask < end; ++mask) {
        if (mask & excluded) continue;
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (BitMask{1} << i)) sum += weights[i];
        if (sum <= budget && sum > best_sum) {
            best_sum = sum;
            best_mask = mask;
        }
    }
    return best_mask;
}

}  // namespace detail

// Largest total bank VAr not exceeding q_load_var. Latched units never enter
// the mask; VAr already flowing through latched stuck-closed units is
// subtracted from the budget so the selection compensates around them.
inline BitMask select_greedy(double q_load_var, const BankState& bank, const SupplySpec& supply,
                             [[maybe_unused]] const ControllerConfig& cfg,
                             const ControllerState* state = nullptr) {
    const std::size_t n = bank.units.size();
    std::vector<double> weights(n);
    for (std::size_t i = 0; i < n; ++i) weights[i] = unit_rated_var(bank.units[i], supply);

    BitMask excluded = 0;
    double stuck_base = 0.0;
    if (state) {
        for (std::size_t i = 0; i < n && i < state->units.size(); ++i) {
            const FaultKind latched = state->units[i].latched;
            if (latched == FaultKind::kNone) continue;
            excluded |= BitMask{1} << i;
            if (latched == FaultKind::kStuckClosed) stuck_base += weights[i];
        }
    }
    return detail::best_subset(weights, excluded, q_load_var - stuck_base);
}

// Latches a unit after `fault_scans` consecutive command/readback mismatches:
// commanded-but-open reads stuck_open, open-but-closed reads stuck_closed.
// Latched faults only ever grow within a run. Counting is suppressed for
// settle_scans after a command edge so a queued zero-crossing engagement is
// not mistaken for a failure.
inline std::vector<std::pair<std::size_t, FaultKind>> detect_switch_fault(BitMask command_bits,
                                                                          BitMask readback_bits,
                                                                          ControllerState& state,
                                                                          const ControllerConfig& cfg) {
    std::vector<std::pair<std::size_t, FaultKind>> latched_now;
    for (std::size_t i = 0; i < state.units.size(); ++i) {
        UnitMonitor& mon = state.units[i];
        if (mon.latched != FaultKind::kNone) continue;
        if (mon.scans_since_command_change < state.settle_scans) {
            mon.mismatch_count = 0;
            mon.counting = FaultKind::kNone;
            continue;
        }
        const bool cmd = (command_bits >> i) & 1;
        const bool readback = (readback_bits >> i) & 1;
        if (cmd == readback) {
            mon.mismatch_count = 0;
            mon.counting = FaultKind::kNone;
            continue;
        }
        const FaultKind kind = cmd ? FaultKind::kStuckOpen : FaultKind::kStuckClosed;
        if (mon.counting != kind) {
            mon.counting = kind;
            mon.mismatch_count = 0;
        }
        if (++mon.mismatch_count >= cfg.fault_scans) {
            mon.latched = kind;
            latched_now.emplace_back(i, kind);
        }
    }
    return latched_now;
}

struct DecodedMeasurement {
    double current_rms_a = 0.0;
    double phase_rad = 0.0;
    double power_factor = 1.0;
    double q_load_var = 0.0;    // as measured
    double q_floor_var = 0.0;   // guaranteed lower bound after the quantization guard
};

namespace detail {

// Lower bound on the true lagging VAr given the measured values and the
// known quantization of the chain: duty resolves to within 2/N of a period
// and the ADC rounds within half an LSB. sin is concave on [0, pi], so the
// minimum over the phase uncertainty interval sits at an endpoint.
inline double q_lower_bound(double voltage_gain, double current_rms, double phase_rad,
                            const ControllerConfig& cfg, const SupplySpec& supply) {
    const MeasurementSpec& m = cfg.measurement;
    const double n = std::round(m.signal_sample_rate_hz / supply.frequency_hz);
    const double dphi = 2.0 * kPi / n;
    const double lsb = m.adc_full_scale_v / ((1 << m.adc_bits) - 1);
    const double di = 0.5 * lsb / kSqrt2 * m.ct_ratio;
    const double lo = std::max(0.0, phase_rad - dphi);
    const double hi = std::min(kPi, phase_rad + dphi);
    const double sin_min = std::min(std::sin(lo), std::sin(hi));
    return voltage_gain * std::max(0.0, current_rms - di) * sin_min;
}

inline DecodedMeasurement decode(const ScanImage& image, const ControllerConfig& cfg,
                                 const SupplySpec& supply, double voltage_gain) {
    const MeasurementSpec& m = cfg.measurement;
    const int max_code = (1 << m.adc_bits) - 1;
    DecodedMeasurement d;
    const double peak_v = static_cast<double>(image.analog_code) / max_code * m.adc_full_scale_v;
    d.current_rms_a = scale_peak_to_rms(peak_v, m.ct_ratio);
    d.phase_rad = phase_from_duty(image.duty_accumulator);
    d.power_factor = pf_from_phase_angle(d.phase_rad);
    d.q_load_var = voltage_gain * d.current_rms_a * std::sin(d.phase_rad);
    switch (cfg.guard_mode) {
        case GuardMode::kAuto:
            d.q_floor_var = std::min(d.q_load_var,
                                     q_lower_bound(voltage_gain, d.current_rms_a, d.phase_rad, cfg,
                                                   supply));
            break;
        case GuardMode::kFixed:
            d.q_floor_var = std::max(0.0, d.q_load_var - cfg.guard_var);
            break;
        case GuardMode::kOff:
            d.q_floor_var = d.q_load_var;
            break;
    }
    return d;
}

inline void bump_command_age(ControllerState& state, BitMask previous, BitMask current) {
    for (std::size_t i = 0; i < state.units.size(); ++i) {
        const BitMask bit = BitMask{1} << i;
        UnitMonitor& mon = state.units[i];
        if ((previous & bit) != (current & bit))
            mon.scans_since_command_change = 0;
        else if (mon.scans_since_command_change < std::numeric_limits<int>::max())
            ++mon.scans_since_command_change;
    }
}

// Shared scan body, parameterized on the voltage gain (sqrt3*V_L three-phase,
// V_ph single-phase) and the per-unit VAr weighting.
template <typename WeightFn>
inline BitMask scan_impl(const ScanImage& image, const ControllerConfig& cfg, ControllerState& state,
                         const SupplySpec& supply, const BankState& bank, double voltage_gain,
                         WeightFn&& unit_var) {
    const std::size_t n = bank.units.size();
    state.ensure_units(n);
    state.settle_scans = static_cast<int>(
        std::ceil(0.5 / (supply.frequency_hz * cfg.scan_period_s) - 1e-9));
    ++state.scan_index;

    detect_switch_fault(image.digital_out, image.readback_in, state, cfg);

    const int max_code = (1 << cfg.measurement.adc_bits) - 1;
    const bool code_ok = image.analog_code >= 0 && image.analog_code <= max_code;
    const bool duty_ok = image.duty_accumulator >= 0.0 && image.duty_accumulator <= 1.0;
    if (!code_ok || !duty_ok) {
        // Hold the last command rather than act on garbage.
        state.measurement_fault = true;
        bump_command_age(state, state.last_command, state.last_command);
        return state.last_command;
    }
    state.measurement_fault = false;

    const DecodedMeasurement d = decode(image, cfg, supply, voltage_gain);

    std::vector<double> weights(n);
    for (std::size_t i = 0; i < n; ++i) weights[i] = unit_var(bank.units[i]);
    const BitMask latched = state.latched_mask();
    double stuck_base = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (state.units[i].latched == FaultKind::kStuckClosed) stuck_base += weights[i];

    BitMask candidate;
    if (cfg.mode == ControlMode::kLookup)
        candidate = select_lookup(d.current_rms_a, cfg) & ~latched;
    else
        candidate = best_subset(weights, latched, d.q_floor_var - stuck_base);

    if (cfg.mode == ControlMode::kGreedy && candidate != state.last_command) {
        // Deadband hold against relay hunting, but never hold a command that
        // is already over-compensating.
        double current_var = 0.0;
        double candidate_var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (state.last_command & (BitMask{1} << i)) current_var += weights[i];
            if (candidate & (BitMask{1} << i)) candidate_var += weights[i];
        }
        if ((state.last_command & latched) == 0 && current_var + stuck_base <= d.q_floor_var &&
            std::abs(candidate_var - current_var) <= cfg.deadband_var)
            candidate = state.last_command;
    }

    // Debounce: a new mask must be the candidate for debounce_scans
    // consecutive scans before it is emitted.
    const BitMask previous_command = state.last_command;
    if (candidate == state.last_command) {
        state.pending_mask = candidate;
        state.stable_count = 0;
    } else {
        if (candidate == state.pending_mask) {
            ++state.stable_count;
        } else {
            state.pending_mask = candidate;
            state.stable_count = 1;
        }
        if (state.stable_count >= cfg.debounce_scans) {
            state.last_command = candidate;
            state.stable_count = 0;
        }
    }
    bump_command_age(state, previous_command, state.last_command);
    return state.last_command;
}

}  // namespace detail

// One controller scan over the balanced three-phase system.
inline BitMask scan(const ScanImage& image, const ControllerConfig& cfg, ControllerState& state,
                    const SupplySpec& supply, const BankState& bank) {
    return detail::scan_impl(image, cfg, state, supply, bank,
                             kSqrt3 * supply.line_voltage_rms,
                             [&](const CapacitorUnit& u) { return unit_rated_var(u, supply); });
}

inline DecodedMeasurement decode_image(const ScanImage& image, const ControllerConfig& cfg,
                                       const SupplySpec& supply) {
    return detail::decode(image, cfg, supply, kSqrt3 * supply.line_voltage_rms);
}

// Independent per-phase compensation: each phase runs the single-phase
// analogue (Q_ph = V_ph * I * sin phi) against its own bank group and state.
inline std::array<BitMask, 3> per_phase_scan(const std::array<ScanImage, 3>& images,
                                             const ControllerConfig& cfg,
                                             std::array<ControllerState, 3>& states,
                                             const SupplySpec& supply,
                                             const std::array<BankState, 3>& phase_banks) {
    if (!cfg.per_phase)
        throw std::invalid_argument("per_phase_scan requires cfg.per_phase = true");
    std::array<BitMask, 3> masks{};
    for (std::size_t phase = 0; phase < 3; ++phase)
        masks[phase] = detail::scan_impl(
            images[phase], cfg, states[phase], supply, phase_banks[phase],
            supply.phase_voltage_rms(),
            [&](const CapacitorUnit& u) { return unit_phase_var(u, supply); });
    return masks;
}

}  // namespace pfc
