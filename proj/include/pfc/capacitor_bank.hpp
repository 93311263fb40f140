#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pfc/phasor.hpp"

// Capacitor bank model: delta/star units, binary sizing, health (stuck
// switches), command vs. readback bits, and zero-crossing-gated engagement.
// Switching is quasi-static: a unit's VAr appears at the gated instant, which
// is exactly what the zero-crossing switch hardware is there to justify.

namespace pfc {

using BitMask = std::uint32_t;
inline constexpr std::size_t kMaxBankUnits = 16;

enum class Connection { kDelta, kStar };
enum class Health { kOk, kStuckOpen, kStuckClosed };

inline const char* to_string(Connection c) { return c == Connection::kDelta ? "delta" : "star"; }
inline const char* to_string(Health h) {
    switch (h) {
        case Health::kStuckOpen: return "stuck_open";
        case Health::kStuckClosed: return "stuck_closed";
        default: return "ok";
    }
}

struct CapacitorUnit {
    double capacitance_uf = 0.0;
    Connection connection = Connection::kStar;
    bool engaged = false;
    Health health = Health::kOk;

    // A stuck-closed unit injects VAr no matter what; a stuck-open one never
    // does.
    bool effectively_engaged() const {
        if (health == Health::kStuckClosed) return true;
        if (health == Health::kStuckOpen) return false;
        return engaged;
    }
};

// Three-phase VAr a unit injects while energized. Delta sees line-to-line
// voltage on each leg, so identical capacitance yields exactly 3x the star
// figure.
inline double unit_rated_var(double capacitance_uf, Connection connection, const SupplySpec& supply) {
    const double v = supply.line_voltage_rms;
    const double star = v * v * supply.omega() * capacitance_uf * 1e-6;
    return connection == Connection::kDelta ? 3.0 * star : star;
}

inline double unit_rated_var(const CapacitorUnit& unit, const SupplySpec& supply) {
    return unit_rated_var(unit.capacitance_uf, unit.connection, supply);
}

// Single-phase share used by per-phase compensation: one star leg sees phase
// voltage, one delta leg sees line voltage.
inline double unit_phase_var(const CapacitorUnit& unit, const SupplySpec& supply) {
    const double base = unit_rated_var(unit.capacitance_uf, Connection::kStar, supply);
    return unit.connection == Connection::kDelta ? base : base / 3.0;
}

inline double unit_reactive_power(const CapacitorUnit& unit, const SupplySpec& supply) {
    return unit.effectively_engaged() ? unit_rated_var(unit, supply) : 0.0;
}

struct EngagementEvent {
    std::size_t unit = 0;
    double time_s = 0.0;
};

struct BankState {
    struct Pending {
        std::size_t unit = 0;
        double due_s = 0.0;
    };

    std::vector<CapacitorUnit> units;
    BitMask command_bits = 0;
    BitMask readback_bits = 0;
    std::vector<Pending> pending;

    std::size_t size() const { return units.size(); }

    BitMask effective_mask() const {
        BitMask mask = 0;
        for (std::size_t i = 0; i < units.size(); ++i)
            if (units[i].effectively_engaged()) mask |= BitMask{1} << i;
        return mask;
    }
};

inline void refresh_readback(BankState& state) { state.readback_bits = state.effective_mask(); }

inline BankState make_bank(std::vector<CapacitorUnit> units) {
    if (units.size() > kMaxBankUnits)
        throw std::invalid_argument("bank: at most " + std::to_string(kMaxBankUnits) +
                                    " units supported, got " + std::to_string(units.size()));
    for (std::size_t i = 0; i < units.size(); ++i)
        if (!(units[i].capacitance_uf > 0.0))
            throw std::invalid_argument("bank unit " + std::to_string(i) +
                                        ": capacitance must be > 0");
    BankState state;
    state.units = std::move(units);
    for (std::size_t i = 0; i < state.units.size(); ++i)
        if (state.units[i].engaged) state.command_bits |= BitMask{1} << i;
    refresh_readback(state);
    return state;
}

inline double bank_reactive_power(const BankState& state, const SupplySpec& supply) {
    double total = 0.0;
    for (const CapacitorUnit& unit : state.units) total += unit_reactive_power(unit, supply);
    return total;
}

// n binary-weighted steps q_step * {1, 2, 4, ...} with q_step = q_max/(2^n - 1),
// so every integer multiple of q_step up to q_max is reachable.
inline std::vector<CapacitorUnit> size_binary_bank(double q_max_var, int n_steps,
                                                   const SupplySpec& supply, Connection connection) {
    if (!(q_max_var > 0.0))
        throw std::domain_error("q_max must be > 0, got " + std::to_string(q_max_var));
    if (n_steps < 1 || static_cast<std::size_t>(n_steps) > kMaxBankUnits)
        throw std::invalid_argument("n_steps must be in [1, " + std::to_string(kMaxBankUnits) +
                                    "], got " + std::to_string(n_steps));
    const double q_step = q_max_var / (std::pow(2.0, n_steps) - 1.0);
    const double v = supply.line_voltage_rms;
    std::vector<CapacitorUnit> units;
    units.reserve(static_cast<std::size_t>(n_steps));
    for (int i = 0; i < n_steps; ++i) {
        const double q_unit = q_step * std::pow(2.0, i);
        double cap_f = q_unit / (v * v * supply.omega());
        if (connection == Connection::kDelta) cap_f /= 3.0;
        units.push_back({cap_f * 1e6, connection, false, Health::kOk});
    }
    return units;
}

// Voltage zero crossings of either slope land on multiples of 1/(2f). Returns
// the first crossing at or after `now_s` (boundary inclusive within 1 ns).
inline double next_zero_crossing(double now_s, double frequency_hz) {
    const double half_period = 0.5 / frequency_hz;
    const double k = std::ceil(now_s / half_period - 1e-9);
    return (k < 0.0 ? 0.0 : k) * half_period;
}

// Engages every queued unit whose zero crossing has arrived. Event timestamps
// are the scheduled crossing instants, not the call time.
inline BankState apply_pending(BankState state, double now_s,
                               std::vector<EngagementEvent>* events = nullptr) {
    auto it = state.pending.begin();
    while (it != state.pending.end()) {
        if (it->due_s <= now_s + 1e-9) {
            state.units[it->unit].engaged = true;
            if (events) events->push_back({it->unit, it->due_s});
            it = state.pending.erase(it);
        } else {
            ++it;
        }
    }
    refresh_readback(state);
    return state;
}

// Applies a desired command mask. Disengagements are immediate (relay opening
// is not gated); engagements wait for the next voltage zero crossing at or
// after `now_s`. Command bits update immediately, readback follows effective
// (health-filtered) engagement.
inline BankState command_switches(BankState state, BitMask desired_bits, double now_s,
                                  const SupplySpec& supply,
                                  std::vector<EngagementEvent>* events = nullptr) {
    const std::size_t n = state.units.size();
    if (n < kMaxBankUnits && (desired_bits >> n) != 0)
        throw std::invalid_argument("command mask has bits beyond the " + std::to_string(n) +
                                    "-unit bank");
    for (std::size_t i = 0; i < n; ++i) {
        const BitMask bit = BitMask{1} << i;
        const bool want = (desired_bits & bit) != 0;
        const bool commanded = (state.command_bits & bit) != 0;
        if (want && !commanded) {
            state.command_bits |= bit;
            const double due = next_zero_crossing(now_s, supply.frequency_hz);
            if (due <= now_s + 1e-9) {
                state.units[i].engaged = true;
                if (events) events->push_back({i, due});
            } else {
                state.pending.push_back({i, due});
            }
        } else if (!want && commanded) {
            state.command_bits &= ~bit;
            state.units[i].engaged = false;
            // A not-yet-gated engagement is cancelled by the disengage.
            std::erase_if(state.pending, [i](const BankState::Pending& p) { return p.unit == i; });
        }
    }
    refresh_readback(state);
    return state;
}

// Fault injection hook for simulations and tests.
inline BankState set_unit_health(BankState state, std::size_t unit, Health health) {
    if (unit >= state.units.size())
        throw std::out_of_range("unit index " + std::to_string(unit) + " out of range");
    state.units[unit].health = health;
    refresh_readback(state);
    return state;
}

}  // namespace pfc
