#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

// Balanced three-phase power-triangle math. Everything here is a pure value
// computation; angles are radians throughout, degrees only exist at I/O
// boundaries.

namespace pfc {

inline constexpr double kSqrt3 = std::numbers::sqrt3;
inline constexpr double kSqrt2 = std::numbers::sqrt2;
inline constexpr double kPi = std::numbers::pi;

struct SupplySpec {
    double line_voltage_rms = 400.0;  // volts, line-to-line
    double frequency_hz = 50.0;
    int phase_count = 3;

    double omega() const { return 2.0 * kPi * frequency_hz; }
    double phase_voltage_rms() const { return line_voltage_rms / kSqrt3; }

    void validate() const {
        if (!(line_voltage_rms > 0.0))
            throw std::invalid_argument("supply.line_voltage: must be > 0");
        if (!(frequency_hz > 0.0))
            throw std::invalid_argument("supply.frequency: must be > 0");
        if (phase_count != 3)
            throw std::invalid_argument("supply.phase_count: only 3 is supported");
    }
};

// One steady-state load point. reactive_power_var is signed: positive while
// the current lags the voltage, negative once the point is over-compensated.
struct OperatingPoint {
    double line_current_rms = 0.0;
    double power_factor = 1.0;
    bool lagging = true;
    double real_power_w = 0.0;
    double reactive_power_var = 0.0;
    std::optional<double> speed_rpm = {};
};

inline double phase_angle_from_pf(double pf) {
    if (!(pf > 0.0) || pf > 1.0)
        throw std::domain_error("power factor must be in (0, 1], got " + std::to_string(pf));
    return std::acos(pf);
}

inline double pf_from_phase_angle(double angle_rad) { return std::cos(angle_rad); }

inline double apparent_power(const SupplySpec& supply, double current_rms) {
    if (current_rms < 0.0)
        throw std::domain_error("line current must be >= 0, got " + std::to_string(current_rms));
    return kSqrt3 * supply.line_voltage_rms * current_rms;
}

inline double reactive_power(const SupplySpec& supply, double current_rms, double pf) {
    if (!(pf > 0.0) || pf > 1.0)
        throw std::domain_error("power factor must be in (0, 1], got " + std::to_string(pf));
    return apparent_power(supply, current_rms) * std::sqrt(1.0 - pf * pf);
}

inline double real_power(const SupplySpec& supply, double current_rms, double pf) {
    if (!(pf > 0.0) || pf > 1.0)
        throw std::domain_error("power factor must be in (0, 1], got " + std::to_string(pf));
    return apparent_power(supply, current_rms) * pf;
}

inline OperatingPoint derive_point(const SupplySpec& supply, double current_rms, double pf,
                                   std::optional<double> speed_rpm = {}) {
    OperatingPoint point;
    point.line_current_rms = current_rms;
    point.power_factor = pf;
    point.lagging = true;
    point.real_power_w = real_power(supply, current_rms, pf);
    point.reactive_power_var = reactive_power(supply, current_rms, pf);
    point.speed_rpm = speed_rpm;
    return point;
}

// Applies q_cap of capacitive compensation to a load point. The residual may
// come out negative (leading); enforcing a no-leading policy is the caller's
// job, this just reports the resulting operating point.
inline OperatingPoint corrected_point(const SupplySpec& supply, const OperatingPoint& uncompensated,
                                      double q_cap_var) {
    if (q_cap_var < 0.0)
        throw std::domain_error("q_cap must be >= 0, got " + std::to_string(q_cap_var));
    const double p = uncompensated.real_power_w;
    const double q_res = uncompensated.reactive_power_var - q_cap_var;
    const double s_res = std::hypot(p, q_res);

    OperatingPoint corrected;
    corrected.real_power_w = p;
    corrected.reactive_power_var = q_res;
    corrected.lagging = q_res >= 0.0;
    corrected.power_factor = s_res > 0.0 ? p / s_res : 1.0;
    corrected.line_current_rms = s_res / (kSqrt3 * supply.line_voltage_rms);
    corrected.speed_rpm = uncompensated.speed_rpm;
    return corrected;
}

}  // namespace pfc
