#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "pfc/phasor.hpp"

// Models the interfacing circuit between the power terminals and the PLC:
// waveform synthesis, comparators, the XOR phase detector, negative-peak
// clipping, an ideal peak detector, the digital-input threshold bands, and a
// 12-bit ADC. All stages are deterministic functions over sampled signals.
//
// The XOR detector's duty cycle equals phase_lag / pi, so phase resolution is
// set by the sample grid: at 400 samples per cycle the worst-case error is
// 2*pi/400 (~0.9 degrees).

namespace pfc {

inline constexpr double kLogicHighVolts = 24.0;
inline constexpr double kLogicLowVolts = 0.0;
inline constexpr double kMinSamplesPerCycle = 20.0;

struct SampledSignal {
    double sample_rate_hz = 0.0;
    double fundamental_hz = 0.0;
    std::vector<double> samples;

    std::size_t samples_per_period() const {
        return static_cast<std::size_t>(std::llround(sample_rate_hz / fundamental_hz));
    }
};

struct LogicSignal {
    double sample_rate_hz = 0.0;
    double fundamental_hz = 0.0;
    std::vector<bool> levels;  // true = 24 V, false = 0 V

    std::size_t samples_per_period() const {
        return static_cast<std::size_t>(std::llround(sample_rate_hz / fundamental_hz));
    }
};

inline SampledSignal synthesize(double amplitude_rms, double phase_lag_rad, const SupplySpec& supply,
                                double sample_rate_hz, int cycles) {
    if (cycles < 1) throw std::invalid_argument("cycles must be >= 1");
    if (sample_rate_hz < kMinSamplesPerCycle * supply.frequency_hz)
        throw std::invalid_argument("sample rate " + std::to_string(sample_rate_hz) +
                                    " Hz too low; need >= 20 samples per cycle of " +
                                    std::to_string(supply.frequency_hz) + " Hz");
    const auto count = static_cast<std::size_t>(
        std::llround(cycles * sample_rate_hz / supply.frequency_hz));
    SampledSignal signal{sample_rate_hz, supply.frequency_hz, {}};
    signal.samples.resize(count);
    const double peak = kSqrt2 * amplitude_rms;
    const double w = supply.omega();
    for (std::size_t k = 0; k < count; ++k)
        signal.samples[k] = peak * std::sin(w * static_cast<double>(k) / sample_rate_hz - phase_lag_rad);
    return signal;
}

// Zero-hysteresis comparator; an exact-zero sample holds the previous level
// (initially low) so the output is deterministic.
inline LogicSignal comparator(const SampledSignal& signal) {
    LogicSignal out{signal.sample_rate_hz, signal.fundamental_hz, {}};
    out.levels.reserve(signal.samples.size());
    bool level = false;
    for (double s : signal.samples) {
        if (s > 0.0)
            level = true;
        else if (s < 0.0)
            level = false;
        out.levels.push_back(level);
    }
    return out;
}

// Fraction of samples where exactly one input is high, averaged over the
// largest whole number of fundamental periods.
inline double xor_duty(const LogicSignal& a, const LogicSignal& b) {
    if (a.levels.size() != b.levels.size())
        throw std::invalid_argument("xor_duty: length mismatch (" + std::to_string(a.levels.size()) +
                                    " vs " + std::to_string(b.levels.size()) + ")");
    if (a.sample_rate_hz != b.sample_rate_hz || a.fundamental_hz != b.fundamental_hz)
        throw std::invalid_argument("xor_duty: sample rate or fundamental mismatch");
    const std::size_t spp = a.samples_per_period();
    if (spp == 0 || a.levels.size() < spp)
        throw std::invalid_argument("xor_duty: needs at least one full fundamental period");
    const std::size_t used = (a.levels.size() / spp) * spp;
    std::size_t high = 0;
    for (std::size_t k = 0; k < used; ++k)
        if (a.levels[k] != b.levels[k]) ++high;
    return static_cast<double>(high) / static_cast<double>(used);
}

inline double phase_from_duty(double duty) {
    if (duty < 0.0 || duty > 1.0)
        throw std::domain_error("duty must be in [0, 1], got " + std::to_string(duty));
    return kPi * duty;
}

inline SampledSignal clip_negative(SampledSignal signal) {
    for (double& s : signal.samples) s = std::max(s, 0.0);
    return signal;
}

// Ideal hold, refreshed once per period: the maximum over the most recent
// full fundamental period.
inline double peak_detect(const SampledSignal& signal) {
    const std::size_t spp = signal.samples_per_period();
    if (spp == 0 || signal.samples.size() < spp)
        throw std::invalid_argument("peak_detect: needs at least one full fundamental period");
    const auto begin = signal.samples.end() - static_cast<std::ptrdiff_t>(spp);
    return *std::max_element(begin, signal.samples.end());
}

// Unipolar ADC: clamps, scales to the code range, rounds half up.
inline int adc_convert(double voltage, double full_scale = 10.0, int bits = 12) {
    if (!(full_scale > 0.0)) throw std::invalid_argument("adc full scale must be > 0");
    if (bits < 1 || bits > 30) throw std::invalid_argument("adc bits out of range");
    const double clamped = std::clamp(voltage, 0.0, full_scale);
    const int max_code = (1 << bits) - 1;
    return static_cast<int>(std::floor(clamped / full_scale * max_code + 0.5));
}

// 24 V digital input: [13, 30] V reads 1, [-3, 5] V reads 0, the gap between
// holds the previous level. Outside [-3, 30] V is an over-range fault.
inline bool digital_input_level(double voltage, bool previous) {
    if (voltage > 30.0 || voltage < -3.0)
        throw std::out_of_range("digital input over-range: " + std::to_string(voltage) + " V");
    if (voltage >= 13.0) return true;
    if (voltage <= 5.0) return false;
    return previous;
}

// Peak-detector output back to RMS, through the configured CT ratio.
inline double scale_peak_to_rms(double peak, double ct_ratio = 1.0) {
    if (peak < 0.0) throw std::domain_error("peak must be >= 0");
    return peak / kSqrt2 * ct_ratio;
}

}  // namespace pfc
