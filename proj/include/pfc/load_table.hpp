#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "pfc/phasor.hpp"

// Table-driven surrogate of the induction motor: measured (current, pf, speed)
// rows with linear interpolation in between. No extrapolation: outside the
// measured range a lookup is an error, not a guess.

namespace pfc {

struct LoadRow {
    double current_a = 0.0;
    double power_factor = 1.0;
    double speed_rpm = 0.0;
};

class LoadTable {
  public:
    static LoadTable from_rows(std::vector<LoadRow> rows) {
        if (rows.size() < 2)
            throw std::invalid_argument("load table: needs at least 2 rows, got " +
                                        std::to_string(rows.size()));
        std::sort(rows.begin(), rows.end(),
                  [](const LoadRow& a, const LoadRow& b) { return a.current_a < b.current_a; });
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const LoadRow& row = rows[i];
            if (!(row.power_factor > 0.0) || row.power_factor > 1.0)
                throw std::invalid_argument("load table row " + std::to_string(i) + " (current=" +
                                            std::to_string(row.current_a) +
                                            "): power factor must be in (0, 1]");
            if (i > 0 && !(rows[i - 1].current_a < row.current_a))
                throw std::invalid_argument("load table row " + std::to_string(i) +
                                            ": duplicate current " + std::to_string(row.current_a));
        }
        return LoadTable(std::move(rows));
    }

    const std::vector<LoadRow>& rows() const { return rows_; }
    double min_current() const { return rows_.front().current_a; }
    double max_current() const { return rows_.back().current_a; }
    bool contains(double current_a) const {
        return current_a >= min_current() && current_a <= max_current();
    }

    // pf and speed interpolate linearly between the bracketing rows and are
    // exact at the knots; P and Q come from the power triangle.
    OperatingPoint lookup(double current_a, const SupplySpec& supply) const {
        if (current_a < min_current())
            throw std::out_of_range("load current " + std::to_string(current_a) +
                                    " A below table minimum " + std::to_string(min_current()) + " A");
        if (current_a > max_current())
            throw std::out_of_range("load current " + std::to_string(current_a) +
                                    " A above table maximum " + std::to_string(max_current()) + " A");
        auto hi = std::lower_bound(rows_.begin(), rows_.end(), current_a,
                                   [](const LoadRow& row, double c) { return row.current_a < c; });
        double pf, speed;
        if (hi->current_a == current_a) {
            pf = hi->power_factor;
            speed = hi->speed_rpm;
        } else {
            auto lo = hi - 1;
            const double frac = (current_a - lo->current_a) / (hi->current_a - lo->current_a);
            pf = lo->power_factor + frac * (hi->power_factor - lo->power_factor);
            speed = lo->speed_rpm + frac * (hi->speed_rpm - lo->speed_rpm);
        }
        return derive_point(supply, current_a, pf, speed);
    }

  private:
    explicit LoadTable(std::vector<LoadRow> rows) : rows_(std::move(rows)) {}
    std::vector<LoadRow> rows_;
};

// The 3.7 kW test motor's measured characteristic (3..7 A).
inline LoadTable default_load_table() {
    return LoadTable::from_rows({{3.0, 0.24, 1447.0},
                                 {4.0, 0.28, 1467.0},
                                 {5.0, 0.37, 1465.0},
                                 {6.0, 0.40, 1446.0},
                                 {7.0, 0.41, 1441.0}});
}

}  // namespace pfc
