#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <sstream>

#include "pfc/simulation.hpp"

using namespace pfc;
using Catch::Approx;

namespace {

ScenarioConfig constant_load(double current_a, ControlMode mode = ControlMode::kGreedy) {
    ScenarioConfig cfg = default_scenario(mode);
    cfg.profile = {{0.0, current_a}};
    cfg.duration_s = 1.0;
    return cfg;
}

std::size_t steady_horizon(const ScenarioConfig& cfg) {
    return static_cast<std::size_t>(cfg.controller.debounce_scans) + cfg.bank_units.size() + 2;
}

}  // namespace

TEST_CASE("constant 4 A greedy run settles on 2520 VAr") {
    const SimResult result = run_scenario(constant_load(4.0));
    const SimRecord& last = result.records.back();
    CHECK(last.q_cap_var == Approx(2520.0).margin(1e-6));
    CHECK(last.pf_corrected == Approx(0.984).margin(1e-3));
    CHECK(last.lagging);
    CHECK(last.engaged_mask == 0b1110);  // 360 + 720 + 1440
    CHECK(last.q_load_var == Approx(2660.43).margin(0.05));
}

TEST_CASE("constant 7 A lookup run reaches combo C") {
    ScenarioConfig cfg = constant_load(7.0, ControlMode::kLookup);
    cfg.duration_s = 2.0;
    const SimResult result = run_scenario(cfg);
    const SimRecord& last = result.records.back();
    CHECK(last.engaged_mask == default_combo_presets().c);
    CHECK(last.q_cap_var == Approx(3015.93).margin(0.01));
    CHECK(last.pf_corrected > 0.41);
    CHECK(last.lagging);
}

TEST_CASE("the relay mask is steady after the debounce horizon") {
    for (double current : {3.0, 5.0, 7.0}) {
        const ScenarioConfig cfg = constant_load(current);
        const SimResult result = run_scenario(cfg);
        const std::size_t horizon = steady_horizon(cfg);
        REQUIRE(result.records.size() > horizon);
        const BitMask steady = result.records[horizon].engaged_mask;
        for (std::size_t k = horizon; k < result.records.size(); ++k)
            CHECK(result.records[k].engaged_mask == steady);
    }
}

TEST_CASE("every record satisfies the power triangle") {
    ScenarioConfig cfg = constant_load(6.0);
    cfg.profile = {{0.0, 6.0}, {0.5, 3.5}};
    const SimResult result = run_scenario(cfg);
    for (const SimRecord& r : result.records) {
        const double p = real_power(cfg.supply, r.load_current_a, r.pf_uncompensated);
        const double q_res = r.q_load_var - r.q_cap_var;
        const double s_corr = kSqrt3 * cfg.supply.line_voltage_rms * r.corrected_current_a;
        CHECK(s_corr * s_corr == Approx(p * p + q_res * q_res).epsilon(1e-6));
        CHECK(r.lagging == (q_res >= 0.0));
    }
}

TEST_CASE("records and CSV are deterministic") {
    const ScenarioConfig cfg = constant_load(5.0);
    const std::string first = records_csv(run_scenario(cfg).records);
    const std::string second = records_csv(run_scenario(cfg).records);
    CHECK(first == second);
    CHECK(first.substr(0, first.find('\n')) ==
          "t_s,i_load_a,pf_uncomp,q_load_var,mask,q_cap_var,pf_corr,i_corr_a,lagging,faults");
}

TEST_CASE("engagements land on voltage zero crossings even with an odd scan period") {
    ScenarioConfig cfg = constant_load(6.0);
    cfg.controller.scan_period_s = 0.007;
    cfg.profile = {{0.0, 6.0}, {0.3, 3.0}, {0.6, 7.0}};
    const SimResult result = run_scenario(cfg);
    REQUIRE_FALSE(result.engagements.empty());
    const double half = 0.5 / cfg.supply.frequency_hz;
    for (const EngagementEvent& event : result.engagements) {
        const double cycles = event.time_s / half;
        CHECK(std::abs(cycles - std::round(cycles)) * half <= cfg.controller.scan_period_s);
    }
}

TEST_CASE("injected stuck-open fault is latched and compensated around") {
    ScenarioConfig cfg = constant_load(4.0);
    cfg.duration_s = 1.5;
    cfg.faults = {{0.5, 3, Health::kStuckOpen}};  // the 1440 VAr unit carries the 4 A mask
    const SimResult result = run_scenario(cfg);

    const std::size_t injection_scan = 50;
    const int k = cfg.controller.fault_scans;

    // Q_cap drops the moment the unit sticks open
    CHECK(result.records[injection_scan].q_cap_var == Approx(1080.0).margin(1e-6));
    // latch lands exactly K scans after the first mismatched readback
    const std::size_t latch_scan = injection_scan + static_cast<std::size_t>(k) - 1;
    CHECK(result.records[latch_scan - 1].active_faults.empty());
    REQUIRE_FALSE(result.records[latch_scan].active_faults.empty());
    CHECK(result.records[latch_scan].active_faults[0].first == 3);
    CHECK(result.records[latch_scan].active_faults[0].second == FaultKind::kStuckOpen);

    // steady state re-selects the best mask without the dead unit: 180+360+720
    const SimRecord& last = result.records.back();
    CHECK(last.q_cap_var == Approx(1260.0).margin(1e-6));
    CHECK((last.engaged_mask & (BitMask{1} << 3)) == 0);
    CHECK(last.lagging);
}

TEST_CASE("a stuck-open unit strictly reduces Q_cap until the controller reselects") {
    ScenarioConfig cfg = constant_load(4.0);
    cfg.duration_s = 1.5;
    cfg.faults = {{0.5, 3, Health::kStuckOpen}};
    const SimResult result = run_scenario(cfg);
    const double before = result.records[49].q_cap_var;
    const double during = result.records[52].q_cap_var;
    const double after = result.records.back().q_cap_var;
    CHECK(during < before);
    CHECK(after > during);
}

TEST_CASE("uncompensated sweep reproduces the measured table") {
    const ScenarioConfig cfg = default_scenario();
    const auto rows = sweep({3.0, 4.0, 5.0, 6.0, 7.0}, false, cfg);
    const double expected_q[] = {2017.8, 2660.4, 3218.3, 3809.8, 4423.4};
    const double expected_pf[] = {0.24, 0.28, 0.37, 0.40, 0.41};
    REQUIRE(rows.size() == 5);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        REQUIRE(rows[i].record.has_value());
        CHECK(rows[i].record->q_load_var == Approx(expected_q[i]).margin(0.5));
        CHECK(rows[i].record->pf_uncompensated == expected_pf[i]);
        CHECK(rows[i].record->q_cap_var == 0.0);
        CHECK(rows[i].record->engaged_mask == 0);
    }
}

TEST_CASE("empty sweep yields an empty table") {
    CHECK(sweep({}, false, default_scenario()).empty());
    CHECK(sweep_csv(sweep({}, false, default_scenario())) ==
          std::string(kRecordCsvHeader) + "\n");
}

TEST_CASE("compensated sweep at 4 A meets the target power factor") {
    const auto rows = sweep({4.0}, true, default_scenario());
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].record.has_value());
    CHECK(rows[0].record->pf_corrected >= 0.95);
    CHECK(rows[0].record->lagging);
}

TEST_CASE("sweep reports per-row range errors and keeps the rest") {
    const auto rows = sweep({2.0, 4.0, 9.0}, false, default_scenario());
    REQUIRE(rows.size() == 3);
    CHECK_FALSE(rows[0].error.empty());
    CHECK(rows[0].record == std::nullopt);
    CHECK(rows[1].error.empty());
    REQUIRE(rows[1].record.has_value());
    CHECK_FALSE(rows[2].error.empty());

    // errored rows are skipped in the CSV body
    const std::string csv = sweep_csv(rows);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
}

TEST_CASE("waveform dump lags the current by the load phase angle") {
    const ScenarioConfig cfg = default_scenario();

    auto first_rising_zero = [](const std::string& csv, std::size_t column) {
        std::istringstream in(csv);
        std::string line;
        std::getline(in, line);  // header
        double previous = 0.0;
        double t = 0.0, t_prev = 0.0;
        bool first = true;
        while (std::getline(in, line)) {
            std::istringstream fields(line);
            std::string cell;
            std::vector<double> row;
            while (std::getline(fields, cell, ',')) row.push_back(std::stod(cell));
            if (!first && previous < 0.0 && row[column] >= 0.0 && t_prev > 0.0)
                return t_prev + (row[0] - t_prev) * (-previous) / (row[column] - previous);
            previous = row[column];
            t_prev = row[0];
            t = row[0];
            first = false;
        }
        return t;
    };
    // Crossings of v and i may come from adjacent cycles; fold into one.
    auto lag_degrees = [&](const std::string& csv) {
        double deg = (first_rising_zero(csv, 2) - first_rising_zero(csv, 1)) * 50.0 * 360.0;
        deg = std::fmod(deg + 720.0, 360.0);
        return deg > 180.0 ? deg - 360.0 : deg;
    };

    SECTION("3 A point lags by 76.11 degrees") {
        const std::string csv = dump_waveforms(3.0, 20000.0, 3, false, cfg);
        CHECK(lag_degrees(csv) == Approx(76.11).margin(0.5));
    }
    SECTION("7 A point lags by 65.79 degrees") {
        const std::string csv = dump_waveforms(7.0, 20000.0, 3, false, cfg);
        CHECK(lag_degrees(csv) == Approx(65.79).margin(0.5));
    }
    SECTION("unity power factor dumps with zero lag") {
        const std::string csv = waveform_csv(cfg.supply, 1.12, 0.0, 20000.0, 2);
        const double lag = first_rising_zero(csv, 2) - first_rising_zero(csv, 1);
        CHECK(std::abs(lag) <= 1.0 / 20000.0);
    }
    SECTION("compensated dump uses the corrected point") {
        const std::string csv = dump_waveforms(4.0, 20000.0, 3, true, cfg);
        CHECK(lag_degrees(csv) == Approx(std::acos(0.984) * 180.0 / kPi).margin(1.0));
    }
    SECTION("out-of-table current is a range error") {
        CHECK_THROWS_AS(dump_waveforms(2.0, 20000.0, 3, false, cfg), std::out_of_range);
    }
}

TEST_CASE("waveform CSV has the documented shape") {
    const ScenarioConfig cfg = default_scenario();
    const std::string csv = dump_waveforms(3.0, 1000.0, 1, false, cfg);
    std::istringstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "t_s,v_volts,i_amperes,v_square,i_square,xor_level");
    std::size_t rows = 0;
    std::string line;
    std::set<std::string> square_values;
    while (std::getline(in, line)) {
        ++rows;
        std::istringstream fields(line);
        std::string cell;
        std::vector<std::string> row;
        while (std::getline(fields, cell, ',')) row.push_back(cell);
        REQUIRE(row.size() == 6);
        square_values.insert(row[3]);
        square_values.insert(row[4]);
        square_values.insert(row[5]);
    }
    CHECK(rows == 20);  // one cycle at 1 kHz
    for (const std::string& v : square_values) CHECK((v == "0" || v == "24"));
}

TEST_CASE("zero-duration scenarios are rejected before stepping") {
    ScenarioConfig cfg = default_scenario();
    cfg.duration_s = 0.0;
    CHECK_THROWS_AS(run_scenario(cfg), ConfigError);
}
