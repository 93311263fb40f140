#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "pfc/capacitor_bank.hpp"

using namespace pfc;
using Catch::Approx;

namespace {
const SupplySpec kSupply{400.0, 50.0, 3};

CapacitorUnit unit(double uf, Connection conn, bool engaged = true, Health health = Health::kOk) {
    return {uf, conn, engaged, health};
}
}  // namespace

TEST_CASE("unit reactive power") {
    CHECK(unit_reactive_power(unit(20.0, Connection::kDelta), kSupply) == Approx(3015.93).margin(0.01));
    CHECK(unit_reactive_power(unit(20.0, Connection::kStar), kSupply) == Approx(1005.31).margin(0.01));
    CHECK(unit_reactive_power(unit(20.0, Connection::kStar, false), kSupply) == 0.0);
}

TEST_CASE("delta is exactly three times star") {
    for (double uf : {0.5, 2.5, 20.0, 47.0}) {
        const double star = unit_rated_var(uf, Connection::kStar, kSupply);
        const double delta = unit_rated_var(uf, Connection::kDelta, kSupply);
        CHECK(delta == 3.0 * star);  // exact by construction
    }
}

TEST_CASE("health decides the effective contribution") {
    CHECK(unit_reactive_power(unit(20.0, Connection::kStar, true, Health::kStuckOpen), kSupply) == 0.0);
    CHECK(unit_reactive_power(unit(20.0, Connection::kStar, false, Health::kStuckClosed), kSupply) ==
          Approx(1005.31).margin(0.01));
}

TEST_CASE("bank reactive power sums effectively engaged units") {
    BankState bank = make_bank({unit(20.0, Connection::kStar, false),
                                unit(20.0, Connection::kStar, false),
                                unit(20.0, Connection::kStar, false)});
    CHECK(bank_reactive_power(bank, kSupply) == 0.0);

    for (auto& u : bank.units) u.engaged = true;
    refresh_readback(bank);
    CHECK(bank_reactive_power(bank, kSupply) == Approx(3015.93).margin(0.01));
    CHECK(bank.effective_mask() == 0b111);
}

TEST_CASE("stuck-open unit reads back zero and contributes nothing") {
    BankState bank = make_bank({unit(20.0, Connection::kStar, false, Health::kStuckOpen)});
    bank = command_switches(bank, 0b1, 0.0, kSupply);
    CHECK(bank.command_bits == 0b1);
    CHECK(bank.readback_bits == 0);
    CHECK(bank_reactive_power(bank, kSupply) == 0.0);
}

TEST_CASE("toggling commands never changes a stuck unit's contribution") {
    std::mt19937 rng(2024);
    BankState bank = make_bank({unit(10.0, Connection::kStar, false, Health::kStuckOpen),
                                unit(15.0, Connection::kStar, false, Health::kStuckClosed),
                                unit(20.0, Connection::kStar, false)});
    const double open_var = unit_reactive_power(bank.units[0], kSupply);
    const double closed_var = unit_reactive_power(bank.units[1], kSupply);
    for (int i = 0; i < 200; ++i) {
        const BitMask desired = rng() & 0b111;
        bank = command_switches(bank, desired, i * 0.01, kSupply);
        CHECK(unit_reactive_power(bank.units[0], kSupply) == open_var);
        CHECK(unit_reactive_power(bank.units[1], kSupply) == closed_var);
    }
}

TEST_CASE("binary bank sizing") {
    SECTION("three star steps for 2100 VAr") {
        const auto units = size_binary_bank(2100.0, 3, kSupply, Connection::kStar);
        REQUIRE(units.size() == 3);
        const double expected_var[] = {300.0, 600.0, 1200.0};
        const double expected_uf[] = {5.968, 11.937, 23.873};
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(unit_rated_var(units[i], kSupply) == Approx(expected_var[i]).margin(1e-9));
            CHECK(units[i].capacitance_uf == Approx(expected_uf[i]).margin(5e-4));
        }
    }
    SECTION("a single step is exactly q_max") {
        const auto units = size_binary_bank(1234.5, 1, kSupply, Connection::kDelta);
        REQUIRE(units.size() == 1);
        CHECK(unit_rated_var(units[0], kSupply) == Approx(1234.5).epsilon(1e-12));
    }
    SECTION("each weight doubles the previous one") {
        const auto units = size_binary_bank(5000.0, 6, kSupply, Connection::kDelta);
        for (std::size_t i = 0; i + 1 < units.size(); ++i)
            CHECK(unit_rated_var(units[i + 1], kSupply) ==
                  Approx(2.0 * unit_rated_var(units[i], kSupply)).epsilon(1e-12));
    }
    SECTION("invalid arguments") {
        CHECK_THROWS_AS(size_binary_bank(0.0, 3, kSupply, Connection::kStar), std::domain_error);
        CHECK_THROWS_AS(size_binary_bank(-5.0, 3, kSupply, Connection::kStar), std::domain_error);
        CHECK_THROWS_AS(size_binary_bank(100.0, 0, kSupply, Connection::kStar),
                        std::invalid_argument);
        CHECK_THROWS_AS(size_binary_bank(100.0, 17, kSupply, Connection::kStar),
                        std::invalid_argument);
    }
}

TEST_CASE("binary banks reach every multiple of the step") {
    for (int n = 1; n <= 8; ++n) {
        const double q_max = 1000.0 + 333.0 * n;
        const auto units = size_binary_bank(q_max, n, kSupply, Connection::kStar);
        BankState bank = make_bank(units);
        const double q_step = q_max / (std::pow(2.0, n) - 1.0);
        const auto combos = 1u << n;
        for (unsigned mask = 0; mask < combos; ++mask) {
            double total = 0.0;
            for (int i = 0; i < n; ++i)
                if (mask & (1u << i)) total += unit_rated_var(bank.units[i], kSupply);
            CHECK(total == Approx(q_step * mask).epsilon(1e-9));
        }
    }
}

TEST_CASE("zero crossing grid") {
    CHECK(next_zero_crossing(0.0, 50.0) == Approx(0.0));
    CHECK(next_zero_crossing(0.003, 50.0) == Approx(0.010));
    CHECK(next_zero_crossing(0.010, 50.0) == Approx(0.010));
    CHECK(next_zero_crossing(0.0101, 50.0) == Approx(0.020));
    CHECK(next_zero_crossing(0.013, 60.0) == Approx(1.0 / 60.0 / 2.0 * 2.0).epsilon(1e-12));
}

TEST_CASE("engagements wait for the zero crossing, disengagements do not") {
    BankState bank = make_bank({unit(20.0, Connection::kStar, false)});
    std::vector<EngagementEvent> events;

    SECTION("request off the grid is queued to the next crossing") {
        bank = command_switches(bank, 0b1, 0.003, kSupply, &events);
        CHECK(bank.command_bits == 0b1);
        CHECK_FALSE(bank.units[0].engaged);
        CHECK(bank.readback_bits == 0);
        REQUIRE(bank.pending.size() == 1);
        CHECK(bank.pending[0].due_s == Approx(0.010));

        bank = apply_pending(bank, 0.0095, &events);
        CHECK_FALSE(bank.units[0].engaged);

        bank = apply_pending(bank, 0.010, &events);
        CHECK(bank.units[0].engaged);
        CHECK(bank.readback_bits == 0b1);
        REQUIRE(events.size() == 1);
        CHECK(events[0].time_s == Approx(0.010));
    }
    SECTION("request exactly on the grid engages immediately") {
        bank = command_switches(bank, 0b1, 0.010, kSupply, &events);
        CHECK(bank.units[0].engaged);
        CHECK(bank.pending.empty());
        REQUIRE(events.size() == 1);
        CHECK(events[0].time_s == Approx(0.010));
    }
    SECTION("disengagement is immediate") {
        bank = command_switches(bank, 0b1, 0.010, kSupply, &events);
        bank = command_switches(bank, 0b0, 0.013, kSupply, &events);
        CHECK_FALSE(bank.units[0].engaged);
        CHECK(bank.command_bits == 0);
        CHECK(bank.readback_bits == 0);
    }
    SECTION("disengage cancels a queued engagement") {
        bank = command_switches(bank, 0b1, 0.003, kSupply, &events);
        bank = command_switches(bank, 0b0, 0.004, kSupply, &events);
        CHECK(bank.pending.empty());
        bank = apply_pending(bank, 1.0, &events);
        CHECK_FALSE(bank.units[0].engaged);
        CHECK(events.empty());
    }
}

TEST_CASE("every engagement lands on the half-period grid") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> jitter(0.0, 0.05);
    BankState bank = make_bank({unit(5.0, Connection::kStar, false),
                                unit(10.0, Connection::kStar, false),
                                unit(20.0, Connection::kStar, false)});
    std::vector<EngagementEvent> events;
    double now = 0.0;
    for (int i = 0; i < 300; ++i) {
        now += jitter(rng);
        bank = apply_pending(bank, now, &events);
        bank = command_switches(bank, rng() & 0b111, now, kSupply, &events);
    }
    const double half = 0.5 / kSupply.frequency_hz;
    for (const EngagementEvent& event : events) {
        const double cycles = event.time_s / half;
        CHECK(std::abs(cycles - std::round(cycles)) < 1e-6);
    }
}

TEST_CASE("bank construction validates") {
    CHECK_THROWS_AS(make_bank({unit(0.0, Connection::kStar)}), std::invalid_argument);
    CHECK_THROWS_AS(make_bank(std::vector<CapacitorUnit>(17, unit(1.0, Connection::kStar))),
                    std::invalid_argument);
    BankState bank = make_bank({unit(1.0, Connection::kStar)});
    CHECK_THROWS_AS(command_switches(bank, 0b10, 0.0, kSupply), std::invalid_argument);
}
