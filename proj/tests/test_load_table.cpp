#include <catch2/catch_amalgamated.hpp>

#include "pfc/load_table.hpp"

using namespace pfc;
using Catch::Approx;

namespace {
const SupplySpec kSupply{400.0, 50.0, 3};
}

TEST_CASE("lookup is exact at the knots") {
    const LoadTable table = default_load_table();
    const OperatingPoint low = table.lookup(3.0, kSupply);
    CHECK(low.power_factor == 0.24);
    CHECK(low.speed_rpm == 1447.0);
    const OperatingPoint high = table.lookup(7.0, kSupply);
    CHECK(high.power_factor == 0.41);
    CHECK(high.speed_rpm == 1441.0);
}

TEST_CASE("lookup interpolates linearly between knots") {
    const LoadTable table = default_load_table();
    const OperatingPoint mid = table.lookup(3.5, kSupply);
    CHECK(mid.power_factor == Approx(0.26).margin(1e-12));
    CHECK(*mid.speed_rpm == Approx(1457.0).margin(1e-9));
    // P and Q come through the power triangle
    CHECK(mid.real_power_w == Approx(real_power(kSupply, 3.5, mid.power_factor)).epsilon(1e-12));
    CHECK(mid.reactive_power_var ==
          Approx(reactive_power(kSupply, 3.5, mid.power_factor)).epsilon(1e-12));
}

TEST_CASE("no extrapolation outside the table") {
    const LoadTable table = default_load_table();
    CHECK_THROWS_AS(table.lookup(2.0, kSupply), std::out_of_range);
    CHECK_THROWS_AS(table.lookup(7.001, kSupply), std::out_of_range);
}

TEST_CASE("interpolated pf stays bounded by the bracketing knots") {
    const LoadTable table = default_load_table();
    const auto& rows = table.rows();
    for (std::size_t seg = 0; seg + 1 < rows.size(); ++seg) {
        const double lo_pf = std::min(rows[seg].power_factor, rows[seg + 1].power_factor);
        const double hi_pf = std::max(rows[seg].power_factor, rows[seg + 1].power_factor);
        for (int step = 0; step <= 10; ++step) {
            const double c = rows[seg].current_a +
                             (rows[seg + 1].current_a - rows[seg].current_a) * step / 10.0;
            const double pf = table.lookup(c, kSupply).power_factor;
            CHECK(pf >= lo_pf - 1e-12);
            CHECK(pf <= hi_pf + 1e-12);
        }
    }
}

TEST_CASE("pf is monotone in current when the knot column is monotone") {
    const LoadTable table = default_load_table();
    double previous = table.lookup(3.0, kSupply).power_factor;
    for (double c = 3.05; c <= 7.0; c += 0.05) {
        const double pf = table.lookup(c, kSupply).power_factor;
        CHECK(pf >= previous - 1e-12);
        previous = pf;
    }
}

TEST_CASE("construction validates and sorts") {
    SECTION("unsorted input comes out sorted") {
        const LoadTable table = LoadTable::from_rows({{7.0, 0.41, 1441.0}, {3.0, 0.24, 1447.0}});
        CHECK(table.min_current() == 3.0);
        CHECK(table.max_current() == 7.0);
    }
    SECTION("duplicate currents are rejected") {
        CHECK_THROWS_WITH(LoadTable::from_rows({{3.0, 0.24, 1447.0}, {3.0, 0.3, 1450.0}}),
                          Catch::Matchers::ContainsSubstring("duplicate"));
    }
    SECTION("pf out of range is rejected with the offending row") {
        CHECK_THROWS_WITH(LoadTable::from_rows({{3.0, 1.2, 1447.0}, {4.0, 0.3, 1450.0}}),
                          Catch::Matchers::ContainsSubstring("row 0"));
    }
    SECTION("fewer than two rows is rejected") {
        CHECK_THROWS_AS(LoadTable::from_rows({{3.0, 0.24, 1447.0}}), std::invalid_argument);
        CHECK_THROWS_AS(LoadTable::from_rows({}), std::invalid_argument);
    }
}
