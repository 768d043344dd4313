#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "uasim/rng.hpp"
#include "uasim/tvir.hpp"
#include "uasim/uatv.hpp"

using namespace uasim;

namespace {

Tvir random_tvir(size_t T, size_t D, Rng& rng, double zero_fraction = 0.0) {
    Tvir x(T, D);
    for (auto& v : x.data) {
        if (zero_fraction > 0.0 && rng.uniform01() < zero_fraction) {
            v = {0.0, 0.0};
        } else {
            v = {rng.normal(), rng.normal()};
        }
    }
    return x;
}

}  // namespace

TEST_CASE("featurize basic mappings") {
    SECTION("unit real tap and zero tap") {
        const auto h = featurize({{1.0, 0.0}, {0.0, 0.0}});
        REQUIRE(h == std::vector<double>{1, 0, 0, 0, 1, 1});
    }
    SECTION("purely imaginary tap has phase pi/2") {
        const auto h = featurize({{0.0, 1.0}});
        REQUIRE(h[0] == Catch::Approx(1.0));
        REQUIRE(h[1] == Catch::Approx(1.0));
        REQUIRE(h[2] == Catch::Approx(0.0).margin(1e-15));
    }
    SECTION("non-finite input rejected") {
        REQUIRE_THROWS_AS(featurize({{std::nan(""), 0.0}}), InvalidInput);
    }
}

TEST_CASE("defeaturize basic mappings") {
    SECTION("[1,0,1] -> 1+0i") {
        const auto c = defeaturize({1, 0, 1});
        REQUIRE(c[0].real() == Catch::Approx(1.0));
        REQUIRE(c[0].imag() == Catch::Approx(0.0).margin(1e-15));
    }
    SECTION("[2,1,0] -> 2i") {
        const auto c = defeaturize({2, 1, 0});
        REQUIRE(c[0].real() == Catch::Approx(0.0).margin(1e-15));
        REQUIRE(c[0].imag() == Catch::Approx(2.0));
    }
    SECTION("phase from two-argument arctangent") {
        const auto c = defeaturize({1, 0.6, 0.8});
        REQUIRE(std::abs(c[0]) == Catch::Approx(1.0));
        REQUIRE(std::arg(c[0]) == Catch::Approx(std::atan2(0.6, 0.8)));
    }
    SECTION("degenerate sin=cos=0 with positive amplitude is flagged, phase 0") {
        DefeaturizeStats stats;
        const auto c = defeaturize({0.5, 0.0, 0.0}, &stats);
        REQUIRE(stats.degenerate_taps == 1);
        REQUIRE(c[0].real() == Catch::Approx(0.5));
        REQUIRE(c[0].imag() == 0.0);
    }
    SECTION("negative amplitude clamps to zero") {
        const auto c = defeaturize({-1.0, 0.0, 1.0});
        REQUIRE(std::abs(c[0]) == 0.0);
    }
    SECTION("off-circle sin/cos pairs renormalize implicitly") {
        const auto c = defeaturize({2.0, 0.3, 0.4});  // magnitude 0.5 pair
        REQUIRE(std::abs(c[0]) == Catch::Approx(2.0));
        REQUIRE(std::arg(c[0]) == Catch::Approx(std::atan2(0.3, 0.4)));
    }
}

TEST_CASE("featurize/defeaturize round trip over random CIRs") {
    Rng rng(101);
    double max_err = 0.0;
    double max_circle_err = 0.0;
    for (int trial = 0; trial < 10000; ++trial) {
        std::vector<cdouble> cir(250);
        for (auto& v : cir) {
            if (rng.uniform01() < 0.3) {
                v = {0.0, 0.0};
            } else {
                v = {rng.normal(), rng.normal()};
            }
        }
        const auto h = featurize(cir);
        const auto back = defeaturize(h);
        for (size_t j = 0; j < cir.size(); ++j)
            max_err = std::max(max_err, std::abs(back[j] - cir[j]));
        for (size_t j = 0; j < cir.size(); ++j) {
            const double s = h[250 + j], c = h[500 + j];
            max_circle_err = std::max(max_circle_err, std::abs(s * s + c * c - 1.0));
        }
    }
    REQUIRE(max_err < 1e-12);        // double precision path
    REQUIRE(max_circle_err < 1e-9);  // unit-circle invariant
}

TEST_CASE("normalize_tvir straightens and scales") {
    SECTION("peak 0.5 at tap 37 moves to anchor 20 with scale 0.5, shift -17") {
        Tvir x(3, 64);
        x.at(0, 37) = {0.5, 0.0};
        x.at(1, 37) = {0.4, 0.1};
        x.at(2, 38) = {0.3, 0.0};
        auto [y, rec] = normalize_tvir(x, 20);
        REQUIRE(rec.scale == Catch::Approx(0.5));
        REQUIRE(rec.shift == -17);
        REQUIRE(std::abs(y.at(0, 20)) == 1.0);  // exact
        size_t peak = 0;
        double best = 0;
        for (size_t j = 0; j < y.D; ++j)
            if (std::abs(y.at(0, j)) > best) {
                best = std::abs(y.at(0, j));
                peak = j;
            }
        REQUIRE(peak == 20);
    }
    SECTION("already normalized input is the identity transform") {
        Tvir x(1, 32);
        x.at(0, 20) = {1.0, 0.0};
        x.at(0, 5) = {0.25, 0.0};
        auto [y, rec] = normalize_tvir(x, 20);
        REQUIRE(rec.scale == 1.0);
        REQUIRE(rec.shift == 0);
        REQUIRE(y.data == x.data);
    }
    SECTION("later snapshots may exceed 1 (relaxed normalization)") {
        Tvir x(2, 32);
        x.at(0, 10) = {1.0, 0.0};
        x.at(1, 10) = {1.3, 0.0};
        auto [y, rec] = normalize_tvir(x, 20);
        (void)rec;
        REQUIRE(std::abs(y.at(1, 20)) == Catch::Approx(1.3));
    }
    SECTION("all-zero first snapshot is degenerate") {
        Tvir x(2, 16);
        x.at(1, 3) = {1.0, 0.0};
        REQUIRE_THROWS_AS(normalize_tvir(x, 5), DegenerateInput);
    }
    SECTION("ties broken toward the lowest tap index") {
        Tvir x(1, 16);
        x.at(0, 4) = {0.7, 0.0};
        x.at(0, 9) = {0.0, 0.7};
        auto [y, rec] = normalize_tvir(x, 2);
        (void)y;
        REQUIRE(rec.shift == 2 - 4);
    }
    SECTION("wrapped energy is reported for non-compact inputs") {
        Tvir x(1, 16);
        x.at(0, 0) = {1.0, 0.0};
        x.at(0, 15) = {0.9, 0.0};  // will wrap when shifting right
        auto [y, rec] = normalize_tvir(x, 4);
        (void)y;
        REQUIRE(rec.wrapped_energy_db > -40.0);
    }
}

TEST_CASE("denormalize_tvir inverts normalize_tvir") {
    Rng rng(77);
    SECTION("round trip on a zero-padded TVIR") {
        for (int trial = 0; trial < 50; ++trial) {
            Tvir x(4, 64);
            // Compact support well inside the window: shift never wraps energy.
            for (size_t t = 0; t < 4; ++t)
                for (size_t j = 24; j < 40; ++j) x.at(t, j) = {rng.normal(), rng.normal()};
            x.at(0, 30) = {10.0, 0.0};  // dominant peak
            auto [y, rec] = normalize_tvir(x, 20);
            const Tvir back = denormalize_tvir(y, rec);
            for (size_t i = 0; i < x.data.size(); ++i)
                REQUIRE(std::abs(back.data[i] - x.data[i]) < 1e-12);
        }
    }
    SECTION("scale 1 shift 0 is the identity") {
        Tvir x = random_tvir(2, 8, rng);
        NormalizationRecord rec;
        const Tvir y = denormalize_tvir(x, rec);
        REQUIRE(y.data == x.data);
    }
    SECTION("scale 2 multiplies all entries") {
        Tvir x(1, 4);
        for (auto& v : x.data) v = {1.0, 0.0};
        NormalizationRecord rec;
        rec.scale = 2.0;
        const Tvir y = denormalize_tvir(x, rec);
        for (const auto& v : y.data) REQUIRE(v.real() == Catch::Approx(2.0));
    }
}

TEST_CASE("resample_time") {
    Rng rng(5);
    SECTION("same rate is the identity") {
        const Tvir x = random_tvir(20, 16, rng);
        const Tvir y = resample_time(x, x.rate());
        REQUIRE(y.data == x.data);
    }
    SECTION("8 snapshots at 8 Hz become 20 at 20 Hz; duration preserved") {
        Tvir x(8, 4, 1.0 / 8.0);
        for (auto& v : x.data) v = {rng.normal(), rng.normal()};
        const Tvir y = resample_time(x, 20.0);
        REQUIRE(y.T == 20);
        REQUIRE(y.time_step == Catch::Approx(0.05));
        REQUIRE(std::abs(y.duration() - x.duration()) <= 0.05 + 1e-12);
    }
    SECTION("constant-in-time TVIR stays constant when upsampled") {
        Tvir x(5, 3, 0.1);
        for (size_t t = 0; t < 5; ++t)
            for (size_t j = 0; j < 3; ++j) x.at(t, j) = {1.5, -0.5};
        const Tvir y = resample_time(x, 40.0);
        for (const auto& v : y.data) {
            REQUIRE(v.real() == Catch::Approx(1.5));
            REQUIRE(v.imag() == Catch::Approx(-0.5));
        }
    }
    SECTION("upsampling a single snapshot is invalid") {
        Tvir x(1, 3, 0.05);
        x.at(0, 0) = {1.0, 0.0};
        REQUIRE_THROWS_AS(resample_time(x, 40.0), InvalidInput);
    }
    SECTION("downsample 20 Hz to 8 Hz and back preserves linear ramps") {
        Tvir x(20, 2, 0.05);
        for (size_t t = 0; t < 20; ++t) x.at(t, 0) = {static_cast<double>(t), 0.0};
        const Tvir y = resample_time(x, 8.0);
        REQUIRE(y.T == 8);
        for (size_t t = 0; t < y.T; ++t)
            REQUIRE(y.at(t, 0).real() == Catch::Approx(static_cast<double>(t) * 20.0 / 8.0));
    }
}

TEST_CASE("UATV container round trip") {
    Rng rng(9);
    std::vector<TvirRecord> records;
    for (int i = 0; i < 3; ++i) {
        TvirRecord rec;
        rec.tvir = random_tvir(4, 8, rng);
        rec.metadata = {{"index", i}, {"note", "test"}};
        records.push_back(std::move(rec));
    }
    std::ostringstream buf(std::ios::binary);
    write_uatv(buf, records);
    const std::string bytes = buf.str();
    REQUIRE(bytes.substr(0, 4) == "UATV");

    std::istringstream in(bytes, std::ios::binary);
    const auto back = read_uatv(in);
    REQUIRE(back.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        REQUIRE(back[i].tvir.T == records[i].tvir.T);
        REQUIRE(back[i].tvir.D == records[i].tvir.D);
        REQUIRE(back[i].metadata.at("index") == static_cast<int>(i));
        // f32 storage: equal after one write/read cycle of the same floats
        for (size_t k = 0; k < back[i].tvir.data.size(); ++k) {
            REQUIRE(static_cast<float>(records[i].tvir.data[k].real()) ==
                    Catch::Approx(back[i].tvir.data[k].real()));
        }
    }

    SECTION("serialization is byte-deterministic") {
        std::ostringstream buf2(std::ios::binary);
        write_uatv(buf2, records);
        REQUIRE(buf2.str() == bytes);
    }
}
