#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "uasim/emd.hpp"
#include "uasim/replay.hpp"

using namespace uasim;

namespace {

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const size_t n = a.size();
    double ma = 0, mb = 0;
    for (size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double num = 0, va = 0, vb = 0;
    for (size_t i = 0; i < n; ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    return num / std::sqrt(va * vb);
}

double reconstruction_error(const std::vector<double>& x, const EmdResult& r) {
    double max_err = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        double acc = r.residue[i];
        for (const auto& imf : r.imfs) acc += imf[i];
        max_err = std::max(max_err, std::abs(acc - x[i]));
    }
    return max_err;
}

size_t count_zero_crossings(const std::vector<double>& x) {
    size_t zc = 0;
    for (size_t i = 1; i < x.size(); ++i)
        if ((x[i - 1] < 0 && x[i] >= 0) || (x[i - 1] >= 0 && x[i] < 0)) ++zc;
    return zc;
}

}  // namespace

TEST_CASE("EMD edge cases") {
    SECTION("monotone ramp yields no IMFs") {
        std::vector<double> x(50);
        for (size_t i = 0; i < x.size(); ++i) x[i] = 0.1 * static_cast<double>(i);
        const EmdResult r = emd(x);
        REQUIRE(r.imfs.empty());
        REQUIRE(r.residue == x);
    }
    SECTION("constant series yields no IMFs") {
        const std::vector<double> x(32, 3.5);
        const EmdResult r = emd(x);
        REQUIRE(r.imfs.empty());
        REQUIRE(r.residue == x);
    }
    SECTION("too-short series rejected") {
        REQUIRE_THROWS_AS(emd({1.0, 2.0, 1.0}), InvalidInput);
    }
}

TEST_CASE("EMD separates a sinusoid from a linear trend") {
    const size_t n = 200;
    std::vector<double> x(n), sinusoid(n), trend(n);
    for (size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(n - 1);  // 2 s window
        sinusoid[i] = std::sin(2.0 * kPi * 5.0 * (2.0 * t));
        trend[i] = 1.5 * t;
        x[i] = sinusoid[i] + trend[i];
    }
    const EmdResult r = emd(x);
    REQUIRE(!r.imfs.empty());
    REQUIRE(correlation(r.imfs[0], sinusoid) > 0.95);
    // Everything but the first IMF carries the trend.
    std::vector<double> rest = r.residue;
    for (size_t k = 1; k < r.imfs.size(); ++k)
        for (size_t i = 0; i < n; ++i) rest[i] += r.imfs[k][i];
    REQUIRE(correlation(rest, trend) > 0.95);
    REQUIRE(reconstruction_error(x, r) < 1e-8);

    SECTION("first IMF is a proper oscillation: extrema vs zero crossings differ by <= 1") {
        std::vector<size_t> maxima, minima;
        detail::find_extrema(r.imfs[0], maxima, minima);
        const long extrema = static_cast<long>(maxima.size() + minima.size());
        const long zc = static_cast<long>(count_zero_crossings(r.imfs[0]));
        REQUIRE(std::abs(extrema - zc) <= 1);
    }
}

TEST_CASE("EMD reconstruction is exact on random signals") {
    Rng rng(1);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> x(150);
        double walk = 0.0;
        for (double& v : x) {
            walk += rng.normal();
            v = walk + 0.5 * rng.normal();
        }
        const EmdResult r = emd(x);
        REQUIRE(reconstruction_error(x, r) < 1e-8);
    }
}

TEST_CASE("direct replay is the identity") {
    Rng rng(2);
    Tvir x(5, 8);
    for (auto& v : x.data) v = {rng.normal(), rng.normal()};
    const Tvir y = direct_replay(x);
    REQUIRE(y.data == x.data);
    const Tvir z = direct_replay(x);
    REQUIRE(z.data == y.data);
}

TEST_CASE("stochastic replay") {
    const size_t T = 400;  // 20 s at 20 Hz
    SECTION("too-short window rejected") {
        Tvir shorty(20, 4, 0.05);
        shorty.at(0, 0) = {1.0, 0.0};
        Rng rng(3);
        REQUIRE_THROWS_AS(stochastic_replay(shorty, 20, rng), DegenerateInput);
    }
    SECTION("smooth input reproduces the trend within 5% RMS") {
        Tvir x(T, 3, 0.05);
        for (size_t t = 0; t < T; ++t) {
            const double u = static_cast<double>(t) / static_cast<double>(T);
            x.at(t, 0) = {1.0 + 0.3 * u, 0.2 - 0.1 * u};
            x.at(t, 1) = {0.5 * std::exp(-u), 0.0};
        }
        Rng rng(4);
        const auto segments = stochastic_replay(x, 20, rng);
        REQUIRE(segments.size() == T / 20);
        double err = 0.0, ref = 0.0;
        for (size_t s = 0; s < segments.size(); ++s)
            for (size_t t = 0; t < 20; ++t)
                for (size_t j = 0; j < 3; ++j) {
                    err += std::norm(segments[s].at(t, j) - x.at(s * 20 + t, j));
                    ref += std::norm(x.at(s * 20 + t, j));
                }
        REQUIRE(std::sqrt(err / ref) < 0.05);
    }
    SECTION("fast-part variance is preserved within 10%") {
        const size_t long_T = 10000;
        Tvir x(long_T, 2, 0.05);
        Rng gen(5);
        // AR(1) fast fading around a constant gain.
        cdouble f(0.0, 0.0);
        const double rho = 0.8, sd = 0.2;
        const double innov = sd * std::sqrt(1.0 - rho * rho);
        for (size_t t = 0; t < long_T; ++t) {
            f = rho * f + cdouble(innov * gen.normal(), innov * gen.normal());
            x.at(t, 0) = cdouble(1.0, 0.0) + f;
            x.at(t, 1) = cdouble(0.4, -0.4);
        }
        Rng rng(6);
        const auto segments = stochastic_replay(x, long_T, rng);
        REQUIRE(segments.size() == 1);
        const Tvir& y = segments[0];
        // Compare fast-part variance tap 0: subtract per-series means.
        auto fast_var = [](const Tvir& v, size_t j) {
            cdouble mean(0.0, 0.0);
            for (size_t t = 0; t < v.T; ++t) mean += v.at(t, j);
            mean /= static_cast<double>(v.T);
            double acc = 0.0;
            for (size_t t = 0; t < v.T; ++t) acc += std::norm(v.at(t, j) - mean);
            return acc / static_cast<double>(v.T);
        };
        REQUIRE(fast_var(y, 0) == Catch::Approx(fast_var(x, 0)).epsilon(0.10));
        // Constant tap stays essentially constant.
        REQUIRE(fast_var(y, 1) < 1e-6);
    }
    SECTION("fixed seed reproduces the output") {
        Tvir x(T, 2, 0.05);
        Rng gen(7);
        for (auto& v : x.data) v = {gen.normal(), gen.normal()};
        Rng r1(8), r2(8);
        const auto a = stochastic_replay(x, 50, r1);
        const auto b = stochastic_replay(x, 50, r2);
        REQUIRE(a.size() == b.size());
        for (size_t s = 0; s < a.size(); ++s) REQUIRE(a[s].data == b[s].data);
    }
}
