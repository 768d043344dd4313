#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "uasim/channel_sim.hpp"
#include "uasim/rng.hpp"

using namespace uasim;

namespace {

// One-sample Kolmogorov-Smirnov statistic against a reference CDF.
template <class Cdf>
double ks_statistic(std::vector<double> samples, Cdf&& cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(f - static_cast<double>(i + 1) / n));
    }
    return d;
}

double normal_cdf(double x, double mu, double sigma) {
    return 0.5 * (1.0 + std::erf((x - mu) / (sigma * std::sqrt(2.0))));
}

std::string file_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("environment sampling follows the configured distributions") {
    Rng rng(42);
    SECTION("ranges hold over 10^4 draws") {
        for (int i = 0; i < 10000; ++i) {
            const Environment e = sample_environment(rng);
            REQUIRE(e.surface_sound_speed >= 1500.0);
            REQUIRE(e.surface_sound_speed <= 1550.0);
            REQUIRE(e.water_depth >= 10.0);
            REQUIRE(e.water_depth <= 100.0);
            REQUIRE(e.source_depth >= 2.5);
            REQUIRE(e.source_depth <= e.water_depth - 2.5);
            REQUIRE(e.receiver_depth >= 2.5);
            REQUIRE(e.receiver_depth <= e.water_depth - 2.5);
            REQUIRE(e.range >= 1.0);
            REQUIRE(e.range <= 1000.0);
            REQUIRE(e.relative_density >= 1.145);
            REQUIRE(e.relative_density <= 2.5);
            REQUIRE(e.relative_sound_speed >= 0.98);
            REQUIRE(e.relative_sound_speed <= 2.5);
            REQUIRE(e.absorption >= 0.0);
            REQUIRE(e.absorption <= 0.0022);
            REQUIRE(e.surface_reflection_coeff >= 0.5);
            REQUIRE(e.surface_reflection_coeff <= 1.0);
        }
    }
    SECTION("sound speed gradient: mean near 0 within 3 sigma / sqrt(N)") {
        const int n = 100000;
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += sample_environment(rng).sound_speed_gradient;
        const double mean = sum / n;
        REQUIRE(std::abs(mean) < 3.0 * 0.05 / std::sqrt(static_cast<double>(n)));
    }
    SECTION("Kolmogorov-Smirnov at alpha=0.01 over 10^5 draws") {
        const int n = 100000;
        std::vector<double> speed, depth, gradient;
        speed.reserve(n);
        depth.reserve(n);
        gradient.reserve(n);
        for (int i = 0; i < n; ++i) {
            const Environment e = sample_environment(rng);
            speed.push_back(e.surface_sound_speed);
            depth.push_back(e.water_depth);
            gradient.push_back(e.sound_speed_gradient);
        }
        const double crit = 1.628 / std::sqrt(static_cast<double>(n));  // alpha = 0.01
        REQUIRE(ks_statistic(speed, [](double x) {
                    return std::clamp((x - 1500.0) / 50.0, 0.0, 1.0);
                }) < crit);
        REQUIRE(ks_statistic(depth, [](double x) {
                    return std::clamp((x - 10.0) / 90.0, 0.0, 1.0);
                }) < crit);
        REQUIRE(ks_statistic(gradient, [](double x) { return normal_cdf(x, 0.0, 0.05); }) < crit);
    }
    SECTION("shallow water keeps the depth constraint by construction") {
        Rng r2(7);
        for (int i = 0; i < 2000; ++i) {
            Environment e = sample_environment(r2);
            if (e.water_depth < 11.0) {
                REQUIRE(e.source_depth <= e.water_depth - 2.5);
            }
        }
    }
}

TEST_CASE("rayleigh reflection coefficient") {
    SECTION("impedance-matched bottom reflects nothing") {
        const cdouble r = rayleigh_reflection(0.7, 1.0, 1.0, 0.0);
        REQUIRE(std::abs(r) < 1e-14);
    }
    SECTION("normal incidence with density ratio 2 gives 1/3") {
        const cdouble r = rayleigh_reflection(kPi / 2.0, 2.0, 1.0, 0.0);
        REQUIRE(r.real() == Catch::Approx(1.0 / 3.0));
        REQUIRE(std::abs(r.imag()) < 1e-14);
    }
    SECTION("passive bottoms never amplify") {
        Rng rng(3);
        for (int i = 0; i < 10000; ++i) {
            const double g = rng.uniform(1e-3, kPi / 2.0);
            const double rho = rng.uniform(1.145, 2.5);
            const double cr = rng.uniform(0.98, 2.5);
            const double a = rng.uniform(0.0, 0.0022);
            REQUIRE(std::abs(rayleigh_reflection(g, rho, cr, a)) <= 1.0 + 1e-12);
        }
    }
    SECTION("invalid relative sound speed rejected") {
        REQUIRE_THROWS_AS(rayleigh_reflection(0.5, 1.5, 0.0, 0.0), InvalidInput);
    }
}

TEST_CASE("image-source nominal CIR") {
    SECTION("direct path delay is range over sound speed") {
        Environment e;
        e.surface_sound_speed = 1500.0;
        e.water_depth = 50.0;
        e.source_depth = 10.0;
        e.receiver_depth = 10.0;
        e.range = 1000.0;
        const PathSet ps = nominal_cir(e, 0.001, 0);
        REQUIRE(ps.paths.size() == 1);
        REQUIRE(ps.paths[0].delay == Catch::Approx(1000.0 / 1500.0).epsilon(1e-12));
    }
    SECTION("single surface bounce geometry") {
        Environment e;
        e.surface_sound_speed = 1500.0;
        e.water_depth = 10.0;
        e.source_depth = 5.0;
        e.receiver_depth = 5.0;
        e.range = 100.0;
        const PathSet ps = nominal_cir(e, 0.05, 1);
        auto it = std::find_if(ps.paths.begin(), ps.paths.end(), [](const Path& p) {
            return p.surface_bounces == 1 && p.bottom_bounces == 0;
        });
        REQUIRE(it != ps.paths.end());
        REQUIRE(it->delay * e.surface_sound_speed ==
                Catch::Approx(std::sqrt(100.0 * 100.0 + 10.0 * 10.0)).epsilon(1e-12));
        // Pressure-release surface flips the sign.
        REQUIRE(it->gain.real() < 0.0);
    }
    SECTION("max_bounces 0 keeps exactly the direct path") {
        Environment e;
        e.water_depth = 20.0;
        e.source_depth = 5.0;
        e.receiver_depth = 7.0;
        e.range = 50.0;
        e.surface_reflection_coeff = 1.0;
        const PathSet ps = nominal_cir(e, 1.0, 0);
        REQUIRE(ps.paths.size() == 1);
    }
    SECTION("bounce budget 2 yields the five image families") {
        Environment e;
        e.water_depth = 20.0;
        e.source_depth = 6.0;
        e.receiver_depth = 9.0;
        e.range = 30.0;
        const PathSet ps = nominal_cir(e, 10.0, 2);
        REQUIRE(ps.paths.size() == 5);
    }
    SECTION("delays are reciprocal in source/receiver exchange") {
        Rng rng(11);
        for (int i = 0; i < 1000; ++i) {
            Environment e = sample_environment(rng);
            Environment swapped = e;
            std::swap(swapped.source_depth, swapped.receiver_depth);
            const PathSet a = nominal_cir(e, 0.02, 6);
            const PathSet b = nominal_cir(swapped, 0.02, 6);
            REQUIRE(a.paths.size() == b.paths.size());
            for (size_t k = 0; k < a.paths.size(); ++k)
                REQUIRE(std::abs(a.paths[k].delay - b.paths[k].delay) < 1e-12);
        }
    }
    SECTION("every path gain obeys the spreading bound |g| <= 1/length") {
        Rng rng(13);
        for (int i = 0; i < 200; ++i) {
            const Environment e = sample_environment(rng);
            const PathSet ps = nominal_cir(e, 0.02, 6);
            for (const Path& p : ps.paths) {
                const double len = p.delay * e.surface_sound_speed;
                REQUIRE(std::abs(p.gain) <= 1.0 / len * (1.0 + 1e-12));
            }
        }
    }
    SECTION("source outside the water column is invalid") {
        Environment e;
        e.water_depth = 10.0;
        e.source_depth = 12.0;
        REQUIRE_THROWS_AS(nominal_cir(e, 0.01, 2), InvalidInput);
    }
}

TEST_CASE("evolve_tvir dynamics") {
    Environment env;
    env.water_depth = 30.0;
    env.source_depth = 8.0;
    env.receiver_depth = 12.0;
    env.range = 200.0;
    const PathSet nominal = nominal_cir(env, 0.015, 4);

    SECTION("zeroed dynamics give a deterministic, time-constant TVIR") {
        DynamicsConfig dyn{0.0, 0.0, 0.0};
        TvirDims dims;
        dims.T = 8;
        dims.D = 250;
        Rng rng(1);
        const Tvir a = evolve_tvir(nominal, 8, dyn, dims, rng);
        Rng rng2(999);
        const Tvir b = evolve_tvir(nominal, 8, dyn, dims, rng2);
        REQUIRE(a.data == b.data);
        for (size_t t = 1; t < a.T; ++t)
            for (size_t j = 0; j < a.D; ++j) REQUIRE(a.at(t, j) == a.at(0, j));
        // Straightening: first-snapshot peak is exactly 1 at the anchor.
        REQUIRE(std::abs(a.at(0, dims.anchor_index)) == 1.0);
    }

    SECTION("lag-1 autocorrelation matches exp(-2 pi B dt)") {
        PathSet one;
        one.paths.push_back(Path{0.0, {1.0, 0.0}, 0, 0, 0.0});
        DynamicsConfig dyn{1.0, 0.1, 0.0};
        TvirDims dims;
        dims.T = 100000;
        dims.D = 16;
        dims.anchor_index = 8;
        Rng rng(21);
        const Tvir x = evolve_tvir(one, 100000, dyn, dims, rng);
        // Complex gain at the anchor tap carries the AR(1) process.
        std::vector<cdouble> g(x.T);
        cdouble mean(0.0, 0.0);
        for (size_t t = 0; t < x.T; ++t) {
            g[t] = x.at(t, dims.anchor_index);
            mean += g[t];
        }
        mean /= static_cast<double>(x.T);
        cdouble num(0.0, 0.0);
        double den = 0.0;
        for (size_t t = 0; t + 1 < x.T; ++t) {
            num += (g[t] - mean) * std::conj(g[t + 1] - mean);
            den += std::norm(g[t] - mean);
        }
        const double rho_hat = std::abs(num) / den;
        REQUIRE(rho_hat == Catch::Approx(std::exp(-0.1 * kPi)).margin(0.01));
    }

    SECTION("fading std 0.1 appears as amplitude std/mean within 5%") {
        PathSet one;
        one.paths.push_back(Path{0.0, {2.0, 0.0}, 0, 0, 0.0});
        DynamicsConfig dyn{4.0, 0.1, 0.0};  // wide bandwidth decorrelates samples
        TvirDims dims;
        dims.T = 100000;
        dims.D = 16;
        dims.anchor_index = 8;
        Rng rng(22);
        const Tvir x = evolve_tvir(one, 100000, dyn, dims, rng);
        double sum = 0.0, sum2 = 0.0;
        for (size_t t = 0; t < x.T; ++t) {
            const double a = std::abs(x.at(t, dims.anchor_index));
            sum += a;
            sum2 += a * a;
        }
        const double m = sum / static_cast<double>(x.T);
        const double sd = std::sqrt(sum2 / static_cast<double>(x.T) - m * m);
        REQUIRE(sd / m == Catch::Approx(0.1).epsilon(0.05));
    }

    SECTION("delay drift moves energy across taps") {
        PathSet one;
        one.paths.push_back(Path{0.0, {1.0, 0.0}, 0, 0, 0.0});
        DynamicsConfig dyn{0.0, 0.0, 2.0e-5};  // ~0.24 taps per snapshot
        TvirDims dims;
        dims.T = 200;
        dims.D = 64;
        dims.anchor_index = 20;
        Rng rng(23);
        const Tvir x = evolve_tvir(one, 200, dyn, dims, rng);
        // Centroid of |x|^2 along delay wanders from the anchor.
        double max_dev = 0.0;
        for (size_t t = 0; t < x.T; ++t) {
            double w = 0.0, c = 0.0;
            for (size_t j = 0; j < x.D; ++j) {
                const double e = std::norm(x.at(t, j));
                w += e;
                c += e * static_cast<double>(j);
            }
            max_dev = std::max(max_dev, std::abs(c / w - 20.0));
        }
        REQUIRE(max_dev > 0.5);
    }
}

TEST_CASE("generate_dataset") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "uasim_test_sim";
    fs::create_directories(dir);
    const std::string path = (dir / "set.uatv").string();

    SECTION("paired mode writes 2T-snapshot records") {
        DatasetConfig cfg;
        cfg.count = 10;
        cfg.paired = true;
        cfg.dims.T = 20;
        cfg.dims.D = 250;
        cfg.seed = 7;
        generate_dataset(path, cfg);
        const auto records = load_uatv(path);
        REQUIRE(records.size() == 10);
        for (const auto& rec : records) {
            REQUIRE(rec.tvir.T == 40);
            REQUIRE(rec.tvir.D == 250);
            REQUIRE(rec.metadata.contains("environment"));
        }
    }

    SECTION("fixed seed reruns byte-identically") {
        DatasetConfig cfg;
        cfg.count = 5;
        cfg.dims.T = 10;
        cfg.dims.D = 64;
        cfg.seed = 1234;
        generate_dataset(path, cfg);
        const std::string first = file_bytes(path);
        generate_dataset(path, cfg);
        REQUIRE(file_bytes(path) == first);
        REQUIRE_FALSE(first.empty());
    }

    SECTION("count 0 is invalid") {
        DatasetConfig cfg;
        cfg.count = 0;
        REQUIRE_THROWS_AS(generate_dataset(path, cfg), InvalidInput);
    }

    fs::remove_all(dir);
}
