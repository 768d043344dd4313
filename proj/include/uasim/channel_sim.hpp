// Simulated training-corpus generation.
//
// An Environment is drawn from fixed parameter distributions, an
// isovelocity image-source model produces the nominal multipath set, and
// per-path AR(1) fading plus Gaussian delay drift evolve it into a TVIR
// on the 12 kHz delay grid.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <json.hpp>

#include "uasim/common.hpp"
#include "uasim/rng.hpp"
#include "uasim/tvir.hpp"
#include "uasim/uatv.hpp"

namespace uasim {

struct Environment {
    double surface_sound_speed = 1525.0;  // m/s
    double sound_speed_gradient = 0.0;    // 1/s (metadata only; rays are straight)
    double water_depth = 50.0;            // m
    double source_depth = 10.0;           // m
    double receiver_depth = 10.0;         // m
    double range = 500.0;                 // m
    double relative_density = 1.8;
    double relative_sound_speed = 1.5;
    double absorption = 0.001;
    double surface_reflection_coeff = 0.9;

    nlohmann::json to_json() const {
        return {{"surface_sound_speed", surface_sound_speed},
                {"sound_speed_gradient", sound_speed_gradient},
                {"water_depth", water_depth},
                {"source_depth", source_depth},
                {"receiver_depth", receiver_depth},
                {"range", range},
                {"relative_density", relative_density},
                {"relative_sound_speed", relative_sound_speed},
                {"absorption", absorption},
                {"surface_reflection_coeff", surface_reflection_coeff}};
    }
};

struct Path {
    double delay = 0.0;            // s
    cdouble gain{0.0, 0.0};
    int surface_bounces = 0;
    int bottom_bounces = 0;
    double grazing_angle_bottom = 0.0;  // rad
};

struct PathSet {
    std::vector<Path> paths;
};

struct DynamicsConfig {
    double doppler_bandwidth = 1.0;  // Hz, per-path fading bandwidth
    double fading_std = 0.1;         // relative gain perturbation scale
    double delay_drift_std = 0.0;    // s per snapshot
};

// Environmental parameter distributions (uniform bounds, plus the
// zero-mean normal for the sound speed gradient). Defaults are the
// standard generation ranges; configs may override any of them.
struct EnvRanges {
    double sound_speed_min = 1500.0, sound_speed_max = 1550.0;
    double gradient_std = 0.05;
    double depth_min = 10.0, depth_max = 100.0;
    double depth_margin = 2.5;  // source/receiver keep-out from boundaries
    double range_min = 1.0, range_max = 1000.0;
    double density_min = 1.145, density_max = 2.5;
    double rel_speed_min = 0.98, rel_speed_max = 2.5;
    double absorption_min = 0.0, absorption_max = 0.0022;
    double surface_coeff_min = 0.5, surface_coeff_max = 1.0;
};

inline Environment sample_environment(Rng& rng, const EnvRanges& r = {}) {
    Environment e;
    e.surface_sound_speed = rng.uniform(r.sound_speed_min, r.sound_speed_max);
    e.sound_speed_gradient = rng.normal(0.0, r.gradient_std);
    e.water_depth = rng.uniform(r.depth_min, r.depth_max);
    require(e.water_depth >= 2.0 * r.depth_margin,
            "sample_environment: water depth below source/receiver margin");
    e.source_depth = rng.uniform(r.depth_margin, e.water_depth - r.depth_margin);
    e.receiver_depth = rng.uniform(r.depth_margin, e.water_depth - r.depth_margin);
    e.range = rng.uniform(r.range_min, r.range_max);
    e.relative_density = rng.uniform(r.density_min, r.density_max);
    e.relative_sound_speed = rng.uniform(r.rel_speed_min, r.rel_speed_max);
    e.absorption = rng.uniform(r.absorption_min, r.absorption_max);
    e.surface_reflection_coeff = rng.uniform(r.surface_coeff_min, r.surface_coeff_max);
    return e;
}

// Two-fluid Rayleigh coefficient for a lossy half-space bottom.
// grazing_angle is measured from the horizontal.
inline cdouble rayleigh_reflection(double grazing_angle, double relative_density,
                                   double relative_sound_speed, double absorption) {
    require(grazing_angle > 0.0 && grazing_angle <= kPi / 2.0 + 1e-12,
            "rayleigh_reflection: grazing angle out of (0, pi/2]");
    require(relative_sound_speed > 0.0, "rayleigh_reflection: relative sound speed must be > 0");
    const double m = relative_density;
    // Refraction index water->bottom with the loss folded into its
    // imaginary part; positive absorption must dissipate, giving |R| <= 1.
    const cdouble n = (1.0 / relative_sound_speed) * cdouble(1.0, absorption);
    const double cosg = std::cos(grazing_angle);
    const cdouble vert = std::sqrt(n * n - cosg * cosg);  // principal branch
    const cdouble num = m * std::sin(grazing_angle) - vert;
    const cdouble den = m * std::sin(grazing_angle) + vert;
    return num / den;
}

// Isovelocity image-source expansion over a surface (pressure release,
// scaled coefficient with sign flip) and a Rayleigh bottom. Keeps the
// direct path plus every image whose delay is within max_delay of it and
// whose bounce total does not exceed max_bounces.
inline PathSet nominal_cir(const Environment& env, double max_delay, int max_bounces) {
    require(max_delay > 0.0, "nominal_cir: max_delay must be positive");
    require(max_bounces >= 0, "nominal_cir: max_bounces must be >= 0");
    const double d = env.water_depth;
    const double zs = env.source_depth;
    const double zr = env.receiver_depth;
    require(zs > 0.0 && zs < d && zr > 0.0 && zr < d,
            "nominal_cir: source/receiver outside water column");
    const double c = env.surface_sound_speed;
    const double r = env.range;

    const double direct_len = std::sqrt(r * r + (zs - zr) * (zs - zr));
    const double direct_delay = direct_len / c;
    const double delay_cutoff = direct_delay + max_delay;

    PathSet out;
    auto add_path = [&](double vertical, int s_bounces, int b_bounces) {
        if (s_bounces + b_bounces > max_bounces) return;
        const double len = std::sqrt(r * r + vertical * vertical);
        const double delay = len / c;
        if (delay > delay_cutoff) return;
        const double grazing = std::atan2(std::abs(vertical), r);
        cdouble gain(1.0 / len, 0.0);
        if (s_bounces > 0) {
            const double sc = -env.surface_reflection_coeff;
            double f = 1.0;
            for (int k = 0; k < s_bounces; ++k) f *= sc;
            gain *= f;
        }
        if (b_bounces > 0) {
            const cdouble rb = rayleigh_reflection(grazing, env.relative_density,
                                                   env.relative_sound_speed, env.absorption);
            cdouble f(1.0, 0.0);
            for (int k = 0; k < b_bounces; ++k) f *= rb;
            gain *= f;
        }
        Path p;
        p.delay = delay;
        p.gain = gain;
        p.surface_bounces = s_bounces;
        p.bottom_bounces = b_bounces;
        p.grazing_angle_bottom = b_bounces > 0 ? grazing : 0.0;
        out.paths.push_back(p);
    };

    // Image families: vertical offsets for paths with (s, b) bounces.
    add_path(zs - zr, 0, 0);
    for (int n = 0;; ++n) {
        // Shortest vertical offset of order n bounds every remaining delay.
        const double shortest = std::max(0.0, 2.0 * d * n - std::abs(zs - zr));
        if (n > 0 && (std::sqrt(r * r + shortest * shortest) / c > delay_cutoff ||
                      2 * n > max_bounces))
            break;
        if (n >= 1) {
            add_path(2.0 * d * n + (zs - zr), n, n);   // first bounce at surface
            add_path(2.0 * d * n - (zs - zr), n, n);   // first bounce at bottom
        }
        add_path(2.0 * d * n + (zs + zr), n + 1, n);       // surface-started, odd count
        add_path(2.0 * d * (n + 1) - (zs + zr), n, n + 1); // bottom-started, odd count
        if (n > 64) break;  // delay cutoff should always fire first
    }
    std::sort(out.paths.begin(), out.paths.end(),
              [](const Path& a, const Path& b) { return a.delay < b.delay; });
    require(!out.paths.empty(), "nominal_cir: no paths");
    return out;
}

namespace detail {

// 9-tap windowed-sinc placement of a unit impulse at fractional tap
// position u (Hann window over the kernel support).
inline void place_tap(std::vector<cdouble>& row, double u, cdouble gain) {
    const long center = std::lround(u);
    constexpr long kHalf = 4;
    constexpr double kSupport = 4.5;
    for (long k = center - kHalf; k <= center + kHalf; ++k) {
        if (k < 0 || k >= static_cast<long>(row.size())) continue;
        const double x = static_cast<double>(k) - u;
        double w;
        if (x == 0.0) {
            w = 1.0;
        } else {
            w = std::sin(kPi * x) / (kPi * x);
        }
        w *= 0.5 * (1.0 + std::cos(kPi * x / kSupport));
        row[static_cast<size_t>(k)] += gain * w;
    }
}

}  // namespace detail

struct EvolveStats {
    size_t dropped_taps = 0;  // path-snapshot placements outside the window
};

struct TvirDims {
    size_t T = 20;
    size_t D = 250;
    double time_step = 0.05;
    double delay_step = 1.0 / 12000.0;
    size_t anchor_index = 20;
};

// Per-path gain g_p(t) = nominal * (1 + xi_p(t)) with xi a complex AR(1)
// (per-component stationary std = fading_std, lag-1 correlation
// exp(-2*pi*doppler_bandwidth*time_step)); per-path delay follows a
// Gaussian random walk. Snapshots are rasterized with the windowed-sinc
// kernel and the result straightened via normalize_tvir.
inline Tvir evolve_tvir(const PathSet& nominal, size_t num_snapshots, const DynamicsConfig& dyn,
                        const TvirDims& dims, Rng& rng, EvolveStats* stats = nullptr) {
    require(num_snapshots >= 1, "evolve_tvir: need at least one snapshot");
    require(!nominal.paths.empty(), "evolve_tvir: empty path set");
    require(dyn.doppler_bandwidth >= 0 && dyn.fading_std >= 0 && dyn.delay_drift_std >= 0,
            "evolve_tvir: negative dynamics parameter");

    const size_t P = nominal.paths.size();
    const double rho = std::exp(-2.0 * kPi * dyn.doppler_bandwidth * dims.time_step);
    const double innov = dyn.fading_std * std::sqrt(std::max(0.0, 1.0 - rho * rho));

    double tau0 = nominal.paths[0].delay;
    for (const Path& p : nominal.paths) tau0 = std::min(tau0, p.delay);

    std::vector<cdouble> xi(P);
    std::vector<double> tau(P);
    for (size_t p = 0; p < P; ++p) {
        xi[p] = dyn.fading_std > 0
                    ? cdouble(rng.normal(0.0, dyn.fading_std), rng.normal(0.0, dyn.fading_std))
                    : cdouble(0.0, 0.0);
        tau[p] = nominal.paths[p].delay;
    }

    Tvir raw(num_snapshots, dims.D, dims.time_step, dims.delay_step);
    EvolveStats local;
    for (size_t t = 0; t < num_snapshots; ++t) {
        std::vector<cdouble> row(dims.D, cdouble(0.0, 0.0));
        for (size_t p = 0; p < P; ++p) {
            const cdouble g = nominal.paths[p].gain * (1.0 + xi[p]);
            const double u =
                (tau[p] - tau0) / dims.delay_step + static_cast<double>(dims.anchor_index);
            if (u < -4.0 || u > static_cast<double>(dims.D - 1) + 4.0) {
                local.dropped_taps++;
            } else {
                detail::place_tap(row, u, g);
            }
            // Advance the dynamics for the next snapshot.
            if (dyn.fading_std > 0) {
                xi[p] = rho * xi[p] + cdouble(rng.normal(0.0, innov), rng.normal(0.0, innov));
            }
            if (dyn.delay_drift_std > 0) tau[p] += rng.normal(0.0, dyn.delay_drift_std);
        }
        std::copy(row.begin(), row.end(), raw.snapshot(t));
    }
    if (stats) *stats = local;
    auto [normalized, rec] = normalize_tvir(raw, dims.anchor_index);
    (void)rec;
    return normalized;
}

struct DatasetConfig {
    size_t count = 0;
    bool paired = false;       // records hold 2T snapshots (condition | target)
    TvirDims dims;
    DynamicsConfig dynamics;
    EnvRanges env;
    double max_delay = 0.018;  // s of multipath kept past the direct arrival
    int max_bounces = 6;
    uint64_t seed = 0;
};

// Samples an environment per record, evolves a TVIR and writes one UATV
// file. Each record owns the RNG stream (seed, record_index).
inline void generate_dataset(const std::string& path, const DatasetConfig& cfg) {
    require(cfg.count >= 1, "generate_dataset: count must be >= 1");
    Rng root(cfg.seed);
    std::vector<TvirRecord> records;
    records.reserve(cfg.count);
    const size_t snapshots = cfg.paired ? 2 * cfg.dims.T : cfg.dims.T;
    for (size_t i = 0; i < cfg.count; ++i) {
        Rng stream = root.stream(i);
        const Environment env = sample_environment(stream, cfg.env);
        const PathSet nominal = nominal_cir(env, cfg.max_delay, cfg.max_bounces);
        EvolveStats stats;
        Tvir tvir = evolve_tvir(nominal, snapshots, cfg.dynamics, cfg.dims, stream, &stats);
        TvirRecord rec;
        rec.tvir = std::move(tvir);
        rec.metadata = {{"environment", env.to_json()},
                        {"seed", cfg.seed},
                        {"record_index", i},
                        {"paired", cfg.paired},
                        {"num_paths", nominal.paths.size()},
                        {"dropped_taps", stats.dropped_taps}};
        records.push_back(std::move(rec));
    }
    save_uatv(path, records);
}

}  // namespace uasim
