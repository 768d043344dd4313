// Replay baselines: direct replay (identity) and stochastic replay,
// which keeps each tap's EMD trend and re-draws the fast component from
// a fitted complex AR(1).
#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "uasim/common.hpp"
#include "uasim/emd.hpp"
#include "uasim/rng.hpp"
#include "uasim/tvir.hpp"

namespace uasim {

// Measured channels are reused verbatim; noise enters later in
// apply_channel at the evaluation SNR.
inline Tvir direct_replay(const Tvir& measured) {
    measured.validate();
    return measured;
}

struct StochasticReplayConfig {
    double min_window_s = 8.0;  // shorter measurements under-resolve the trend
    size_t max_imfs = 10;
    double sd_stop = 0.3;
};

namespace detail {

struct TapSplit {
    std::vector<double> trend;
    std::vector<double> fast;
};

// Trend = EMD residue; when fewer than 2 IMFs came out, the final IMF
// joins the trend (the decomposition is too shallow to call it fading).
inline TapSplit split_trend(const std::vector<double>& series, const StochasticReplayConfig& cfg) {
    const EmdResult er = emd(series, cfg.max_imfs, cfg.sd_stop);
    TapSplit out;
    out.trend = er.residue;
    out.fast.assign(series.size(), 0.0);
    const bool shallow = er.imfs.size() < 2;
    for (const auto& imf : er.imfs) {
        for (size_t i = 0; i < imf.size(); ++i) {
            if (shallow) {
                out.trend[i] += imf[i];
            } else {
                out.fast[i] += imf[i];
            }
        }
    }
    return out;
}

}  // namespace detail

// Per tap: EMD the real and imaginary series, keep the trend, fit a
// zero-mean complex AR(1) (variance and lag-1 correlation) to the fast
// part and re-sample it. The regenerated window is then cut into
// consecutive target_T-snapshot TVIRs.
inline std::vector<Tvir> stochastic_replay(const Tvir& measured, size_t target_T, Rng& rng,
                                           const StochasticReplayConfig& cfg = {}) {
    measured.validate();
    require(target_T >= 1, "stochastic_replay: target_T must be >= 1");
    if (measured.duration() < cfg.min_window_s - 1e-9)
        throw DegenerateInput("stochastic_replay: window too short for trend/fast decomposition");

    const size_t T = measured.T;
    Tvir regen(T, measured.D, measured.time_step, measured.delay_step);
    std::vector<double> re(T), im(T);
    for (size_t j = 0; j < measured.D; ++j) {
        for (size_t t = 0; t < T; ++t) {
            re[t] = measured.at(t, j).real();
            im[t] = measured.at(t, j).imag();
        }
        const auto sr = detail::split_trend(re, cfg);
        const auto si = detail::split_trend(im, cfg);

        // AR(1) fit on the complex fast part.
        double energy = 0.0;
        cdouble lag(0.0, 0.0);
        for (size_t t = 0; t < T; ++t) {
            const cdouble f(sr.fast[t], si.fast[t]);
            energy += std::norm(f);
            if (t + 1 < T) lag += f * std::conj(cdouble(sr.fast[t + 1], si.fast[t + 1]));
        }
        const double var = energy / static_cast<double>(T);
        double rho = energy > 0.0 ? std::clamp(lag.real() / energy, 0.0, 0.9999) : 0.0;

        const double comp_std = std::sqrt(var / 2.0);
        const double innov = comp_std * std::sqrt(std::max(0.0, 1.0 - rho * rho));
        cdouble f(comp_std * rng.normal(), comp_std * rng.normal());
        for (size_t t = 0; t < T; ++t) {
            regen.at(t, j) = cdouble(sr.trend[t], si.trend[t]) + (var > 0.0 ? f : cdouble(0, 0));
            f = rho * f + cdouble(innov * rng.normal(), innov * rng.normal());
        }
    }

    std::vector<Tvir> out;
    for (size_t start = 0; start + target_T <= T; start += target_T) {
        Tvir seg(target_T, measured.D, measured.time_step, measured.delay_step);
        for (size_t t = 0; t < target_T; ++t)
            std::copy(regen.snapshot(start + t), regen.snapshot(start + t) + regen.D,
                      seg.snapshot(t));
        out.push_back(std::move(seg));
    }
    require(!out.empty(), "stochastic_replay: window shorter than one target_T segment");
    return out;
}

}  // namespace uasim
