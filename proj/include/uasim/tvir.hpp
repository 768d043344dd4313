// Core channel containers and conversions.
//
// A Tvir is a T x D complex matrix of channel gains: rows are time
// snapshots, columns delay taps. FeatureSeq is its real-valued network
// representation, one row [A_1..A_D, sin(phi)_1..D, cos(phi)_1..D] per
// snapshot. Featurization, normalization/straightening and time
// resampling live here and are shared by every other module.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "uasim/common.hpp"

namespace uasim {

struct Tvir {
    size_t T = 0;
    size_t D = 0;
    double time_step = 0.05;        // seconds per snapshot (20 Hz)
    double delay_step = 1.0 / 12000.0;  // seconds per tap (12 kHz)
    std::vector<cdouble> data;      // row-major T x D

    Tvir() = default;
    Tvir(size_t t, size_t d, double ts = 0.05, double ds = 1.0 / 12000.0)
        : T(t), D(d), time_step(ts), delay_step(ds), data(t * d) {}

    cdouble& at(size_t t, size_t j) { return data[t * D + j]; }
    const cdouble& at(size_t t, size_t j) const { return data[t * D + j]; }

    const cdouble* snapshot(size_t t) const { return data.data() + t * D; }
    cdouble* snapshot(size_t t) { return data.data() + t * D; }

    double rate() const { return 1.0 / time_step; }
    double duration() const { return T * time_step; }

    void validate() const {
        require(T >= 1 && D >= 1, "Tvir: T and D must be >= 1");
        require(time_step > 0 && delay_step > 0, "Tvir: steps must be positive");
        require(data.size() == T * D, "Tvir: data size mismatch");
        require(all_finite(data), "Tvir: non-finite element");
    }
};

struct FeatureSeq {
    size_t T = 0;
    size_t D = 0;                  // taps; each row has 3*D entries
    std::vector<double> data;      // row-major T x 3D

    FeatureSeq() = default;
    FeatureSeq(size_t t, size_t d) : T(t), D(d), data(t * 3 * d, 0.0) {}

    size_t width() const { return 3 * D; }
    double* row(size_t t) { return data.data() + t * width(); }
    const double* row(size_t t) const { return data.data() + t * width(); }
};

struct NormalizationRecord {
    double scale = 1.0;       // amplitude divisor applied to every element
    long shift = 0;           // circular tap shift applied (positive = right)
    size_t anchor_index = 20; // tap index holding the first-CIR peak
    // Energy in taps that wrapped around the delay window during the
    // circular shift, relative to total. Above -40 dB the input was not
    // compactly supported and inversion is lossy.
    double wrapped_energy_db = -std::numeric_limits<double>::infinity();
};

struct DefeaturizeStats {
    size_t degenerate_taps = 0;  // sin = cos = 0 with A > 0
};

// [A..., sin(phi)..., cos(phi)...] for one CIR. Zero taps use the
// (sin, cos) = (0, 1) convention so the unit-circle invariant holds.
inline std::vector<double> featurize(const std::vector<cdouble>& cir) {
    require(!cir.empty(), "featurize: empty CIR");
    require(all_finite(cir), "featurize: non-finite input");
    const size_t d = cir.size();
    std::vector<double> h(3 * d);
    for (size_t j = 0; j < d; ++j) {
        const double a = std::abs(cir[j]);
        h[j] = a;
        if (a == 0.0) {
            h[d + j] = 0.0;
            h[2 * d + j] = 1.0;
        } else {
            h[d + j] = cir[j].imag() / a;
            h[2 * d + j] = cir[j].real() / a;
        }
    }
    return h;
}

// Inverse of featurize. Phase is recovered with atan2(sin, cos), which
// implicitly renormalizes (sin, cos) pairs that drifted off the unit
// circle; negative amplitudes are clamped to zero.
inline std::vector<cdouble> defeaturize(const std::vector<double>& h,
                                        DefeaturizeStats* stats = nullptr) {
    require(h.size() % 3 == 0 && !h.empty(), "defeaturize: length must be 3*D");
    const size_t d = h.size() / 3;
    std::vector<cdouble> cir(d);
    for (size_t j = 0; j < d; ++j) {
        const double a = std::max(0.0, h[j]);
        const double s = h[d + j];
        const double c = h[2 * d + j];
        double phi = 0.0;
        if (s == 0.0 && c == 0.0) {
            if (a > 0.0 && stats) stats->degenerate_taps++;
        } else {
            phi = std::atan2(s, c);
        }
        cir[j] = std::polar(a, phi);
    }
    return cir;
}

inline FeatureSeq featurize_tvir(const Tvir& x) {
    x.validate();
    FeatureSeq h(x.T, x.D);
    std::vector<cdouble> row(x.D);
    for (size_t t = 0; t < x.T; ++t) {
        std::copy(x.snapshot(t), x.snapshot(t) + x.D, row.begin());
        const std::vector<double> f = featurize(row);
        std::copy(f.begin(), f.end(), h.row(t));
    }
    return h;
}

inline Tvir defeaturize_tvir(const FeatureSeq& h, double time_step = 0.05,
                             double delay_step = 1.0 / 12000.0,
                             DefeaturizeStats* stats = nullptr) {
    Tvir x(h.T, h.D, time_step, delay_step);
    for (size_t t = 0; t < h.T; ++t) {
        const std::vector<double> row(h.row(t), h.row(t) + h.width());
        const std::vector<cdouble> cir = defeaturize(row, stats);
        std::copy(cir.begin(), cir.end(), x.snapshot(t));
    }
    return x;
}

namespace detail {

// Lowest index among equal maxima, for determinism.
inline size_t argmax_amplitude(const cdouble* row, size_t d) {
    size_t best = 0;
    double best_a = std::abs(row[0]);
    for (size_t j = 1; j < d; ++j) {
        const double a = std::abs(row[j]);
        if (a > best_a) {
            best_a = a;
            best = j;
        }
    }
    return best;
}

}  // namespace detail

// Straightening: scale the whole TVIR by the first CIR's peak amplitude
// and circularly shift every snapshot so that peak lands on anchor_index.
// The first snapshot's maximum becomes exactly 1; later snapshots may
// exceed 1 (relaxed normalization).
inline std::pair<Tvir, NormalizationRecord> normalize_tvir(const Tvir& x,
                                                           size_t anchor_index = 20) {
    x.validate();
    require(anchor_index < x.D, "normalize_tvir: anchor_index out of range");
    const size_t peak = detail::argmax_amplitude(x.snapshot(0), x.D);
    const double scale = std::abs(x.at(0, peak));
    if (scale == 0.0) throw DegenerateInput("normalize_tvir: all-zero first snapshot");

    NormalizationRecord rec;
    rec.scale = scale;
    rec.shift = static_cast<long>(anchor_index) - static_cast<long>(peak);
    rec.anchor_index = anchor_index;

    Tvir y(x.T, x.D, x.time_step, x.delay_step);
    const long d = static_cast<long>(x.D);
    const long shift = ((rec.shift % d) + d) % d;
    double wrapped = 0.0, total = 0.0;
    for (size_t t = 0; t < x.T; ++t) {
        for (long j = 0; j < d; ++j) {
            const long dst = (j + shift) % d;
            const cdouble v = x.at(t, static_cast<size_t>(j)) / scale;
            y.at(t, static_cast<size_t>(dst)) = v;
            const double e = std::norm(v);
            total += e;
            // Taps that cross the window boundary under the shift.
            const bool wraps = rec.shift >= 0 ? (j + rec.shift >= d)
                                              : (j + rec.shift < 0);
            if (wraps) wrapped += e;
        }
    }
    rec.wrapped_energy_db = (wrapped > 0.0 && total > 0.0)
                                ? power_to_db(wrapped / total)
                                : -std::numeric_limits<double>::infinity();
    // One complex division can leave the peak at 1 +/- 1 ulp; nudge the
    // anchor element until its amplitude is exactly 1.
    cdouble& peak_elem = y.at(0, anchor_index);
    for (int k = 0; k < 4 && std::abs(peak_elem) != 1.0; ++k) peak_elem /= std::abs(peak_elem);
    return {std::move(y), rec};
}

inline Tvir denormalize_tvir(const Tvir& x, const NormalizationRecord& rec) {
    x.validate();
    require(rec.scale > 0, "denormalize_tvir: invalid record");
    Tvir y(x.T, x.D, x.time_step, x.delay_step);
    const long d = static_cast<long>(x.D);
    const long shift = (((-rec.shift) % d) + d) % d;
    for (size_t t = 0; t < x.T; ++t)
        for (long j = 0; j < d; ++j)
            y.at(t, static_cast<size_t>((j + shift) % d)) =
                x.at(t, static_cast<size_t>(j)) * rec.scale;
    return y;
}

// Per-tap linear interpolation of real and imaginary parts along time.
// Snapshot count rescales by target_rate / current rate; positions past
// the last input snapshot hold its value.
inline Tvir resample_time(const Tvir& x, double target_rate) {
    x.validate();
    require(target_rate > 0, "resample_time: target_rate must be positive");
    const double cur_rate = x.rate();
    if (std::abs(target_rate - cur_rate) < 1e-12 * cur_rate) return x;
    if (target_rate > cur_rate)
        require(x.T >= 2, "resample_time: need at least 2 snapshots to upsample");

    const size_t new_t = std::max<size_t>(
        1, static_cast<size_t>(std::llround(static_cast<double>(x.T) * target_rate / cur_rate)));
    Tvir y(new_t, x.D, 1.0 / target_rate, x.delay_step);
    for (size_t t = 0; t < new_t; ++t) {
        const double pos = static_cast<double>(t) * cur_rate / target_rate;
        size_t i0 = static_cast<size_t>(std::floor(pos));
        double frac = pos - static_cast<double>(i0);
        if (i0 >= x.T - 1) {
            i0 = x.T - 1;
            frac = 0.0;
        }
        if (frac == 0.0) {
            std::copy(x.snapshot(i0), x.snapshot(i0) + x.D, y.snapshot(t));
        } else {
            const cdouble* a = x.snapshot(i0);
            const cdouble* b = x.snapshot(i0 + 1);
            for (size_t j = 0; j < x.D; ++j) y.at(t, j) = a[j] + frac * (b[j] - a[j]);
        }
    }
    return y;
}

}  // namespace uasim
