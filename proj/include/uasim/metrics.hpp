// Channel statistics: power delay profile, the eight per-TVIR
// characteristics with their thresholds (-10 dB spreads, sqrt(2)/2
// coherence), significant-tap extraction, empirical CDFs and histograms.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "uasim/common.hpp"
#include "uasim/dft.hpp"
#include "uasim/tvir.hpp"

namespace uasim {

inline constexpr double kCoherenceThreshold = 0.70710678118654752440;  // sqrt(2)/2

struct Characteristics {
    double mean_delay = 0.0;            // s
    double delay_spread_10db = 0.0;     // s
    double rms_delay_spread = 0.0;      // s
    double doppler_spread_10db = 0.0;   // Hz
    double coherence_time = 0.0;        // s
    double coherence_bandwidth = 0.0;   // Hz
    double num_significant_taps = 0.0;  // mean count per snapshot
    double total_gain = 0.0;            // dB
    bool coherence_time_saturated = false;
    bool coherence_bandwidth_saturated = false;
};

// PDP_j = mean over snapshots of |x_{t,j}|^2.
inline std::vector<double> power_delay_profile(const Tvir& x) {
    x.validate();
    std::vector<double> pdp(x.D, 0.0);
    for (size_t t = 0; t < x.T; ++t)
        for (size_t j = 0; j < x.D; ++j) pdp[j] += std::norm(x.at(t, j));
    for (double& v : pdp) v /= static_cast<double>(x.T);
    return pdp;
}

// Width of the region whose PDP stays within threshold_db of the peak
// (boundary taps at exactly the threshold are included).
inline double delay_spread(const std::vector<double>& pdp, double delay_step,
                           double threshold_db = -10.0) {
    const double peak = *std::max_element(pdp.begin(), pdp.end());
    if (peak <= 0.0) throw DegenerateInput("delay_spread: all-zero PDP");
    const double cut = peak * db_to_power(threshold_db);
    size_t first = pdp.size(), last = 0;
    for (size_t j = 0; j < pdp.size(); ++j) {
        if (pdp[j] >= cut) {
            first = std::min(first, j);
            last = j;
        }
    }
    return static_cast<double>(last - first) * delay_step;
}

inline double mean_delay(const std::vector<double>& pdp, double delay_step) {
    double num = 0.0, den = 0.0;
    for (size_t j = 0; j < pdp.size(); ++j) {
        num += pdp[j] * static_cast<double>(j);
        den += pdp[j];
    }
    if (den <= 0.0) throw DegenerateInput("mean_delay: zero total power");
    return num / den * delay_step;
}

inline double rms_delay_spread(const std::vector<double>& pdp, double delay_step) {
    const double mu = mean_delay(pdp, delay_step) / delay_step;
    double num = 0.0, den = 0.0;
    for (size_t j = 0; j < pdp.size(); ++j) {
        const double d = static_cast<double>(j) - mu;
        num += pdp[j] * d * d;
        den += pdp[j];
    }
    return std::sqrt(num / den) * delay_step;
}

// Doppler power spectrum marginal: |DFT over time|^2 summed over taps.
// Spread is the signed-frequency width of bins within threshold_db of
// the peak; resolution 1/(T*time_step).
inline double doppler_spread(const Tvir& x, double threshold_db = -10.0) {
    require(x.T >= 2, "doppler_spread: need at least 2 snapshots");
    std::vector<double> spectrum(x.T, 0.0);
    std::vector<cdouble> series(x.T);
    for (size_t j = 0; j < x.D; ++j) {
        for (size_t t = 0; t < x.T; ++t) series[t] = x.at(t, j);
        const auto spec = dft_naive(series);
        for (size_t k = 0; k < x.T; ++k) spectrum[k] += std::norm(spec[k]);
    }
    const double peak = *std::max_element(spectrum.begin(), spectrum.end());
    if (peak <= 0.0) throw DegenerateInput("doppler_spread: zero-energy TVIR");
    const double cut = peak * db_to_power(threshold_db);
    const double df = 1.0 / (static_cast<double>(x.T) * x.time_step);
    double fmin = std::numeric_limits<double>::infinity();
    double fmax = -std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < x.T; ++k) {
        if (spectrum[k] < cut) continue;
        const double f =
            (k <= x.T / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(x.T)) * df;
        fmin = std::min(fmin, f);
        fmax = std::max(fmax, f);
    }
    return fmax - fmin;
}

// Smallest lag at which the normalized channel autocorrelation drops
// below the threshold; the window duration (with a saturation flag) when
// it never does. Per-lag sums are scaled by the number of terms so a
// static channel stays at correlation 1.
inline double coherence_time(const Tvir& x, double threshold = kCoherenceThreshold,
                             bool* saturated = nullptr) {
    require(x.T >= 2, "coherence_time: need at least 2 snapshots");
    auto corr_at = [&](size_t lag) {
        cdouble acc(0.0, 0.0);
        for (size_t t = 0; t + lag < x.T; ++t)
            for (size_t j = 0; j < x.D; ++j) acc += x.at(t, j) * std::conj(x.at(t + lag, j));
        return std::abs(acc) / static_cast<double>(x.T - lag);
    };
    const double r0 = corr_at(0);
    if (r0 <= 0.0) throw DegenerateInput("coherence_time: zero-energy TVIR");
    for (size_t lag = 1; lag < x.T; ++lag) {
        if (corr_at(lag) / r0 < threshold) {
            if (saturated) *saturated = false;
            return static_cast<double>(lag) * x.time_step;
        }
    }
    if (saturated) *saturated = true;
    return x.duration();
}

// Frequency-correlation dual: normalized |DFT of the PDP|; first
// frequency below the threshold, saturating at Nyquist.
inline double coherence_bandwidth(const std::vector<double>& pdp, double delay_step,
                                  double threshold = kCoherenceThreshold,
                                  bool* saturated = nullptr) {
    const size_t d = pdp.size();
    double total = 0.0;
    for (double v : pdp) total += v;
    if (total <= 0.0) throw DegenerateInput("coherence_bandwidth: zero PDP");
    std::vector<cdouble> series(d);
    for (size_t j = 0; j < d; ++j) series[j] = {pdp[j], 0.0};
    const auto spec = dft_naive(series);
    const double f_res = 1.0 / (static_cast<double>(d) * delay_step);
    const double nyquist = 1.0 / (2.0 * delay_step);
    const double r0 = std::abs(spec[0]);
    for (size_t k = 1; k <= d / 2; ++k) {
        if (std::abs(spec[k]) / r0 < threshold) {
            if (saturated) *saturated = false;
            return static_cast<double>(k) * f_res;
        }
    }
    if (saturated) *saturated = true;
    return nyquist;
}

struct SignificantTaps {
    std::vector<std::pair<double, double>> taps;  // (amplitude, phase) pooled over snapshots
    size_t skipped_snapshots = 0;                 // all-zero snapshots
    double mean_count_per_snapshot = 0.0;
};

// Taps whose amplitude exceeds threshold_db (strictly) relative to the
// strongest tap of the same snapshot.
inline SignificantTaps significant_taps(const Tvir& x, double threshold_db = -26.0) {
    SignificantTaps out;
    size_t counted_snapshots = 0;
    for (size_t t = 0; t < x.T; ++t) {
        double ref = 0.0;
        for (size_t j = 0; j < x.D; ++j) ref = std::max(ref, std::abs(x.at(t, j)));
        if (ref <= 0.0) {
            out.skipped_snapshots++;
            continue;
        }
        const double cut = ref * db_to_amplitude(threshold_db);
        size_t count = 0;
        for (size_t j = 0; j < x.D; ++j) {
            const double a = std::abs(x.at(t, j));
            if (a > cut) {
                out.taps.emplace_back(a, std::arg(x.at(t, j)));
                ++count;
            }
        }
        out.mean_count_per_snapshot += static_cast<double>(count);
        ++counted_snapshots;
    }
    if (counted_snapshots > 0)
        out.mean_count_per_snapshot /= static_cast<double>(counted_snapshots);
    return out;
}

inline Characteristics characteristics(const Tvir& x) {
    Characteristics c;
    const auto pdp = power_delay_profile(x);
    c.mean_delay = mean_delay(pdp, x.delay_step);
    c.delay_spread_10db = delay_spread(pdp, x.delay_step);
    c.rms_delay_spread = rms_delay_spread(pdp, x.delay_step);
    c.doppler_spread_10db = doppler_spread(x);
    c.coherence_time = coherence_time(x, kCoherenceThreshold, &c.coherence_time_saturated);
    c.coherence_bandwidth =
        coherence_bandwidth(pdp, x.delay_step, kCoherenceThreshold, &c.coherence_bandwidth_saturated);
    c.num_significant_taps = significant_taps(x).mean_count_per_snapshot;
    double total = 0.0;
    for (double v : pdp) total += v;
    c.total_gain = power_to_db(total);
    return c;
}

struct EmpiricalCdf {
    std::vector<double> sorted;

    explicit EmpiricalCdf(std::vector<double> samples) : sorted(std::move(samples)) {
        require(!sorted.empty(), "EmpiricalCdf: empty sample set");
        std::sort(sorted.begin(), sorted.end());
    }

    // Fraction of samples <= x (right-continuous).
    double operator()(double x) const {
        const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
        return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
    }
};

// Half-open bins [lo + k*w, lo + (k+1)*w); out-of-range values are dropped.
inline std::vector<size_t> histogram(const std::vector<double>& values, size_t n_bins, double lo,
                                     double hi) {
    require(n_bins >= 1 && hi > lo, "histogram: bad binning");
    require(!values.empty(), "histogram: empty sample set");
    std::vector<size_t> counts(n_bins, 0);
    const double w = (hi - lo) / static_cast<double>(n_bins);
    for (double v : values) {
        if (v < lo || v >= hi) continue;
        size_t k = static_cast<size_t>((v - lo) / w);
        if (k >= n_bins) k = n_bins - 1;  // guards the v just below hi rounding up
        counts[k]++;
    }
    return counts;
}

// ---- CSV export -----------------------------------------------------------------

inline const char* characteristics_csv_header() {
    return "mean_delay_s,delay_spread_10db_s,rms_delay_spread_s,doppler_spread_10db_hz,"
           "coherence_time_s,coherence_bandwidth_hz,num_significant_taps,total_gain_db";
}

inline void write_characteristics_csv(const std::string& path,
                                      const std::vector<Characteristics>& rows) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path);
    os << characteristics_csv_header() << "\n";
    char buf[512];
    for (const Characteristics& c : rows) {
        std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", c.mean_delay,
                      c.delay_spread_10db, c.rms_delay_spread, c.doppler_spread_10db,
                      c.coherence_time, c.coherence_bandwidth, c.num_significant_taps,
                      c.total_gain);
        os << buf;
    }
}

inline void write_cdf_csv(const std::string& path, const EmpiricalCdf& cdf) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path);
    os << "value,cdf\n";
    char buf[128];
    const size_t n = cdf.sorted.size();
    for (size_t i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof buf, "%.9g,%.9g\n", cdf.sorted[i],
                      static_cast<double>(i + 1) / static_cast<double>(n));
        os << buf;
    }
}

inline void write_histogram_csv(const std::string& path, const std::vector<size_t>& counts,
                                double lo, double hi) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path);
    os << "bin_center,count\n";
    const double w = (hi - lo) / static_cast<double>(counts.size());
    char buf[128];
    for (size_t k = 0; k < counts.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.9g,%zu\n", lo + (static_cast<double>(k) + 0.5) * w,
                      counts[k]);
        os << buf;
    }
}

}  // namespace uasim
