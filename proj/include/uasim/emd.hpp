// Empirical mode decomposition by classical sifting: cubic-spline
// envelopes through the extrema (mirror-extended at both ends), mean
// envelope subtraction, SD stopping rule.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "uasim/common.hpp"

namespace uasim {

struct EmdResult {
    std::vector<std::vector<double>> imfs;
    std::vector<double> residue;
};

namespace detail {

// Natural cubic spline through (t_i, y_i), t strictly increasing.
class CubicSpline {
public:
    CubicSpline(std::vector<double> t, std::vector<double> y)
        : t_(std::move(t)), y_(std::move(y)) {
        const size_t n = t_.size();
        require(n >= 2, "spline: need at least two knots");
        m_.assign(n, 0.0);
        if (n == 2) return;
        // Tridiagonal solve for second derivatives, natural ends.
        std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), d(n, 0.0);
        for (size_t i = 1; i + 1 < n; ++i) {
            const double h0 = t_[i] - t_[i - 1];
            const double h1 = t_[i + 1] - t_[i];
            a[i] = h0;
            b[i] = 2.0 * (h0 + h1);
            c[i] = h1;
            d[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
        }
        for (size_t i = 2; i + 1 < n; ++i) {
            const double w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            d[i] -= w * d[i - 1];
        }
        for (size_t i = n - 2; i >= 1; --i) {
            m_[i] = (d[i] - c[i] * m_[i + 1]) / b[i];
            if (i == 1) break;
        }
    }

    double operator()(double x) const {
        const size_t n = t_.size();
        size_t i = static_cast<size_t>(
            std::upper_bound(t_.begin(), t_.end(), x) - t_.begin());
        if (i == 0) i = 1;
        if (i >= n) i = n - 1;
        const double h = t_[i] - t_[i - 1];
        const double u = (x - t_[i - 1]) / h;
        const double v = 1.0 - u;
        return v * y_[i - 1] + u * y_[i] +
               h * h / 6.0 *
                   ((v * v * v - v) * m_[i - 1] + (u * u * u - u) * m_[i]);
    }

private:
    std::vector<double> t_, y_, m_;
};

inline void find_extrema(const std::vector<double>& x, std::vector<size_t>& maxima,
                         std::vector<size_t>& minima) {
    maxima.clear();
    minima.clear();
    for (size_t i = 1; i + 1 < x.size(); ++i) {
        if (x[i] > x[i - 1] && x[i] > x[i + 1]) maxima.push_back(i);
        if (x[i] < x[i - 1] && x[i] < x[i + 1]) minima.push_back(i);
    }
}

// Spline envelope through the extrema, mirror-extending up to two
// extrema about each series end.
inline std::vector<double> envelope(const std::vector<double>& x,
                                    const std::vector<size_t>& extrema) {
    const double n1 = static_cast<double>(x.size() - 1);
    std::vector<double> t, y;
    const size_t ghosts = std::min<size_t>(2, extrema.size());
    for (size_t g = ghosts; g >= 1; --g) {
        t.push_back(-static_cast<double>(extrema[g - 1]));
        y.push_back(x[extrema[g - 1]]);
    }
    for (size_t idx : extrema) {
        t.push_back(static_cast<double>(idx));
        y.push_back(x[idx]);
    }
    for (size_t g = 1; g <= ghosts; ++g) {
        const size_t idx = extrema[extrema.size() - g];
        t.push_back(2.0 * n1 - static_cast<double>(idx));
        y.push_back(x[idx]);
    }
    const CubicSpline spline(std::move(t), std::move(y));
    std::vector<double> env(x.size());
    for (size_t i = 0; i < x.size(); ++i) env[i] = spline(static_cast<double>(i));
    return env;
}

}  // namespace detail

// Sifts out IMFs until the residue has too few extrema to envelope (a
// monotone or constant residue in particular) or max_imfs is reached.
// Sum of IMFs plus residue reconstructs the input to rounding error.
inline EmdResult emd(const std::vector<double>& x, size_t max_imfs = 10, double sd_stop = 0.3,
                     size_t max_sift_passes = 10) {
    require(x.size() >= 4, "emd: series too short");
    require(sd_stop > 0.0, "emd: sd_stop must be positive");
    EmdResult out;
    std::vector<double> residue = x;
    std::vector<size_t> maxima, minima;
    while (out.imfs.size() < max_imfs) {
        detail::find_extrema(residue, maxima, minima);
        if (maxima.size() < 2 || minima.size() < 2) break;
        std::vector<double> h = residue;
        for (size_t pass = 0; pass < max_sift_passes; ++pass) {
            detail::find_extrema(h, maxima, minima);
            if (maxima.size() < 2 || minima.size() < 2) break;
            const auto upper = detail::envelope(h, maxima);
            const auto lower = detail::envelope(h, minima);
            double sd_num = 0.0, sd_den = 0.0;
            for (size_t i = 0; i < h.size(); ++i) {
                const double m = 0.5 * (upper[i] + lower[i]);
                sd_num += m * m;
                sd_den += h[i] * h[i];
                h[i] -= m;
            }
            if (sd_den <= 0.0 || sd_num / sd_den < sd_stop) break;
        }
        for (size_t i = 0; i < residue.size(); ++i) residue[i] -= h[i];
        out.imfs.push_back(std::move(h));
    }
    out.residue = std::move(residue);
    return out;
}

}  // namespace uasim
