// Discrete Fourier transforms: an iterative radix-2 FFT for the modem
// (power-of-two sizes) and a naive DFT for the small, odd-sized
// transforms used by the channel metrics.
#pragma once

#include <complex>
#include <vector>

#include "uasim/common.hpp"

namespace uasim {

inline bool is_power_of_two(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 Cooley-Tukey, unnormalized.
inline void fft_pow2(std::vector<cdouble>& a, bool inverse) {
    const size_t n = a.size();
    require(is_power_of_two(n), "fft_pow2: size must be a power of two");
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        const cdouble wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            cdouble w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                const cdouble u = a[i + k];
                const cdouble v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

// Unitary transforms (1/sqrt(N) both ways) so Parseval holds exactly.
inline std::vector<cdouble> fft_unitary(std::vector<cdouble> a) {
    fft_pow2(a, false);
    const double s = 1.0 / std::sqrt(static_cast<double>(a.size()));
    for (cdouble& x : a) x *= s;
    return a;
}

inline std::vector<cdouble> ifft_unitary(std::vector<cdouble> a) {
    fft_pow2(a, true);
    const double s = 1.0 / std::sqrt(static_cast<double>(a.size()));
    for (cdouble& x : a) x *= s;
    return a;
}

// O(N^2) forward DFT for arbitrary N, unnormalized.
inline std::vector<cdouble> dft_naive(const std::vector<cdouble>& x) {
    const size_t n = x.size();
    std::vector<cdouble> y(n);
    for (size_t k = 0; k < n; ++k) {
        cdouble acc(0.0, 0.0);
        for (size_t m = 0; m < n; ++m) {
            const double ang = -2.0 * kPi * static_cast<double>(k * m) / static_cast<double>(n);
            acc += x[m] * cdouble(std::cos(ang), std::sin(ang));
        }
        y[k] = acc;
    }
    return y;
}

}  // namespace uasim
