// Shared basics: error types, numeric helpers, dB conversions.
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace uasim {

using cdouble = std::complex<double>;

// Thrown when an argument violates an operation's contract.
struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Thrown when file parsing/serialization fails.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when a numeric procedure cannot proceed (all-zero normalization,
// NaN loss, zero-energy input).
struct DegenerateInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double kPi = 3.14159265358979323846;

inline double db_to_power(double db) { return std::pow(10.0, db / 10.0); }
inline double power_to_db(double p) { return 10.0 * std::log10(p); }
inline double db_to_amplitude(double db) { return std::pow(10.0, db / 20.0); }
inline double amplitude_to_db(double a) { return 20.0 * std::log10(a); }

template <typename T>
bool all_finite(const std::vector<T>& v) {
    for (const T& x : v) {
        if constexpr (std::is_same_v<T, std::complex<double>> ||
                      std::is_same_v<T, std::complex<float>>) {
            if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
        } else {
            if (!std::isfinite(static_cast<double>(x))) return false;
        }
    }
    return true;
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidInput(msg);
}

}  // namespace uasim
