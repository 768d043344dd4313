// Channel sounding: maximal-length probe sequences and NLMS tracking of
// the impulse response from a probe transmission.
#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <vector>

#include "uasim/common.hpp"
#include "uasim/tvir.hpp"

namespace uasim {

// Fibonacci-LFSR feedback taps of a primitive polynomial per order.
inline const std::map<int, std::vector<int>>& msequence_taps() {
    static const std::map<int, std::vector<int>> taps = {
        {2, {2, 1}},        {3, {3, 2}},         {4, {4, 3}},
        {5, {5, 3}},        {6, {6, 5}},         {7, {7, 6}},
        {8, {8, 6, 5, 4}},  {9, {9, 5}},         {10, {10, 7}},
        {11, {11, 9}},      {12, {12, 6, 4, 1}}, {13, {13, 4, 3, 1}},
        {14, {14, 5, 3, 1}},{15, {15, 14}},      {16, {16, 15, 13, 4}},
    };
    return taps;
}

// One period (2^order - 1 chips) of a maximal-length sequence, +/-1.
inline std::vector<double> msequence(int order) {
    const auto& table = msequence_taps();
    const auto it = table.find(order);
    if (it == table.end()) throw InvalidInput("msequence: unsupported order");
    const size_t n = (size_t{1} << order) - 1;
    std::vector<uint8_t> bits(n + static_cast<size_t>(order), 1);  // all-ones seed
    for (size_t i = static_cast<size_t>(order); i < bits.size(); ++i) {
        uint8_t fb = 0;
        for (int t : it->second) fb ^= bits[i - static_cast<size_t>(t)];
        bits[i] = fb;
    }
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = bits[i] ? -1.0 : 1.0;
    return out;
}

struct NlmsResult {
    Tvir estimate;                  // tap-weight trajectory on the snapshot grid
    size_t zero_energy_updates = 0; // regularized steps with no probe energy
};

// Normalized LMS: h <- h + mu * conj(u) * e / (|u|^2 + eps_reg), with the
// tap trajectory subsampled every snapshot_stride samples.
inline NlmsResult nlms_estimate(const std::vector<cdouble>& probe,
                                const std::vector<cdouble>& received, size_t num_taps, double mu,
                                double eps_reg = 1e-8, size_t snapshot_stride = 600,
                                double sample_rate = 12000.0) {
    require(num_taps >= 1, "nlms_estimate: need at least one tap");
    require(mu >= 0.0 && mu <= 2.0, "nlms_estimate: mu must be in [0, 2]");
    require(eps_reg > 0.0, "nlms_estimate: eps_reg must be positive");
    require(probe.size() == received.size() && !probe.empty(),
            "nlms_estimate: probe/received length mismatch");
    require(snapshot_stride >= 1, "nlms_estimate: snapshot stride must be >= 1");

    std::vector<cdouble> h(num_taps, cdouble(0.0, 0.0));
    std::vector<std::vector<cdouble>> snapshots;
    NlmsResult result;
    for (size_t n = 0; n < probe.size(); ++n) {
        cdouble pred(0.0, 0.0);
        double norm = 0.0;
        const size_t jmax = std::min(num_taps, n + 1);
        for (size_t j = 0; j < jmax; ++j) {
            pred += h[j] * probe[n - j];
            norm += std::norm(probe[n - j]);
        }
        if (norm == 0.0) result.zero_energy_updates++;
        const cdouble err = received[n] - pred;
        const double scale = mu / (norm + eps_reg);
        for (size_t j = 0; j < jmax; ++j) h[j] += scale * std::conj(probe[n - j]) * err;
        if ((n + 1) % snapshot_stride == 0) snapshots.push_back(h);
    }
    if (snapshots.empty()) snapshots.push_back(h);

    Tvir out(snapshots.size(), num_taps, static_cast<double>(snapshot_stride) / sample_rate,
             1.0 / sample_rate);
    for (size_t t = 0; t < snapshots.size(); ++t)
        std::copy(snapshots[t].begin(), snapshots[t].end(), out.snapshot(t));
    result.estimate = std::move(out);
    return result;
}

}  // namespace uasim
