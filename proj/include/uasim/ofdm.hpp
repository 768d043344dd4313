// OFDM modem and BER evaluation.
//
// Scheme presets mirror the 32 BPSK evaluation schemes plus the "nof1"
// QPSK scheme (1024 carriers, 256 pilots, 0.04 s cyclic prefix). The
// preset table records carriers/nulls/bits-per-block as given; the pilot
// budget is derived as whatever active capacity the data bits leave
// unused. Windowed schemes Hamming-window each time-domain block and
// leave alternate subcarriers unused; the receiver divides the known
// window back out before its FFT so subcarrier orthogonality is exact.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "uasim/common.hpp"
#include "uasim/dft.hpp"
#include "uasim/rng.hpp"
#include "uasim/tvir.hpp"

namespace uasim {

enum class Modulation { kBpsk, kQpsk };

struct OfdmScheme {
    std::string id;
    size_t num_carriers = 0;        // FFT size
    size_t num_null_carriers = 0;   // guard carriers outside the active block
    size_t center_carrier_number = 0;  // informational, from the preset table
    size_t cp_length = 0;           // samples
    bool windowed = false;
    Modulation modulation = Modulation::kBpsk;
    size_t pilot_count = 0;         // 0 = derive from capacity left by bits_per_block
    size_t bits_per_block = 0;
    size_t frame_length = 0;        // informational (ms), from the preset table
    uint64_t pilot_seed = 0x9a570;  // pilots are pseudo-random but known

    size_t bits_per_symbol() const { return modulation == Modulation::kQpsk ? 2 : 1; }
    size_t block_samples() const { return num_carriers + cp_length; }
};

// Frozen carrier layout for one scheme.
struct OfdmLayout {
    std::vector<size_t> usable;       // FFT bins eligible for data/pilots
    std::vector<size_t> pilot_pos;    // indices into `usable`
    std::vector<size_t> data_pos;     // indices into `usable`
    std::vector<cdouble> pilot_syms;  // unit-amplitude QPSK, one per pilot

    size_t data_carriers() const { return data_pos.size(); }
};

inline OfdmLayout make_layout(const OfdmScheme& s) {
    require(s.num_null_carriers < s.num_carriers, "scheme: null carriers must leave room");
    require(is_power_of_two(s.num_carriers), "scheme: FFT size must be a power of two");
    const size_t active = s.num_carriers - s.num_null_carriers;
    // Active block centered on DC in signed-frequency terms.
    const long half = static_cast<long>(active) / 2;
    std::vector<size_t> active_bins;
    for (long k = -half; k < static_cast<long>(active) - half; ++k)
        active_bins.push_back(static_cast<size_t>((k + static_cast<long>(s.num_carriers)) %
                                                  static_cast<long>(s.num_carriers)));
    OfdmLayout lay;
    if (s.windowed) {
        for (size_t i = 0; i < active_bins.size(); i += 2) lay.usable.push_back(active_bins[i]);
    } else {
        lay.usable = active_bins;
    }
    require(s.bits_per_block % s.bits_per_symbol() == 0,
            "scheme: bits_per_block not symbol-aligned");
    const size_t data = s.bits_per_block / s.bits_per_symbol();
    require(data <= lay.usable.size(), "scheme: bits_per_block exceeds usable carriers");
    size_t pilots = s.pilot_count > 0 ? s.pilot_count : lay.usable.size() - data;
    require(data + pilots <= lay.usable.size(), "scheme: pilots + data exceed usable carriers");

    // Evenly spread pilots over the usable list; the rest carry data.
    std::vector<bool> is_pilot(lay.usable.size(), false);
    for (size_t i = 0; i < pilots; ++i) {
        size_t idx = static_cast<size_t>((static_cast<double>(i) + 0.5) *
                                         static_cast<double>(lay.usable.size()) /
                                         static_cast<double>(pilots));
        while (is_pilot[idx]) idx = (idx + 1) % lay.usable.size();
        is_pilot[idx] = true;
    }
    Rng prng(s.pilot_seed);
    for (size_t i = 0; i < lay.usable.size(); ++i) {
        if (is_pilot[i]) {
            lay.pilot_pos.push_back(i);
            const double phase = kPi / 4.0 + kPi / 2.0 * static_cast<double>(prng.uniform_index(4));
            lay.pilot_syms.push_back(std::polar(1.0, phase));
        } else if (lay.data_pos.size() < data) {
            lay.data_pos.push_back(i);
        }
    }
    require(lay.data_pos.size() == data, "scheme: layout failed to place all data carriers");
    return lay;
}

namespace detail {

inline double hamming(size_t n, size_t len) {
    if (len <= 1) return 1.0;
    return 0.54 - 0.46 * std::cos(2.0 * kPi * static_cast<double>(n) /
                                  static_cast<double>(len - 1));
}

inline cdouble map_symbol(Modulation mod, const std::vector<uint8_t>& bits, size_t& pos) {
    if (mod == Modulation::kBpsk) {
        const double v = bits[pos++] ? -1.0 : 1.0;
        return {v, 0.0};
    }
    const double re = bits[pos++] ? -1.0 : 1.0;
    const double im = bits[pos++] ? -1.0 : 1.0;
    return cdouble(re, im) / std::sqrt(2.0);
}

inline void unmap_symbol(Modulation mod, cdouble sym, std::vector<uint8_t>& bits) {
    if (mod == Modulation::kBpsk) {
        bits.push_back(sym.real() < 0.0 ? 1 : 0);
        return;
    }
    bits.push_back(sym.real() < 0.0 ? 1 : 0);
    bits.push_back(sym.imag() < 0.0 ? 1 : 0);
}

}  // namespace detail

// Bits -> baseband blocks: symbols on data carriers, known pilots, nulls
// zeroed, unitary IFFT, cyclic prefix, then the optional Hamming window
// over the whole (CP + body) block.
inline std::vector<cdouble> ofdm_modulate(const std::vector<uint8_t>& bits, const OfdmScheme& s) {
    const OfdmLayout lay = make_layout(s);
    require(!bits.empty() && bits.size() % s.bits_per_block == 0,
            "ofdm_modulate: bits not block-aligned");
    const size_t blocks = bits.size() / s.bits_per_block;
    std::vector<cdouble> out;
    out.reserve(blocks * s.block_samples());
    size_t pos = 0;
    for (size_t b = 0; b < blocks; ++b) {
        std::vector<cdouble> freq(s.num_carriers, cdouble(0.0, 0.0));
        for (size_t i = 0; i < lay.pilot_pos.size(); ++i)
            freq[lay.usable[lay.pilot_pos[i]]] = lay.pilot_syms[i];
        for (size_t i = 0; i < lay.data_pos.size(); ++i)
            freq[lay.usable[lay.data_pos[i]]] = detail::map_symbol(s.modulation, bits, pos);
        std::vector<cdouble> time = ifft_unitary(std::move(freq));
        std::vector<cdouble> block;
        block.reserve(s.block_samples());
        for (size_t n = s.num_carriers - s.cp_length; n < s.num_carriers; ++n)
            block.push_back(time[n]);
        block.insert(block.end(), time.begin(), time.end());
        if (s.windowed)
            for (size_t n = 0; n < block.size(); ++n)
                block[n] *= detail::hamming(n, block.size());
        out.insert(out.end(), block.begin(), block.end());
    }
    return out;
}

// Time-varying convolution plus white Gaussian noise at the requested
// output SNR. The active CIR for each output sample is the TVIR snapshot
// interpolated linearly at that sample's time; the signal must not
// outlast the TVIR window. snr_db = +inf disables the noise.
inline std::vector<cdouble> apply_channel(const std::vector<cdouble>& signal, const Tvir& tvir,
                                          double snr_db, Rng& rng) {
    require(!signal.empty(), "apply_channel: empty signal");
    require(!std::isnan(snr_db), "apply_channel: SNR is NaN");
    tvir.validate();
    const double fs = 1.0 / tvir.delay_step;
    require(static_cast<double>(signal.size()) / fs <= tvir.duration() + 1e-9,
            "apply_channel: signal outlasts the TVIR window");
    std::vector<cdouble> y(signal.size(), cdouble(0.0, 0.0));
    std::vector<cdouble> h(tvir.D);
    for (size_t n = 0; n < signal.size(); ++n) {
        const double pos = static_cast<double>(n) * tvir.delay_step / tvir.time_step;
        size_t i0 = static_cast<size_t>(std::floor(pos));
        double frac = pos - static_cast<double>(i0);
        if (i0 >= tvir.T - 1) {
            i0 = tvir.T - 1;
            frac = 0.0;
        }
        if (frac == 0.0) {
            std::copy(tvir.snapshot(i0), tvir.snapshot(i0) + tvir.D, h.begin());
        } else {
            const cdouble* a = tvir.snapshot(i0);
            const cdouble* b = tvir.snapshot(i0 + 1);
            for (size_t j = 0; j < tvir.D; ++j) h[j] = a[j] + frac * (b[j] - a[j]);
        }
        cdouble acc(0.0, 0.0);
        const size_t jmax = std::min(tvir.D, n + 1);
        for (size_t j = 0; j < jmax; ++j) acc += h[j] * signal[n - j];
        y[n] = acc;
    }
    if (std::isinf(snr_db) && snr_db > 0) return y;
    double power = 0.0;
    for (const cdouble& v : y) power += std::norm(v);
    power /= static_cast<double>(y.size());
    const double noise_var = power * db_to_power(-snr_db);
    const double comp_std = std::sqrt(noise_var / 2.0);
    for (cdouble& v : y) v += cdouble(comp_std * rng.normal(), comp_std * rng.normal());
    return y;
}

// Per block: strip the prefix, undo the known transmit window, FFT, then
// one-tap equalization from the least-squares pilot estimate linearly
// interpolated across the usable carriers. Passing known_flat_gain
// replaces estimation with ideal flat-channel knowledge (reference mode
// for calibration against analytic curves).
inline std::vector<uint8_t> ofdm_demodulate(const std::vector<cdouble>& received,
                                            const OfdmScheme& s,
                                            std::optional<cdouble> known_flat_gain = {}) {
    const OfdmLayout lay = make_layout(s);
    require(!received.empty() && received.size() % s.block_samples() == 0,
            "ofdm_demodulate: length is not a whole number of blocks");
    require(known_flat_gain.has_value() || !lay.pilot_pos.empty(),
            "ofdm_demodulate: no pilots and no known channel");
    const size_t blocks = received.size() / s.block_samples();
    std::vector<uint8_t> bits;
    bits.reserve(blocks * s.bits_per_block);
    for (size_t b = 0; b < blocks; ++b) {
        const cdouble* blk = received.data() + b * s.block_samples();
        std::vector<cdouble> body(blk + s.cp_length, blk + s.block_samples());
        if (s.windowed)
            for (size_t n = 0; n < body.size(); ++n)
                body[n] /= detail::hamming(s.cp_length + n, s.block_samples());
        const std::vector<cdouble> freq = fft_unitary(std::move(body));

        std::vector<cdouble> est(lay.usable.size());
        if (known_flat_gain) {
            std::fill(est.begin(), est.end(), *known_flat_gain);
        } else {
            // LS at pilots, linear interpolation between them, flat ends.
            std::vector<cdouble> hp(lay.pilot_pos.size());
            for (size_t i = 0; i < lay.pilot_pos.size(); ++i)
                hp[i] = freq[lay.usable[lay.pilot_pos[i]]] / lay.pilot_syms[i];
            size_t seg = 0;
            for (size_t q = 0; q < lay.usable.size(); ++q) {
                while (seg + 1 < lay.pilot_pos.size() && lay.pilot_pos[seg + 1] < q) ++seg;
                if (q <= lay.pilot_pos.front()) {
                    est[q] = hp.front();
                } else if (q >= lay.pilot_pos.back()) {
                    est[q] = hp.back();
                } else {
                    const size_t lo = lay.pilot_pos[seg];
                    const size_t hi = lay.pilot_pos[seg + 1];
                    const double w = static_cast<double>(q - lo) / static_cast<double>(hi - lo);
                    est[q] = hp[seg] + w * (hp[seg + 1] - hp[seg]);
                }
            }
        }
        for (size_t i = 0; i < lay.data_pos.size(); ++i) {
            const size_t q = lay.data_pos[i];
            const cdouble h = est[q];
            const cdouble y = freq[lay.usable[q]];
            const cdouble sym = std::abs(h) > 0.0 ? y / h : y;
            detail::unmap_symbol(s.modulation, sym, bits);
        }
    }
    return bits;
}

// ---- BER ------------------------------------------------------------------------

struct BerResult {
    std::string scheme_id;
    double snr_db = 0.0;
    size_t bit_errors = 0;
    size_t bits_total = 0;
    double ber = 0.0;
};

inline BerResult ber(const std::vector<uint8_t>& tx, const std::vector<uint8_t>& rx) {
    require(tx.size() == rx.size() && !tx.empty(), "ber: length mismatch");
    BerResult r;
    r.bits_total = tx.size();
    for (size_t i = 0; i < tx.size(); ++i) r.bit_errors += tx[i] != rx[i];
    r.ber = static_cast<double>(r.bit_errors) / static_cast<double>(r.bits_total);
    return r;
}

struct BerTableRow {
    std::string scheme_id;
    double snr_db = 0.0;
    double mean_ber = 0.0;
    double p75_ber = 0.0;
    size_t n_channels = 0;
    size_t bits_total = 0;
};

// Random payload per (tvir, snr): modulate, run the channel, demodulate,
// count. Aggregates the mean and the 75th percentile across TVIRs.
inline std::vector<BerTableRow> evaluate_ber(const std::vector<Tvir>& tvirs,
                                             const OfdmScheme& scheme,
                                             const std::vector<double>& snr_grid_db, Rng& rng) {
    require(!tvirs.empty() && !snr_grid_db.empty(), "evaluate_ber: empty inputs");
    std::vector<BerTableRow> table;
    for (double snr : snr_grid_db) {
        BerTableRow row;
        row.scheme_id = scheme.id;
        row.snr_db = snr;
        std::vector<double> per_tvir;
        for (size_t c = 0; c < tvirs.size(); ++c) {
            const Tvir& tvir = tvirs[c];
            const double fs = 1.0 / tvir.delay_step;
            const size_t max_samples = static_cast<size_t>(tvir.duration() * fs);
            const size_t blocks = max_samples / scheme.block_samples();
            require(blocks >= 1, "evaluate_ber: TVIR shorter than one OFDM block");
            std::vector<uint8_t> payload(blocks * scheme.bits_per_block);
            Rng stream = rng.stream(c * 7919 + static_cast<uint64_t>(snr * 1000.0));
            for (auto& b : payload) b = static_cast<uint8_t>(stream.uniform_index(2));
            const auto tx = ofdm_modulate(payload, scheme);
            const auto rx_sig = apply_channel(tx, tvir, snr, stream);
            const auto rx = ofdm_demodulate(rx_sig, scheme);
            const BerResult r = ber(payload, rx);
            per_tvir.push_back(r.ber);
            row.bits_total += r.bits_total;
        }
        double mean = 0.0;
        for (double v : per_tvir) mean += v;
        row.mean_ber = mean / static_cast<double>(per_tvir.size());
        std::sort(per_tvir.begin(), per_tvir.end());
        const size_t rank = static_cast<size_t>(
            std::ceil(0.75 * static_cast<double>(per_tvir.size())));
        row.p75_ber = per_tvir[std::max<size_t>(rank, 1) - 1];
        row.n_channels = per_tvir.size();
        table.push_back(row);
    }
    return table;
}

inline void write_ber_csv(const std::string& path, const std::vector<BerTableRow>& rows) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path);
    os << "scheme,snr_db,mean_ber,p75_ber,n_channels,bits_total\n";
    char buf[256];
    for (const BerTableRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%.4g,%.9g,%.9g,%zu,%zu\n", r.scheme_id.c_str(),
                      r.snr_db, r.mean_ber, r.p75_ber, r.n_channels, r.bits_total);
        os << buf;
    }
}

// ---- scheme presets ----------------------------------------------------------------

// Text preset format: one [section] per scheme, key = value lines.
inline std::vector<OfdmScheme> parse_schemes(std::istream& is) {
    std::vector<OfdmScheme> out;
    OfdmScheme cur;
    bool have = false;
    std::string line;
    size_t lineno = 0;
    auto flush = [&]() {
        if (have) out.push_back(cur);
        cur = OfdmScheme{};
        have = false;
    };
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            require(line.back() == ']', "schemes: bad section at line " + std::to_string(lineno));
            flush();
            cur.id = trim(line.substr(1, line.size() - 2));
            have = true;
            continue;
        }
        const auto eq = line.find('=');
        require(have && eq != std::string::npos,
                "schemes: expected key = value at line " + std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "num_carriers") cur.num_carriers = std::stoul(val);
        else if (key == "num_null_carriers") cur.num_null_carriers = std::stoul(val);
        else if (key == "center_carrier_number") cur.center_carrier_number = std::stoul(val);
        else if (key == "cp_length") cur.cp_length = std::stoul(val);
        else if (key == "windowed") cur.windowed = val == "true" || val == "1";
        else if (key == "modulation") cur.modulation = val == "qpsk" ? Modulation::kQpsk : Modulation::kBpsk;
        else if (key == "pilot_count") cur.pilot_count = std::stoul(val);
        else if (key == "bits_per_block") cur.bits_per_block = std::stoul(val);
        else if (key == "frame_length") cur.frame_length = std::stoul(val);
        else if (key == "pilot_seed") cur.pilot_seed = std::stoull(val);
        else throw InvalidInput("schemes: unknown key '" + key + "' at line " + std::to_string(lineno));
    }
    flush();
    require(!out.empty(), "schemes: no schemes found");
    return out;
}

inline std::vector<OfdmScheme> load_schemes(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open scheme presets " + path);
    return parse_schemes(is);
}

inline OfdmScheme find_scheme(const std::vector<OfdmScheme>& schemes, const std::string& id) {
    for (const OfdmScheme& s : schemes)
        if (s.id == id) return s;
    throw InvalidInput("unknown scheme id: " + id);
}

}  // namespace uasim
