// UATV container: the on-disk format for TVIR datasets.
//
// Layout (all little-endian):
//   magic "UATV", version u16, record count u32, then per record:
//   T u16, D u16, time_step f64, delay_step f64,
//   T*D*2 f32 (interleaved real, imag),
//   u32-length-prefixed UTF-8 JSON metadata blob.
#pragma once

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uasim/binio.hpp"
#include "uasim/common.hpp"
#include "uasim/tvir.hpp"

namespace uasim {

struct TvirRecord {
    Tvir tvir;
    nlohmann::json metadata = nlohmann::json::object();
};

inline constexpr uint16_t kUatvVersion = 1;

inline void write_uatv(std::ostream& os, const std::vector<TvirRecord>& records) {
    os.write("UATV", 4);
    detail::write_pod<uint16_t>(os, kUatvVersion);
    detail::write_pod<uint32_t>(os, static_cast<uint32_t>(records.size()));
    for (const TvirRecord& rec : records) {
        const Tvir& x = rec.tvir;
        x.validate();
        require(x.T <= UINT16_MAX && x.D <= UINT16_MAX, "UATV: dimensions exceed u16");
        detail::write_pod<uint16_t>(os, static_cast<uint16_t>(x.T));
        detail::write_pod<uint16_t>(os, static_cast<uint16_t>(x.D));
        detail::write_pod<double>(os, x.time_step);
        detail::write_pod<double>(os, x.delay_step);
        std::vector<float> buf(x.T * x.D * 2);
        for (size_t i = 0; i < x.data.size(); ++i) {
            buf[2 * i] = static_cast<float>(x.data[i].real());
            buf[2 * i + 1] = static_cast<float>(x.data[i].imag());
        }
        os.write(reinterpret_cast<const char*>(buf.data()),
                 static_cast<std::streamsize>(buf.size() * sizeof(float)));
        const std::string meta = rec.metadata.dump();
        detail::write_pod<uint32_t>(os, static_cast<uint32_t>(meta.size()));
        os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    }
    if (!os) throw IoError("UATV: write failure");
}

// Writes atomically: a partial file never remains after an I/O failure.
inline void save_uatv(const std::string& path, const std::vector<TvirRecord>& records) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw IoError("UATV: cannot open " + tmp);
        try {
            write_uatv(os, records);
        } catch (...) {
            os.close();
            std::remove(tmp.c_str());
            throw;
        }
    }
    std::filesystem::rename(tmp, path);
}

inline std::vector<TvirRecord> read_uatv(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "UATV", 4) != 0) throw IoError("UATV: bad magic");
    const auto version = detail::read_pod<uint16_t>(is);
    if (version != kUatvVersion) throw IoError("UATV: unsupported version");
    const auto count = detail::read_pod<uint32_t>(is);
    std::vector<TvirRecord> records;
    records.reserve(count);
    for (uint32_t r = 0; r < count; ++r) {
        const auto t = detail::read_pod<uint16_t>(is);
        const auto d = detail::read_pod<uint16_t>(is);
        const auto time_step = detail::read_pod<double>(is);
        const auto delay_step = detail::read_pod<double>(is);
        Tvir x(t, d, time_step, delay_step);
        std::vector<float> buf(static_cast<size_t>(t) * d * 2);
        is.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!is) throw IoError("UATV: truncated record data");
        for (size_t i = 0; i < x.data.size(); ++i)
            x.data[i] = {static_cast<double>(buf[2 * i]), static_cast<double>(buf[2 * i + 1])};
        const auto meta_len = detail::read_pod<uint32_t>(is);
        std::string meta(meta_len, '\0');
        is.read(meta.data(), meta_len);
        if (!is) throw IoError("UATV: truncated metadata");
        TvirRecord rec;
        rec.tvir = std::move(x);
        rec.metadata = meta.empty() ? nlohmann::json::object() : nlohmann::json::parse(meta);
        records.push_back(std::move(rec));
    }
    return records;
}

inline std::vector<TvirRecord> load_uatv(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("UATV: cannot open " + path);
    return read_uatv(is);
}

}  // namespace uasim
