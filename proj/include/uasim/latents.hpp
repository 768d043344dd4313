// UALT latent container: magic "UALT", version u16, count u32, dim u32,
// count*dim little-endian f32, u32-length-prefixed JSON metadata.
#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uasim/binio.hpp"
#include "uasim/common.hpp"

namespace uasim {

inline constexpr uint16_t kUaltVersion = 1;

struct LatentSet {
    size_t dim = 128;
    std::vector<std::vector<double>> latents;
    nlohmann::json metadata = nlohmann::json::object();
};

inline void save_latents(const std::string& path, const LatentSet& set) {
    const std::string tmp = path + ".tmp";
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw IoError("UALT: cannot open " + tmp);
    os.write("UALT", 4);
    detail::write_pod<uint16_t>(os, kUaltVersion);
    detail::write_pod<uint32_t>(os, static_cast<uint32_t>(set.latents.size()));
    detail::write_pod<uint32_t>(os, static_cast<uint32_t>(set.dim));
    for (const auto& z : set.latents) {
        require(z.size() == set.dim, "UALT: latent dimension mismatch");
        for (double v : z) detail::write_pod<float>(os, static_cast<float>(v));
    }
    const std::string meta = set.metadata.dump();
    detail::write_pod<uint32_t>(os, static_cast<uint32_t>(meta.size()));
    os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    if (!os) throw IoError("UALT: write failure");
    os.close();
    std::filesystem::rename(tmp, path);
}

inline LatentSet load_latents(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("UALT: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "UALT", 4) != 0) throw IoError("UALT: bad magic");
    if (detail::read_pod<uint16_t>(is) != kUaltVersion) throw IoError("UALT: unsupported version");
    const auto count = detail::read_pod<uint32_t>(is);
    LatentSet set;
    set.dim = detail::read_pod<uint32_t>(is);
    set.latents.assign(count, std::vector<double>(set.dim));
    for (auto& z : set.latents)
        for (double& v : z) v = static_cast<double>(detail::read_pod<float>(is));
    const auto meta_len = detail::read_pod<uint32_t>(is);
    std::string meta(meta_len, '\0');
    is.read(meta.data(), meta_len);
    if (!is) throw IoError("UALT: truncated metadata");
    set.metadata = meta.empty() ? nlohmann::json::object() : nlohmann::json::parse(meta);
    return set;
}

}  // namespace uasim
