// UACK checkpoint container: hyperparameter JSON plus named f32 tensors.
//
// Layout (little-endian): magic "UACK", version u16,
// u32-length-prefixed JSON blob, tensor count u32, then per tensor:
// u16 name length + name, u8 ndim, ndim u32 extents, f32 data.
#pragma once

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uasim/binio.hpp"
#include "uasim/common.hpp"
#include "uasim/nn.hpp"

namespace uasim {

inline constexpr uint16_t kUackVersion = 1;

struct Checkpoint {
    nlohmann::json hyper = nlohmann::json::object();
    std::vector<std::pair<std::string, nn::Tensor<float>>> tensors;

    template <class S>
    static Checkpoint from_params(const nn::ParamStore<S>& ps, nlohmann::json hyper) {
        Checkpoint ck;
        ck.hyper = std::move(hyper);
        for (const auto& e : ps.entries) {
            nn::Tensor<float> t(e.value.shape);
            for (size_t i = 0; i < t.size(); ++i) t.data[i] = static_cast<float>(e.value.data[i]);
            ck.tensors.emplace_back(e.name, std::move(t));
        }
        return ck;
    }

    // Copies stored tensors into a ParamStore whose entries (names and
    // shapes) must already match.
    template <class S>
    void load_into(nn::ParamStore<S>& ps) const {
        require(tensors.size() == ps.entries.size(), "checkpoint: parameter count mismatch");
        for (const auto& [name, t] : tensors) {
            auto it = ps.index.find(name);
            require(it != ps.index.end(), "checkpoint: unknown tensor " + name);
            nn::Tensor<S>& dst = ps.value(it->second);
            require(dst.shape == t.shape, "checkpoint: shape mismatch for " + name);
            for (size_t i = 0; i < t.size(); ++i) dst.data[i] = static_cast<S>(t.data[i]);
        }
    }
};

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    const std::string tmp = path + ".tmp";
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw IoError("UACK: cannot open " + tmp);
    os.write("UACK", 4);
    detail::write_pod<uint16_t>(os, kUackVersion);
    const std::string hyper = ck.hyper.dump();
    detail::write_pod<uint32_t>(os, static_cast<uint32_t>(hyper.size()));
    os.write(hyper.data(), static_cast<std::streamsize>(hyper.size()));
    detail::write_pod<uint32_t>(os, static_cast<uint32_t>(ck.tensors.size()));
    for (const auto& [name, t] : ck.tensors) {
        detail::write_pod<uint16_t>(os, static_cast<uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_pod<uint8_t>(os, static_cast<uint8_t>(t.shape.size()));
        for (size_t d : t.shape) detail::write_pod<uint32_t>(os, static_cast<uint32_t>(d));
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    if (!os) throw IoError("UACK: write failure");
    os.close();
    std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("UACK: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "UACK", 4) != 0) throw IoError("UACK: bad magic");
    if (detail::read_pod<uint16_t>(is) != kUackVersion) throw IoError("UACK: unsupported version");
    const auto hyper_len = detail::read_pod<uint32_t>(is);
    std::string hyper(hyper_len, '\0');
    is.read(hyper.data(), hyper_len);
    if (!is) throw IoError("UACK: truncated hyperparameters");
    Checkpoint ck;
    ck.hyper = nlohmann::json::parse(hyper);
    const auto count = detail::read_pod<uint32_t>(is);
    for (uint32_t k = 0; k < count; ++k) {
        const auto name_len = detail::read_pod<uint16_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const auto ndim = detail::read_pod<uint8_t>(is);
        std::vector<size_t> shape(ndim);
        for (auto& d : shape) d = detail::read_pod<uint32_t>(is);
        nn::Tensor<float> t(shape);
        is.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(float)));
        if (!is) throw IoError("UACK: truncated tensor " + name);
        ck.tensors.emplace_back(std::move(name), std::move(t));
    }
    return ck;
}

}  // namespace uasim
