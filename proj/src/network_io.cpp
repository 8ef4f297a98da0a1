#include <zlib.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "matte/network.hpp"

// Weight store directory layout:
//   manifest.json  — array of {name, shape, dtype: "f32", file, byte_offset,
//                    checksum} in name order
//   weights.bin    — the tensors' raw little-endian float32 bytes, packed in
//                    manifest order
// Checksums are CRC32 of each tensor's byte range, lowercase hex.

namespace matte {

namespace {

static_assert(std::endian::native == std::endian::little,
              "weight store assumes a little-endian host");

std::string crc32_hex(const float* data, std::size_t count) {
    const uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(data),
                            static_cast<uInt>(count * sizeof(float)));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08lx", static_cast<unsigned long>(crc));
    return buf;
}

}  // namespace

void save_weights(const WeightStore& store, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const std::string bin_name = "weights.bin";

    nlohmann::json manifest = nlohmann::json::array();
    std::ofstream bin(dir / bin_name, std::ios::binary | std::ios::trunc);
    if (!bin) throw DataError("cannot write '" + (dir / bin_name).string() + "'");

    std::uint64_t offset = 0;
    for (const auto& [name, p] : store.entries()) {
        nlohmann::json entry;
        entry["name"] = name;
        entry["shape"] = p.shape;
        entry["dtype"] = "f32";
        entry["file"] = bin_name;
        entry["byte_offset"] = offset;
        entry["checksum"] = crc32_hex(p.data.data(), p.data.size());
        manifest.push_back(std::move(entry));
        bin.write(reinterpret_cast<const char*>(p.data.data()),
                  static_cast<std::streamsize>(p.data.size() * sizeof(float)));
        offset += p.data.size() * sizeof(float);
    }
    bin.close();
    if (!bin) throw DataError("short write to '" + (dir / bin_name).string() + "'");

    std::ofstream mf(dir / "manifest.json", std::ios::trunc);
    if (!mf) throw DataError("cannot write '" + (dir / "manifest.json").string() + "'");
    mf << manifest.dump(2) << "\n";
}

WeightStore load_weights(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw DataError("cannot open '" + (dir / "manifest.json").string() + "'");
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad weight manifest: " + std::string(e.what()));
    }
    if (!manifest.is_array()) throw DataError("weight manifest must be a JSON array");

    WeightStore store;
    store.set_provenance("loaded(" + dir.string() + ")");
    std::map<std::string, std::uintmax_t> file_sizes;

    for (const auto& entry : manifest) {
        const std::string name = entry.at("name").get<std::string>();
        const std::string dtype = entry.at("dtype").get<std::string>();
        if (dtype != "f32") throw DataError("tensor '" + name + "': unsupported dtype " + dtype);
        Param p;
        p.shape = entry.at("shape").get<std::vector<int>>();
        for (int d : p.shape)
            if (d < 1) throw DataError("tensor '" + name + "': bad shape");
        const std::string file = entry.at("file").get<std::string>();
        const std::uint64_t offset = entry.at("byte_offset").get<std::uint64_t>();
        const std::uint64_t bytes = std::uint64_t(p.count()) * sizeof(float);

        const auto path = dir / file;
        auto it = file_sizes.find(file);
        if (it == file_sizes.end()) {
            std::error_code ec;
            const auto sz = std::filesystem::file_size(path, ec);
            if (ec) throw DataError("missing weight file '" + path.string() + "'");
            it = file_sizes.emplace(file, sz).first;
        }
        if (offset + bytes > it->second)
            throw DataError("tensor '" + name + "' extends past the end of '" + file +
                            "' (truncated file or wrong shape)");

        std::ifstream bin(path, std::ios::binary);
        bin.seekg(static_cast<std::streamoff>(offset));
        p.data.resize(static_cast<std::size_t>(p.count()));
        bin.read(reinterpret_cast<char*>(p.data.data()), static_cast<std::streamsize>(bytes));
        if (!bin) throw DataError("failed reading tensor '" + name + "' from '" + file + "'");

        const std::string want = entry.at("checksum").get<std::string>();
        const std::string got = crc32_hex(p.data.data(), p.data.size());
        if (want != got)
            throw DataError("checksum mismatch for tensor '" + name + "' (manifest " + want +
                            ", file " + got + ")");
        if (store.has(name)) throw DataError("duplicate tensor '" + name + "' in manifest");
        store.put(name, std::move(p));
    }
    return store;
}

}  // namespace matte
