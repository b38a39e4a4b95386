#include "t2dm/weights.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "t2dm/errors.hpp"

namespace t2dm {

using nlohmann::json;

void save_weights(nn::ParamStore<float>& params, const std::filesystem::path& stem) {
    std::filesystem::path manifest_path = stem;
    manifest_path += ".json";
    std::filesystem::path blob_path = stem;
    blob_path += ".bin";

    json manifest;
    manifest["version"] = 1;
    manifest["dtype"] = "f32le";
    json entries = json::array();

    std::ofstream blob(blob_path, std::ios::binary);
    if (!blob) throw DataError("cannot write " + blob_path.string());
    uint64_t offset = 0;
    for (auto* p : params.all()) {
        json e;
        e["name"] = p->name;
        e["shape"] = p->value.shape;
        e["offset"] = offset;
        e["count"] = p->value.size();
        entries.push_back(e);
        blob.write(reinterpret_cast<const char*>(p->value.data.data()),
                   static_cast<std::streamsize>(p->value.data.size() * sizeof(float)));
        offset += p->value.data.size() * sizeof(float);
    }
    manifest["params"] = entries;
    manifest["total_bytes"] = offset;

    std::ofstream mf(manifest_path);
    if (!mf) throw DataError("cannot write " + manifest_path.string());
    mf << manifest.dump(2) << "\n";
}

void load_weights(nn::ParamStore<float>& params, const std::filesystem::path& stem) {
    std::filesystem::path manifest_path = stem;
    manifest_path += ".json";
    std::filesystem::path blob_path = stem;
    blob_path += ".bin";

    std::ifstream mf(manifest_path);
    if (!mf) throw ConfigError("cannot open weight manifest: " + manifest_path.string());
    json manifest = json::parse(mf);
    if (manifest.value("version", 0) != 1)
        throw DataError("weight manifest version mismatch: " + manifest_path.string());

    std::ifstream blob(blob_path, std::ios::binary);
    if (!blob) throw ConfigError("cannot open weight blob: " + blob_path.string());
    blob.seekg(0, std::ios::end);
    const uint64_t blob_size = static_cast<uint64_t>(blob.tellg());

    std::set<std::string> seen;
    for (const auto& e : manifest.at("params")) {
        std::string name = e.at("name");
        if (!params.has(name)) throw DataError("weight file names unknown parameter: " + name);
        auto& p = params.get(name);
        std::vector<int> shape = e.at("shape").get<std::vector<int>>();
        if (shape != p.value.shape) throw DataError("shape mismatch for parameter: " + name);
        uint64_t offset = e.at("offset");
        uint64_t bytes = static_cast<uint64_t>(p.value.size()) * sizeof(float);
        if (offset + bytes > blob_size)
            throw DataError("weight blob truncated at parameter: " + name);
        blob.seekg(static_cast<std::streamoff>(offset));
        blob.read(reinterpret_cast<char*>(p.value.data.data()),
                  static_cast<std::streamsize>(bytes));
        if (!blob) throw DataError("short read at parameter: " + name);
        seen.insert(name);
    }
    for (auto* p : params.all())
        if (!seen.count(p->name)) throw DataError("weight file missing parameter: " + p->name);
}

}  // namespace t2dm
