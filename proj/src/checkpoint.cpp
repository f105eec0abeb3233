// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#include "mptrack/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace mpt {

using nlohmann::json;

void save_checkpoint(const std::string& prefix, const ParamStore& store,
                     const std::string& config_json) {
    json manifest;
    manifest["schema_version"] = 1;
    manifest["config"] = json::parse(config_json);
    json records = json::array();

    std::ofstream bin(prefix + ".bin", std::ios::binary | std::ios::trunc);
    if (!bin) throw std::runtime_error("cannot open " + prefix + ".bin for writing");
    std::size_t offset = 0;
    for (const auto& p : store.all()) {
        records.push_back({{"name", p.name},
                           {"shape", p.value.shape()},
                           {"offset", offset},
                           {"frozen", p.frozen}});
        bin.write(reinterpret_cast<const char*>(p.value.data()),
                  static_cast<std::streamsize>(p.value.size() * sizeof(double)));
        offset += p.value.size();
    }
    manifest["records"] = std::move(records);
    bin.close();
    if (!bin) throw std::runtime_error("short write to " + prefix + ".bin");

    std::ofstream mf(prefix + ".json", std::ios::trunc);
    if (!mf) throw std::runtime_error("cannot open " + prefix + ".json for writing");
    mf << manifest.dump(2) << "\n";
}

std::string load_checkpoint(const std::string& prefix, ParamStore& store,
                            const std::string& name_filter) {
    std::ifstream mf(prefix + ".json");
    if (!mf) throw std::runtime_error("missing checkpoint manifest: " + prefix + ".json");
    json manifest = json::parse(mf);

    std::ifstream bin(prefix + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("missing checkpoint data: " + prefix + ".bin");

    for (const auto& rec : manifest.at("records")) {
        const std::string name = rec.at("name").get<std::string>();
        if (!name_filter.empty() && name.rfind(name_filter, 0) != 0) continue;
        Parameter* p = store.find(name);
        if (p == nullptr) throw std::runtime_error("checkpoint record has no parameter: " + name);
        const auto shape = rec.at("shape").get<std::vector<std::size_t>>();
        if (shape != p->value.shape())
            throw std::runtime_error("checkpoint shape mismatch for " + name);
        const std::size_t offset = rec.at("offset").get<std::size_t>();
        bin.seekg(static_cast<std::streamoff>(offset * sizeof(double)));
        bin.read(reinterpret_cast<char*>(p->value.data()),
                 static_cast<std::streamsize>(p->value.size() * sizeof(double)));
        if (!bin) throw std::runtime_error("short read for checkpoint record " + name);
    }
    return manifest.at("config").dump();
}

std::string read_checkpoint_config(const std::string& prefix) {
    std::ifstream mf(prefix + ".json");
    if (!mf) throw std::runtime_error("missing checkpoint manifest: " + prefix + ".json");
    json manifest = json::parse(mf);
    return manifest.at("config").dump();
}

bool checkpoint_exists(const std::string& prefix) {
    return std::filesystem::exists(prefix + ".json") && std::filesystem::exists(prefix + ".bin");
}

}  // namespace mpt
