#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "grapher/corpus.hpp"

namespace grapher::testing {

class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("grapher-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::filesystem::path write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream(path, std::ios::binary) << text;
    return path;
}

inline DataObject object(std::string id, std::string content = "",
                         std::vector<std::string> links = {},
                         std::vector<std::string> entities = {}) {
    return DataObject{.id = std::move(id),
                      .content = std::move(content),
                      .structural_links = std::move(links),
                      .entities = std::move(entities)};
}

inline DataObject chunk(std::string id, std::string doc, std::int64_t chunk_id) {
    return DataObject{.id = std::move(id), .content = "", .doc_id = std::move(doc),
                      .chunk_id = chunk_id};
}

}  // namespace grapher::testing
