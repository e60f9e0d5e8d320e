#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

namespace rpca {

namespace fs = std::filesystem;

std::string read_text_file(const fs::path& path);

// Writes to a sibling temp file and renames into place.
void atomic_write_file(const fs::path& path, const std::string& content);

nlohmann::json read_json_file(const fs::path& path);
void write_json_file(const fs::path& path, const nlohmann::json& j);

// Asset root for bundled backbone graph manifests. Honors RPCA_ASSETS_DIR,
// falling back to the source-tree assets directory baked in at build time.
fs::path asset_dir();

fs::path weights_dir_from_env();

}  // namespace rpca
