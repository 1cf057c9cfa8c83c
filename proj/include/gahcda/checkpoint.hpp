#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gahcda/backbone.hpp"
#include "gahcda/gaa.hpp"

namespace gahcda {

/// Student/teacher weights plus, after adaptation, the gaze extractor and
/// projection trained alongside them.
struct Checkpoint {
  ModelParams model;
  std::optional<GaaParams> gaa;
  nlohmann::json info = nlohmann::json::object();
};

// Layout: "GZCK", u32 version, u32 header length, JSON header (architecture,
// tensor names/shapes, metadata), float32 LE payload in header order, then a
// u32 CRC-32 over every preceding byte.
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
/// Throws DataError("checkpoint integrity failure") on any corruption.
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
Checkpoint load_checkpoint_file(const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

/// Git blob hash of the serialized bytes.
std::string checkpoint_hash(const Checkpoint& ckpt);
std::string checkpoint_hash(const ModelParams& params);

// Feature dumps: "GZF1", u32 channels, u32 height, u32 width (LE), then the
// channel planes as float32 LE, row-major.
void save_feature_map(const std::filesystem::path& path, const FeatureMap& map);
FeatureMap load_feature_map(const std::filesystem::path& path);

}  // namespace gahcda
