#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "avcl/depth_map.hpp"
#include "avcl/models.hpp"

namespace avcl {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Grayscale portable float map: "Pf\n", "W H\n", a scale line whose sign
// gives the byte order (negative = little-endian), then H rows of W float32
// stored bottom row first. Depths are stored as float32; invalid pixels are
// written as 0 and any non-positive or non-finite value reads back invalid.

void write_pfm(const std::filesystem::path& path, const DepthMap& map);
DepthMap read_pfm(const std::filesystem::path& path);
std::string encode_pfm(const DepthMap& map);
DepthMap decode_pfm(const std::string& bytes);

/// Three-channel image [3, H, W] as a color PFM ("PF", interleaved RGB).
std::string encode_pfm_image(const ad::Tensor& image);

// Checkpoint layout, all integers and floats little-endian:
//   "AVCL" | u32 version | u32 tensor count |
//   per tensor: u32 name length | name bytes | u32 rank | u64 dims[rank] | f64 data[]
// The first tensor, "meta.config", holds the ModelConfig fields so a model
// can be rebuilt from the file alone.

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

/// Plain-text "key = value" file; '#' starts a comment. Duplicate keys are an error.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace avcl
