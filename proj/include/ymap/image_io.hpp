#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ymap/grid.hpp"

namespace ymap {

// Depth PNGs are single-channel 16-bit grayscale. raw / 65535 gives the
// normalized depth in [0, 1]; larger values are nearer to the camera (the
// normalized inverse-depth convention of relative-depth teachers).
ImageGrid read_depth16(const std::filesystem::path& path);
void write_depth16(const ImageGrid& depth, const std::filesystem::path& path);

// Signed maps (normals) stored as 16-bit grayscale with raw/65535 = (v + 1) / 2.
ImageGrid read_signed16(const std::filesystem::path& path);
void write_signed16(const ImageGrid& grid, const std::filesystem::path& path);

// 8-bit PNG, converted to RGB. Values stay in 0..255; see normalize_rgb.
ImageGrid read_png_rgb8(const std::filesystem::path& path);
// Binary mask from an 8-bit grayscale PNG: raw > 127 maps to 1.
ImageGrid read_mask_png(const std::filesystem::path& path);
// Writes a 1- or 3-channel grid holding [0, 1] values as an 8-bit PNG.
void write_png8(const ImageGrid& grid, const std::filesystem::path& path);

// Raw little-endian float32 tensor with a JSON sidecar at `path + ".json"`:
// {"shape": [...], "layout": "planar", "range": [lo, hi]} plus optional
// extra keys. The payload may hold more floats than prod(shape) when the
// sidecar describes trailing blocks.
struct TensorFile {
  std::vector<int> shape;
  std::array<float, 2> range{0.0f, 1.0f};
  nlohmann::json extra = nlohmann::json::object();
  std::vector<float> data;
};

std::filesystem::path sidecar_path(const std::filesystem::path& path);
void write_tensor_file(const TensorFile& tensor, const std::filesystem::path& path);
TensorFile read_tensor_file(const std::filesystem::path& path);

// Writes through a temporary sibling and renames over the destination.
void write_file_atomic(const std::filesystem::path& path, std::span<const char> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace ymap
