#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "demoforge/image.hpp"

namespace demoforge {

// On-disk layout (all little-endian):
//   "DFS1" | dtype u8 | ndim u8 | shape u32 x ndim | payload
enum class DType : std::uint8_t { u8 = 0, f32 = 1, f64 = 2, i64 = 3, utf8 = 4 };

std::size_t element_size(DType dtype);
const char* to_string(DType dtype);

struct Array {
  DType dtype = DType::u8;
  std::vector<std::uint32_t> shape;
  std::vector<std::uint8_t> data;  // row-major, little-endian

  std::size_t element_count() const;

  friend bool operator==(const Array&, const Array&) = default;
};

inline constexpr std::string_view kArrayMagic = "DFS1";

std::vector<std::uint8_t> encode_array(const Array& array);
/// Throws Error("CORRUPT_FILE") on bad magic, unknown dtype or a payload
/// whose length disagrees with the shape.
Array decode_array(std::span<const std::uint8_t> bytes);

Array read_array_file(const std::filesystem::path& path);
/// Throws Error("DUPLICATE_STEP") when `exclusive` and the file exists,
/// Error("IO_FAILURE") on any write failure.
void write_array_file(const std::filesystem::path& path, const Array& array, bool exclusive = true);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
/// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// Typed constructors and views.
Array make_array(const RgbImage& image);
Array make_array(const DepthImage& image);
Array make_scalar_f32(float value);
Array make_scalar_f64(double value);
Array make_utf8(std::string_view text);
Array make_f32(std::span<const float> values, std::vector<std::uint32_t> shape);
Array make_f64(std::span<const double> values, std::vector<std::uint32_t> shape);

RgbImage to_rgb_image(const Array& array);
DepthImage to_depth_image(const Array& array);
std::string to_text(const Array& array);
std::vector<float> to_f32(const Array& array);
std::vector<double> to_f64(const Array& array);
/// Numeric arrays of any real dtype widened to double.
std::vector<double> to_doubles(const Array& array);

}  // namespace demoforge
