#pragma once

#include <cstdint>
#include <vector>

namespace demoforge {

/// Row-major (height, width, 3) 8-bit image.
struct RgbImage {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t* at(std::uint32_t row, std::uint32_t col) { return &pixels[(std::size_t{row} * width + col) * 3]; }
  const std::uint8_t* at(std::uint32_t row, std::uint32_t col) const {
    return &pixels[(std::size_t{row} * width + col) * 3];
  }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Row-major (height, width) depth map in meters.
struct DepthImage {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<float> values;

  float& at(std::uint32_t row, std::uint32_t col) { return values[std::size_t{row} * width + col]; }
  float at(std::uint32_t row, std::uint32_t col) const { return values[std::size_t{row} * width + col]; }

  friend bool operator==(const DepthImage&, const DepthImage&) = default;
};

}  // namespace demoforge
