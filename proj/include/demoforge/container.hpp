#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "demoforge/array_file.hpp"

namespace demoforge {

// Single-file dataset container (all little-endian):
//   "DFAR1" | entry_count u64 |
//   entry_count x (path_len u16 | path | dtype u8 | ndim u8 | shape u32 x ndim | offset u64 | length u64) |
//   payloads
// Offsets are absolute; payloads follow the index in entry order and the
// file ends exactly at the last payload.
inline constexpr std::string_view kContainerMagic = "DFAR1";

struct ContainerEntry {
  std::string path;
  DType dtype = DType::u8;
  std::vector<std::uint32_t> shape;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;

  friend bool operator==(const ContainerEntry&, const ContainerEntry&) = default;
};

/// Path -> array, kept in insertion order by the writer.
using ContainerContents = std::vector<std::pair<std::string, Array>>;

/// DUPLICATE_PATH on repeated paths.
std::vector<std::uint8_t> encode_container(const ContainerContents& contents);

/// Index parsing and bounds checks. BAD_MAGIC on a wrong or short magic,
/// CORRUPT_INDEX on any structural inconsistency.
std::vector<ContainerEntry> decode_index(std::span<const std::uint8_t> bytes);

class ContainerReader {
 public:
  static ContainerReader open(const std::filesystem::path& path);
  static ContainerReader from_bytes(std::vector<std::uint8_t> bytes);

  const std::vector<ContainerEntry>& entries() const { return entries_; }
  bool contains(std::string_view path) const;
  const ContainerEntry& entry(std::string_view path) const;  // MISSING_ENTRY
  Array read(std::string_view path) const;
  /// Sorted names of the demo_K groups under data/.
  std::vector<std::string> demo_groups() const;
  std::map<std::string, Array> attrs() const;
  ContainerContents read_all() const;

 private:
  std::vector<std::uint8_t> bytes_;
  std::vector<ContainerEntry> entries_;
  std::map<std::string, std::size_t, std::less<>> by_path_;
};

}  // namespace demoforge
