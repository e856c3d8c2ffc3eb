#include "demoforge/container.hpp"

#include <algorithm>
#include <cstring>
#include <set>

#include "demoforge/error.hpp"

namespace demoforge {

namespace {

template <class T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <class T>
  T take() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(T{bytes_[pos_ + i]} << (8 * i));
    pos_ += sizeof(T);
    return v;
  }

  std::string take_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error("CORRUPT_INDEX", "index runs past end of file");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_container(const ContainerContents& contents) {
  std::set<std::string_view> seen;
  std::uint64_t header = kContainerMagic.size() + 8;
  for (const auto& [path, array] : contents) {
    if (!seen.insert(path).second) throw Error("DUPLICATE_PATH", path);
    if (path.size() > 0xFFFF) throw Error("BAD_PATH", "path longer than 65535 bytes");
    if (array.shape.size() > 255) throw Error("SHAPE_MISMATCH", path + ": more than 255 dimensions");
    if (array.data.size() != array.element_count() * element_size(array.dtype))
      throw Error("SHAPE_MISMATCH", path + ": payload length disagrees with shape");
    header += 2 + path.size() + 2 + 4 * array.shape.size() + 16;
  }
  std::vector<std::uint8_t> out(kContainerMagic.begin(), kContainerMagic.end());
  put_le<std::uint64_t>(out, contents.size());
  std::uint64_t offset = header;
  for (const auto& [path, array] : contents) {
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(path.size()));
    out.insert(out.end(), path.begin(), path.end());
    out.push_back(static_cast<std::uint8_t>(array.dtype));
    out.push_back(static_cast<std::uint8_t>(array.shape.size()));
    for (std::uint32_t d : array.shape) put_le<std::uint32_t>(out, d);
    put_le<std::uint64_t>(out, offset);
    put_le<std::uint64_t>(out, array.data.size());
    offset += array.data.size();
  }
  out.reserve(offset);
  for (const auto& [path, array] : contents) out.insert(out.end(), array.data.begin(), array.data.end());
  return out;
}

std::vector<ContainerEntry> decode_index(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kContainerMagic.size() ||
      std::memcmp(bytes.data(), kContainerMagic.data(), kContainerMagic.size()) != 0)
    throw Error("BAD_MAGIC", "not a DFAR1 container");
  Cursor cur(bytes.subspan(kContainerMagic.size()));
  const auto count = cur.take<std::uint64_t>();
  // Every entry needs at least 22 index bytes.
  if (count > bytes.size() / 22) throw Error("CORRUPT_INDEX", "entry count exceeds file size");
  std::vector<ContainerEntry> entries;
  entries.reserve(count);
  std::set<std::string> paths;
  for (std::uint64_t i = 0; i < count; ++i) {
    ContainerEntry e;
    e.path = cur.take_string(cur.take<std::uint16_t>());
    const auto code = cur.take<std::uint8_t>();
    if (code > 4) throw Error("CORRUPT_INDEX", e.path + ": unknown dtype " + std::to_string(code));
    e.dtype = static_cast<DType>(code);
    const auto ndim = cur.take<std::uint8_t>();
    for (std::size_t d = 0; d < ndim; ++d) e.shape.push_back(cur.take<std::uint32_t>());
    e.offset = cur.take<std::uint64_t>();
    e.length = cur.take<std::uint64_t>();
    if (!paths.insert(e.path).second) throw Error("CORRUPT_INDEX", "duplicate path " + e.path);
    long double expected = static_cast<long double>(element_size(e.dtype));
    for (std::uint32_t d : e.shape) expected *= d;
    if (expected != static_cast<long double>(e.length))
      throw Error("CORRUPT_INDEX", e.path + ": length disagrees with shape");
    entries.push_back(std::move(e));
  }
  const std::uint64_t index_end = kContainerMagic.size() + cur.pos();
  std::vector<const ContainerEntry*> order;
  for (const auto& e : entries) order.push_back(&e);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->offset < b->offset; });
  std::uint64_t end = index_end;
  for (const ContainerEntry* e : order) {
    if (e->offset < end) throw Error("CORRUPT_INDEX", e->path + ": payload overlaps index or another payload");
    if (e->length > bytes.size() || e->offset > bytes.size() - e->length)
      throw Error("CORRUPT_INDEX", e->path + ": payload runs past end of file");
    end = e->offset + e->length;
  }
  if (end != bytes.size()) throw Error("CORRUPT_INDEX", "file size disagrees with index");
  return entries;
}

ContainerReader ContainerReader::open(const std::filesystem::path& path) {
  return from_bytes(read_file_bytes(path));
}

ContainerReader ContainerReader::from_bytes(std::vector<std::uint8_t> bytes) {
  ContainerReader r;
  r.entries_ = decode_index(bytes);
  r.bytes_ = std::move(bytes);
  for (std::size_t i = 0; i < r.entries_.size(); ++i) r.by_path_.emplace(r.entries_[i].path, i);
  return r;
}

bool ContainerReader::contains(std::string_view path) const { return by_path_.find(path) != by_path_.end(); }

const ContainerEntry& ContainerReader::entry(std::string_view path) const {
  const auto it = by_path_.find(path);
  if (it == by_path_.end()) throw Error("MISSING_ENTRY", "no entry " + std::string(path));
  return entries_[it->second];
}

Array ContainerReader::read(std::string_view path) const {
  const ContainerEntry& e = entry(path);
  Array a{e.dtype, e.shape, {}};
  a.data.assign(bytes_.begin() + static_cast<std::ptrdiff_t>(e.offset),
                bytes_.begin() + static_cast<std::ptrdiff_t>(e.offset + e.length));
  return a;
}

std::vector<std::string> ContainerReader::demo_groups() const {
  std::set<std::pair<std::uint64_t, std::string>> groups;
  constexpr std::string_view prefix = "data/demo_";
  for (const auto& e : entries_) {
    if (!e.path.starts_with(prefix)) continue;
    const auto slash = e.path.find('/', prefix.size());
    const std::string name = e.path.substr(5, slash == std::string::npos ? std::string::npos : slash - 5);
    const std::string digits = name.substr(5);
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }))
      continue;
    groups.emplace(std::stoull(digits), name);
  }
  std::vector<std::string> out;
  for (auto& [k, name] : groups) out.push_back(name);
  return out;
}

std::map<std::string, Array> ContainerReader::attrs() const {
  std::map<std::string, Array> out;
  for (const auto& e : entries_)
    if (e.path.starts_with("attrs/")) out.emplace(e.path.substr(6), read(e.path));
  return out;
}

ContainerContents ContainerReader::read_all() const {
  ContainerContents out;
  for (const auto& e : entries_) out.emplace_back(e.path, read(e.path));
  return out;
}

}  // namespace demoforge
