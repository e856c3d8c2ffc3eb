#include "demoforge/array_file.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "demoforge/error.hpp"

namespace demoforge {

static_assert(std::endian::native == std::endian::little, "payloads are stored in host order");

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24;
}

template <class T>
Array make_typed(DType dtype, std::span<const T> values, std::vector<std::uint32_t> shape) {
  Array a{dtype, std::move(shape), {}};
  if (a.element_count() != values.size()) throw Error("SHAPE_MISMATCH", "value count disagrees with shape");
  a.data.resize(values.size_bytes());
  if (!values.empty()) std::memcpy(a.data.data(), values.data(), values.size_bytes());
  return a;
}

template <class T>
std::vector<T> view_typed(const Array& a, DType dtype) {
  if (a.dtype != dtype)
    throw Error("DTYPE_MISMATCH", std::string("expected ") + to_string(dtype) + ", got " + to_string(a.dtype));
  std::vector<T> out(a.data.size() / sizeof(T));
  if (!out.empty()) std::memcpy(out.data(), a.data.data(), out.size() * sizeof(T));
  return out;
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace

std::size_t element_size(DType dtype) {
  switch (dtype) {
    case DType::u8: return 1;
    case DType::f32: return 4;
    case DType::f64: return 8;
    case DType::i64: return 8;
    case DType::utf8: return 1;
  }
  throw Error("CORRUPT_FILE", "unknown dtype");
}

const char* to_string(DType dtype) {
  switch (dtype) {
    case DType::u8: return "u8";
    case DType::f32: return "f32";
    case DType::f64: return "f64";
    case DType::i64: return "i64";
    case DType::utf8: return "utf8";
  }
  return "?";
}

std::size_t Array::element_count() const {
  std::size_t n = 1;
  for (std::uint32_t d : shape) n *= d;
  return n;
}

std::vector<std::uint8_t> encode_array(const Array& a) {
  if (a.shape.size() > 255) throw Error("SHAPE_MISMATCH", "more than 255 dimensions");
  if (a.data.size() != a.element_count() * element_size(a.dtype))
    throw Error("SHAPE_MISMATCH", "payload length disagrees with shape");
  std::vector<std::uint8_t> out(kArrayMagic.begin(), kArrayMagic.end());
  out.reserve(6 + 4 * a.shape.size() + a.data.size());
  out.push_back(static_cast<std::uint8_t>(a.dtype));
  out.push_back(static_cast<std::uint8_t>(a.shape.size()));
  for (std::uint32_t d : a.shape) put_u32(out, d);
  out.insert(out.end(), a.data.begin(), a.data.end());
  return out;
}

Array decode_array(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), kArrayMagic.data(), 4) != 0)
    throw Error("CORRUPT_FILE", "bad magic");
  const std::uint8_t code = bytes[4];
  if (code > 4) throw Error("CORRUPT_FILE", "unknown dtype code " + std::to_string(code));
  Array a;
  a.dtype = static_cast<DType>(code);
  const std::size_t ndim = bytes[5];
  if (bytes.size() < 6 + 4 * ndim) throw Error("CORRUPT_FILE", "truncated shape");
  for (std::size_t i = 0; i < ndim; ++i) a.shape.push_back(get_u32(bytes.data() + 6 + 4 * i));
  const std::size_t header = 6 + 4 * ndim;
  const std::size_t payload = bytes.size() - header;
  std::size_t expected = element_size(a.dtype);
  if (std::find(a.shape.begin(), a.shape.end(), 0u) != a.shape.end()) expected = 0;
  for (std::uint32_t d : a.shape) {
    if (expected == 0) break;
    if (expected > payload / d) throw Error("CORRUPT_FILE", "shape exceeds payload");
    expected *= d;
  }
  if (payload != expected) throw Error("CORRUPT_FILE", "payload length disagrees with shape");
  a.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return a;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IO_FAILURE", "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error("IO_FAILURE", "read failed: " + path.string());
  return bytes;
}

Array read_array_file(const std::filesystem::path& path) {
  try {
    return decode_array(read_file_bytes(path));
  } catch (const Error& e) {
    if (e.code() == "CORRUPT_FILE") throw Error("CORRUPT_FILE", path.string() + ": " + e.what());
    throw;
  }
}

void write_array_file(const std::filesystem::path& path, const Array& array, bool exclusive) {
  const auto bytes = encode_array(array);
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), exclusive ? "wbx" : "wb"));
  if (!f) {
    std::error_code ec;
    if (exclusive && std::filesystem::exists(path, ec)) throw Error("DUPLICATE_STEP", path.string() + " exists");
    throw Error("IO_FAILURE", "cannot create " + path.string());
  }
  if (std::fwrite(bytes.data(), 1, bytes.size(), f.get()) != bytes.size() || std::fclose(f.release()) != 0)
    throw Error("IO_FAILURE", "write failed: " + path.string());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::unique_ptr<std::FILE, FileCloser> f(std::fopen(tmp.c_str(), "wb"));
    if (!f) throw Error("IO_FAILURE", "cannot create " + tmp.string());
    if (std::fwrite(bytes.data(), 1, bytes.size(), f.get()) != bytes.size() || std::fclose(f.release()) != 0) {
      std::filesystem::remove(tmp);
      throw Error("IO_FAILURE", "write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("IO_FAILURE", "rename to " + path.string() + ": " + ec.message());
  }
}

Array make_array(const RgbImage& image) {
  Array a{DType::u8, {image.height, image.width, 3}, image.pixels};
  if (a.data.size() != a.element_count()) throw Error("SHAPE_MISMATCH", "rgb buffer size");
  return a;
}

Array make_array(const DepthImage& image) {
  return make_typed<float>(DType::f32, image.values, {image.height, image.width});
}

Array make_scalar_f32(float value) { return make_typed<float>(DType::f32, std::span<const float>(&value, 1), {}); }
Array make_scalar_f64(double value) { return make_typed<double>(DType::f64, std::span<const double>(&value, 1), {}); }

Array make_utf8(std::string_view text) {
  Array a{DType::utf8, {static_cast<std::uint32_t>(text.size())}, {}};
  a.data.assign(text.begin(), text.end());
  return a;
}

Array make_f32(std::span<const float> values, std::vector<std::uint32_t> shape) {
  return make_typed<float>(DType::f32, values, std::move(shape));
}

Array make_f64(std::span<const double> values, std::vector<std::uint32_t> shape) {
  return make_typed<double>(DType::f64, values, std::move(shape));
}

RgbImage to_rgb_image(const Array& a) {
  if (a.dtype != DType::u8 || a.shape.size() != 3 || a.shape[2] != 3)
    throw Error("CORRUPT_FILE", "rgb array must be u8 (H, W, 3)");
  return RgbImage{a.shape[0], a.shape[1], a.data};
}

DepthImage to_depth_image(const Array& a) {
  if (a.dtype != DType::f32 || a.shape.size() != 2) throw Error("CORRUPT_FILE", "depth array must be f32 (H, W)");
  return DepthImage{a.shape[0], a.shape[1], view_typed<float>(a, DType::f32)};
}

std::string to_text(const Array& a) {
  if (a.dtype != DType::utf8) throw Error("DTYPE_MISMATCH", std::string("expected utf8, got ") + to_string(a.dtype));
  return std::string(a.data.begin(), a.data.end());
}

std::vector<float> to_f32(const Array& a) { return view_typed<float>(a, DType::f32); }
std::vector<double> to_f64(const Array& a) { return view_typed<double>(a, DType::f64); }

std::vector<double> to_doubles(const Array& a) {
  switch (a.dtype) {
    case DType::f32: {
      const auto v = to_f32(a);
      return {v.begin(), v.end()};
    }
    case DType::f64: return to_f64(a);
    case DType::i64: {
      const auto v = view_typed<std::int64_t>(a, DType::i64);
      return {v.begin(), v.end()};
    }
    case DType::u8: return {a.data.begin(), a.data.end()};
    case DType::utf8: break;
  }
  throw Error("DTYPE_MISMATCH", "text array is not numeric");
}

}  // namespace demoforge
