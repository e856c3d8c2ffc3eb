#include "demoforge/registry.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "demoforge/error.hpp"

namespace demoforge {

namespace detail {
extern const char* const kBuiltinRegistryJson;
}

namespace {

constexpr std::array<std::pair<Shape, std::string_view>, 7> kShapeNames{{
    {Shape::disc, "disc"},
    {Shape::square, "square"},
    {Shape::l_block, "l_block"},
    {Shape::slot, "slot"},
    {Shape::container, "container"},
    {Shape::peg, "peg"},
    {Shape::disk, "disk"},
}};

}  // namespace

std::string_view to_string(Shape shape) {
  for (const auto& [s, name] : kShapeNames)
    if (s == shape) return name;
  return "unknown";
}

std::optional<Shape> shape_from_string(std::string_view name) {
  for (const auto& [s, n] : kShapeNames)
    if (n == name) return s;
  return std::nullopt;
}

ObjectRegistry ObjectRegistry::from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("BAD_REGISTRY", e.what());
  }
  ObjectRegistry reg;
  try {
    reg.version_ = doc.at("version").get<int>();
    for (const auto& entry : doc.at("classes")) {
      ObjectClass cls;
      cls.class_name = entry.at("class").get<std::string>();
      cls.category = entry.value("category", std::string{"object"});
      const auto shape_name = entry.at("shape").get<std::string>();
      const auto shape = shape_from_string(shape_name);
      if (!shape) throw Error("BAD_REGISTRY", "unknown shape '" + shape_name + "'");
      cls.shape = *shape;
      cls.footprint_radius = entry.at("footprint_radius").get<double>();
      cls.height = entry.at("height").get<double>();
      cls.rest_height = entry.value("rest_height", cls.height);
      const auto color = entry.at("color");
      if (!color.is_array() || color.size() != 3)
        throw Error("BAD_REGISTRY", "color of '" + cls.class_name + "' must have 3 channels");
      for (std::size_t c = 0; c < 3; ++c) {
        const int v = color[c].get<int>();
        if (v < 0 || v > 255) throw Error("BAD_REGISTRY", "color channel out of range");
        cls.color[c] = static_cast<std::uint8_t>(v);
      }
      if (!(cls.footprint_radius > 0.0) || !(cls.height > 0.0) || cls.rest_height < 0.0)
        throw Error("BAD_REGISTRY", "non-positive dimensions for '" + cls.class_name + "'");
      if (!reg.classes_.emplace(cls.class_name, cls).second)
        throw Error("BAD_REGISTRY", "duplicate class '" + cls.class_name + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("BAD_REGISTRY", e.what());
  }
  return reg;
}

ObjectRegistry ObjectRegistry::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IO_FAILURE", "cannot open registry " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

const ObjectRegistry& ObjectRegistry::builtin() {
  static const ObjectRegistry reg = from_json(detail::kBuiltinRegistryJson);
  return reg;
}

const ObjectRegistry& ObjectRegistry::active() {
  static const ObjectRegistry reg = [] {
    if (const char* dir = std::getenv("DEMOFORGE_ASSETS"); dir && *dir) {
      return from_file((std::filesystem::path(dir) / "object_registry.json").string());
    }
    return builtin();
  }();
  return reg;
}

const ObjectClass* ObjectRegistry::find(std::string_view class_name) const {
  const auto it = classes_.find(class_name);
  return it == classes_.end() ? nullptr : &it->second;
}

const ObjectClass& ObjectRegistry::at(std::string_view class_name) const {
  if (const auto* cls = find(class_name)) return *cls;
  throw Error("UNKNOWN_CLASS", "class '" + std::string(class_name) + "' is not in the object registry");
}

}  // namespace demoforge
