#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace demoforge {

enum class Shape { disc, square, l_block, slot, container, peg, disk };

std::string_view to_string(Shape shape);
std::optional<Shape> shape_from_string(std::string_view name);

using Rgb = std::array<std::uint8_t, 3>;

/// One entry of the object registry: geometry and appearance of a class.
struct ObjectClass {
  std::string class_name;
  std::string category;     // "object", "container" or "fixture"; informational
  Shape shape = Shape::square;
  double footprint_radius = 0.0;  // m
  double height = 0.0;            // m, top of the rendered body above its base
  double rest_height = 0.0;       // m, where something placed on it comes to rest
  Rgb color{};

  friend bool operator==(const ObjectClass&, const ObjectClass&) = default;
};

class ObjectRegistry {
 public:
  /// Parses the registry JSON document. Throws Error("BAD_REGISTRY") on malformed input.
  static ObjectRegistry from_json(std::string_view text);
  static ObjectRegistry from_file(const std::string& path);

  /// The registry compiled into the library (assets/object_registry.json).
  static const ObjectRegistry& builtin();

  /// $DEMOFORGE_ASSETS/object_registry.json when the variable is set,
  /// otherwise builtin(). Loaded once per process.
  static const ObjectRegistry& active();

  const ObjectClass* find(std::string_view class_name) const;
  const ObjectClass& at(std::string_view class_name) const;  // throws UNKNOWN_CLASS
  bool contains(std::string_view class_name) const { return find(class_name) != nullptr; }

  int version() const { return version_; }
  const std::map<std::string, ObjectClass, std::less<>>& classes() const { return classes_; }

 private:
  int version_ = 0;
  std::map<std::string, ObjectClass, std::less<>> classes_;
};

}  // namespace demoforge
