#include "demoforge/wire.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <png.h>

#include "demoforge/error.hpp"

namespace demoforge {

using nlohmann::json;

namespace {

std::array<double, 3> axis3(const json& j, const char* field) {
  const json& v = j.at(field);
  if (!v.is_array() || v.size() != 3) throw Error("BAD_MESSAGE", std::string(field) + " must have 3 components");
  std::array<double, 3> out{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!v[i].is_number()) throw Error("BAD_MESSAGE", std::string(field) + " must be numeric");
    out[i] = v[i].get<double>();
  }
  return out;
}

}  // namespace

ClientMessage parse_client_message(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error("BAD_MESSAGE", "not a JSON object");
  try {
    const std::string type = j.at("type").get<std::string>();
    if (type == "input") {
      DeviceInput in;
      in.dpos = axis3(j, "dpos");
      in.drot = axis3(j, "drot");
      const std::string grip = j.at("grip").get<std::string>();
      if (grip != "open" && grip != "close" && grip != "hold") throw Error("BAD_MESSAGE", "unknown grip " + grip);
      in.grip = grip_from_string(grip);
      if (!in.in_bounds()) throw Error("BAD_MESSAGE", "input components must lie in [-1, 1]");
      return in;
    }
    if (type == "control") {
      const auto cmd = control_from_string(j.at("cmd").get<std::string>());
      if (!cmd) throw Error("BAD_MESSAGE", "unknown control command");
      return *cmd;
    }
    throw Error("BAD_MESSAGE", "unknown message type '" + type + "'");
  } catch (const json::exception& e) {
    throw Error("BAD_MESSAGE", e.what());
  }
}

std::string serialize_input(const DeviceInput& input) {
  return json{{"type", "input"}, {"dpos", input.dpos}, {"drot", input.drot}, {"grip", to_string(input.grip)}}.dump();
}

std::string serialize_control(ControlCommand cmd) { return json{{"type", "control"}, {"cmd", to_string(cmd)}}.dump(); }

json make_frame_message(const TeleopSession& session) {
  const WorldState& w = session.world();
  const Observation& obs = session.frame();
  json objects = json::array();
  for (const auto& o : w.objects)
    objects.push_back({{"name", o.instance_name}, {"x", o.x}, {"y", o.y}, {"yaw", o.yaw}, {"color", o.color}});
  const auto png = encode_png(obs.rgb);
  return {{"type", "frame"},
          {"tick", session.session().tick},
          {"rgb_png_b64", base64_encode(png)},
          {"objects", std::move(objects)},
          {"reward", session.session().last_reward},
          {"success_streak", session.session().success_streak},
          {"debounce_steps", session.config().debounce_steps},
          {"phase", to_string(session.session().phase)},
          {"instruction", obs.instruction},
          {"gripper",
           {{"x", w.gripper.x}, {"y", w.gripper.y}, {"z", w.gripper.z}, {"yaw", w.gripper.yaw},
            {"closed", w.gripper.closed}}}};
}

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = image.width;
  img.height = image.height;
  img.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.pixels.data(), 0, nullptr))
    throw Error("BAD_IMAGE", img.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.pixels.data(), 0, nullptr))
    throw Error("BAD_IMAGE", img.message);
  out.resize(size);
  return out;
}

RgbImage decode_png(std::span<const std::uint8_t> png) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, png.data(), png.size())) throw Error("BAD_IMAGE", img.message);
  img.format = PNG_FORMAT_RGB;
  RgbImage out{img.height, img.width, std::vector<std::uint8_t>(PNG_IMAGE_SIZE(img))};
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&img);
    throw Error("BAD_IMAGE", img.message);
  }
  return out;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  using namespace boost::archive::iterators;
  using It = base64_from_binary<transform_width<const std::uint8_t*, 6, 8>>;
  std::string out(It(bytes.data()), It(bytes.data() + bytes.size()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  using namespace boost::archive::iterators;
  using It = transform_width<binary_from_base64<const char*>, 8, 6>;
  if (text.size() % 4 != 0) throw Error("BAD_MESSAGE", "base64 length must be a multiple of 4");
  const std::size_t pad = text.ends_with("==") ? 2 : text.ends_with("=") ? 1 : 0;
  std::string body(text.substr(0, text.size() - pad));
  if (!std::all_of(body.begin(), body.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '/'; }))
    throw Error("BAD_MESSAGE", "invalid base64 character");
  body.append(pad, 'A');
  std::vector<std::uint8_t> out(It(body.data()), It(body.data() + body.size()));
  out.resize(out.size() - pad);
  return out;
}

}  // namespace demoforge
