#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "demoforge/teleop.hpp"

namespace demoforge {

// Teleoperation wire protocol: one UTF-8 JSON object per message.
//   server -> client  {"type":"frame", ...}
//   client -> server  {"type":"input","dpos":[..],"drot":[..],"grip":"hold"}
//                     {"type":"control","cmd":"reset"}

using ClientMessage = std::variant<DeviceInput, ControlCommand>;

/// BAD_MESSAGE on malformed JSON, unknown types or out-of-range inputs.
ClientMessage parse_client_message(std::string_view text);
std::string serialize_input(const DeviceInput& input);
std::string serialize_control(ControlCommand cmd);

/// Frame message for the current session state.
nlohmann::json make_frame_message(const TeleopSession& session);

std::vector<std::uint8_t> encode_png(const RgbImage& image);
RgbImage decode_png(std::span<const std::uint8_t> png);  // BAD_IMAGE

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);  // BAD_MESSAGE

}  // namespace demoforge
