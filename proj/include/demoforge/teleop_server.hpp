#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "demoforge/teleop.hpp"

namespace demoforge {

struct ServerOptions {
  std::string address = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks a free port
  double speedup = 1.0;    // wall-clock tick rate multiplier; recorded time is unaffected
};

struct ServerStatus {
  Phase phase = Phase::idle;
  std::uint64_t tick = 0;
  std::uint32_t success_streak = 0;
  std::uint32_t episode_id = 0;
  std::size_t clients = 0;
  std::size_t bad_messages = 0;
};

/// Websocket front end for a TeleopSession. The control loop owns the
/// session and runs at control_freq * speedup; network handlers talk to it
/// only through a latest-input-wins mailbox and an ordered control queue,
/// and receive frames as immutable snapshots.
class TeleopServer {
 public:
  TeleopServer(TeleopSession session, ServerOptions options);
  ~TeleopServer();
  TeleopServer(const TeleopServer&) = delete;
  TeleopServer& operator=(const TeleopServer&) = delete;

  /// Binds and starts the network and control threads. IO_FAILURE if the
  /// address cannot be bound.
  void start();
  void stop();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();

  std::uint16_t port() const;
  ServerStatus status() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace demoforge
