#include "demoforge/teleop_server.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "demoforge/error.hpp"
#include "demoforge/wire.hpp"

namespace demoforge {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using Frame = std::shared_ptr<const std::string>;

namespace {

constexpr std::size_t kMaxQueuedFrames = 4;

class Connection;

}  // namespace

struct TeleopServer::Impl {
  Impl(TeleopSession s, ServerOptions o) : session(std::move(s)), options(std::move(o)), acceptor(io) {}

  TeleopSession session;  // touched by the control thread only
  ServerOptions options;
  net::io_context io;
  tcp::acceptor acceptor;
  std::optional<net::executor_work_guard<net::io_context::executor_type>> work;
  std::jthread io_thread;
  std::jthread control_thread;

  mutable std::mutex mu;
  std::condition_variable cv;
  bool stopping = false;
  std::optional<DeviceInput> mailbox;
  std::deque<ControlCommand> controls;
  Frame latest;
  ServerStatus status;
  std::vector<std::weak_ptr<Connection>> connections;

  void accept();
  void control_loop(std::stop_token token);
  void publish(Frame frame);
  Frame latest_frame() {
    std::lock_guard lock(mu);
    return latest;
  }
  void on_message(const std::string& text);
};

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, TeleopServer::Impl& server) : ws_(std::move(socket)), server_(server) {}

  void run() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

  // Safe from any thread.
  void send(Frame frame) {
    net::post(ws_.get_executor(), [self = shared_from_this(), frame = std::move(frame)]() mutable {
      self->queue_.push_back(std::move(frame));
      // Slow readers only ever see the newest frames.
      while (self->queue_.size() > kMaxQueuedFrames + (self->writing_ ? 1 : 0))
        self->queue_.erase(self->queue_.begin() + (self->writing_ ? 1 : 0));
      if (!self->writing_) self->write_next();
    });
  }

  void close() {
    net::post(ws_.get_executor(), [self = shared_from_this()] {
      beast::error_code ec;
      beast::get_lowest_layer(self->ws_).socket().close(ec);
    });
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    {
      std::lock_guard lock(server_.mu);
      server_.connections.push_back(weak_from_this());
      ++server_.status.clients;
    }
    if (Frame f = server_.latest_frame()) send(std::move(f));
    read();
  }

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        std::lock_guard lock(self->server_.mu);
        --self->server_.status.clients;
        return;
      }
      self->server_.on_message(beast::buffers_to_string(self->buffer_.data()));
      self->buffer_.consume(self->buffer_.size());
      self->read();
    });
  }

  void write_next() {
    if (queue_.empty()) {
      writing_ = false;
      return;
    }
    writing_ = true;
    ws_.text(true);
    ws_.async_write(net::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->queue_.pop_front();
      if (ec) {
        self->queue_.clear();
        self->writing_ = false;
        return;
      }
      self->write_next();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<Frame> queue_;
  bool writing_ = false;
  TeleopServer::Impl& server_;
};

}  // namespace

void TeleopServer::Impl::accept() {
  acceptor.async_accept(net::make_strand(io), [this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    std::make_shared<Connection>(std::move(socket), *this)->run();
    accept();
  });
}

void TeleopServer::Impl::on_message(const std::string& text) {
  try {
    const ClientMessage msg = parse_client_message(text);
    std::lock_guard lock(mu);
    if (const auto* in = std::get_if<DeviceInput>(&msg)) mailbox = *in;
    else controls.push_back(std::get<ControlCommand>(msg));
  } catch (const Error&) {
    std::lock_guard lock(mu);
    ++status.bad_messages;
  }
}

void TeleopServer::Impl::publish(Frame frame) {
  std::vector<std::shared_ptr<Connection>> targets;
  {
    std::lock_guard lock(mu);
    latest = frame;
    std::erase_if(connections, [](const auto& w) { return w.expired(); });
    for (const auto& w : connections)
      if (auto c = w.lock()) targets.push_back(std::move(c));
  }
  for (auto& c : targets) c->send(frame);
}

void TeleopServer::Impl::control_loop(std::stop_token token) {
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<clock::duration>(
      std::chrono::duration<double>(1.0 / (session.config().control_freq * options.speedup)));
  auto next = clock::now();
  publish(std::make_shared<const std::string>(make_frame_message(session).dump()));
  while (!token.stop_requested()) {
    next += period;
    std::deque<ControlCommand> cmds;
    std::optional<DeviceInput> input;
    {
      std::lock_guard lock(mu);
      cmds.swap(controls);
      input.swap(mailbox);
    }
    bool changed = false;
    for (ControlCommand c : cmds) {
      try {
        session.control(c);
        changed = true;
      } catch (const Error& e) {
        std::cerr << "teleop: " << e.what() << "\n";
      }
    }
    const Phase phase = session.session().phase;
    if (phase == Phase::running || phase == Phase::debouncing) {
      try {
        session.tick(input.value_or(DeviceInput{}));
        changed = true;
      } catch (const Error& e) {
        std::cerr << "teleop: " << e.what() << "\n";
      }
    }
    {
      std::lock_guard lock(mu);
      status.phase = session.session().phase;
      status.tick = session.session().tick;
      status.success_streak = session.session().success_streak;
      status.episode_id = session.session().episode_id;
    }
    if (changed) publish(std::make_shared<const std::string>(make_frame_message(session).dump()));
    std::unique_lock lock(mu);
    cv.wait_until(lock, next, [&] { return stopping; });
    if (stopping) break;
  }
}

TeleopServer::TeleopServer(TeleopSession session, ServerOptions options)
    : impl_(std::make_unique<Impl>(std::move(session), std::move(options))) {
  if (!(impl_->options.speedup > 0)) throw Error("BAD_CONFIG", "speedup must be > 0");
}

TeleopServer::~TeleopServer() { stop(); }

void TeleopServer::start() {
  Impl& s = *impl_;
  try {
    const tcp::endpoint endpoint(net::ip::make_address(s.options.address), s.options.port);
    s.acceptor.open(endpoint.protocol());
    s.acceptor.set_option(net::socket_base::reuse_address(true));
    s.acceptor.bind(endpoint);
    s.acceptor.listen();
  } catch (const boost::system::system_error& e) {
    throw Error("IO_FAILURE", std::string("cannot listen: ") + e.what());
  }
  s.work.emplace(net::make_work_guard(s.io));
  s.accept();
  s.io_thread = std::jthread([&s] { s.io.run(); });
  s.control_thread = std::jthread([&s](std::stop_token t) { s.control_loop(t); });
}

void TeleopServer::stop() {
  Impl& s = *impl_;
  {
    std::lock_guard lock(s.mu);
    if (s.stopping) return;
    s.stopping = true;
    for (const auto& w : s.connections)
      if (auto c = w.lock()) c->close();
  }
  s.cv.notify_all();
  if (s.control_thread.joinable()) s.control_thread.join();
  net::post(s.io, [&s] {
    beast::error_code ec;
    s.acceptor.close(ec);
  });
  s.work.reset();
  if (s.io_thread.joinable()) s.io_thread.join();
}

void TeleopServer::wait() {
  std::unique_lock lock(impl_->mu);
  impl_->cv.wait(lock, [&] { return impl_->stopping; });
}

std::uint16_t TeleopServer::port() const {
  beast::error_code ec;
  return impl_->acceptor.local_endpoint(ec).port();
}

ServerStatus TeleopServer::status() const {
  std::lock_guard lock(impl_->mu);
  return impl_->status;
}

}  // namespace demoforge
