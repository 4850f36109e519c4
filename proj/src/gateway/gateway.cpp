#include "towerfleet/gateway/gateway.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <deque>
#include <thread>

namespace towerfleet::gateway {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

constexpr std::size_t kClientQueue = 32;
constexpr auto kFlushPeriod = std::chrono::milliseconds(10);

}  // namespace

void to_json(nlohmann::json& j, const GatewayStats& s) {
  j = nlohmann::json{{"snapshots_published", s.snapshots_published},
                     {"snapshots_dropped", s.snapshots_dropped},
                     {"client_drops", s.client_drops},
                     {"commands_accepted", s.commands_accepted},
                     {"commands_rejected", s.commands_rejected},
                     {"connections", s.connections}};
}

class Session;

struct Server::Impl {
  world::Scenario scenario;
  net::io_context ioc;
  tcp::acceptor acceptor{ioc};
  net::steady_timer flush{ioc};
  std::thread thread;
  BoundedQueue<nlohmann::json> snapshots;
  BoundedQueue<ClientCommand> commands;
  std::vector<std::weak_ptr<Session>> sessions;  // I/O thread only
  std::atomic<std::uint64_t> published{0}, client_drops{0}, accepted{0}, rejected{0}, connections{0};
  std::atomic<std::size_t> open_sessions{0};
  unsigned short port = 0;

  Impl(const world::Scenario& s, std::size_t snapshot_capacity, std::size_t command_capacity)
      : scenario(s), snapshots(snapshot_capacity), commands(command_capacity) {}

  void accept();
  void schedule_flush();
};

class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(tcp::socket socket, Server::Impl& server) : ws_(std::move(socket)), server_(server) {}

  void start() {
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->open_ = true;
      ++self->server_.open_sessions;
      self->send(scenario_message(++self->seq_, self->server_.scenario));
      self->read();
    });
  }

  void snapshot(const nlohmann::json& data) {
    if (!open_) return;
    if (out_.size() >= kClientQueue) {
      ++server_.client_drops;
      return;
    }
    send(snapshot_message(++seq_, data));
  }

  void close() {
    if (!open_) return;
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->shutdown();
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->handle(text);
      self->read();
    });
  }

  void handle(const std::string& text) {
    auto parsed = parse_client(text, server_.scenario);
    if (auto* r = std::get_if<Rejection>(&parsed)) {
      ++server_.rejected;
      send(ack_message(++seq_, r->ref, false, r->reason));
      return;
    }
    auto& c = std::get<ClientCommand>(parsed);
    const std::int64_t ref = c.seq;
    if (!server_.commands.try_push(std::move(c))) {
      ++server_.rejected;
      send(ack_message(++seq_, ref, false, "command queue full"));
      return;
    }
    ++server_.accepted;
    send(ack_message(++seq_, ref, true, ""));
  }

  void send(const nlohmann::json& message) {
    out_.push_back(message.dump());
    if (!writing_) write_next();
  }

  void write_next() {
    writing_ = true;
    ws_.text(true);
    ws_.async_write(net::buffer(out_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->shutdown();
        return;
      }
      self->out_.pop_front();
      if (self->out_.empty()) {
        self->writing_ = false;
      } else {
        self->write_next();
      }
    });
  }

  void shutdown() {
    if (!open_) return;
    open_ = false;
    --server_.open_sessions;
    out_.clear();
  }

  websocket::stream<beast::tcp_stream> ws_;
  Server::Impl& server_;
  beast::flat_buffer buffer_;
  std::deque<std::string> out_;
  bool writing_ = false;
  bool open_ = false;
  std::uint64_t seq_ = 0;
};

void Server::Impl::accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    ++connections;
    auto s = std::make_shared<Session>(std::move(socket), *this);
    sessions.push_back(s);
    s->start();
    accept();
  });
}

void Server::Impl::schedule_flush() {
  flush.expires_after(kFlushPeriod);
  flush.async_wait([this](beast::error_code ec) {
    if (ec) return;
    auto batch = snapshots.drain();
    std::erase_if(sessions, [](const auto& w) { return w.expired(); });
    for (const auto& snap : batch) {
      for (auto& w : sessions) {
        if (auto s = w.lock()) s->snapshot(snap);
      }
    }
    schedule_flush();
  });
}

Server::Server(const world::Scenario& scenario, unsigned short port, std::size_t snapshot_capacity,
               std::size_t command_capacity)
    : impl_(std::make_unique<Impl>(scenario, snapshot_capacity, command_capacity)) {
  try {
    const tcp::endpoint ep(net::ip::make_address("0.0.0.0"), port);
    impl_->acceptor.open(ep.protocol());
    impl_->acceptor.set_option(net::socket_base::reuse_address(true));
    impl_->acceptor.bind(ep);
    impl_->acceptor.listen();
    impl_->port = impl_->acceptor.local_endpoint().port();
  } catch (const boost::system::system_error& e) {
    throw PortError("cannot listen on port " + std::to_string(port) + ": " + e.what());
  }
  impl_->accept();
  impl_->schedule_flush();
  impl_->thread = std::thread([this] { impl_->ioc.run(); });
}

Server::~Server() {
  net::post(impl_->ioc, [this] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
    impl_->flush.cancel();
    for (auto& w : impl_->sessions) {
      if (auto s = w.lock()) s->close();
    }
  });
  // Let pending handlers observe the closed sockets, then stop.
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  impl_->ioc.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

unsigned short Server::port() const { return impl_->port; }

void Server::publish(nlohmann::json snapshot) {
  ++impl_->published;
  impl_->snapshots.push(std::move(snapshot));
}

std::vector<ClientCommand> Server::take_commands() { return impl_->commands.drain(); }

GatewayStats Server::stats() const {
  return GatewayStats{impl_->published, impl_->snapshots.dropped(), impl_->client_drops,
                      impl_->accepted,  impl_->rejected,            impl_->connections};
}

std::size_t Server::clients() const { return impl_->open_sessions; }

}  // namespace towerfleet::gateway
