#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <deque>
#include <memory>

#include "acc/bridge.hpp"
#include "acc/gateway.hpp"

namespace acc::bridge {
namespace {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace ws = beast::websocket;
using tcp = asio::ip::tcp;
using clock = std::chrono::steady_clock;

// All handlers run on one thread, so the session needs no locking.
class Server {
 public:
  Server(DriveSession& session, const GatewayConfig& cfg, const std::atomic<bool>* stop)
      : session_(session), acceptor_(io_), timer_(io_), stop_(stop) {
    const tcp::endpoint ep(asio::ip::make_address(cfg.host), cfg.port);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(asio::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
  }

  std::uint16_t port() const { return acceptor_.local_endpoint().port(); }

  void run() {
    accept();
    last_ = clock::now();
    schedule();
    io_.run();
  }

 private:
  using Stream = ws::stream<tcp::socket>;

  void accept() {
    acceptor_.async_accept([this](beast::error_code ec, tcp::socket sock) {
      if (ec) return;
      if (client_) {
        // Single-driver gateway: refuse a second cockpit.
        beast::error_code ignore;
        sock.close(ignore);
        accept();
        return;
      }
      auto conn = std::make_shared<Stream>(std::move(sock));
      client_ = conn;
      conn->async_accept([this, conn](beast::error_code ec2) {
        if (ec2) {
          drop(conn);
          return;
        }
        queue(session_.on_connect());
        read(conn);
      });
      accept();
    });
  }

  void read(const std::shared_ptr<Stream>& conn) {
    conn->async_read(buf_, [this, conn](beast::error_code ec, std::size_t) {
      if (ec) {
        drop(conn);
        return;
      }
      if (conn->got_text()) {
        session_.on_text(beast::buffers_to_string(buf_.data()));
      } else if (session_.warn) {
        session_.warn("ignoring binary frame");
      }
      buf_.consume(buf_.size());
      read(conn);
    });
  }

  void queue(std::string frame) {
    if (!client_) return;
    out_.push_back(std::move(frame));
    if (out_.size() == 1) write(client_);
  }

  void write(const std::shared_ptr<Stream>& conn) {
    conn->text(true);
    conn->async_write(asio::buffer(out_.front()), [this, conn](beast::error_code ec, std::size_t) {
      if (ec) {
        drop(conn);
        return;
      }
      out_.pop_front();
      if (!out_.empty()) write(conn);
    });
  }

  // Handlers keep their connection alive; a stale one dropping is a no-op.
  void drop(const std::shared_ptr<Stream>& conn) {
    if (conn != client_) return;
    session_.on_disconnect();
    beast::error_code ignore;
    conn->next_layer().close(ignore);
    client_.reset();
    out_.clear();
    buf_.consume(buf_.size());
  }

  void schedule() {
    timer_.expires_after(std::chrono::milliseconds(5));
    timer_.async_wait([this](beast::error_code ec) {
      if (ec) return;
      const auto now = clock::now();
      const double elapsed = std::chrono::duration<double>(now - last_).count();
      last_ = now;
      for (auto& f : session_.advance(elapsed)) queue(std::move(f));
      if (session_.finished() || (stop_ && stop_->load())) {
        finish();
        return;
      }
      schedule();
    });
  }

  void finish() {
    beast::error_code ignore;
    acceptor_.close(ignore);
    if (client_ && out_.empty()) {
      client_->async_close(ws::close_code::normal, [this, conn = client_](beast::error_code) { io_.stop(); });
      return;
    }
    // Let queued frames drain briefly, then stop regardless.
    timer_.expires_after(std::chrono::milliseconds(200));
    timer_.async_wait([this](beast::error_code) { io_.stop(); });
  }

  DriveSession& session_;
  asio::io_context io_;
  tcp::acceptor acceptor_;
  asio::steady_timer timer_;
  const std::atomic<bool>* stop_;
  std::shared_ptr<Stream> client_;
  beast::flat_buffer buf_;
  std::deque<std::string> out_;
  clock::time_point last_;
};

}  // namespace

Trajectory serve_drive(DriveSession& session, const GatewayConfig& cfg,
                       const std::function<void(std::uint16_t)>& on_listen, const std::atomic<bool>* stop) {
  cfg.validate();
  try {
    Server server(session, cfg, stop);
    if (on_listen) on_listen(server.port());
    server.run();
  } catch (const boost::system::system_error& e) {
    throw SessionError(std::string("gateway: ") + e.what());
  }
  return session.recording();
}

}  // namespace acc::bridge
