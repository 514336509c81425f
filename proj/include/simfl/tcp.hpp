#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "simfl/transport.hpp"

namespace simfl {

// Listens on a TCP port; one reader thread per accepted connection feeds a
// single queue drained by the orchestration thread through receive().
class TcpServerTransport final : public ServerTransport {
 public:
  explicit TcpServerTransport(std::uint16_t port, const std::string& bind_host = "0.0.0.0");
  ~TcpServerTransport() override;

  TcpServerTransport(const TcpServerTransport&) = delete;
  TcpServerTransport& operator=(const TcpServerTransport&) = delete;

  std::uint16_t port() const { return port_; }

  void send(ConnId conn, const Message& msg) override;
  std::optional<Inbound> receive(Deadline deadline) override;
  void close(ConnId conn) override;

 private:
  struct Connection {
    int fd = -1;
    std::thread reader;
  };

  void accept_loop();
  void read_loop(ConnId id, int fd);
  void push(Inbound in);

  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;

  std::mutex conn_mu_;
  std::map<ConnId, std::unique_ptr<Connection>> conns_;
  ConnId next_id_ = 0;

  std::mutex queue_mu_;
  std::condition_variable queue_cv_;
  std::deque<Inbound> queue_;
};

// Blocking client end of a server connection.
class TcpClientConnection {
 public:
  // Retries until the server accepts or `connect_timeout` passes; throws
  // RuntimeAbort on failure.
  TcpClientConnection(const std::string& host, std::uint16_t port,
                      std::chrono::milliseconds connect_timeout);
  ~TcpClientConnection();

  TcpClientConnection(const TcpClientConnection&) = delete;
  TcpClientConnection& operator=(const TcpClientConnection&) = delete;

  void send(const Message& msg);
  // Throws RuntimeAbort if the server closes the connection.
  Message receive();

 private:
  int fd_ = -1;
  FrameDecoder decoder_;
};

// "host:port" or "host" (default port).
std::pair<std::string, std::uint16_t> parse_address(const std::string& address);

}  // namespace simfl
