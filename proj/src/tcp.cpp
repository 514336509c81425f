#include "simfl/tcp.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include "simfl/errors.hpp"

namespace simfl {

namespace {

void write_all(int fd, std::span<const std::uint8_t> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw RuntimeAbort(std::string("send failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

}  // namespace

std::pair<std::string, std::uint16_t> parse_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) return {address, kDefaultPort};
  const std::string port = address.substr(colon + 1);
  try {
    const unsigned long p = std::stoul(port);
    if (p == 0 || p > 65535) throw ConfigError("port out of range");
    return {address.substr(0, colon), static_cast<std::uint16_t>(p)};
  } catch (const std::logic_error&) {
    throw ConfigError("bad server address '" + address + "'");
  }
}

TcpServerTransport::TcpServerTransport(std::uint16_t port, const std::string& bind_host) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw RuntimeAbort("socket() failed");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, bind_host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw ConfigError("bad bind address " + bind_host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 ||
      ::listen(listen_fd_, 64) < 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    throw RuntimeAbort("cannot listen on port " + std::to_string(port) + ": " + err);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  acceptor_ = std::thread([this] { accept_loop(); });
}

TcpServerTransport::~TcpServerTransport() {
  stopping_ = true;
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);
  std::map<ConnId, std::unique_ptr<Connection>> conns;
  {
    std::lock_guard lock(conn_mu_);
    conns.swap(conns_);
  }
  for (auto& [id, c] : conns) ::shutdown(c->fd, SHUT_RDWR);
  for (auto& [id, c] : conns) {
    if (c->reader.joinable()) c->reader.join();
    ::close(c->fd);
  }
}

void TcpServerTransport::accept_loop() {
  while (!stopping_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    if (::poll(&pfd, 1, 100) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    set_nodelay(fd);
    std::lock_guard lock(conn_mu_);
    const ConnId id = next_id_++;
    auto conn = std::make_unique<Connection>();
    conn->fd = fd;
    conn->reader = std::thread([this, id, fd] { read_loop(id, fd); });
    conns_.emplace(id, std::move(conn));
  }
}

void TcpServerTransport::read_loop(ConnId id, int fd) {
  FrameDecoder decoder;
  std::vector<std::uint8_t> buf(1 << 16);
  try {
    for (;;) {
      const ssize_t n = ::recv(fd, buf.data(), buf.size(), 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      decoder.feed(std::span(buf.data(), static_cast<std::size_t>(n)));
      while (auto frame = decoder.next()) push(Inbound{id, from_frame(*frame)});
    }
  } catch (const ProtocolError&) {
    // Treated like a disconnect below.
  }
  push(Inbound{id, std::nullopt});
}

void TcpServerTransport::push(Inbound in) {
  {
    std::lock_guard lock(queue_mu_);
    queue_.push_back(std::move(in));
  }
  queue_cv_.notify_one();
}

void TcpServerTransport::send(ConnId conn, const Message& msg) {
  int fd = -1;
  {
    std::lock_guard lock(conn_mu_);
    auto it = conns_.find(conn);
    if (it == conns_.end()) return;
    fd = it->second->fd;
  }
  write_all(fd, encode_message(msg));
}

std::optional<Inbound> TcpServerTransport::receive(Deadline deadline) {
  std::unique_lock lock(queue_mu_);
  if (!queue_cv_.wait_until(lock, deadline, [this] { return !queue_.empty(); }))
    return std::nullopt;
  Inbound in = std::move(queue_.front());
  queue_.pop_front();
  return in;
}

void TcpServerTransport::close(ConnId conn) {
  std::lock_guard lock(conn_mu_);
  auto it = conns_.find(conn);
  if (it != conns_.end()) ::shutdown(it->second->fd, SHUT_RDWR);
}

TcpClientConnection::TcpClientConnection(const std::string& host, std::uint16_t port,
                                         std::chrono::milliseconds connect_timeout) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
    throw RuntimeAbort("cannot resolve " + host);
  const auto deadline = std::chrono::steady_clock::now() + connect_timeout;
  for (;;) {
    fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd_ >= 0 && ::connect(fd_, res->ai_addr, res->ai_addrlen) == 0) break;
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
    if (std::chrono::steady_clock::now() >= deadline) {
      ::freeaddrinfo(res);
      throw RuntimeAbort("cannot connect to " + host + ":" + std::to_string(port));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  ::freeaddrinfo(res);
  set_nodelay(fd_);
}

TcpClientConnection::~TcpClientConnection() {
  if (fd_ >= 0) ::close(fd_);
}

void TcpClientConnection::send(const Message& msg) { write_all(fd_, encode_message(msg)); }

Message TcpClientConnection::receive() {
  std::vector<std::uint8_t> buf(1 << 16);
  for (;;) {
    if (auto frame = decoder_.next()) return from_frame(*frame);
    const ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw RuntimeAbort("server closed the connection");
    decoder_.feed(std::span(buf.data(), static_cast<std::size_t>(n)));
  }
}

}  // namespace simfl
