#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "simfl/layout.hpp"

namespace simfl {

inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::uint16_t kDefaultPort = 8471;
inline constexpr std::size_t kMaxPayload = 64u << 20;
inline constexpr std::uint8_t kNoCluster = 0xFF;

enum class MsgType : std::uint8_t {
  Register = 1,
  RegisterAck = 2,
  GlobalModel = 3,
  Directive = 4,
  LocalUpdate = 5,
  MetricsAck = 6,
  Shutdown = 7,
};

// length (u32 LE, counts the type byte) + type byte + payload.
struct Frame {
  MsgType type = MsgType::Shutdown;
  std::vector<std::uint8_t> payload;

  bool operator==(const Frame&) const = default;
};

std::vector<std::uint8_t> encode_frame(const Frame& frame);
// Exactly one frame; ProtocolError on unknown type, length mismatch, oversize.
Frame decode_frame(std::span<const std::uint8_t> bytes);

// Reassembles frames from arbitrarily chunked stream reads.
class FrameDecoder {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  std::optional<Frame> next();  // throws ProtocolError on a bad header
  std::size_t buffered() const { return buffer_.size() - offset_; }

 private:
  std::vector<std::uint8_t> buffer_;
  std::size_t offset_ = 0;
};

enum class RegisterStatus : std::uint8_t { Accepted = 0, VersionMismatch = 1, BadClientId = 2 };

struct RegisterMsg {
  std::uint16_t client_id = 0;
  std::uint32_t num_samples = 0;
  std::uint8_t protocol_version = kProtocolVersion;
  bool operator==(const RegisterMsg&) const = default;
};

// Server's reply; on acceptance it carries the training settings every
// client must share.
struct RegisterAckMsg {
  std::uint8_t protocol_version = kProtocolVersion;
  RegisterStatus status = RegisterStatus::Accepted;
  std::uint32_t epochs = 1;
  std::uint32_t batch_size = 32;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  UpdateType update_type = UpdateType::WW;
  bool operator==(const RegisterAckMsg&) const = default;
};

struct GlobalModelMsg {
  std::uint32_t round = 0;
  std::vector<float> params;  // kParamCount
  bool operator==(const GlobalModelMsg&) const = default;
};

struct DirectiveEntryWire {
  std::uint16_t client_id = 0;
  std::uint8_t active = 1;
  std::uint8_t cluster = kNoCluster;
  bool operator==(const DirectiveEntryWire&) const = default;
};

struct DirectiveMsg {
  std::uint32_t round = 0;
  std::vector<DirectiveEntryWire> entries;
  bool operator==(const DirectiveMsg&) const = default;
};

struct LocalUpdateMsg {
  std::uint16_t client_id = 0;
  std::uint32_t num_samples = 0;
  std::vector<float> theta;  // kParamCount
  UpdateType update_type = UpdateType::WW;
  std::vector<float> update;  // update_length(update_type)
  bool operator==(const LocalUpdateMsg&) const = default;
};

// A client's evaluation of the global model it was last sent.
struct MetricsAckMsg {
  std::uint16_t client_id = 0;
  std::uint32_t round = 0;
  std::uint32_t correct = 0;
  std::uint32_t total = 0;
  bool operator==(const MetricsAckMsg&) const = default;
};

struct ShutdownMsg {
  bool operator==(const ShutdownMsg&) const = default;
};

using Message = std::variant<RegisterMsg, RegisterAckMsg, GlobalModelMsg, DirectiveMsg,
                             LocalUpdateMsg, MetricsAckMsg, ShutdownMsg>;

Frame to_frame(const Message& msg);
Message from_frame(const Frame& frame);  // throws ProtocolError

std::vector<std::uint8_t> encode_message(const Message& msg);

using ConnId = std::size_t;
using Deadline = std::chrono::steady_clock::time_point;

struct Inbound {
  ConnId conn = 0;
  std::optional<Message> msg;  // empty: the connection closed
};

// Server side of the message exchange with clients.
class ServerTransport {
 public:
  virtual ~ServerTransport() = default;
  virtual void send(ConnId conn, const Message& msg) = 0;
  // Next inbound message, or nullopt if nothing arrives before `deadline`.
  virtual std::optional<Inbound> receive(Deadline deadline) = 0;
  virtual void close(ConnId conn) = 0;
};

// In-process transport. Every message is encoded to bytes and decoded again
// on the other side, exactly as over a socket. Client handlers run on the
// caller's thread inside receive(), lowest connection first.
class LoopbackTransport final : public ServerTransport {
 public:
  using Handler = std::function<std::vector<Message>(const Message&)>;

  // `hello` is what the client sends on connecting (its Register).
  ConnId connect(Handler handler, const Message& hello);

  void send(ConnId conn, const Message& msg) override;
  std::optional<Inbound> receive(Deadline deadline) override;
  void close(ConnId conn) override;

  // Bytes moved in each direction, frame headers included.
  std::size_t bytes_to_clients() const { return bytes_down_; }
  std::size_t bytes_to_server() const { return bytes_up_; }

 private:
  struct Peer {
    Handler handler;
    std::deque<std::vector<std::uint8_t>> inbox;  // server -> client
    bool open = true;
  };
  std::vector<Peer> peers_;
  std::deque<std::pair<ConnId, std::vector<std::uint8_t>>> outbox_;  // client -> server
  std::size_t bytes_down_ = 0;
  std::size_t bytes_up_ = 0;
};

}  // namespace simfl
