#include "simfl/transport.hpp"

#include <bit>
#include <cstring>
#include <string>
#include <type_traits>

#include "simfl/errors.hpp"

namespace simfl {

namespace {

static_assert(std::endian::native == std::endian::little,
              "wire encoding assumes a little-endian host");

class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void put_floats(std::span<const float> values) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
    out_.insert(out_.end(), p, p + values.size_bytes());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + at_, sizeof(T));
    at_ += sizeof(T);
    return v;
  }
  std::vector<float> get_floats(std::size_t n) {
    need(n * sizeof(float));
    std::vector<float> v(n);
    std::memcpy(v.data(), in_.data() + at_, n * sizeof(float));
    at_ += n * sizeof(float);
    return v;
  }
  std::size_t remaining() const { return in_.size() - at_; }
  void finish(const char* what) const {
    if (remaining() != 0) throw ProtocolError(std::string(what) + " payload has trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw ProtocolError("payload truncated");
  }
  std::span<const std::uint8_t> in_;
  std::size_t at_ = 0;
};

bool known_type(std::uint8_t t) { return t >= 1 && t <= 7; }

std::uint32_t read_le32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

// Validates a frame header; returns the payload size.
std::size_t check_header(std::uint32_t length, std::uint8_t type) {
  if (length == 0) throw ProtocolError("frame length 0 has no type byte");
  if (length - 1 > kMaxPayload) throw ProtocolError("frame payload exceeds 64 MiB");
  if (!known_type(type)) throw ProtocolError("unknown message type " + std::to_string(type));
  return length - 1;
}

UpdateType update_type_from_tag(std::uint8_t tag) {
  if (tag > 3) throw ProtocolError("unknown update type tag " + std::to_string(tag));
  return static_cast<UpdateType>(tag);
}

struct Encoder {
  Writer w;

  void operator()(const RegisterMsg& m) {
    w.put(m.client_id);
    w.put(m.num_samples);
    w.put(m.protocol_version);
  }
  void operator()(const RegisterAckMsg& m) {
    w.put(m.protocol_version);
    w.put(static_cast<std::uint8_t>(m.status));
    w.put(m.epochs);
    w.put(m.batch_size);
    w.put(m.learning_rate);
    w.put(m.seed);
    w.put(static_cast<std::uint8_t>(m.update_type));
  }
  void operator()(const GlobalModelMsg& m) {
    if (m.params.size() != kParamCount) throw ProtocolError("global model has wrong size");
    w.put(m.round);
    w.put_floats(m.params);
  }
  void operator()(const DirectiveMsg& m) {
    w.put(m.round);
    for (const auto& e : m.entries) {
      w.put(e.client_id);
      w.put(e.active);
      w.put(e.cluster);
    }
  }
  void operator()(const LocalUpdateMsg& m) {
    if (m.theta.size() != kParamCount) throw ProtocolError("local model has wrong size");
    if (m.update.size() != update_length(m.update_type))
      throw ProtocolError("update vector length does not match its type");
    w.put(m.client_id);
    w.put(m.num_samples);
    w.put_floats(m.theta);
    w.put(static_cast<std::uint8_t>(m.update_type));
    w.put_floats(m.update);
  }
  void operator()(const MetricsAckMsg& m) {
    w.put(m.client_id);
    w.put(m.round);
    w.put(m.correct);
    w.put(m.total);
  }
  void operator()(const ShutdownMsg&) {}
};

template <typename T>
constexpr MsgType type_of() {
  if constexpr (std::is_same_v<T, RegisterMsg>) return MsgType::Register;
  else if constexpr (std::is_same_v<T, RegisterAckMsg>) return MsgType::RegisterAck;
  else if constexpr (std::is_same_v<T, GlobalModelMsg>) return MsgType::GlobalModel;
  else if constexpr (std::is_same_v<T, DirectiveMsg>) return MsgType::Directive;
  else if constexpr (std::is_same_v<T, LocalUpdateMsg>) return MsgType::LocalUpdate;
  else if constexpr (std::is_same_v<T, MetricsAckMsg>) return MsgType::MetricsAck;
  else return MsgType::Shutdown;
}

}  // namespace

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
  if (frame.payload.size() > kMaxPayload) throw ProtocolError("frame payload exceeds 64 MiB");
  if (!known_type(static_cast<std::uint8_t>(frame.type)))
    throw ProtocolError("unknown message type");
  const auto length = static_cast<std::uint32_t>(frame.payload.size() + 1);
  std::vector<std::uint8_t> out;
  out.reserve(frame.payload.size() + 5);
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(length >> s));
  out.push_back(static_cast<std::uint8_t>(frame.type));
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 5) throw ProtocolError("frame shorter than its header");
  const std::size_t payload = check_header(read_le32(bytes.data()), bytes[4]);
  if (bytes.size() - 5 != payload) throw ProtocolError("frame length mismatch");
  return Frame{static_cast<MsgType>(bytes[4]), {bytes.begin() + 5, bytes.end()}};
}

void FrameDecoder::feed(std::span<const std::uint8_t> bytes) {
  if (offset_ > 0 && offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<Frame> FrameDecoder::next() {
  if (buffered() < 5) return std::nullopt;
  const std::uint8_t* head = buffer_.data() + offset_;
  const std::size_t payload = check_header(read_le32(head), head[4]);
  if (buffered() < 5 + payload) return std::nullopt;
  Frame f{static_cast<MsgType>(head[4]), {head + 5, head + 5 + payload}};
  offset_ += 5 + payload;
  // Compact once the consumed prefix dominates the buffer.
  if (offset_ > (1u << 20) && offset_ * 2 > buffer_.size()) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(offset_));
    offset_ = 0;
  }
  return f;
}

Frame to_frame(const Message& msg) {
  Encoder enc;
  std::visit(enc, msg);
  const MsgType type =
      std::visit([](const auto& m) { return type_of<std::decay_t<decltype(m)>>(); }, msg);
  return Frame{type, enc.w.take()};
}

Message from_frame(const Frame& frame) {
  Reader r(frame.payload);
  switch (frame.type) {
    case MsgType::Register: {
      RegisterMsg m;
      m.client_id = r.get<std::uint16_t>();
      m.num_samples = r.get<std::uint32_t>();
      m.protocol_version = r.get<std::uint8_t>();
      r.finish("Register");
      return m;
    }
    case MsgType::RegisterAck: {
      RegisterAckMsg m;
      m.protocol_version = r.get<std::uint8_t>();
      const auto status = r.get<std::uint8_t>();
      if (status > 2) throw ProtocolError("unknown registration status");
      m.status = static_cast<RegisterStatus>(status);
      m.epochs = r.get<std::uint32_t>();
      m.batch_size = r.get<std::uint32_t>();
      m.learning_rate = r.get<double>();
      m.seed = r.get<std::uint64_t>();
      m.update_type = update_type_from_tag(r.get<std::uint8_t>());
      r.finish("RegisterAck");
      return m;
    }
    case MsgType::GlobalModel: {
      GlobalModelMsg m;
      m.round = r.get<std::uint32_t>();
      m.params = r.get_floats(kParamCount);
      r.finish("GlobalModel");
      return m;
    }
    case MsgType::Directive: {
      DirectiveMsg m;
      m.round = r.get<std::uint32_t>();
      if (r.remaining() % 4 != 0) throw ProtocolError("Directive entries are 4 bytes each");
      while (r.remaining() > 0) {
        DirectiveEntryWire e;
        e.client_id = r.get<std::uint16_t>();
        e.active = r.get<std::uint8_t>();
        e.cluster = r.get<std::uint8_t>();
        m.entries.push_back(e);
      }
      return m;
    }
    case MsgType::LocalUpdate: {
      LocalUpdateMsg m;
      m.client_id = r.get<std::uint16_t>();
      m.num_samples = r.get<std::uint32_t>();
      m.theta = r.get_floats(kParamCount);
      m.update_type = update_type_from_tag(r.get<std::uint8_t>());
      m.update = r.get_floats(update_length(m.update_type));
      r.finish("LocalUpdate");
      return m;
    }
    case MsgType::MetricsAck: {
      MetricsAckMsg m;
      m.client_id = r.get<std::uint16_t>();
      m.round = r.get<std::uint32_t>();
      m.correct = r.get<std::uint32_t>();
      m.total = r.get<std::uint32_t>();
      r.finish("MetricsAck");
      return m;
    }
    case MsgType::Shutdown:
      r.finish("Shutdown");
      return ShutdownMsg{};
  }
  throw ProtocolError("unknown message type");
}

std::vector<std::uint8_t> encode_message(const Message& msg) {
  return encode_frame(to_frame(msg));
}

ConnId LoopbackTransport::connect(Handler handler, const Message& hello) {
  const ConnId id = peers_.size();
  peers_.push_back(Peer{std::move(handler), {}, true});
  auto bytes = encode_message(hello);
  bytes_up_ += bytes.size();
  outbox_.emplace_back(id, std::move(bytes));
  return id;
}

void LoopbackTransport::send(ConnId conn, const Message& msg) {
  Peer& peer = peers_.at(conn);
  if (!peer.open) return;
  auto bytes = encode_message(msg);
  bytes_down_ += bytes.size();
  peer.inbox.push_back(std::move(bytes));
}

std::optional<Inbound> LoopbackTransport::receive(Deadline) {
  while (outbox_.empty()) {
    bool ran = false;
    for (ConnId id = 0; id < peers_.size() && !ran; ++id) {
      Peer& peer = peers_[id];
      if (peer.inbox.empty()) continue;
      const auto bytes = std::move(peer.inbox.front());
      peer.inbox.pop_front();
      for (const Message& reply : peer.handler(from_frame(decode_frame(bytes)))) {
        auto out = encode_message(reply);
        bytes_up_ += out.size();
        outbox_.emplace_back(id, std::move(out));
      }
      ran = true;
    }
    // Nothing pending anywhere: in-process, waiting longer cannot help.
    if (!ran) return std::nullopt;
  }
  auto [conn, bytes] = std::move(outbox_.front());
  outbox_.pop_front();
  return Inbound{conn, from_frame(decode_frame(bytes))};
}

void LoopbackTransport::close(ConnId conn) {
  // Frames sent before closing still reach the peer, as on a socket.
  peers_.at(conn).open = false;
}

}  // namespace simfl
