#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace emopipe::wire {

inline constexpr std::size_t kLandmarkCount = 68;
inline constexpr std::size_t kLandmarkBodySize = 4 + kLandmarkCount * 2 * 4;  // 548
inline constexpr std::size_t kEmotionBodySize = 4 + 4 + 4 + 1;
inline constexpr std::size_t kHeaderSize = 4;
// Upper bound on a single frame; protects the reader against garbage length prefixes.
inline constexpr std::uint32_t kMaxFrameLength = 64u << 20;

enum class Tag : std::uint8_t {
  Control = 0x01,
  Image = 0x02,
  Landmarks = 0x03,
  Emotion = 0x04,
};

inline constexpr std::string_view kReady = "ready";
inline constexpr std::string_view kDone = "done";

struct Control {
  std::string token;

  static Control ready() { return {std::string(kReady)}; }
  static Control done() { return {std::string(kDone)}; }
  bool is_ready() const { return token == kReady; }
  bool is_done() const { return token == kDone; }

  friend bool operator==(const Control&, const Control&) = default;
};

struct Image {
  std::uint32_t frame_id = 0;
  std::vector<std::uint8_t> bytes;

  friend bool operator==(const Image&, const Image&) = default;
};

struct PointF {
  float x = 0.0f;
  float y = 0.0f;

  friend bool operator==(const PointF&, const PointF&) = default;
};

struct Landmarks {
  std::uint32_t frame_id = 0;
  std::array<PointF, kLandmarkCount> points{};

  friend bool operator==(const Landmarks&, const Landmarks&) = default;
};

struct Emotion {
  std::uint32_t frame_id = 0;
  float prob_happiness = 0.5f;
  float prob_neutral = 0.5f;
  std::uint8_t label_index = 0;

  // Builds a record whose label_index is the argmax of the two probabilities (ties -> 0).
  static Emotion from_probabilities(std::uint32_t frame_id, float happiness, float neutral);

  friend bool operator==(const Emotion&, const Emotion&) = default;
};

using Payload = std::variant<Control, Image, Landmarks, Emotion>;

Tag tag_of(const Payload& payload) noexcept;

// Optional frame id of a data payload; Control frames have none.
std::optional<std::uint32_t> frame_id_of(const Payload& payload) noexcept;

bool is_control(const Payload& payload) noexcept;
bool is_ready(const Payload& payload) noexcept;
bool is_done(const Payload& payload) noexcept;

/// Serializes one payload as a length-prefixed frame: 4-byte big-endian payload
/// length, then the tag byte and the body. Body integers and floats are
/// little-endian.
std::vector<std::uint8_t> encode_frame(const Payload& payload);

/// Parses exactly one complete frame (header included).
///
/// Throws Error(UnknownTag), Error(LengthMismatch) when the declared length does
/// not match the available bytes, and Error(MalformedBody) for bodies that break
/// their type invariants.
Payload decode_frame(std::span<const std::uint8_t> bytes);

// Parses a payload without the 4-byte header (tag byte first).
Payload decode_payload(std::span<const std::uint8_t> payload);

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  static Endpoint parse(std::string_view text);
  std::string to_string() const;

  friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

struct RetryPolicy {
  int attempts = 10;
  std::chrono::milliseconds interval{200};
};

// How a handshake loop ended.
enum class Termination {
  Exhausted,      // our provider ran dry and we sent "done"
  PeerDone,       // the peer sent "done"
  PeerClosed,     // the peer's socket closed without a "done"
  SinkStopped,    // our consumer asked to stop and we sent "done"
};

std::string_view to_string(Termination t) noexcept;

class Connection;
class Listener;

/// Responder side of one link. Binds on construction, accepts the requester
/// lazily, then answers each "ready" with exactly one frame.
class Responder {
 public:
  explicit Responder(const Endpoint& endpoint,
                     std::chrono::milliseconds accept_timeout = std::chrono::seconds(30));
  ~Responder();
  Responder(Responder&&) noexcept;
  Responder& operator=(Responder&&) noexcept;

  const Endpoint& endpoint() const noexcept { return endpoint_; }
  std::uint16_t bound_port() const noexcept;

  // Blocks until the requester has sent its next control frame. Closed means
  // the peer went away without a "done". Throws ProtocolViolation for
  // non-control frames.
  enum class Request { Ready, Done, Closed };
  Request await_request();

  // Answers the outstanding "ready".
  void reply(const Payload& payload);
  void reply_done();

  // Sends "done" if a "ready" is outstanding; a no-op otherwise.
  void shutdown();

 private:
  void ensure_accepted();

  Endpoint endpoint_;
  std::chrono::milliseconds accept_timeout_;
  std::unique_ptr<Listener> listener_;
  std::unique_ptr<Connection> conn_;
  bool pending_ready_ = false;
};

/// Requester side of one link. Connects with bounded retry on construction.
class Requester {
 public:
  explicit Requester(const Endpoint& endpoint, RetryPolicy retry = {});
  ~Requester();
  Requester(Requester&&) noexcept;
  Requester& operator=(Requester&&) noexcept;

  // Sends "ready" and returns the data reply, or nullopt once the responder
  // answered "done" or closed. Throws ProtocolViolation on a control reply
  // other than "done".
  std::optional<Payload> request();

  // Sends "done" in place of the next "ready". Idempotent.
  void finish();

  bool finished() const noexcept { return finished_; }
  bool peer_closed() const noexcept { return peer_closed_; }

 private:
  std::unique_ptr<Connection> conn_;
  bool finished_ = false;
  bool peer_closed_ = false;
};

/// Pulls the next item to serve; nullopt means exhausted.
using Provider = std::function<std::optional<Payload>()>;
/// Consumes one delivered payload; returning false stops the requester.
using Sink = std::function<bool(const Payload&)>;

/// Serves `next_item` on `endpoint` until exhausted or the requester stops.
/// Throws BindFailure and ProtocolViolation.
Termination serve_responder(const Endpoint& endpoint, const Provider& next_item,
                            std::chrono::milliseconds accept_timeout = std::chrono::seconds(30));

/// Requests from `endpoint` and hands each payload to `sink` until "done".
/// Throws ConnectFailure and ProtocolViolation.
Termination run_requester(const Endpoint& endpoint, const Sink& sink, RetryPolicy retry = {});

}  // namespace emopipe::wire
