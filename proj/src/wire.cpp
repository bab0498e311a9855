#include "emopipe/wire.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include <fmt/format.h>

#include "emopipe/error.hpp"
#include "emopipe/socket.hpp"

namespace emopipe::wire {
namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

void put_f32_le(std::vector<std::uint8_t>& out, float f) {
  put_u32_le(out, std::bit_cast<std::uint32_t>(f));
}

std::uint32_t get_u32_le(std::span<const std::uint8_t> in, std::size_t at) {
  return static_cast<std::uint32_t>(in[at]) | (static_cast<std::uint32_t>(in[at + 1]) << 8) |
         (static_cast<std::uint32_t>(in[at + 2]) << 16) |
         (static_cast<std::uint32_t>(in[at + 3]) << 24);
}

float get_f32_le(std::span<const std::uint8_t> in, std::size_t at) {
  return std::bit_cast<float>(get_u32_le(in, at));
}

[[noreturn]] void malformed(const std::string& why) { throw Error(ErrorKind::MalformedBody, why); }

void check_emotion(const Emotion& e) {
  const auto in_unit = [](float p) { return std::isfinite(p) && p >= 0.0f && p <= 1.0f; };
  if (!in_unit(e.prob_happiness) || !in_unit(e.prob_neutral)) {
    malformed("emotion probabilities outside [0,1]");
  }
  if (std::abs(static_cast<double>(e.prob_happiness) + e.prob_neutral - 1.0) > 1e-5) {
    malformed("emotion probabilities do not sum to 1");
  }
  const std::uint8_t argmax = e.prob_neutral > e.prob_happiness ? 1 : 0;
  if (e.label_index != argmax) malformed("emotion label_index is not the argmax");
}

void encode_body(std::vector<std::uint8_t>& out, const Control& c) {
  out.insert(out.end(), c.token.begin(), c.token.end());
}

void encode_body(std::vector<std::uint8_t>& out, const Image& img) {
  put_u32_le(out, img.frame_id);
  out.insert(out.end(), img.bytes.begin(), img.bytes.end());
}

void encode_body(std::vector<std::uint8_t>& out, const Landmarks& lm) {
  put_u32_le(out, lm.frame_id);
  for (const auto& p : lm.points) {
    put_f32_le(out, p.x);
    put_f32_le(out, p.y);
  }
}

void encode_body(std::vector<std::uint8_t>& out, const Emotion& e) {
  put_u32_le(out, e.frame_id);
  put_f32_le(out, e.prob_happiness);
  put_f32_le(out, e.prob_neutral);
  out.push_back(e.label_index);
}

}  // namespace

Emotion Emotion::from_probabilities(std::uint32_t frame_id, float happiness, float neutral) {
  return Emotion{frame_id, happiness, neutral, static_cast<std::uint8_t>(neutral > happiness ? 1 : 0)};
}

Tag tag_of(const Payload& payload) noexcept {
  return std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Control>) return Tag::Control;
        else if constexpr (std::is_same_v<T, Image>) return Tag::Image;
        else if constexpr (std::is_same_v<T, Landmarks>) return Tag::Landmarks;
        else return Tag::Emotion;
      },
      payload);
}

std::optional<std::uint32_t> frame_id_of(const Payload& payload) noexcept {
  return std::visit(
      [](const auto& p) -> std::optional<std::uint32_t> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Control>) return std::nullopt;
        else return p.frame_id;
      },
      payload);
}

bool is_control(const Payload& payload) noexcept { return std::holds_alternative<Control>(payload); }

bool is_ready(const Payload& payload) noexcept {
  const auto* c = std::get_if<Control>(&payload);
  return c != nullptr && c->is_ready();
}

bool is_done(const Payload& payload) noexcept {
  const auto* c = std::get_if<Control>(&payload);
  return c != nullptr && c->is_done();
}

std::vector<std::uint8_t> encode_frame(const Payload& payload) {
  std::vector<std::uint8_t> body;
  body.push_back(static_cast<std::uint8_t>(tag_of(payload)));
  std::visit([&](const auto& p) { encode_body(body, p); }, payload);

  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + body.size());
  put_u32_be(out, static_cast<std::uint32_t>(body.size()));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

Payload decode_payload(std::span<const std::uint8_t> payload) {
  if (payload.empty()) throw Error(ErrorKind::LengthMismatch, "frame has no tag byte");
  const auto body = payload.subspan(1);
  switch (payload[0]) {
    case static_cast<std::uint8_t>(Tag::Control): {
      Control c{std::string(body.begin(), body.end())};
      if (!c.is_ready() && !c.is_done()) malformed(fmt::format("unknown control token '{}'", c.token));
      return c;
    }
    case static_cast<std::uint8_t>(Tag::Image): {
      if (body.size() < 4) malformed("image body shorter than frame id");
      return Image{get_u32_le(body, 0), std::vector<std::uint8_t>(body.begin() + 4, body.end())};
    }
    case static_cast<std::uint8_t>(Tag::Landmarks): {
      if (body.size() != kLandmarkBodySize) {
        malformed(fmt::format("landmarks body is {} bytes, expected {}", body.size(), kLandmarkBodySize));
      }
      Landmarks lm;
      lm.frame_id = get_u32_le(body, 0);
      for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        lm.points[i].x = get_f32_le(body, 4 + i * 8);
        lm.points[i].y = get_f32_le(body, 8 + i * 8);
      }
      return lm;
    }
    case static_cast<std::uint8_t>(Tag::Emotion): {
      if (body.size() != kEmotionBodySize) {
        malformed(fmt::format("emotion body is {} bytes, expected {}", body.size(), kEmotionBodySize));
      }
      Emotion e{get_u32_le(body, 0), get_f32_le(body, 4), get_f32_le(body, 8), body[12]};
      check_emotion(e);
      return e;
    }
    default:
      throw Error(ErrorKind::UnknownTag, fmt::format("tag 0x{:02x}", payload[0]));
  }
}

Payload decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) {
    throw Error(ErrorKind::LengthMismatch, "frame shorter than its length prefix");
  }
  const std::uint32_t declared = (static_cast<std::uint32_t>(bytes[0]) << 24) |
                                 (static_cast<std::uint32_t>(bytes[1]) << 16) |
                                 (static_cast<std::uint32_t>(bytes[2]) << 8) |
                                 static_cast<std::uint32_t>(bytes[3]);
  if (declared != bytes.size() - kHeaderSize) {
    throw Error(ErrorKind::LengthMismatch,
                fmt::format("declared {} bytes, have {}", declared, bytes.size() - kHeaderSize));
  }
  return decode_payload(bytes.subspan(kHeaderSize));
}

Endpoint Endpoint::parse(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon + 1 == text.size()) {
    throw Error(ErrorKind::ParseError, fmt::format("endpoint '{}' is not host:port", text));
  }
  Endpoint ep;
  ep.host = std::string(text.substr(0, colon));
  if (ep.host.empty()) ep.host = "127.0.0.1";
  unsigned long port = 0;
  try {
    std::size_t used = 0;
    port = std::stoul(std::string(text.substr(colon + 1)), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw Error(ErrorKind::ParseError, fmt::format("endpoint '{}' has a bad port", text));
  }
  if (port > 65535) throw Error(ErrorKind::ParseError, fmt::format("port {} out of range", port));
  ep.port = static_cast<std::uint16_t>(port);
  return ep;
}

std::string Endpoint::to_string() const { return fmt::format("{}:{}", host, port); }

std::string_view to_string(Termination t) noexcept {
  switch (t) {
    case Termination::Exhausted: return "exhausted";
    case Termination::PeerDone: return "peer-done";
    case Termination::PeerClosed: return "peer-closed";
    case Termination::SinkStopped: return "sink-stopped";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Responder

Responder::Responder(const Endpoint& endpoint, std::chrono::milliseconds accept_timeout)
    : endpoint_(endpoint),
      accept_timeout_(accept_timeout),
      listener_(std::make_unique<Listener>(endpoint)) {}

Responder::~Responder() = default;
Responder::Responder(Responder&&) noexcept = default;
Responder& Responder::operator=(Responder&&) noexcept = default;

std::uint16_t Responder::bound_port() const noexcept { return listener_ ? listener_->port() : 0; }

void Responder::ensure_accepted() {
  if (!conn_) {
    conn_ = std::make_unique<Connection>(listener_->accept(accept_timeout_));
    listener_.reset();
  }
}

Responder::Request Responder::await_request() {
  ensure_accepted();
  if (pending_ready_) throw Error(ErrorKind::ProtocolViolation, "previous request not answered");
  auto frame = conn_->receive_frame();
  if (!frame) return Request::Closed;
  if (is_ready(*frame)) {
    pending_ready_ = true;
    return Request::Ready;
  }
  if (is_done(*frame)) return Request::Done;
  throw Error(ErrorKind::ProtocolViolation,
              fmt::format("expected a control request, got tag 0x{:02x}",
                          static_cast<unsigned>(tag_of(*frame))));
}

void Responder::reply(const Payload& payload) {
  if (!pending_ready_) throw Error(ErrorKind::ProtocolViolation, "reply without a pending request");
  pending_ready_ = false;
  conn_->send_frame(payload);
}

void Responder::reply_done() { reply(Control::done()); }

void Responder::shutdown() {
  if (pending_ready_) reply_done();
}

// ---------------------------------------------------------------------------
// Requester

Requester::Requester(const Endpoint& endpoint, RetryPolicy retry)
    : conn_(std::make_unique<Connection>(Connection::connect(endpoint, retry))) {}

Requester::~Requester() = default;
Requester::Requester(Requester&&) noexcept = default;
Requester& Requester::operator=(Requester&&) noexcept = default;

std::optional<Payload> Requester::request() {
  if (finished_ || peer_closed_) return std::nullopt;
  if (!conn_->send_frame(Control::ready())) {
    peer_closed_ = true;
    return std::nullopt;
  }
  auto reply = conn_->receive_frame();
  if (!reply) {
    peer_closed_ = true;
    return std::nullopt;
  }
  if (is_done(*reply)) {
    finished_ = true;
    return std::nullopt;
  }
  if (is_control(*reply)) throw Error(ErrorKind::ProtocolViolation, "responder replied 'ready'");
  return reply;
}

void Requester::finish() {
  if (finished_ || peer_closed_) return;
  finished_ = true;
  conn_->send_frame(Control::done());
}

// ---------------------------------------------------------------------------

Termination serve_responder(const Endpoint& endpoint, const Provider& next_item,
                            std::chrono::milliseconds accept_timeout) {
  Responder responder(endpoint, accept_timeout);
  for (;;) {
    switch (responder.await_request()) {
      case Responder::Request::Done: return Termination::PeerDone;
      case Responder::Request::Closed: return Termination::PeerClosed;
      case Responder::Request::Ready: break;
    }
    auto item = next_item();
    if (!item) {
      responder.reply_done();
      return Termination::Exhausted;
    }
    responder.reply(*item);
  }
}

Termination run_requester(const Endpoint& endpoint, const Sink& sink, RetryPolicy retry) {
  Requester requester(endpoint, retry);
  for (;;) {
    auto item = requester.request();
    if (!item) return requester.peer_closed() ? Termination::PeerClosed : Termination::PeerDone;
    if (!sink(*item)) {
      requester.finish();
      return Termination::SinkStopped;
    }
  }
}

}  // namespace emopipe::wire
