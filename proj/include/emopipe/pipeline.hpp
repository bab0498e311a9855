#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emopipe/data.hpp"
#include "emopipe/error.hpp"
#include "emopipe/eval.hpp"
#include "emopipe/features.hpp"
#include "emopipe/nn/model_io.hpp"
#include "emopipe/wire.hpp"

namespace emopipe::pipeline {

inline constexpr std::uint16_t kDefaultPortBase = 7701;

/// The three links of the four-module chain.
struct Endpoints {
  wire::Endpoint input_to_model{"127.0.0.1", kDefaultPortBase};
  wire::Endpoint model_to_controller{"127.0.0.1", kDefaultPortBase + 1};
  wire::Endpoint controller_to_view{"127.0.0.1", kDefaultPortBase + 2};

  static Endpoints from_base(std::uint16_t port_base, const std::string& host = "127.0.0.1");
};

struct LinkOptions {
  std::chrono::milliseconds accept_timeout{30000};
  wire::RetryPolicy retry{};
};

/// Outcome of one worker loop. Errors are reported here rather than thrown so
/// the worker can still propagate "done" on its links.
struct RunReport {
  int exit_code = 0;
  std::optional<ErrorKind> error;
  std::string message;
  std::size_t frames = 0;   // data payloads handed on
  std::size_t skipped = 0;  // frames dropped (NoFace, failed hook)

  bool ok() const noexcept { return exit_code == 0; }
};

// ---------------------------------------------------------------------------
// Sources

/// Produces frames for the input module. Finite sources return nullopt once
/// exhausted and keep returning it.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::optional<wire::Payload> next() = 0;
};

/// Replays a landmark CSV as Landmarks payloads. Reads the whole file up front
/// and throws Error(SourceReadError) if it cannot.
class LandmarkReplaySource final : public FrameSource {
 public:
  explicit LandmarkReplaySource(const std::filesystem::path& csv);
  std::optional<wire::Payload> next() override;
  std::size_t size() const noexcept { return rows_.size(); }

 private:
  std::vector<data::LandmarkRow> rows_;
  std::size_t cursor_ = 0;
};

/// `count` synthetic faces (alternating happiness and neutral) as Landmarks payloads.
class SyntheticStreamSource final : public FrameSource {
 public:
  SyntheticStreamSource(std::uint64_t seed, std::size_t count, double jitter_sigma = 2.0);
  std::optional<wire::Payload> next() override;

 private:
  data::LabeledDataset faces_;
  std::size_t cursor_ = 0;
};

/// Every regular file of a directory, in name order, as Image payloads.
class ImageDirectorySource final : public FrameSource {
 public:
  explicit ImageDirectorySource(const std::filesystem::path& dir);
  std::optional<wire::Payload> next() override;

 private:
  std::vector<std::filesystem::path> files_;
  std::size_t cursor_ = 0;
};

/// Plugin hook for live capture: `capture` returns encoded image bytes, or
/// nullopt to end the stream.
using CaptureHook = std::function<std::optional<std::vector<std::uint8_t>>()>;

class CaptureSource final : public FrameSource {
 public:
  explicit CaptureSource(CaptureHook capture) : capture_(std::move(capture)) {}
  std::optional<wire::Payload> next() override;

 private:
  CaptureHook capture_;
  std::uint32_t next_id_ = 0;
  bool exhausted_ = false;
};

/// Wraps a source and spaces frames `1/fps` apart. fps <= 0 means unlimited.
class PacedSource final : public FrameSource {
 public:
  PacedSource(std::unique_ptr<FrameSource> inner, double fps);
  std::optional<wire::Payload> next() override;

 private:
  std::unique_ptr<FrameSource> inner_;
  std::chrono::nanoseconds period_{0};
  std::optional<std::chrono::steady_clock::time_point> next_due_;
};

// ---------------------------------------------------------------------------
// Hooks

/// Finds the 68 landmarks in an encoded image; nullopt means no face.
class LandmarkExtractor {
 public:
  virtual ~LandmarkExtractor() = default;
  virtual std::optional<LandmarkSet> extract(std::span<const std::uint8_t> image) const = 0;
};

/// Image preprocessing in the model module. nullopt or a throw counts as a skip.
using ImageTransform = std::function<std::optional<std::vector<std::uint8_t>>(std::span<const std::uint8_t>)>;

// ---------------------------------------------------------------------------
// Workers

/// Serves the source's frames until it is exhausted or the model module stops.
RunReport input_run(FrameSource& source, const wire::Endpoint& endpoint, const LinkOptions& links = {});

/// Relays frames from input to controller, applying `transform` to Image payloads.
RunReport model_run(const wire::Endpoint& upstream, const wire::Endpoint& downstream,
                    const ImageTransform& transform = {}, const LinkOptions& links = {});

struct ControllerConfig {
  nn::AnyModel model;
  data::Representation representation = data::Representation::Modified;
  const LandmarkExtractor* extractor = nullptr;
  // Per-frame ingress/egress timestamps are appended here when set.
  std::vector<eval::FrameTiming>* trace = nullptr;
};

/// Throws DimensionMismatch when the model cannot take the representation or
/// does not have exactly two outputs.
void check_controller_model(const nn::AnyModel& model, data::Representation rep);

/// Classifies one landmark frame.
wire::Emotion classify(const nn::AnyModel& model, data::Representation rep, const LandmarkSet& landmarks,
                       std::uint32_t frame_id);

RunReport controller_run(const wire::Endpoint& upstream, const wire::Endpoint& downstream,
                         const ControllerConfig& config, const LinkOptions& links = {});

/// `<frame_id>\t<label>\t<p_happiness>\t<p_neutral>` with four decimals, LF-terminated.
std::string format_view_line(const wire::Emotion& emotion, const std::vector<std::string>& labels);

RunReport view_run(const wire::Endpoint& upstream, std::ostream& out,
                   const std::vector<std::string>& labels = nn::default_class_labels(),
                   const LinkOptions& links = {});

LandmarkSet to_landmark_set(const wire::Landmarks& payload);
wire::Landmarks to_payload(const LandmarkSet& landmarks, std::uint32_t frame_id);

}  // namespace emopipe::pipeline
