#include "emopipe/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <ostream>
#include <thread>

#include <fmt/format.h>

namespace emopipe::pipeline {
namespace {

using Clock = std::chrono::steady_clock;

std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now().time_since_epoch()).count();
}

RunReport failure(const Error& e, RunReport report) {
  report.exit_code = 1;
  report.error = e.kind();
  report.message = e.what();
  return report;
}

RunReport failure(const std::exception& e, RunReport report) {
  report.exit_code = 1;
  report.message = e.what();
  return report;
}

// Shared loop of the two middle modules: answer each downstream "ready" with
// the first upstream frame that `relay` turns into a payload. `relay` returns
// nullopt to skip a frame. `sent` runs right after each reply leaves.
template <typename Relay, typename Sent>
RunReport relay_loop(const wire::Endpoint& upstream, const wire::Endpoint& downstream, const LinkOptions& links,
                     Relay&& relay, Sent&& sent) {
  RunReport report;
  std::optional<wire::Responder> down;
  std::optional<wire::Requester> up;
  try {
    // Bind first so the downstream module can connect while we reach upstream.
    down.emplace(downstream, links.accept_timeout);
    up.emplace(upstream, links.retry);
    for (;;) {
      if (down->await_request() != wire::Responder::Request::Ready) {
        up->finish();
        return report;
      }
      for (;;) {
        auto item = up->request();
        if (!item) {
          down->reply_done();
          return report;
        }
        auto out = relay(*item, report);
        if (out) {
          down->reply(*out);
          sent(*out);
          ++report.frames;
          break;
        }
        ++report.skipped;
      }
    }
  } catch (const Error& e) {
    report = failure(e, report);
  } catch (const std::exception& e) {
    report = failure(e, report);
  }
  // Best effort: tell both neighbours we are gone.
  try {
    if (up) up->finish();
    if (down) down->shutdown();
  } catch (const std::exception&) {
  }
  return report;
}

}  // namespace

Endpoints Endpoints::from_base(std::uint16_t port_base, const std::string& host) {
  return {{host, port_base},
          {host, static_cast<std::uint16_t>(port_base + 1)},
          {host, static_cast<std::uint16_t>(port_base + 2)}};
}

LandmarkSet to_landmark_set(const wire::Landmarks& payload) {
  LandmarkSet lm;
  for (std::size_t i = 0; i < kNumLandmarks; ++i) {
    lm.points[i] = {static_cast<double>(payload.points[i].x), static_cast<double>(payload.points[i].y)};
  }
  return lm;
}

wire::Landmarks to_payload(const LandmarkSet& landmarks, std::uint32_t frame_id) {
  wire::Landmarks out;
  out.frame_id = frame_id;
  for (std::size_t i = 0; i < kNumLandmarks; ++i) {
    out.points[i] = {static_cast<float>(landmarks.points[i].x), static_cast<float>(landmarks.points[i].y)};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sources

LandmarkReplaySource::LandmarkReplaySource(const std::filesystem::path& csv) {
  try {
    rows_ = data::read_landmark_csv(csv);
  } catch (const Error& e) {
    throw Error(ErrorKind::SourceReadError, fmt::format("{}: {}", csv.string(), e.what()));
  }
}

std::optional<wire::Payload> LandmarkReplaySource::next() {
  if (cursor_ >= rows_.size()) return std::nullopt;
  const auto id = static_cast<std::uint32_t>(cursor_);
  return to_payload(rows_[cursor_++].landmarks, id);
}

SyntheticStreamSource::SyntheticStreamSource(std::uint64_t seed, std::size_t count, double jitter_sigma)
    : faces_(data::synth_generate((count + 1) / 2, seed, jitter_sigma)) {
  faces_.records.resize(count);
}

std::optional<wire::Payload> SyntheticStreamSource::next() {
  if (cursor_ >= faces_.records.size()) return std::nullopt;
  const auto id = static_cast<std::uint32_t>(cursor_);
  return to_payload(faces_.records[cursor_++].landmarks, id);
}

ImageDirectorySource::ImageDirectorySource(const std::filesystem::path& dir) {
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.is_regular_file()) files_.push_back(entry.path());
  }
  if (ec) throw Error(ErrorKind::SourceReadError, fmt::format("{}: {}", dir.string(), ec.message()));
  std::sort(files_.begin(), files_.end());
}

std::optional<wire::Payload> ImageDirectorySource::next() {
  if (cursor_ >= files_.size()) return std::nullopt;
  std::ifstream in(files_[cursor_], std::ios::binary);
  if (!in) throw Error(ErrorKind::SourceReadError, fmt::format("cannot read {}", files_[cursor_].string()));
  wire::Image img;
  img.frame_id = static_cast<std::uint32_t>(cursor_++);
  img.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return img;
}

std::optional<wire::Payload> CaptureSource::next() {
  if (exhausted_) return std::nullopt;
  auto bytes = capture_();
  if (!bytes) {
    exhausted_ = true;
    return std::nullopt;
  }
  return wire::Image{next_id_++, std::move(*bytes)};
}

PacedSource::PacedSource(std::unique_ptr<FrameSource> inner, double fps) : inner_(std::move(inner)) {
  if (fps > 0.0) {
    period_ = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::duration<double>(1.0 / fps));
  }
}

std::optional<wire::Payload> PacedSource::next() {
  if (period_.count() > 0) {
    const auto now = Clock::now();
    if (next_due_ && *next_due_ > now) std::this_thread::sleep_until(*next_due_);
    next_due_ = std::max(now, next_due_.value_or(now)) + period_;
  }
  return inner_->next();
}

// ---------------------------------------------------------------------------
// Workers

RunReport input_run(FrameSource& source, const wire::Endpoint& endpoint, const LinkOptions& links) {
  RunReport report;
  std::optional<wire::Responder> down;
  try {
    down.emplace(endpoint, links.accept_timeout);
    for (;;) {
      if (down->await_request() != wire::Responder::Request::Ready) return report;
      auto item = source.next();
      if (!item) {
        down->reply_done();
        return report;
      }
      down->reply(*item);
      ++report.frames;
    }
  } catch (const Error& e) {
    report = failure(e, report);
  } catch (const std::exception& e) {
    report = failure(e, report);
  }
  try {
    if (down) down->shutdown();
  } catch (const std::exception&) {
  }
  return report;
}

RunReport model_run(const wire::Endpoint& upstream, const wire::Endpoint& downstream,
                    const ImageTransform& transform, const LinkOptions& links) {
  return relay_loop(upstream, downstream, links,
                    [&](const wire::Payload& item, RunReport&) -> std::optional<wire::Payload> {
                      if (std::holds_alternative<wire::Landmarks>(item)) return item;
                      if (const auto* img = std::get_if<wire::Image>(&item)) {
                        if (!transform) return item;
                        try {
                          auto bytes = transform(img->bytes);
                          if (!bytes) return std::nullopt;
                          return wire::Image{img->frame_id, std::move(*bytes)};
                        } catch (const std::exception& e) {
                          fmt::print(stderr, "[model] frame {} skipped: {}\n", img->frame_id, e.what());
                          return std::nullopt;
                        }
                      }
                      throw Error(ErrorKind::ProtocolViolation, "model module expects Image or Landmarks frames");
                    },
                    [](const wire::Payload&) {});
}

void check_controller_model(const nn::AnyModel& model, data::Representation rep) {
  if (const auto* mlp = std::get_if<nn::MlpModel>(&model)) {
    if (rep == data::Representation::Raster) {
      throw Error(ErrorKind::DimensionMismatch, "an MLP model cannot take the raster representation");
    }
    const auto kind = rep == data::Representation::Absolute ? FeatureKind::Absolute : FeatureKind::Modified;
    if (mlp->input_dim() != feature_count(kind)) {
      throw Error(ErrorKind::DimensionMismatch,
                  fmt::format("model takes {} inputs, the {} representation has {}", mlp->input_dim(),
                              data::to_string(rep), feature_count(kind)));
    }
    if (mlp->output_dim() != 2) throw Error(ErrorKind::DimensionMismatch, "emotion frames carry exactly two classes");
  } else {
    const auto& cnn = std::get<nn::CnnModel>(model);
    if (rep != data::Representation::Raster) {
      throw Error(ErrorKind::DimensionMismatch, "a CNN model needs the raster representation");
    }
    if (cnn.dense.out_dim != 2) throw Error(ErrorKind::DimensionMismatch, "emotion frames carry exactly two classes");
  }
}

wire::Emotion classify(const nn::AnyModel& model, data::Representation rep, const LandmarkSet& landmarks,
                       std::uint32_t frame_id) {
  std::vector<float> probs;
  if (const auto* mlp = std::get_if<nn::MlpModel>(&model)) {
    const auto kind = rep == data::Representation::Absolute ? FeatureKind::Absolute : FeatureKind::Modified;
    const auto x = nn::cast_vector<float, double>(extract_features(landmarks, kind).values);
    probs = nn::mlp_forward<float>(*mlp, x);
  } else {
    const auto& cnn = std::get<nn::CnnModel>(model);
    probs = nn::cnn_forward<float>(cnn, rasterize(landmarks, cnn.grid_size));
  }
  return wire::Emotion::from_probabilities(frame_id, probs[0], probs[1]);
}

RunReport controller_run(const wire::Endpoint& upstream, const wire::Endpoint& downstream,
                         const ControllerConfig& config, const LinkOptions& links) {
  try {
    check_controller_model(config.model, config.representation);
  } catch (const Error& e) {
    return failure(e, {});
  }
  std::optional<std::int64_t> ingress;
  auto classify_frame = [&](const wire::Payload& item, RunReport&) -> std::optional<wire::Payload> {
    ingress = now_ns();
    if (const auto* lm = std::get_if<wire::Landmarks>(&item)) {
      return classify(config.model, config.representation, to_landmark_set(*lm), lm->frame_id);
    }
    if (const auto* img = std::get_if<wire::Image>(&item)) {
      if (config.extractor == nullptr) {
        throw Error(ErrorKind::NoExtractorConfigured, fmt::format("image frame {} needs an extractor", img->frame_id));
      }
      const auto landmarks = config.extractor->extract(img->bytes);
      if (!landmarks) return std::nullopt;
      return classify(config.model, config.representation, *landmarks, img->frame_id);
    }
    throw Error(ErrorKind::ProtocolViolation, "controller expects Image or Landmarks frames");
  };

  return relay_loop(upstream, downstream, links, classify_frame, [&](const wire::Payload& out) {
    if (config.trace != nullptr) config.trace->push_back({*wire::frame_id_of(out), *ingress, now_ns()});
  });
}

std::string format_view_line(const wire::Emotion& emotion, const std::vector<std::string>& labels) {
  const std::string label = emotion.label_index < labels.size() ? labels[emotion.label_index]
                                                               : std::to_string(emotion.label_index);
  return fmt::format("{}\t{}\t{:.4f}\t{:.4f}\n", emotion.frame_id, label, emotion.prob_happiness,
                     emotion.prob_neutral);
}

RunReport view_run(const wire::Endpoint& upstream, std::ostream& out, const std::vector<std::string>& labels,
                   const LinkOptions& links) {
  RunReport report;
  std::optional<wire::Requester> up;
  try {
    up.emplace(upstream, links.retry);
    while (auto item = up->request()) {
      const auto* emotion = std::get_if<wire::Emotion>(&*item);
      if (emotion == nullptr) throw Error(ErrorKind::ProtocolViolation, "view expects Emotion frames");
      out << format_view_line(*emotion, labels) << std::flush;
      ++report.frames;
    }
    return report;
  } catch (const Error& e) {
    report = failure(e, report);
  } catch (const std::exception& e) {
    report = failure(e, report);
  }
  try {
    if (up) up->finish();
  } catch (const std::exception&) {
  }
  return report;
}

}  // namespace emopipe::pipeline
