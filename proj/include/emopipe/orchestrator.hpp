#pragma once

#include <sys/types.h>

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "emopipe/pipeline.hpp"

namespace emopipe::pipeline {

enum class Worker { Input = 0, Model = 1, Controller = 2, View = 3 };
inline constexpr std::array<Worker, 4> kAllWorkers{Worker::Input, Worker::Model, Worker::Controller, Worker::View};

std::string_view to_string(Worker w) noexcept;

struct SourceConfig {
  enum class Kind { Synthetic, Replay, ImageDirectory };
  Kind kind = Kind::Synthetic;
  std::filesystem::path path;  // replay CSV or image directory
  std::uint64_t seed = 0;
  std::size_t count = 100;     // synthetic frames
  double fps = 0.0;            // <= 0: unlimited
};

struct PipelineConfig {
  Endpoints endpoints{};
  LinkOptions links{};
  std::filesystem::path model_path;
  data::Representation representation = data::Representation::Modified;
  SourceConfig source{};
  std::filesystem::path view_output;            // empty: standard output
  std::optional<std::filesystem::path> trace_path;  // controller timing CSV
  const LandmarkExtractor* extractor = nullptr;
  ImageTransform image_transform{};
  // Once any worker fails, survivors get this long to shut down on their own
  // before they are killed.
  std::chrono::milliseconds shutdown_grace{5000};
};

struct ChildExit {
  Worker worker = Worker::Input;
  pid_t pid = -1;
  int exit_code = -1;        // valid when signal == 0
  int signal = 0;
  bool force_killed = false;  // killed by the orchestrator after the grace period
  std::chrono::steady_clock::time_point exited_at{};

  bool clean() const noexcept { return signal == 0 && exit_code == 0; }
};

struct OrchestratorResult {
  std::vector<ChildExit> children;
  int exit_code = 0;

  const ChildExit& child(Worker w) const;
  bool all_clean() const noexcept { return exit_code == 0; }
  // Throws Error(NonzeroChildExit) listing every worker that did not exit 0.
  void throw_if_failed() const;
};

/// Starts the four modules as separate processes and reaps them.
///
/// The model file is loaded and checked against the representation before any
/// process starts, so a bad model fails fast without serving frames.
class Orchestrator {
 public:
  explicit Orchestrator(PipelineConfig config);
  ~Orchestrator();
  Orchestrator(const Orchestrator&) = delete;
  Orchestrator& operator=(const Orchestrator&) = delete;

  /// Throws ChildStartFailure, or the model load error.
  void start();

  pid_t pid(Worker w) const;
  void kill(Worker w, int signal);

  /// Blocks until every worker has exited.
  OrchestratorResult wait();

 private:
  PipelineConfig config_;
  std::optional<nn::AnyModel> model_;
  std::array<pid_t, 4> pids_{-1, -1, -1, -1};
  bool waited_ = false;
};

/// start() + wait().
OrchestratorResult orchestrate(const PipelineConfig& config);

}  // namespace emopipe::pipeline
