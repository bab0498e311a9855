#include "emopipe/orchestrator.hpp"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <thread>

#include <fmt/format.h>

namespace emopipe::pipeline {
namespace {

using Clock = std::chrono::steady_clock;

std::unique_ptr<FrameSource> make_source(const SourceConfig& cfg) {
  std::unique_ptr<FrameSource> src;
  switch (cfg.kind) {
    case SourceConfig::Kind::Synthetic:
      src = std::make_unique<SyntheticStreamSource>(cfg.seed, cfg.count);
      break;
    case SourceConfig::Kind::Replay:
      src = std::make_unique<LandmarkReplaySource>(cfg.path);
      break;
    case SourceConfig::Kind::ImageDirectory:
      src = std::make_unique<ImageDirectorySource>(cfg.path);
      break;
  }
  return std::make_unique<PacedSource>(std::move(src), cfg.fps);
}

int report_exit(Worker w, const RunReport& r) {
  if (!r.ok()) fmt::print(stderr, "[{}] {}\n", to_string(w), r.message);
  if (r.skipped > 0) fmt::print(stderr, "[{}] skipped {} frame(s)\n", to_string(w), r.skipped);
  return r.exit_code;
}

// Body of a forked worker. Never returns to the caller's stack.
[[noreturn]] void run_child(Worker w, const PipelineConfig& cfg, const nn::AnyModel& model) {
  int code = 1;
  try {
    switch (w) {
      case Worker::Input: {
        auto source = make_source(cfg.source);
        code = report_exit(w, input_run(*source, cfg.endpoints.input_to_model, cfg.links));
        break;
      }
      case Worker::Model:
        code = report_exit(w, model_run(cfg.endpoints.input_to_model, cfg.endpoints.model_to_controller,
                                        cfg.image_transform, cfg.links));
        break;
      case Worker::Controller: {
        std::vector<eval::FrameTiming> trace;
        ControllerConfig cc{model, cfg.representation, cfg.extractor, cfg.trace_path ? &trace : nullptr};
        code = report_exit(w, controller_run(cfg.endpoints.model_to_controller, cfg.endpoints.controller_to_view,
                                             cc, cfg.links));
        if (cfg.trace_path) {
          std::ofstream out(*cfg.trace_path);
          eval::write_trace_csv(out, trace);
          if (!out) code = 1;
        }
        break;
      }
      case Worker::View: {
        const auto labels = std::visit([](const auto& m) { return m.class_labels; }, model);
        if (cfg.view_output.empty()) {
          code = report_exit(w, view_run(cfg.endpoints.controller_to_view, std::cout, labels, cfg.links));
        } else {
          std::ofstream out(cfg.view_output, std::ios::trunc);
          if (!out) throw Error(ErrorKind::IoError, fmt::format("cannot write {}", cfg.view_output.string()));
          code = report_exit(w, view_run(cfg.endpoints.controller_to_view, out, labels, cfg.links));
        }
        break;
      }
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "[{}] {}\n", to_string(w), e.what());
    code = 1;
  }
  std::cout.flush();
  std::fflush(nullptr);
  std::_Exit(code);
}

}  // namespace

std::string_view to_string(Worker w) noexcept {
  switch (w) {
    case Worker::Input: return "input";
    case Worker::Model: return "model";
    case Worker::Controller: return "controller";
    case Worker::View: return "view";
  }
  return "unknown";
}

const ChildExit& OrchestratorResult::child(Worker w) const {
  for (const auto& c : children) {
    if (c.worker == w) return c;
  }
  throw Error(ErrorKind::IndexOutOfRange, fmt::format("no {} worker in result", to_string(w)));
}

void OrchestratorResult::throw_if_failed() const {
  std::string failed;
  for (const auto& c : children) {
    if (c.clean()) continue;
    if (!failed.empty()) failed += ", ";
    failed += c.signal != 0 ? fmt::format("{} (signal {})", to_string(c.worker), c.signal)
                            : fmt::format("{} (exit {})", to_string(c.worker), c.exit_code);
  }
  if (!failed.empty()) throw Error(ErrorKind::NonzeroChildExit, failed);
}

Orchestrator::Orchestrator(PipelineConfig config) : config_(std::move(config)) {}

Orchestrator::~Orchestrator() {
  if (waited_) return;
  for (pid_t p : pids_) {
    if (p > 0) ::kill(p, SIGKILL);
  }
  for (pid_t p : pids_) {
    if (p > 0) ::waitpid(p, nullptr, 0);
  }
}

void Orchestrator::start() {
  model_ = nn::read_model_file(config_.model_path);
  check_controller_model(*model_, config_.representation);

  std::cout.flush();
  std::fflush(nullptr);
  // Downstream first; requesters retry, so the order is not load-bearing.
  for (Worker w : {Worker::View, Worker::Controller, Worker::Model, Worker::Input}) {
    const pid_t pid = ::fork();
    if (pid < 0) {
      const int err = errno;
      throw Error(ErrorKind::ChildStartFailure, fmt::format("fork for {}: {}", to_string(w), std::strerror(err)));
    }
    if (pid == 0) run_child(w, config_, *model_);
    pids_[static_cast<std::size_t>(w)] = pid;
  }
}

pid_t Orchestrator::pid(Worker w) const { return pids_[static_cast<std::size_t>(w)]; }

void Orchestrator::kill(Worker w, int signal) {
  const pid_t p = pid(w);
  if (p > 0) ::kill(p, signal);
}

OrchestratorResult Orchestrator::wait() {
  OrchestratorResult result;
  std::array<bool, 4> running{};
  for (std::size_t i = 0; i < 4; ++i) running[i] = pids_[i] > 0;
  std::optional<Clock::time_point> deadline;

  const auto any_running = [&] { return std::find(running.begin(), running.end(), true) != running.end(); };
  while (any_running()) {
    bool reaped = false;
    for (std::size_t i = 0; i < 4; ++i) {
      if (!running[i]) continue;
      int status = 0;
      const pid_t r = ::waitpid(pids_[i], &status, WNOHANG);
      if (r != pids_[i]) continue;
      reaped = true;
      running[i] = false;
      ChildExit c;
      c.worker = static_cast<Worker>(i);
      c.pid = pids_[i];
      c.exited_at = Clock::now();
      if (WIFEXITED(status)) c.exit_code = WEXITSTATUS(status);
      if (WIFSIGNALED(status)) c.signal = WTERMSIG(status);
      if (!c.clean() && !deadline) deadline = Clock::now() + config_.shutdown_grace;
      result.children.push_back(c);
    }
    if (deadline && Clock::now() >= *deadline) {
      for (std::size_t i = 0; i < 4; ++i) {
        if (!running[i]) continue;
        ::kill(pids_[i], SIGKILL);
        int status = 0;
        ::waitpid(pids_[i], &status, 0);
        running[i] = false;
        ChildExit c;
        c.worker = static_cast<Worker>(i);
        c.pid = pids_[i];
        c.signal = SIGKILL;
        c.force_killed = true;
        c.exited_at = Clock::now();
        result.children.push_back(c);
      }
    }
    if (!reaped && any_running()) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  waited_ = true;
  std::sort(result.children.begin(), result.children.end(),
            [](const ChildExit& a, const ChildExit& b) { return a.worker < b.worker; });
  result.exit_code = std::all_of(result.children.begin(), result.children.end(),
                                 [](const ChildExit& c) { return c.clean(); })
                         ? 0
                         : 1;
  return result;
}

OrchestratorResult orchestrate(const PipelineConfig& config) {
  Orchestrator orch(config);
  orch.start();
  return orch.wait();
}

}  // namespace emopipe::pipeline
