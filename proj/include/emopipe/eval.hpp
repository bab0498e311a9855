#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "emopipe/data.hpp"
#include "emopipe/nn/model_io.hpp"

namespace emopipe::eval {

struct ClassMetrics {
  std::string label;
  std::size_t images_tested = 0;
  std::size_t correct = 0;
  double certainty_sum = 0.0;  // sum of probabilities given to the true class
  double certainty_pct = 0.0;
  double accuracy_pct = 0.0;
};

/// Per class and pooled over every record. Argmax ties go to class 0.
struct MetricsReport {
  std::vector<ClassMetrics> per_class;
  ClassMetrics total;
};

/// Scores already-computed probability rows against true class indices.
/// Throws EmptyDataset and DimensionMismatch.
MetricsReport evaluate_predictions(std::span<const std::vector<float>> probs,
                                   std::span<const std::size_t> labels,
                                   const std::vector<std::string>& class_labels);

/// Runs inference on every record of `val` and scores it. The representation
/// must match the model: absolute (136 inputs) or modified (114) for an MLP,
/// raster for a CNN. Throws EmptyDataset and DimensionMismatch.
MetricsReport evaluate(const nn::AnyModel& model, const data::LabeledDataset& val,
                       data::Representation rep);

/// Human-readable table.
void write_report_table(std::ostream& out, const MetricsReport& report);

/// `class,images_tested,certainty_pct,accuracy_pct` rows plus a `total` row.
void write_report_csv(std::ostream& out, const MetricsReport& report);

// ---------------------------------------------------------------------------
// Latency

/// Controller-side timestamps of one frame, in steady-clock nanoseconds.
struct FrameTiming {
  std::uint32_t frame_id = 0;
  std::int64_t ingress_ns = 0;
  std::int64_t egress_ns = 0;
};

struct LatencyStats {
  std::size_t samples = 0;
  double mean_ms = 0.0;
  double stddev_ms = 0.0;  // sample standard deviation (n - 1)
};

/// Throws InsufficientSamples for fewer than two samples.
LatencyStats latency_stats(std::span<const double> latencies_ms);

/// Per-frame latency = egress - ingress.
LatencyStats bench_latency(std::span<const FrameTiming> trace);

void write_trace_csv(std::ostream& out, std::span<const FrameTiming> trace);
std::vector<FrameTiming> read_trace_csv(const std::filesystem::path& path);

void write_latency(std::ostream& out, const LatencyStats& stats);

}  // namespace emopipe::eval
