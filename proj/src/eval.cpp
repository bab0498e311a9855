#include "emopipe/eval.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "emopipe/error.hpp"

namespace emopipe::eval {
namespace {

void finish(ClassMetrics& m) {
  if (m.images_tested == 0) return;
  const auto n = static_cast<double>(m.images_tested);
  m.certainty_pct = 100.0 * m.certainty_sum / n;
  m.accuracy_pct = 100.0 * static_cast<double>(m.correct) / n;
}

void check_representation(const nn::AnyModel& model, data::Representation rep) {
  if (const auto* mlp = std::get_if<nn::MlpModel>(&model)) {
    if (rep == data::Representation::Raster) {
      throw Error(ErrorKind::DimensionMismatch, "an MLP model cannot take the raster representation");
    }
    const auto kind = rep == data::Representation::Absolute ? FeatureKind::Absolute : FeatureKind::Modified;
    if (mlp->input_dim() != feature_count(kind)) {
      throw Error(ErrorKind::DimensionMismatch,
                  fmt::format("model takes {} inputs but the {} representation has {}", mlp->input_dim(),
                              data::to_string(rep), feature_count(kind)));
    }
  } else if (rep != data::Representation::Raster) {
    throw Error(ErrorKind::DimensionMismatch, "a CNN model needs the raster representation");
  }
}

}  // namespace

MetricsReport evaluate_predictions(std::span<const std::vector<float>> probs,
                                   std::span<const std::size_t> labels,
                                   const std::vector<std::string>& class_labels) {
  if (probs.empty()) throw Error(ErrorKind::EmptyDataset, "nothing to evaluate");
  if (probs.size() != labels.size()) throw Error(ErrorKind::DimensionMismatch, "one label per prediction");

  MetricsReport report;
  for (const auto& l : class_labels) report.per_class.push_back({.label = l});
  report.total.label = "total";
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const auto& p = probs[i];
    const std::size_t truth = labels[i];
    if (p.size() != class_labels.size() || truth >= class_labels.size()) {
      throw Error(ErrorKind::DimensionMismatch, fmt::format("row {} does not fit {} classes", i, class_labels.size()));
    }
    const bool hit = nn::argmax<float>(p) == truth;
    for (auto* m : {&report.per_class[truth], &report.total}) {
      ++m->images_tested;
      m->certainty_sum += static_cast<double>(p[truth]);
      if (hit) ++m->correct;
    }
  }
  for (auto& m : report.per_class) finish(m);
  finish(report.total);
  return report;
}

MetricsReport evaluate(const nn::AnyModel& model, const data::LabeledDataset& val, data::Representation rep) {
  if (val.empty()) throw Error(ErrorKind::EmptyDataset, "validation set is empty");
  check_representation(model, rep);

  std::vector<std::vector<float>> probs;
  std::vector<std::size_t> labels;
  std::vector<std::string> class_labels;
  if (const auto* mlp = std::get_if<nn::MlpModel>(&model)) {
    const auto kind = rep == data::Representation::Absolute ? FeatureKind::Absolute : FeatureKind::Modified;
    const auto tensors = data::build_feature_tensors(val, kind);
    for (const auto& x : tensors.inputs) probs.push_back(nn::mlp_forward<float>(*mlp, x));
    labels = tensors.labels;
    class_labels = mlp->class_labels;
  } else {
    const auto& cnn = std::get<nn::CnnModel>(model);
    for (const auto& r : val.records) {
      probs.push_back(nn::cnn_forward<float>(cnn, rasterize(r.landmarks, cnn.grid_size)));
      labels.push_back(val.class_index(r.label));
    }
    class_labels = cnn.class_labels;
  }
  if (class_labels != val.class_labels) {
    throw Error(ErrorKind::DimensionMismatch, "model and dataset class labels differ");
  }
  return evaluate_predictions(probs, labels, class_labels);
}

void write_report_table(std::ostream& out, const MetricsReport& report) {
  fmt::print(out, "{:<12} {:>13} {:>12} {:>12}\n", "class", "images_tested", "certainty", "accuracy");
  const auto row = [&](const ClassMetrics& m) {
    fmt::print(out, "{:<12} {:>13} {:>11.2f}% {:>11.2f}%\n", m.label, m.images_tested, m.certainty_pct,
               m.accuracy_pct);
  };
  for (const auto& m : report.per_class) row(m);
  row(report.total);
}

void write_report_csv(std::ostream& out, const MetricsReport& report) {
  out << "class,images_tested,certainty_pct,accuracy_pct\n";
  const auto row = [&](const ClassMetrics& m) {
    fmt::print(out, "{},{},{:.2f},{:.2f}\n", m.label, m.images_tested, m.certainty_pct, m.accuracy_pct);
  };
  for (const auto& m : report.per_class) row(m);
  row(report.total);
}

LatencyStats latency_stats(std::span<const double> latencies_ms) {
  if (latencies_ms.size() < 2) {
    throw Error(ErrorKind::InsufficientSamples,
                fmt::format("{} latency samples, need at least 2", latencies_ms.size()));
  }
  // Welford's running update.
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t n = 0;
  for (double x : latencies_ms) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }
  return {n, mean, std::sqrt(std::max(0.0, m2 / static_cast<double>(n - 1)))};
}

LatencyStats bench_latency(std::span<const FrameTiming> trace) {
  std::vector<double> ms;
  ms.reserve(trace.size());
  for (const auto& t : trace) ms.push_back(static_cast<double>(t.egress_ns - t.ingress_ns) / 1e6);
  return latency_stats(ms);
}

void write_trace_csv(std::ostream& out, std::span<const FrameTiming> trace) {
  out << "frame_id,ingress_ns,egress_ns\n";
  for (const auto& t : trace) out << t.frame_id << ',' << t.ingress_ns << ',' << t.egress_ns << '\n';
}

std::vector<FrameTiming> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, fmt::format("cannot open trace {}", path.string()));
  std::vector<FrameTiming> trace;
  std::string line;
  std::getline(in, line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    FrameTiming t;
    char c1 = 0;
    char c2 = 0;
    if (!(row >> t.frame_id >> c1 >> t.ingress_ns >> c2 >> t.egress_ns) || c1 != ',' || c2 != ',') {
      throw Error(ErrorKind::ParseError, fmt::format("trace line {} is malformed", line_no));
    }
    trace.push_back(t);
  }
  return trace;
}

void write_latency(std::ostream& out, const LatencyStats& stats) {
  fmt::print(out, "samples,mean_ms,stddev_ms\n{},{:.4f},{:.4f}\n", stats.samples, stats.mean_ms, stats.stddev_ms);
}

}  // namespace emopipe::eval
