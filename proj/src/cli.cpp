#include "emopipe/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "emopipe/error.hpp"
#include "emopipe/eval.hpp"
#include "emopipe/nn/model_io.hpp"
#include "emopipe/nn/train.hpp"

namespace emopipe::cli {
namespace {

const std::vector<std::string> kReps{"absolute", "modified", "raster"};
const std::vector<std::string> kFeatureReps{"absolute", "modified"};

// Representation flags are parsed as text and converted after CLI11 has validated them.
CLI::Option* add_rep_option(CLI::App* sub, std::string& text, const std::vector<std::string>& allowed) {
  return sub->add_option("--rep", text, fmt::format("{}", fmt::join(allowed, "|")))
      ->check(CLI::IsMember(allowed))
      ->capture_default_str();
}

void add_dataset_flags(CLI::App* sub, DatasetFlags& flags) {
  sub->add_option("--legend", flags.legend, "Legend CSV (submitter,image_id,label)")->required();
  sub->add_option("--landmarks", flags.landmarks, "Landmark CSV (image_id,label,x0,y0,...)")->required();
  sub->add_option("--exclude-submitter", flags.excluded_submitters, "Submitters to drop")
      ->delimiter(',')
      ->capture_default_str();
  sub->add_option("--labels", flags.labels, "Emotion labels to keep")->delimiter(',')->capture_default_str();
}

void add_run_flags(CLI::App* sub, RunCmd& cmd, std::string& source_kind, std::string& rep) {
  sub->add_option("--model", cmd.model, "Model file")->required();
  add_rep_option(sub, rep, kReps);
  sub->add_option("--source", source_kind, "synthetic|replay|images")
      ->check(CLI::IsMember({"synthetic", "replay", "images"}))
      ->capture_default_str();
  sub->add_option("--input", cmd.source.path, "Landmark CSV (replay) or image directory (images)");
  sub->add_option("--count", cmd.source.count, "Synthetic frame count")->capture_default_str();
  sub->add_option("--seed", cmd.source.seed, "Synthetic stream seed")->capture_default_str();
  sub->add_option("--fps", cmd.source.fps, "Frame rate limit, 0 for unlimited")->capture_default_str();
  sub->add_option("--view-out", cmd.view_out, "View output file (default: standard output)");
  sub->add_option("--port-base", cmd.port_base, "First of three consecutive ports")->check(CLI::Range(1, 65533));
}

pipeline::SourceConfig::Kind source_kind_of(const std::string& s) {
  if (s == "replay") return pipeline::SourceConfig::Kind::Replay;
  if (s == "images") return pipeline::SourceConfig::Kind::ImageDirectory;
  return pipeline::SourceConfig::Kind::Synthetic;
}

std::uint16_t port_base_from_env() {
  const char* env = std::getenv(kPortBaseEnv);
  if (env == nullptr || *env == '\0') return pipeline::kDefaultPortBase;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1 || v > 65533) {
    throw CLI::ValidationError(kPortBaseEnv, fmt::format("'{}' is not a port base", env));
  }
  return static_cast<std::uint16_t>(v);
}

data::LoadConfig load_config(const DatasetFlags& f) { return {f.excluded_submitters, f.labels}; }

std::ofstream open_output(const path& p) {
  std::ofstream out(p, std::ios::trunc | std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, fmt::format("cannot write {}", p.string()));
  return out;
}

FeatureKind feature_kind(data::Representation rep) {
  return rep == data::Representation::Absolute ? FeatureKind::Absolute : FeatureKind::Modified;
}

void print_load_summary(std::ostream& out, const data::LoadResult& r) {
  fmt::print(out, "loaded {} records (dropped: submitter {}, label {}, missing landmarks {})\n",
             r.dataset.size(), r.dropped.submitter, r.dropped.label, r.dropped.missing);
}

// Seeds for the independent random streams of one invocation, all derived from --seed.
struct Seeds {
  std::uint64_t split;
  std::uint64_t init;
  std::uint64_t train;
};

Seeds derive_seeds(std::uint64_t seed) { return {seed, seed + 1, seed + 2}; }

int do_features(const FeaturesCmd& cmd, std::ostream& out) {
  const auto rows = data::read_landmark_csv(cmd.landmarks);
  auto file = open_output(cmd.out);
  const auto kind = feature_kind(cmd.rep);
  file << "image_id,label";
  for (std::size_t i = 0; i < feature_count(kind); ++i) file << ",f" << i;
  file << '\n';
  for (const auto& row : rows) {
    file << row.image_id << ',' << row.label;
    for (double v : extract_features(row.landmarks, kind).values) fmt::print(file, ",{}", v);
    file << '\n';
  }
  fmt::print(out, "wrote {} {} feature rows to {}\n", rows.size(), data::to_string(cmd.rep), cmd.out.string());
  return kExitOk;
}

int do_train(const TrainCmd& cmd, std::ostream& out) {
  const auto loaded = data::load_legend(cmd.dataset.legend, cmd.dataset.landmarks, load_config(cmd.dataset));
  print_load_summary(out, loaded);
  const auto seeds = derive_seeds(cmd.seed);
  const std::size_t val_per_class = cmd.val_per_class.value_or(default_val_per_class(loaded.dataset));
  const auto split = data::stratified_split(loaded.dataset, val_per_class, seeds.split);
  fmt::print(out, "split: {} training, {} validation ({} per class)\n", split.train.size(), split.val.size(),
             val_per_class);

  nn::TrainConfig tc;
  tc.epochs = cmd.epochs;
  tc.batch_size = cmd.batch_size;
  tc.seed = seeds.train;
  tc.adam.learning_rate = cmd.lr;

  nn::AnyModel model;
  nn::TrainHistory history;
  if (cmd.rep == data::Representation::Raster) {
    auto cnn = nn::make_cnn(cmd.grid_size, loaded.dataset.class_labels, seeds.init, 32, cmd.dropout);
    const auto train_set = data::build_raster_tensors(split.train, cmd.augment_flip, cmd.grid_size);
    const auto val_set = data::build_raster_tensors(split.val, false, cmd.grid_size);
    history = nn::train(cnn, train_set, val_set, tc);
    model = std::move(cnn);
  } else {
    const auto kind = feature_kind(cmd.rep);
    std::vector<std::size_t> dims{feature_count(kind)};
    dims.insert(dims.end(), cmd.hidden.begin(), cmd.hidden.end());
    dims.push_back(loaded.dataset.class_labels.size());
    auto mlp = nn::make_mlp(dims, cmd.dropout, loaded.dataset.class_labels, seeds.init);
    const auto train_set = data::build_feature_tensors(split.train, kind);
    const auto val_set = data::build_feature_tensors(split.val, kind);
    history = nn::train(mlp, train_set, val_set, tc);
    model = std::move(mlp);
  }

  nn::write_model_file(cmd.out, model);
  const path history_path = cmd.history.empty() ? path(cmd.out.string() + ".history.csv") : cmd.history;
  auto hist = open_output(history_path);
  hist << "epoch,train_loss,train_acc,val_acc\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    fmt::print(hist, "{},{},{},{}\n", e + 1, history[e].train_loss, history[e].train_accuracy,
               history[e].val_accuracy);
  }
  if (!history.empty()) {
    const auto& last = history.back();
    fmt::print(out, "epoch {}: train loss {:.4f}, train acc {:.2f}%, val acc {:.2f}%\n", history.size(),
               last.train_loss, 100.0 * last.train_accuracy, 100.0 * last.val_accuracy);
  }
  fmt::print(out, "model written to {}, history to {}\n", cmd.out.string(), history_path.string());
  return kExitOk;
}

int do_eval(const EvalCmd& cmd, std::ostream& out) {
  const auto model = nn::read_model_file(cmd.model);
  const auto loaded = data::load_legend(cmd.dataset.legend, cmd.dataset.landmarks, load_config(cmd.dataset));
  print_load_summary(out, loaded);
  data::LabeledDataset target = loaded.dataset;
  if (cmd.val_per_class) target = data::stratified_split(loaded.dataset, *cmd.val_per_class, derive_seeds(cmd.seed).split).val;
  const auto report = eval::evaluate(model, target, cmd.rep);
  eval::write_report_table(out, report);
  if (cmd.csv) {
    auto file = open_output(*cmd.csv);
    eval::write_report_csv(file, report);
  }
  return kExitOk;
}

pipeline::PipelineConfig pipeline_config(const RunCmd& cmd) {
  pipeline::PipelineConfig cfg;
  cfg.endpoints = pipeline::Endpoints::from_base(cmd.port_base);
  cfg.model_path = cmd.model;
  cfg.representation = cmd.rep;
  cfg.source = cmd.source;
  cfg.view_output = cmd.view_out;
  return cfg;
}

int do_run(const RunCmd& cmd, std::ostream&, std::ostream& err) {
  const auto result = pipeline::orchestrate(pipeline_config(cmd));
  for (const auto& c : result.children) {
    if (!c.clean()) {
      fmt::print(err, "{} exited with {}\n", pipeline::to_string(c.worker),
                 c.signal != 0 ? fmt::format("signal {}", c.signal) : fmt::format("code {}", c.exit_code));
    }
  }
  result.throw_if_failed();
  return kExitOk;
}

int do_bench(const BenchCmd& cmd, std::ostream& out) {
  auto cfg = pipeline_config(cmd.run);
  const path trace = cmd.trace.value_or(std::filesystem::temp_directory_path() /
                                        fmt::format("emopipe-trace-{}.csv", ::getpid()));
  cfg.trace_path = trace;
  if (cfg.view_output.empty()) cfg.view_output = "/dev/null";
  const auto result = pipeline::orchestrate(cfg);
  result.throw_if_failed();
  const auto timings = eval::read_trace_csv(trace);
  if (!cmd.trace) std::filesystem::remove(trace);
  const auto stats = eval::bench_latency(timings);
  fmt::print(out, "controller latency over {} frames: mean {:.4f} ms, stddev {:.4f} ms\n", stats.samples,
             stats.mean_ms, stats.stddev_ms);
  if (cmd.out) {
    auto file = open_output(*cmd.out);
    eval::write_latency(file, stats);
  }
  return kExitOk;
}

int do_synth(const SynthCmd& cmd, std::ostream& out) {
  const auto ds = data::synth_generate(cmd.n_per_class, cmd.seed, cmd.sigma);
  path legend = cmd.legend_out;
  if (legend.empty()) legend = cmd.out.parent_path() / (cmd.out.stem().string() + "_legend.csv");
  {
    auto file = open_output(cmd.out);
    data::write_landmark_csv(file, ds);
  }
  {
    auto file = open_output(legend);
    data::write_legend_csv(file, ds);
  }
  fmt::print(out, "wrote {} synthetic faces to {} (legend {})\n", ds.size(), cmd.out.string(), legend.string());
  return kExitOk;
}

int do_inspect(const InspectModelCmd& cmd, std::ostream& out) {
  const auto model = nn::read_model_file(cmd.model);
  if (const auto* mlp = std::get_if<nn::MlpModel>(&model)) {
    fmt::print(out, "kind: mlp\n");
    for (std::size_t l = 0; l < mlp->layers.size(); ++l) {
      const auto& layer = mlp->layers[l];
      fmt::print(out, "layer {}: dense {} -> {}, {}", l, layer.in_dim, layer.out_dim,
                 layer.activation == nn::Activation::Relu ? "relu" : "softmax");
      if (l < mlp->dropout_rates.size()) fmt::print(out, ", dropout {}", mlp->dropout_rates[l]);
      out << '\n';
    }
    fmt::print(out, "labels: {}\n", fmt::join(mlp->class_labels, ", "));
    fmt::print(out, "parameters: {}\n", mlp->parameter_count());
  } else {
    const auto& cnn = std::get<nn::CnnModel>(model);
    const auto s = cnn.shape();
    fmt::print(out, "kind: cnn\n");
    fmt::print(out, "input: {}x{}x1\n", s.grid, s.grid);
    fmt::print(out, "conv: {} filters {}x{}, relu -> {}x{}x{}\n", cnn.filters, cnn.kernel, cnn.kernel, s.conv,
               s.conv, s.filters);
    fmt::print(out, "maxpool: {}x{} -> {}x{}x{}\n", cnn.pool, cnn.pool, s.pooled, s.pooled, s.filters);
    fmt::print(out, "dropout: {}\n", cnn.dropout_rate);
    fmt::print(out, "dense: {} -> {}, softmax\n", cnn.dense.in_dim, cnn.dense.out_dim);
    fmt::print(out, "labels: {}\n", fmt::join(cnn.class_labels, ", "));
    fmt::print(out, "parameters: {}\n", cnn.parameter_count());
  }
  return kExitOk;
}

}  // namespace

std::size_t default_val_per_class(const data::LabeledDataset& ds) {
  constexpr std::size_t kReferenceValPerClass = 191;
  const auto counts = ds.class_counts();
  if (counts.empty()) return 1;
  const std::size_t smallest = *std::min_element(counts.begin(), counts.end());
  if (smallest > kReferenceValPerClass) return kReferenceValPerClass;
  return std::max<std::size_t>(1, smallest / 5);
}

ParseResult parse_args(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Facial-landmark emotion recognition pipeline", "emopipe"};
  app.require_subcommand(1, 1);
  app.fallthrough(false);

  FeaturesCmd features;
  auto* s_features = app.add_subcommand("features", "Convert a landmark CSV into feature rows");
  s_features->add_option("--landmarks", features.landmarks, "Landmark CSV")->required();
  std::string features_rep = "modified";
  add_rep_option(s_features, features_rep, kFeatureReps);
  s_features->add_option("--out", features.out, "Output feature CSV")->required();

  TrainCmd train;
  auto* s_train = app.add_subcommand("train", "Train a classifier and write the model and history CSV");
  add_dataset_flags(s_train, train.dataset);
  std::string train_rep = "modified";
  add_rep_option(s_train, train_rep, kReps);
  s_train->add_option("--epochs", train.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  s_train->add_option("--batch-size", train.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  s_train->add_option("--seed", train.seed)->capture_default_str();
  s_train->add_option("--lr", train.lr, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  s_train->add_option("--hidden", train.hidden, "Hidden layer widths (MLP)")->delimiter(',')->capture_default_str();
  s_train->add_option("--dropout", train.dropout)->capture_default_str()->check(CLI::Range(0.0, 0.999));
  s_train->add_option("--val-per-class", train.val_per_class, "Validation records per class");
  s_train->add_option("--grid-size", train.grid_size, "Raster grid size (CNN)")->capture_default_str()->check(CLI::Range(4, 4096));
  bool no_flip = false;
  s_train->add_flag("--no-flip", no_flip, "Disable horizontal-flip augmentation (CNN)");
  s_train->add_option("--out", train.out, "Model file to write")->required();
  s_train->add_option("--history", train.history, "History CSV (default: <out>.history.csv)");

  EvalCmd evalc;
  auto* s_eval = app.add_subcommand("eval", "Report certainty and accuracy of a model");
  s_eval->add_option("--model", evalc.model, "Model file")->required();
  add_dataset_flags(s_eval, evalc.dataset);
  std::string eval_rep = "modified";
  add_rep_option(s_eval, eval_rep, kReps);
  s_eval->add_option("--val-per-class", evalc.val_per_class, "Evaluate only the validation half of this split");
  s_eval->add_option("--seed", evalc.seed, "Split seed (match the training run)")->capture_default_str();
  s_eval->add_option("--csv", evalc.csv, "Also write the report as CSV");

  RunCmd runc;
  std::string run_source = "synthetic";
  std::string run_rep = "modified";
  auto* s_run = app.add_subcommand("run", "Start the four-module pipeline");
  add_run_flags(s_run, runc, run_source, run_rep);

  SynthCmd synth;
  auto* s_synth = app.add_subcommand("synth", "Write a synthetic landmark CSV and legend");
  s_synth->add_option("--n", synth.n_per_class, "Faces per class")->capture_default_str()->check(CLI::PositiveNumber);
  s_synth->add_option("--seed", synth.seed)->capture_default_str();
  s_synth->add_option("--sigma", synth.sigma, "Jitter in pixels")->capture_default_str()->check(CLI::NonNegativeNumber);
  s_synth->add_option("--out", synth.out, "Landmark CSV to write")->required();
  s_synth->add_option("--legend-out", synth.legend_out, "Legend CSV (default: <stem>_legend.csv)");

  BenchCmd bench;
  std::string bench_source = "synthetic";
  std::string bench_rep = "modified";
  auto* s_bench = app.add_subcommand("bench", "Measure controller latency over a pipeline run");
  add_run_flags(s_bench, bench.run, bench_source, bench_rep);
  s_bench->add_option("--out", bench.out, "Latency CSV to write");
  s_bench->add_option("--trace", bench.trace, "Keep the per-frame timing trace here");

  InspectModelCmd inspect;
  auto* s_inspect = app.add_subcommand("inspect-model", "Print a model's architecture");
  s_inspect->add_option("--model", inspect.model, "Model file")->required();

  try {
    const std::uint16_t env_base = port_base_from_env();
    runc.port_base = env_base;
    bench.run.port_base = env_base;
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      app.exit(e, out, err);
      return {std::nullopt, kExitOk};
    }
    fmt::print(err, "usage error: {}\n", e.what());
    return {std::nullopt, kExitUsage};
  }

  ParseResult result;
  if (s_features->parsed()) {
    features.rep = data::parse_representation(features_rep);
    result.command = features;
  } else if (s_train->parsed()) {
    train.rep = data::parse_representation(train_rep);
    train.augment_flip = !no_flip;
    result.command = train;
  } else if (s_eval->parsed()) {
    evalc.rep = data::parse_representation(eval_rep);
    result.command = evalc;
  } else if (s_run->parsed() || s_bench->parsed()) {
    const bool is_run = s_run->parsed();
    RunCmd& rc = is_run ? runc : bench.run;
    rc.rep = data::parse_representation(is_run ? run_rep : bench_rep);
    rc.source.kind = source_kind_of(is_run ? run_source : bench_source);
    if (rc.source.kind != pipeline::SourceConfig::Kind::Synthetic && rc.source.path.empty()) {
      fmt::print(err, "usage error: --input is required for the replay and images sources\n");
      return {std::nullopt, kExitUsage};
    }
    if (is_run) {
      result.command = runc;
    } else {
      result.command = bench;
    }
  } else if (s_synth->parsed()) {
    result.command = synth;
  } else {
    result.command = inspect;
  }
  return result;
}

int dispatch(const Command& cmd, std::ostream& out, std::ostream& err) {
  try {
    return std::visit(
        [&](const auto& c) -> int {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, FeaturesCmd>) return do_features(c, out);
          else if constexpr (std::is_same_v<T, TrainCmd>) return do_train(c, out);
          else if constexpr (std::is_same_v<T, EvalCmd>) return do_eval(c, out);
          else if constexpr (std::is_same_v<T, RunCmd>) return do_run(c, out, err);
          else if constexpr (std::is_same_v<T, SynthCmd>) return do_synth(c, out);
          else if constexpr (std::is_same_v<T, BenchCmd>) return do_bench(c, out);
          else return do_inspect(c, out);
        },
        cmd);
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitFailure;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  const auto parsed = parse_args(argc, argv, out, err);
  if (!parsed.command) return parsed.exit_code;
  return dispatch(*parsed.command, out, err);
}

}  // namespace emopipe::cli
