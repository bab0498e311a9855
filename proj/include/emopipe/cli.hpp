#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "emopipe/data.hpp"
#include "emopipe/orchestrator.hpp"

namespace emopipe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

inline constexpr const char* kPortBaseEnv = "EMOPIPE_ENDPOINT_BASE";

using std::filesystem::path;

struct DatasetFlags {
  path legend;
  path landmarks;
  std::set<std::string> excluded_submitters{"jhamski", "628"};
  std::set<std::string> labels{"happiness", "neutral"};
};

struct FeaturesCmd {
  path landmarks;
  data::Representation rep = data::Representation::Modified;
  path out;
};

struct TrainCmd {
  DatasetFlags dataset;
  data::Representation rep = data::Representation::Modified;
  std::size_t epochs = 5000;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double lr = 1e-6;
  std::vector<std::size_t> hidden{1024, 512, 256};
  double dropout = 0.5;
  std::optional<std::size_t> val_per_class;
  int grid_size = kDefaultGridSize;
  bool augment_flip = true;
  path out;
  path history;  // default: <out>.history.csv
};

struct EvalCmd {
  path model;
  DatasetFlags dataset;
  data::Representation rep = data::Representation::Modified;
  std::optional<std::size_t> val_per_class;  // evaluate on the split's validation half
  std::uint64_t seed = 0;
  std::optional<path> csv;
};

struct RunCmd {
  path model;
  data::Representation rep = data::Representation::Modified;
  pipeline::SourceConfig source;
  path view_out;
  std::uint16_t port_base = pipeline::kDefaultPortBase;
};

struct SynthCmd {
  std::size_t n_per_class = 200;
  std::uint64_t seed = 0;
  double sigma = 2.0;
  path out;
  path legend_out;  // default: <stem>_legend.csv next to out
};

struct BenchCmd {
  RunCmd run;
  std::optional<path> out;
  std::optional<path> trace;
};

struct InspectModelCmd {
  path model;
};

using Command = std::variant<FeaturesCmd, TrainCmd, EvalCmd, RunCmd, SynthCmd, BenchCmd, InspectModelCmd>;

struct ParseResult {
  std::optional<Command> command;  // empty when help was printed or parsing failed
  int exit_code = kExitOk;
};

/// Parses argv (program name first). `--help` prints usage to `out` and yields
/// exit code 0; a usage error prints a one-line reason to `err` and yields 2.
ParseResult parse_args(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Runs a validated command: 0 on success, 1 on runtime failure.
int dispatch(const Command& cmd, std::ostream& out, std::ostream& err);

/// parse_args + dispatch.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Split size used when --val-per-class is omitted: 191 when every class can
/// spare it, otherwise a fifth of the smallest class (at least 1).
std::size_t default_val_per_class(const data::LabeledDataset& ds);

}  // namespace emopipe::cli
