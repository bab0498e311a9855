#include <gtest/gtest.h>

#include <sstream>

#include "emopipe/cli.hpp"
#include "emopipe/nn/model_io.hpp"
#include "test_util.hpp"

using namespace emopipe;
using namespace emopipe::cli;
using emopipe::testing::TempDir;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

std::vector<const char*> argv_of(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"emopipe"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return argv;
}

Outcome run_cli(const std::vector<std::string>& args) {
  const auto argv = argv_of(args);
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

ParseResult parse(const std::vector<std::string>& args) {
  const auto argv = argv_of(args);
  std::ostringstream out, err;
  return parse_args(static_cast<int>(argv.size()), argv.data(), out, err);
}

std::size_t count_lines(const std::string& text) { return std::count(text.begin(), text.end(), '\n'); }

}  // namespace

TEST(ParseArgs, TrainCommandFields) {
  const auto r = parse({"train", "--legend", "l.csv", "--landmarks", "m.csv", "--rep", "modified", "--epochs", "100",
                        "--seed", "1", "--out", "model.emo"});
  ASSERT_EQ(r.exit_code, kExitOk);
  ASSERT_TRUE(r.command);
  const auto& t = std::get<TrainCmd>(*r.command);
  EXPECT_EQ(t.dataset.legend, "l.csv");
  EXPECT_EQ(t.dataset.landmarks, "m.csv");
  EXPECT_EQ(t.rep, data::Representation::Modified);
  EXPECT_EQ(t.epochs, 100u);
  EXPECT_EQ(t.seed, 1u);
  EXPECT_EQ(t.out, "model.emo");
  EXPECT_EQ(t.hidden, (std::vector<std::size_t>{1024, 512, 256}));
  EXPECT_EQ(t.lr, 1e-6);
  EXPECT_EQ(t.batch_size, 32u);
}

TEST(ParseArgs, TrainWithoutOutIsUsageError) {
  const auto r = parse({"train", "--legend", "l.csv", "--landmarks", "m.csv"});
  EXPECT_EQ(r.exit_code, kExitUsage);
  EXPECT_FALSE(r.command);
}

TEST(ParseArgs, SynthCommand) {
  const auto r = parse({"synth", "--n", "200", "--seed", "7", "--out", "synth.csv"});
  ASSERT_TRUE(r.command);
  const auto& s = std::get<SynthCmd>(*r.command);
  EXPECT_EQ(s.n_per_class, 200u);
  EXPECT_EQ(s.seed, 7u);
  EXPECT_EQ(s.out, "synth.csv");
}

TEST(ParseArgs, HelpAndErrors) {
  EXPECT_EQ(run_cli({"--help"}).code, kExitOk);
  EXPECT_EQ(run_cli({"train", "--help"}).code, kExitOk);
  EXPECT_EQ(run_cli({}).code, kExitUsage);
  EXPECT_EQ(run_cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run_cli({"synth", "--out", "x.csv", "--bogus"}).code, kExitUsage);
  EXPECT_EQ(run_cli({"eval", "--model", "m", "--legend", "l", "--landmarks", "m", "--rep", "pixels"}).code,
            kExitUsage);
}

TEST(ParseArgs, RunCommandDefaults) {
  const auto r = parse({"run", "--model", "m.emo", "--count", "25", "--port-base", "9000"});
  ASSERT_TRUE(r.command);
  const auto& c = std::get<RunCmd>(*r.command);
  EXPECT_EQ(c.source.kind, pipeline::SourceConfig::Kind::Synthetic);
  EXPECT_EQ(c.source.count, 25u);
  EXPECT_EQ(c.port_base, 9000);
}

TEST(DefaultSplit, LargeAndSmallScale) {
  data::LabeledDataset ds;
  ds.class_labels = {"happiness", "neutral"};
  for (int i = 0; i < 400; ++i) ds.records.push_back({std::to_string(i), i < 200 ? "happiness" : "neutral", "", {}});
  EXPECT_EQ(default_val_per_class(ds), 191u);
  ds.records.resize(210);
  EXPECT_EQ(default_val_per_class(ds), 2u);  // 10 neutral -> 10 / 5
}

TEST(Dispatch, SynthThenTrainWritesModelAndHistory) {
  TempDir dir;
  const auto lm = (dir / "synth.csv").string();
  ASSERT_EQ(run_cli({"synth", "--n", "10", "--seed", "3", "--out", lm}).code, kExitOk);
  EXPECT_TRUE(std::filesystem::exists(dir / "synth_legend.csv"));
  EXPECT_EQ(count_lines(emopipe::testing::read_file(lm)), 21u);

  const auto model = (dir / "model.emo").string();
  const auto history = (dir / "history.csv").string();
  const auto r = run_cli({"train", "--legend", (dir / "synth_legend.csv").string(), "--landmarks", lm, "--rep",
                          "modified", "--epochs", "5", "--hidden", "16,8", "--out", model, "--history", history});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(std::filesystem::exists(model));
  const auto text = emopipe::testing::read_file(history);
  EXPECT_EQ(text.substr(0, text.find('\n')), "epoch,train_loss,train_acc,val_acc");
  EXPECT_EQ(count_lines(text), 6u);

  const auto inspect = run_cli({"inspect-model", "--model", model});
  EXPECT_EQ(inspect.code, kExitOk);
  EXPECT_NE(inspect.out.find("114"), std::string::npos);
}

TEST(Dispatch, RepeatedRunsAreIdentical) {
  TempDir dir;
  const auto a = (dir / "a.csv").string();
  const auto b = (dir / "b.csv").string();
  ASSERT_EQ(run_cli({"synth", "--n", "12", "--seed", "5", "--out", a}).code, kExitOk);
  ASSERT_EQ(run_cli({"synth", "--n", "12", "--seed", "5", "--out", b}).code, kExitOk);
  EXPECT_EQ(emopipe::testing::read_file(a), emopipe::testing::read_file(b));

  std::vector<std::string> common{"train", "--legend", (dir / "a_legend.csv").string(), "--landmarks", a,
                                  "--epochs", "3", "--hidden", "8", "--seed", "2", "--out"};
  auto first = common;
  first.push_back((dir / "m1.emo").string());
  auto second = common;
  second.push_back((dir / "m2.emo").string());
  ASSERT_EQ(run_cli(first).code, kExitOk);
  ASSERT_EQ(run_cli(second).code, kExitOk);
  EXPECT_EQ(emopipe::testing::read_file(dir / "m1.emo"), emopipe::testing::read_file(dir / "m2.emo"));
  EXPECT_EQ(emopipe::testing::read_file(dir / "m1.emo.history.csv"),
            emopipe::testing::read_file(dir / "m2.emo.history.csv"));
}

TEST(Dispatch, EvalWithMismatchedRepresentationFails) {
  TempDir dir;
  const auto lm = (dir / "s.csv").string();
  ASSERT_EQ(run_cli({"synth", "--n", "10", "--out", lm}).code, kExitOk);
  nn::write_model_file(dir / "m.emo", nn::make_mlp({114, 4, 2}, 0.5, nn::default_class_labels(), 1));
  const auto r = run_cli({"eval", "--model", (dir / "m.emo").string(), "--legend", (dir / "s_legend.csv").string(),
                          "--landmarks", lm, "--rep", "absolute"});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_NE(r.err.find("DimensionMismatch"), std::string::npos) << r.err;

  const auto ok = run_cli({"eval", "--model", (dir / "m.emo").string(), "--legend", (dir / "s_legend.csv").string(),
                           "--landmarks", lm, "--rep", "modified"});
  EXPECT_EQ(ok.code, kExitOk) << ok.err;
  EXPECT_NE(ok.out.find("total"), std::string::npos);
}

TEST(Dispatch, MissingInputsAreRuntimeFailures) {
  EXPECT_EQ(run_cli({"inspect-model", "--model", "/nonexistent.emo"}).code, kExitFailure);
  EXPECT_EQ(run_cli({"eval", "--model", "/nonexistent.emo", "--legend", "/no", "--landmarks", "/no"}).code,
            kExitFailure);
}

TEST(Dispatch, FeaturesWritesOneRowPerRecord) {
  TempDir dir;
  const auto lm = (dir / "s.csv").string();
  ASSERT_EQ(run_cli({"synth", "--n", "3", "--out", lm}).code, kExitOk);
  const auto out = (dir / "f.csv").string();
  ASSERT_EQ(run_cli({"features", "--landmarks", lm, "--rep", "modified", "--out", out}).code, kExitOk);
  const auto text = emopipe::testing::read_file(out);
  EXPECT_EQ(count_lines(text), 7u);
  const auto second = text.substr(text.find('\n') + 1);
  const auto row = second.substr(0, second.find('\n'));
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 115);  // id, label, 114 values
}

TEST(Dispatch, RunOverSynthDataMatchesFrameCount) {
  TempDir dir;
  const auto lm = (dir / "s.csv").string();
  ASSERT_EQ(run_cli({"synth", "--n", "15", "--seed", "8", "--out", lm}).code, kExitOk);
  const auto model = (dir / "m.emo").string();
  ASSERT_EQ(run_cli({"train", "--legend", (dir / "s_legend.csv").string(), "--landmarks", lm, "--epochs", "20",
                     "--hidden", "16", "--lr", "1e-3", "--out", model})
                .code,
            kExitOk);
  const auto view = (dir / "view.txt").string();
  const auto port = std::to_string(emopipe::testing::free_port_base(3));
  const auto r = run_cli({"run", "--model", model, "--source", "replay", "--input", lm, "--view-out", view,
                          "--port-base", port});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto text = emopipe::testing::read_file(view);
  EXPECT_EQ(count_lines(text), 30u);

  const auto bench_out = (dir / "latency.csv").string();
  const auto port2 = std::to_string(emopipe::testing::free_port_base(3));
  const auto b = run_cli({"bench", "--model", model, "--count", "50", "--port-base", port2, "--out", bench_out});
  ASSERT_EQ(b.code, kExitOk) << b.err;
  EXPECT_EQ(emopipe::testing::read_file(bench_out).rfind("samples,mean_ms,stddev_ms\n50,", 0), 0u);
}
