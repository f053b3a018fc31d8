#include <algorithm>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "pci/cli.hpp"

using namespace pci;

namespace {

struct Run {
  int code;
  std::string out, err;
};

std::vector<std::string> with(std::vector<std::string> args, const std::string& flag, const std::string& value) {
  auto it = std::find(args.begin(), args.end(), flag);
  if (it == args.end()) {
    args.insert(args.end(), {flag, value});
  } else {
    *(it + 1) = value;
  }
  return args;
}

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override { fx_ = fixtures::write_cli_fixture(dir_); }

  std::vector<std::string> train_args(const std::string& out, bool multi = false) const {
    std::vector<std::string> args{"train",      "--tracks",   fx_.train_tracks, "--val-tracks", fx_.val_tracks,
                                  "--features", fx_.store,    "--out",          out,            "--n-past",
                                  "3",          "--horizon",  "8",              "--batch",      "8",
                                  "--lr",       "0.01",       "--max-epochs",   "4",            "--seed",
                                  "5",          "--vars",     "all",            "--rnn",        "gru"};
    if (multi) args.push_back("--multi-horizon");
    return args;
  }

  fixtures::TempDir dir_{"cli"};
  fixtures::CliFixture fx_;
};

}  // namespace

TEST_F(CliTest, TrainWritesCheckpointLogAndManifest) {
  const auto ckpt = dir_.file("m.ckpt");
  const auto r = run(train_args(ckpt));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(ckpt));
  EXPECT_TRUE(std::filesystem::exists(ckpt + ".manifest.json"));

  std::istringstream log(fixtures::read_file(ckpt + ".history.jsonl"));
  int epochs = 0;
  std::string manifest_id;
  for (std::string line; std::getline(log, line);) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("epoch").get<int>(), ++epochs);
    EXPECT_TRUE(j.contains("train_loss") && j.contains("val_loss") && j.contains("lr"));
    EXPECT_EQ(j.at("seed").get<int>(), 5);
    manifest_id = j.at("manifest_id").get<std::string>();
  }
  EXPECT_GE(epochs, 1);
  const auto manifest = nlohmann::json::parse(fixtures::read_file(ckpt + ".manifest.json"));
  EXPECT_EQ(manifest.at("id").get<std::string>(), manifest_id);
  const auto loaded = load_checkpoint(std::filesystem::path(ckpt));
  EXPECT_EQ(loaded.seed, 5u);
  EXPECT_EQ(loaded.manifest_id, manifest_id);
  EXPECT_EQ(loaded.model.config().input_dim(), fx_.feature_dim + 9);
}

TEST_F(CliTest, IdenticalRunsAreByteIdentical) {
  const auto a = dir_.file("a.ckpt"), b = dir_.file("b.ckpt");
  ASSERT_EQ(run(train_args(a)).code, 0);
  ASSERT_EQ(run(train_args(b)).code, 0);
  EXPECT_EQ(fixtures::read_file(a), fixtures::read_file(b));
  EXPECT_EQ(fixtures::read_file(a + ".history.jsonl"), fixtures::read_file(b + ".history.jsonl"));
}

TEST_F(CliTest, EvaluatePrintsTableAndMatchingJson) {
  const auto ckpt = dir_.file("m.ckpt");
  ASSERT_EQ(run(train_args(ckpt)).code, 0);
  const auto js = dir_.file("metrics.json");
  const auto r = run({"evaluate", "--checkpoint", ckpt, "--tracks", fx_.test_tracks, "--features", fx_.store, "--json", js});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(fixtures::read_file(js));
  Metrics m{j.at("accuracy"), j.at("precision"), j.at("recall"), j.at("ap"), j.at("threshold")};
  EXPECT_EQ(r.out, format_table(m));
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "   Acc.       P       R      AP");

  // Same numbers as the library path.
  const auto loaded = load_checkpoint(std::filesystem::path(ckpt));
  const auto store = FeatureStore::load(fx_.store, FeatureStore::default_index_path(fx_.store));
  const auto tracks = prepare_tracks(parse_tracks(std::filesystem::path(fx_.test_tracks)), Split::test);
  std::vector<Sample> samples;
  for (const auto& t : tracks.tracks) {
    auto w = make_windows(t, 3, 8);
    samples.insert(samples.end(), w.begin(), w.end());
  }
  const auto direct = evaluate(loaded.model, build_sequences(samples, store), {loaded.batch_size, loaded.rescale, 0, 0.5});
  EXPECT_DOUBLE_EQ(direct.ap, m.ap);
  EXPECT_DOUBLE_EQ(direct.accuracy, m.accuracy);
}

TEST_F(CliTest, PredictEmitsEightRowsAndEnforcesBoundary) {
  const auto ckpt = dir_.file("multi.ckpt");
  ASSERT_EQ(run(train_args(ckpt, true)).code, 0);
  auto predict = [&](int t) {
    return run({"predict", "--checkpoint", ckpt, "--tracks", fx_.test_tracks, "--features", fx_.store, "--video",
                "test_video0", "--pedestrian", "ped1", "--t", std::to_string(t)});
  };
  const auto ok = predict(3);
  ASSERT_EQ(ok.code, 0) << ok.err;
  std::istringstream csv(ok.out);
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "horizon_frames,probability");
  std::vector<int> horizons;
  while (std::getline(csv, line)) {
    const auto comma = line.find(',');
    horizons.push_back(std::stoi(line.substr(0, comma)));
    const double p = std::stod(line.substr(comma + 1));
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
  EXPECT_EQ(horizons, (std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8}));
  EXPECT_EQ(predict(2).code, 1);
  EXPECT_EQ(predict(24 - 8 - 1).code, 0);
  EXPECT_EQ(predict(24 - 8).code, 1);
}

TEST_F(CliTest, PredictRequiresMultiHorizonCheckpoint) {
  const auto ckpt = dir_.file("single.ckpt");
  ASSERT_EQ(run(train_args(ckpt)).code, 0);
  const auto r = run({"predict", "--checkpoint", ckpt, "--tracks", fx_.test_tracks, "--features", fx_.store, "--video",
                      "test_video0", "--pedestrian", "ped1", "--t", "5"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("multi-horizon"), std::string::npos);
}

TEST_F(CliTest, ZeroHeadCheckpointPredictsOneHalf) {
  ModelConfig config;
  config.feature_dim = fx_.feature_dim;
  config.horizon_mode = HorizonMode::multi;
  Checkpoint ckpt{Model<float>(config)};
  ckpt.window = {3, 30};
  const auto path = dir_.file("zero.ckpt");
  save_checkpoint(std::filesystem::path(path), ckpt);
  // 60 fps track: 48 frames become 24 after decimation.
  const auto r = run({"predict", "--checkpoint", path, "--tracks", fx_.test_tracks, "--features", fx_.store, "--video",
                      "test_video0", "--pedestrian", "ped0", "--t", "3"});
  EXPECT_EQ(r.code, 1) << "window needs N+M+1 = 34 frames";
  ckpt.window = {3, 16};
  save_checkpoint(std::filesystem::path(path), ckpt);
  const auto ok = run({"predict", "--checkpoint", path, "--tracks", fx_.test_tracks, "--features", fx_.store, "--video",
                       "test_video0", "--pedestrian", "ped0", "--t", "4"});
  ASSERT_EQ(ok.code, 0) << ok.err;
  std::istringstream csv(ok.out);
  std::string line;
  std::getline(csv, line);
  int rows = 0;
  while (std::getline(csv, line)) {
    EXPECT_EQ(line.substr(line.find(',') + 1), "0.5");
    ++rows;
  }
  EXPECT_EQ(rows, 8);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"train"}).code, 1);
  EXPECT_EQ(run({"bogus"}).code, 1);

  const auto io = run(with(train_args(dir_.file("x.ckpt")), "--tracks", dir_.file("missing.jsonl")));
  EXPECT_EQ(io.code, 2);
  EXPECT_NE(io.err.find("missing.jsonl"), std::string::npos);

  EXPECT_EQ(run(with(train_args(dir_.file("x.ckpt")), "--layers", "2")).code, 1);
  EXPECT_EQ(run(with(train_args(dir_.file("x.ckpt")), "--rnn", "rnn")).code, 1);
  EXPECT_EQ(run(with(train_args(dir_.file("x.ckpt")), "--dropout", "1.5")).code, 1);

  const auto short_tracks = run(with(train_args(dir_.file("x.ckpt")), "--n-past", "40"));
  EXPECT_EQ(short_tracks.code, 1);
  EXPECT_NE(short_tracks.err.find("no training windows"), std::string::npos);
}

TEST_F(CliTest, MissingFeatureRowsAreListed) {
  FeatureStore sparse(FeatureLayout::pooled, fx_.feature_dim);
  const std::vector<float> row(fx_.feature_dim, 1.0f);
  sparse.add({"train_video0", "ped0", 100}, row);
  const auto store = dir_.file("sparse.bin");
  sparse.save(store, FeatureStore::default_index_path(store));
  const auto r = run(with(train_args(dir_.file("x.ckpt")), "--features", store));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("missing"), std::string::npos);
  EXPECT_NE(r.err.find("train_video0/ped0/"), std::string::npos);
}

TEST_F(CliTest, EvaluateRejectsFeatureWidthMismatch) {
  const auto ckpt = dir_.file("m.ckpt");
  ASSERT_EQ(run(train_args(ckpt)).code, 0);
  fixtures::TempDir other("cli_wide");
  const auto wide = fixtures::write_cli_fixture(other, 12);
  const auto r = run({"evaluate", "--checkpoint", ckpt, "--tracks", wide.test_tracks, "--features", wide.store});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("does not match"), std::string::npos);
}

TEST_F(CliTest, ConfigFilesSupplyDefaults) {
  const auto toml = dir_.file("cfg.toml");
  fixtures::write_file(toml, "n-past = 3\nhorizon = 8\nmax-epochs = 2\nrnn = \"lstm\"\nseed = 9\n");
  const auto a = dir_.file("a.ckpt");
  auto r = run({"train", "--config", toml, "--tracks", fx_.train_tracks, "--val-tracks", fx_.val_tracks, "--features",
                fx_.store, "--out", a});
  ASSERT_EQ(r.code, 0) << r.err;
  auto loaded = load_checkpoint(std::filesystem::path(a));
  EXPECT_EQ(loaded.window, (WindowConfig{3, 8}));
  EXPECT_EQ(loaded.seed, 9u);

  const auto js = dir_.file("cfg.json");
  fixtures::write_file(js, R"({"n-past": 4, "horizon": 6, "max-epochs": 1, "rnn": "bdgru", "seed": 3})");
  const auto b = dir_.file("b.ckpt");
  r = run({"train", "--config", js, "--tracks", fx_.train_tracks, "--val-tracks", fx_.val_tracks, "--features", fx_.store,
           "--out", b, "--seed", "11"});
  ASSERT_EQ(r.code, 0) << r.err;
  loaded = load_checkpoint(std::filesystem::path(b));
  EXPECT_EQ(loaded.window, (WindowConfig{4, 6}));
  EXPECT_EQ(loaded.model.config().rnn_type, RnnType::bdgru);
  EXPECT_EQ(loaded.seed, 11u);

  fixtures::write_file(toml, "n-past = 3\nhorizon = 8\nmax-epochs = 1\nmulti-horizon = true\n");
  r = run({"train", "--config=" + toml, "--tracks", fx_.train_tracks, "--val-tracks", fx_.val_tracks, "--features",
           fx_.store, "--out", a});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_checkpoint(std::filesystem::path(a)).model.config().horizon_mode, HorizonMode::multi);

  fixtures::write_file(toml, "hiden = 8\n");
  r = run({"train", "--config", toml, "--tracks", fx_.train_tracks, "--val-tracks", fx_.val_tracks, "--features",
           fx_.store, "--out", a});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("hiden"), std::string::npos);
  EXPECT_EQ(run({"train", "--config", dir_.file("none.toml"), "--tracks", fx_.train_tracks, "--val-tracks",
                 fx_.val_tracks, "--features", fx_.store, "--out", a})
                .code,
            2);
}

TEST_F(CliTest, PlotHistoryAndPredictionCsv) {
  const auto ckpt = dir_.file("m.ckpt");
  ASSERT_EQ(run(train_args(ckpt)).code, 0);
  const auto dat = dir_.file("loss.dat");
  auto r = run({"plot", "--input", ckpt + ".history.jsonl", "--out", dat});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto text = fixtures::read_file(dat);
  EXPECT_EQ(text.rfind("# loss vs epoch", 0), 0u);
  EXPECT_NE(text.find("\n1 "), std::string::npos);

  const auto csv = dir_.file("pred.csv");
  fixtures::write_file(csv, "horizon_frames,probability\n4,0.25\n8,0.5\n");
  r = run({"plot", "--input", csv, "--out", dat});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(fixtures::read_file(dat).find("4 0.25\n8 0.5\n"), std::string::npos);

  fixtures::write_file(csv, "");
  EXPECT_EQ(run({"plot", "--input", csv, "--out", dat}).code, 1);
  fixtures::write_file(csv, "horizon_frames,probability\n4,abc\n");
  r = run({"plot", "--input", csv, "--out", dat});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
  EXPECT_EQ(run({"plot", "--input", dir_.file("absent.csv"), "--out", dat}).code, 2);
}
