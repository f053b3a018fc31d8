// One PASS/FAIL line per acceptance criterion; exit status is the failure count.
#include <chrono>
#include <functional>
#include <iostream>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "pci/cli.hpp"

using namespace pci;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass;
  std::string detail;
};

int cli(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = run_cli(args, o, e);
  if (out) *out = o.str();
  return code;
}

Outcome gradient_suite() {
  const auto start = Clock::now();
  double worst = 0;
  std::string where;
  int instances = 0;
  for (RnnType type : {RnnType::lstm, RnnType::gru, RnnType::bdlstm, RnnType::bdgru}) {
    for (const VariableSet& vars : {VariableSet::none(), VariableSet::all()}) {
      for (int k = 0; k < 20; ++k) {
        ModelConfig config;
        config.rnn_type = type;
        config.hidden_dim = 2 + k % 3;
        config.feature_dim = 3 + k % 4;
        config.vars = vars;
        config.horizon_mode = k % 4 == 3 ? HorizonMode::multi : HorizonMode::single;
        Model<double> model(config);
        std::mt19937_64 rng(1000 + 37 * k + 7 * static_cast<int>(type));
        initialize(model, rng);
        std::vector<SequenceInput> batch;
        for (int n = 0; n < 2; ++n) {
          batch.push_back(fixtures::random_sequence(rng, config.feature_dim, 2 + (k + n) % 4, config.output_dim()));
        }
        std::vector<VectorX<double>> masks;
        if (k % 2) {
          for (int n = 0; n < 2; ++n) masks.push_back(dropout_mask<double>(config.readout_dim(), 0.5, rng));
        }
        const auto report = grad_check(model, batch, masks, 1e-5);
        ++instances;
        if (report.max_relative_error > worst) {
          worst = report.max_relative_error;
          where = std::string(to_string(type)) + "/" + vars.to_string() + " " + report.worst_parameter;
        }
      }
    }
  }
  const double elapsed = seconds_since(start);
  std::ostringstream d;
  d << instances << " instances, max rel err " << worst << " (" << where << "), " << elapsed << " s";
  return {worst < 1e-4 && elapsed < 60.0, d.str()};
}

Outcome ap_oracle() {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> level(0, 3);
  int cases = 0;
  double worst = 0;
  for (int n = 1; n <= 8; ++n) {
    for (int pattern = 1; pattern < (1 << n); ++pattern) {
      std::vector<int> y(n);
      for (int i = 0; i < n; ++i) y[i] = (pattern >> i) & 1;
      for (int draw = 0; draw < 3; ++draw) {
        std::vector<double> p(n);
        for (auto& v : p) v = draw == 2 ? level(rng) / 3.0 : u(rng);
        worst = std::max(worst, std::abs(average_precision(p, y) - oracle::average_precision(p, y)));
        ++cases;
      }
    }
  }
  const double fifty = average_precision(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 0});
  std::ostringstream d;
  d << cases << " cases, max |diff| " << worst << ", inverted pair AP " << fifty;
  return {cases >= 1000 && worst < 1e-9 && std::abs(fifty - 50.0) < 1e-9, d.str()};
}

Outcome windowing_law() {
  int combos = 0, bad = 0, zero_ok = 0, zero_total = 0;
  for (int p = 1; p <= 30; ++p) {
    const auto track = fixtures::simple_track(p);
    for (int n = 0; n <= p; ++n) {
      for (int m = 1; m <= p; ++m) {
        const auto samples = make_windows(track, n, m);
        const auto expected = oracle::window_positions(p, n, m);
        bool ok = samples.size() == expected.size() && static_cast<int>(samples.size()) == std::max(0, p - n - m);
        for (std::size_t k = 0; ok && k < samples.size(); ++k) ok = samples[k].source.t == expected[k];
        bad += !ok;
        ++combos;
        if (p == n + m) {
          ++zero_total;
          zero_ok += samples.empty();
        }
      }
    }
  }
  std::ostringstream d;
  d << combos << " (P,N,M) combinations, " << bad << " mismatches, " << zero_ok << "/" << zero_total
    << " empty at P=N+M";
  return {bad == 0 && zero_ok == zero_total, d.str()};
}

Outcome determinism() {
  fixtures::TempDir dir("accept_det");
  const auto fx = fixtures::write_cli_fixture(dir);
  auto args = [&](const std::string& out) {
    return std::vector<std::string>{"train", "--tracks", fx.train_tracks, "--val-tracks", fx.val_tracks, "--features",
                                    fx.store, "--out", out, "--n-past", "3", "--horizon", "8", "--batch", "8", "--lr",
                                    "0.01", "--max-epochs", "5", "--seed", "42", "--vars", "all", "--rnn", "bdlstm"};
  };
  const auto a = dir.file("run_a.ckpt"), b = dir.file("run_b.ckpt");
  if (cli(args(a)) != 0 || cli(args(b)) != 0) return {false, "train failed"};
  const bool logs = fixtures::read_file(a + ".history.jsonl") == fixtures::read_file(b + ".history.jsonl");
  const bool ckpts = fixtures::read_file(a) == fixtures::read_file(b);
  std::ostringstream d;
  d << "history logs " << (logs ? "identical" : "differ") << ", checkpoints " << (ckpts ? "identical" : "differ");
  return {logs && ckpts, d.str()};
}

Outcome capacity() {
  const auto start = Clock::now();
  const auto data = fixtures::separable_set(20, 8, 4);
  TrainConfig config;
  config.model.rnn_type = RnnType::lstm;
  config.model.hidden_dim = 4;
  config.model.feature_dim = 8;
  config.lr = 1e-2;
  config.batch_size = 4;
  config.max_epochs = 200;
  config.patience = 200;
  config.seed = 1;
  const auto result = train(data, data, config);
  const double accuracy = evaluate(result.model, data, {}).accuracy;
  const double elapsed = seconds_since(start);

  TrainConfig flat = config;
  flat.lr = 0.0;
  flat.max_epochs = 50;
  flat.patience = 5;
  const auto plateau = train(data, data, flat);
  const bool stops = plateau.history.epochs.size() == 6 && plateau.history.best_epoch == 1 &&
                     plateau.history.stop_reason == StopReason::patience;

  std::ostringstream d;
  d << "train acc " << accuracy << "% after " << result.history.epochs.size() << " epochs (best epoch "
    << result.history.best_epoch << "), " << elapsed << " s; plateau stopped after " << plateau.history.epochs.size() << " epochs, best epoch "
    << plateau.history.best_epoch;
  return {accuracy >= 95.0 && elapsed < 30.0 && stops, d.str()};
}

Outcome degenerate_predictor() {
  ModelConfig config;
  config.feature_dim = 4;
  Model<float> all_positive(config);
  all_positive.block("head.b").setConstant(3.0f);
  std::mt19937_64 rng(62);
  std::vector<SequenceInput> data;
  for (int i = 0; i < 300; ++i) {
    auto seq = fixtures::random_sequence(rng, 4, 3, 1);
    seq.labels[0] = i < 188 ? 1.0f : 0.0f;
    data.push_back(std::move(seq));
  }
  const auto m = evaluate(all_positive, data, {});
  const std::string table = format_table(m);
  const bool ok = std::abs(m.accuracy - 62.67) < 0.01 && std::abs(m.precision - 62.67) < 0.01 &&
                  std::abs(m.recall - 100.0) < 0.01 && table.find("  62.67   62.67  100.00") != std::string::npos;
  std::ostringstream d;
  d << "Acc " << m.accuracy << ", P " << m.precision << ", R " << m.recall << " on 188/300 positives";
  return {ok, d.str()};
}

Outcome embedding_table() {
  const bool dims = embed_dim(2) == 2 && embed_dim(4) == 3 && embed_dim(120) == 50;
  ModelConfig config;
  config.vars = VariableSet::all();
  Model<float> model(config);
  SequenceInput seq;
  FrameInput f;
  f.image = Eigen::VectorXf::Ones(512);
  f.codes = {1, 2, 0};
  f.center = Eigen::Vector2f(0.5f, 0.5f);
  seq.frames.push_back(f);
  const auto width = build_inputs(seq, model).rows();
  std::ostringstream d;
  d << "embed_dim 2->" << embed_dim(2) << " 4->" << embed_dim(4) << " 120->" << embed_dim(120) << ", input width "
    << width << " (extra " << config.vars.extra_width() << ")";
  return {dims && width == 521 && config.vars.extra_width() == 9, d.str()};
}

Outcome multi_horizon() {
  fixtures::TempDir dir("accept_multi");
  const auto fx = fixtures::write_cli_fixture(dir);
  const auto ckpt = dir.file("multi.ckpt");
  const int n = 3, m = 8, p = 24;
  if (cli({"train", "--tracks", fx.train_tracks, "--val-tracks", fx.val_tracks, "--features", fx.store, "--out", ckpt,
           "--n-past", std::to_string(n), "--horizon", std::to_string(m), "--multi-horizon", "--max-epochs", "3",
           "--lr", "0.01", "--batch", "8", "--rnn", "bdgru"}) != 0) {
    return {false, "train failed"};
  }
  auto predict = [&](int t, std::string* out) {
    return cli({"predict", "--checkpoint", ckpt, "--tracks", fx.test_tracks, "--features", fx.store, "--video",
                "test_video1", "--pedestrian", "ped2", "--t", std::to_string(t)},
               out);
  };
  int in_range = 0, rows = 0;
  bool all_ok = true;
  for (int t = n; t <= p - m - 1; ++t) {
    std::string out;
    if (predict(t, &out) != 0) {
      all_ok = false;
      continue;
    }
    std::istringstream csv(out);
    std::string line;
    std::getline(csv, line);
    int count = 0;
    while (std::getline(csv, line)) {
      const double prob = std::stod(line.substr(line.find(',') + 1));
      in_range += prob > 0.0 && prob < 1.0;
      ++count;
      ++rows;
    }
    all_ok = all_ok && count == kMultiHorizonSteps;
  }
  const bool below = predict(n - 1, nullptr) == kExitDomain;
  const bool above = predict(p - m, nullptr) == kExitDomain;
  std::ostringstream d;
  d << rows << " probabilities over t in [" << n << ", " << p - m - 1 << "], " << in_range << " inside (0,1); t="
    << n - 1 << (below ? " rejected" : " accepted") << ", t=" << p - m << (above ? " rejected" : " accepted");
  return {all_ok && in_range == rows && below && above, d.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"average precision oracle", ap_oracle},
      {"windowing law", windowing_law},
      {"training determinism", determinism},
      {"capacity and early stopping", capacity},
      {"degenerate all-positive predictor", degenerate_predictor},
      {"embedding sizes", embedding_table},
      {"multi-horizon prediction", multi_horizon},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    failures += !outcome.pass;
    std::cout << (outcome.pass ? "PASS" : "FAIL") << "  " << name << ": " << outcome.detail << std::endl;
  }
  return failures;
}
