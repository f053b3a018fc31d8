#include "pci/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pci/pci.hpp"

namespace pci {

namespace {

using nlohmann::json;

// TOML through CLI11, or a flat JSON object when the file starts with '{'.
class TomlOrJsonConfig : public CLI::ConfigTOML {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::string text((std::istreambuf_iterator<char>(input)), std::istreambuf_iterator<char>());
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos || text[first] != '{') {
      std::istringstream toml(text);
      return CLI::ConfigTOML::from_config(toml);
    }
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("malformed JSON config: ") + e.what());
    }
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : doc.items()) {
      CLI::ConfigItem item;
      item.name = key;
      auto scalar = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
    return items;
  }
};

void add_config(CLI::App* app, std::string& path) {
  app->add_option("--config", path, "TOML or JSON file supplying flag values (flags override it)")->type_name("FILE");
}

// Splices the subcommand's --config file in as ordinary flags placed before
// the user's own, so explicit flags win under the take-last policy.
std::vector<std::string> expand_config(const CLI::App& app, std::vector<std::string> args) {
  const auto sub_it = std::find_if(args.begin(), args.end(), [&](const std::string& a) {
    return a.empty() || a[0] != '-' ? app.get_subcommand_no_throw(a) != nullptr : false;
  });
  if (sub_it == args.end()) return args;
  const CLI::App* sub = app.get_subcommand_no_throw(*sub_it);
  if (sub->get_option_no_throw("--config") == nullptr) return args;

  std::string path;
  auto it = sub_it + 1;
  for (; it != args.end(); ++it) {
    if (*it == "--config" && it + 1 != args.end()) {
      path = *(it + 1);
      it = args.erase(it, it + 2);
      break;
    }
    if (it->starts_with("--config=")) {
      path = it->substr(9);
      it = args.erase(it);
      break;
    }
  }
  if (path.empty()) return args;

  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::vector<CLI::ConfigItem> items;
  try {
    items = TomlOrJsonConfig().from_config(in);
  } catch (const CLI::Error& e) {
    throw Error("config " + path + ": " + e.what());
  }
  std::vector<std::string> injected;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty() && item.parents != std::vector<std::string>{sub->get_name()}) continue;
    const CLI::Option* opt = sub->get_option_no_throw("--" + item.name);
    if (opt == nullptr || item.name == "config") throw Error("config " + path + ": unknown key '" + item.name + "'");
    if (opt->get_expected_min() == 0) {
      const std::string v = item.inputs.empty() ? "true" : item.inputs.front();
      if (v == "true" || v == "1") injected.push_back("--" + item.name);
      else if (v != "false" && v != "0") throw Error("config " + path + ": '" + item.name + "' must be true or false");
      continue;
    }
    injected.push_back("--" + item.name);
    injected.insert(injected.end(), item.inputs.begin(), item.inputs.end());
  }
  args.insert(sub_it + 1, injected.begin(), injected.end());
  return args;
}

std::filesystem::path index_path_for(const std::string& store, const std::string& index) {
  return index.empty() ? FeatureStore::default_index_path(store) : std::filesystem::path(index);
}

std::vector<Sample> windows_for(const std::vector<PedestrianTrack>& tracks, const WindowConfig& window,
                                HorizonMode mode) {
  std::vector<Sample> samples;
  for (const auto& track : tracks) {
    auto w = make_windows(track, window.n_past, window.horizon, mode);
    std::move(w.begin(), w.end(), std::back_inserter(samples));
  }
  return samples;
}

void require_features(std::span<const Sample> samples, const FeatureStore& store, const std::string& what) {
  const auto missing = missing_features(samples, store);
  if (missing.empty()) return;
  std::string msg = std::to_string(missing.size()) + " feature row(s) missing for " + what + ":";
  for (std::size_t i = 0; i < std::min<std::size_t>(10, missing.size()); ++i) msg += " " + to_string(missing[i]);
  throw Error(msg);
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::train;
  if (text == "validation" || text == "val") return Split::validation;
  if (text == "test") return Split::test;
  throw Error("unknown split '" + text + "'");
}

struct TrainOptions {
  std::string tracks, val_tracks, features, features_index, out, log;
  int n_past = 15;
  int horizon = 30;
  bool multi_horizon = false;
  std::string rnn = "lstm";
  std::string vars = "none";
  bool rescale = false;
  bool rescale_global = false;
  int hidden = 4;
  int layers = 1;
  double dropout = 0.5;
  double lr = 1e-4;
  int patience = 5;
  int batch = 64;
  std::uint64_t seed = 0;
  int max_epochs = 100;
  double min_height = 50.0;
  bool clip = false;
  double pos_weight = 1.0;
};

int cmd_train(const TrainOptions& o, std::ostream& out) {
  if (o.rescale && o.rescale_global) throw Error("--rescale and --rescale-global are mutually exclusive");
  const FeatureStore store = FeatureStore::load(o.features, index_path_for(o.features, o.features_index));

  TrainConfig config;
  config.model.rnn_type = parse_rnn_type(o.rnn);
  config.model.hidden_dim = o.hidden;
  config.model.num_layers = o.layers;
  config.model.dropout = o.dropout;
  config.model.feature_dim = static_cast<int>(store.feature_dim());
  config.model.vars = VariableSet::parse(o.vars);
  config.model.horizon_mode = o.multi_horizon ? HorizonMode::multi : HorizonMode::single;
  config.model.validate();
  config.batch_size = o.batch;
  config.lr = o.lr;
  config.patience = o.patience;
  config.max_epochs = o.max_epochs;
  config.rescale = o.rescale_global ? RescaleMode::global : o.rescale ? RescaleMode::batch : RescaleMode::none;
  if (o.clip) config.clip_norm = 5.0;
  config.pos_weight = o.pos_weight;
  config.seed = o.seed;
  const WindowConfig window{o.n_past, o.horizon};

  const auto train_tracks = prepare_tracks(parse_tracks(std::filesystem::path(o.tracks)), Split::train, o.min_height);
  const auto val_tracks = prepare_tracks(parse_tracks(std::filesystem::path(o.val_tracks)), Split::validation, o.min_height);
  const auto train_samples = windows_for(train_tracks.tracks, window, config.model.horizon_mode);
  const auto val_samples = windows_for(val_tracks.tracks, window, config.model.horizon_mode);
  if (train_samples.empty()) throw Error("no training windows: every track is shorter than N+M+1 frames");
  if (val_samples.empty()) throw Error("no validation windows: every track is shorter than N+M+1 frames");
  require_features(train_samples, store, "training windows");
  require_features(val_samples, store, "validation windows");
  const auto train_set = build_sequences(train_samples, store);
  const auto val_set = build_sequences(val_samples, store);

  RunManifest manifest;
  manifest.command = "train";
  manifest.seed = o.seed;
  manifest.config = {{"model", to_json(config.model)},
                     {"n_past", o.n_past},
                     {"horizon", o.horizon},
                     {"batch", o.batch},
                     {"lr", o.lr},
                     {"patience", o.patience},
                     {"max_epochs", o.max_epochs},
                     {"rescale", to_string(config.rescale)},
                     {"min_height", o.min_height},
                     {"clip", o.clip},
                     {"pos_weight", o.pos_weight}};
  manifest.add_input("train_tracks", o.tracks);
  manifest.add_input("val_tracks", o.val_tracks);
  manifest.add_input("features", o.features);
  manifest.add_input("features_index", index_path_for(o.features, o.features_index));
  const std::string log_path = o.log.empty() ? o.out + ".history.jsonl" : o.log;
  const std::string manifest_path = o.out + ".manifest.json";
  manifest.outputs = {o.out, log_path};
  const std::string manifest_id = manifest.id();

  std::ofstream log(log_path);
  if (!log) throw IoError("cannot write history log " + log_path);
  auto result = train(train_set, val_set, config, [&](const EpochRecord& r) {
    log << json{{"epoch", r.epoch},
                {"train_loss", r.train_loss},
                {"val_loss", std::isfinite(r.val_loss) ? json(r.val_loss) : json(nullptr)},
                {"lr", o.lr},
                {"seed", o.seed},
                {"manifest_id", manifest_id}}
               .dump()
        << '\n';
  });
  log.close();
  if (!log) throw IoError("failed writing history log " + log_path);

  Checkpoint ckpt{std::move(result.model), window, config.rescale, result.global_scale, o.batch, o.seed, manifest_id};
  save_checkpoint(std::filesystem::path(o.out), ckpt);
  manifest.save(manifest_path);

  const auto& h = result.history;
  out << "trained " << to_string(config.model.rnn_type) << " on " << train_set.size() << " windows ("
      << val_set.size() << " validation) for " << h.epochs.size() << " epoch(s); best epoch " << h.best_epoch
      << ", val loss " << h.best_val_loss << ", stop: " << to_string(h.stop_reason) << '\n';
  if (h.stop_reason == StopReason::diverged) throw Error("training diverged (non-finite loss); history saved to " + log_path);
  return kExitOk;
}

struct EvalOptionsCli {
  std::string checkpoint, tracks, features, features_index, split = "test", json_out;
  double threshold = 0.5;
  double min_height = 50.0;
};

int cmd_evaluate(const EvalOptionsCli& o, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(std::filesystem::path(o.checkpoint));
  const FeatureStore store = FeatureStore::load(o.features, index_path_for(o.features, o.features_index));
  if (store.feature_dim() != ckpt.model.config().feature_dim) {
    throw Error("feature store width " + std::to_string(store.feature_dim()) + " does not match checkpoint (" +
                std::to_string(ckpt.model.config().feature_dim) + ")");
  }
  const auto tracks = prepare_tracks(parse_tracks(std::filesystem::path(o.tracks)), parse_split(o.split), o.min_height);
  const auto samples = windows_for(tracks.tracks, ckpt.window, ckpt.model.config().horizon_mode);
  if (samples.empty()) throw Error("no evaluation windows in " + o.tracks);
  require_features(samples, store, "evaluation windows");
  const auto data = build_sequences(samples, store);

  const EvalOptions options{ckpt.batch_size, ckpt.rescale, ckpt.global_scale, o.threshold};
  const Metrics metrics = evaluate(ckpt.model, data, options);
  out << format_table(metrics);
  if (!o.json_out.empty()) {
    std::ofstream js(o.json_out);
    if (!js) throw IoError("cannot write " + o.json_out);
    js << to_json(metrics).dump(2) << '\n';
  }
  return kExitOk;
}

struct PredictOptions {
  std::string checkpoint, tracks, features, features_index, video, pedestrian, out;
  int t = 0;
};

int cmd_predict(const PredictOptions& o, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(std::filesystem::path(o.checkpoint));
  if (ckpt.model.config().horizon_mode != HorizonMode::multi) {
    throw Error("predict needs a multi-horizon checkpoint (train with --multi-horizon)");
  }
  const FeatureStore store = FeatureStore::load(o.features, index_path_for(o.features, o.features_index));
  const auto tracks = parse_tracks(std::filesystem::path(o.tracks));
  auto it = std::find_if(tracks.begin(), tracks.end(), [&](const PedestrianTrack& tr) {
    return tr.video_id == o.video && tr.pedestrian_id == o.pedestrian;
  });
  if (it == tracks.end()) throw Error("no track " + o.video + "/" + o.pedestrian + " in " + o.tracks);
  const PedestrianTrack track = downsample_track(*it);
  const Sample sample = window_at(track, o.t, ckpt.window.n_past, ckpt.window.horizon, HorizonMode::multi);
  const std::vector<Sample> one{sample};
  require_features(one, store, "the requested window");

  const auto data = build_sequences(one, store);
  const auto probs = predict_all(ckpt.model, data, {1, ckpt.rescale, ckpt.global_scale, 0.5}).probs.front();
  const auto offsets = horizon_offsets(ckpt.window.horizon, HorizonMode::multi);

  std::ostringstream csv;
  csv << "horizon_frames,probability\n" << std::setprecision(9);
  for (std::size_t k = 0; k < offsets.size(); ++k) csv << offsets[k] << ',' << probs[static_cast<Index>(k)] << '\n';
  if (o.out.empty()) {
    out << csv.str();
  } else {
    std::ofstream file(o.out);
    if (!file) throw IoError("cannot write " + o.out);
    file << csv.str();
  }
  return kExitOk;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

double parse_number(const std::string& text, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error("malformed CSV line " + std::to_string(line) + ": '" + text + "' is not a number");
  }
}

int cmd_plot(const std::string& input, const std::string& output, std::ostream& out) {
  std::ifstream in(input);
  if (!in) throw IoError("cannot open " + input);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) lines.push_back(line);
  }
  if (lines.empty()) throw Error(input + " is empty");

  std::ostringstream data;
  data << std::setprecision(9);
  if (lines.front().front() == '{') {
    data << "# loss vs epoch\n# epoch train_loss val_loss\n";
    int n = 0;
    for (const auto& line : lines) {
      ++n;
      try {
        const json j = json::parse(line);
        data << j.at("epoch").get<int>() << ' ' << j.at("train_loss").get<double>() << ' ';
        if (j.at("val_loss").is_null()) data << "NaN\n";
        else data << j.at("val_loss").get<double>() << '\n';
      } catch (const json::exception& e) {
        throw Error("malformed history line " + std::to_string(n) + ": " + e.what());
      }
    }
    data << "# gnuplot: plot '" << output << "' using 1:2 with lines title 'train', '' using 1:3 with lines title 'val'\n";
  } else {
    const auto header = split_csv_line(lines.front());
    if (header != std::vector<std::string>{"horizon_frames", "probability"}) {
      throw Error("malformed CSV header (expected horizon_frames,probability)");
    }
    if (lines.size() < 2) throw Error(input + " has no data rows");
    data << "# crossing probability vs horizon\n# horizon_frames probability\n";
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const auto cells = split_csv_line(lines[i]);
      const int line_no = static_cast<int>(i + 1);
      if (cells.size() != 2) throw Error("malformed CSV line " + std::to_string(line_no) + ": expected 2 columns");
      data << parse_number(cells[0], line_no) << ' ' << parse_number(cells[1], line_no) << '\n';
    }
    data << "# gnuplot: plot '" << output << "' using 1:2 with linespoints title 'P(crossing)'\n";
  }

  std::ofstream file(output);
  if (!file) throw IoError("cannot write " + output);
  file << data.str();
  out << "wrote " << output << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pedestrian crossing intention prediction", "pci"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;  // consumed by expand_config

  TrainOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "Train a recurrent crossing classifier");
  add_config(train_cmd, config_path);
  train_cmd->add_option("--tracks", train_opts.tracks, "Training track file (JSON lines)")->required();
  train_cmd->add_option("--val-tracks", train_opts.val_tracks, "Validation track file (JSON lines)")->required();
  train_cmd->add_option("--features", train_opts.features, "Feature store (PCIFEAT1)")->required();
  train_cmd->add_option("--features-index", train_opts.features_index, "Feature index (default <features>.index.json)");
  train_cmd->add_option("--out", train_opts.out, "Checkpoint path")->required();
  train_cmd->add_option("--log", train_opts.log, "History log (default <out>.history.jsonl)");
  train_cmd->add_option("--n-past", train_opts.n_past, "Past frames N")->capture_default_str();
  train_cmd->add_option("--horizon", train_opts.horizon, "Prediction horizon M in frames")->capture_default_str();
  train_cmd->add_flag("--multi-horizon", train_opts.multi_horizon, "Predict 8 equispaced horizons over (0, M]");
  train_cmd->add_option("--rnn", train_opts.rnn, "lstm | gru | bdlstm | bdgru")->capture_default_str();
  train_cmd->add_option("--vars", train_opts.vars, "looking,orientation,movement,center | all | none")
      ->capture_default_str();
  train_cmd->add_flag("--rescale", train_opts.rescale, "Divide image features by the batch maximum");
  train_cmd->add_flag("--rescale-global", train_opts.rescale_global, "Divide image features by the training-set maximum");
  train_cmd->add_option("--hidden", train_opts.hidden, "RNN hidden dimension")->capture_default_str();
  train_cmd->add_option("--layers", train_opts.layers, "Stacked RNN layers (only 1 supported)")->capture_default_str();
  train_cmd->add_option("--dropout", train_opts.dropout, "Dropout on the RNN output")->capture_default_str();
  train_cmd->add_option("--lr", train_opts.lr, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--patience", train_opts.patience, "Validation patience in epochs")->capture_default_str();
  train_cmd->add_option("--batch", train_opts.batch, "Mini-batch size")->capture_default_str();
  train_cmd->add_option("--seed", train_opts.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--max-epochs", train_opts.max_epochs, "Epoch cap")->capture_default_str();
  train_cmd->add_option("--min-height", train_opts.min_height, "Training bbox height filter (pixels)")
      ->capture_default_str();
  train_cmd->add_flag("--clip", train_opts.clip, "Clip gradient L2 norm at 5");
  train_cmd->add_option("--pos-weight", train_opts.pos_weight, "Weight of positive labels in BCE")
      ->capture_default_str();

  EvalOptionsCli eval_opts;
  auto* eval_cmd = app.add_subcommand("evaluate", "Accuracy, precision, recall and AP of a checkpoint");
  add_config(eval_cmd, config_path);
  eval_cmd->add_option("--checkpoint", eval_opts.checkpoint, "Checkpoint path")->required();
  eval_cmd->add_option("--tracks", eval_opts.tracks, "Track file to evaluate on")->required();
  eval_cmd->add_option("--features", eval_opts.features, "Feature store")->required();
  eval_cmd->add_option("--features-index", eval_opts.features_index, "Feature index");
  eval_cmd->add_option("--split", eval_opts.split, "train | validation | test")->capture_default_str();
  eval_cmd->add_option("--json", eval_opts.json_out, "Also write the metrics as JSON");
  eval_cmd->add_option("--threshold", eval_opts.threshold, "Decision threshold")->capture_default_str();
  eval_cmd->add_option("--min-height", eval_opts.min_height, "Height filter when --split train")->capture_default_str();

  PredictOptions pred_opts;
  auto* pred_cmd = app.add_subcommand("predict", "Crossing probability at 8 horizons for one window");
  add_config(pred_cmd, config_path);
  pred_cmd->add_option("--checkpoint", pred_opts.checkpoint, "Multi-horizon checkpoint")->required();
  pred_cmd->add_option("--tracks", pred_opts.tracks, "Track file")->required();
  pred_cmd->add_option("--features", pred_opts.features, "Feature store")->required();
  pred_cmd->add_option("--features-index", pred_opts.features_index, "Feature index");
  pred_cmd->add_option("--video", pred_opts.video, "Video id")->required();
  pred_cmd->add_option("--pedestrian", pred_opts.pedestrian, "Pedestrian id")->required();
  pred_cmd->add_option("--t", pred_opts.t, "Current frame position t")->required();
  pred_cmd->add_option("--out", pred_opts.out, "CSV output (default stdout)");

  std::string plot_in, plot_out;
  auto* plot_cmd = app.add_subcommand("plot", "Gnuplot data file from a history log or prediction CSV");
  plot_cmd->add_option("--input", plot_in, "History log or prediction CSV")->required();
  plot_cmd->add_option("--out", plot_out, "Output data file")->required();

  try {
    std::vector<std::string> reversed = expand_config(app, args);
    std::reverse(reversed.begin(), reversed.end());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitDomain;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  }

  try {
    if (*train_cmd) return cmd_train(train_opts, out);
    if (*eval_cmd) return cmd_evaluate(eval_opts, out);
    if (*pred_cmd) return cmd_predict(pred_opts, out);
    if (*plot_cmd) return cmd_plot(plot_in, plot_out, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  }
  return kExitDomain;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return run_cli(std::vector<std::string>(argv + std::min(argc, 1), argv + argc), out, err);
}

}  // namespace pci
