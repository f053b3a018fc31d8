// Deterministic synthetic data shared by the unit and acceptance suites.
#ifndef PCI_TESTS_FIXTURES_HPP
#define PCI_TESTS_FIXTURES_HPP

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "pci/pci.hpp"

namespace fixtures {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("pci_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

// Sequence with random image features, codes and center.
inline pci::SequenceInput random_sequence(std::mt19937_64& rng, int feature_dim, int length, int outputs) {
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  std::uniform_int_distribution<int> bit(0, 1), orient(0, 3);
  pci::SequenceInput seq;
  for (int t = 0; t < length; ++t) {
    pci::FrameInput f;
    f.image = Eigen::VectorXf::NullaryExpr(feature_dim, [&] { return unit(rng); });
    f.codes.looking = bit(rng);
    f.codes.orientation = orient(rng);
    f.codes.movement = bit(rng);
    f.center = Eigen::Vector2f(unit(rng), unit(rng));
    seq.frames.push_back(std::move(f));
  }
  seq.labels = Eigen::VectorXf::NullaryExpr(outputs, [&] { return static_cast<float>(bit(rng)); });
  return seq;
}

// Linearly separable set: feature 0 of every frame sits in [0.7, 1.0] for
// crossing sequences and [0.0, 0.3] otherwise; other features are noise.
inline std::vector<pci::SequenceInput> separable_set(int count = 20, int dim = 8, int length = 4,
                                                     std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> noise(0.0f, 1.0f), band(0.0f, 0.3f);
  std::vector<pci::SequenceInput> set;
  for (int i = 0; i < count; ++i) {
    const int label = i % 2;
    pci::SequenceInput seq = random_sequence(rng, dim, length, 1);
    for (auto& f : seq.frames) {
      f.image = Eigen::VectorXf::NullaryExpr(dim, [&] { return noise(rng); });
      f.image[0] = label ? 0.7f + band(rng) : band(rng);
    }
    seq.labels = Eigen::VectorXf::Constant(1, static_cast<float>(label));
    seq.source = {"sep", std::to_string(i), length - 1};
    set.push_back(std::move(seq));
  }
  return set;
}

inline pci::FrameRecord frame_record(int index, double height, int crossing = 0,
                                     pci::Occlusion occ = pci::Occlusion::none) {
  pci::FrameRecord f;
  f.frame_index = index;
  f.bbox = {900.0, 500.0, 900.0 + height / 2, 500.0 + height};
  f.occlusion = occ;
  f.crossing = crossing;
  f.image_size = {1920, 1080};
  return f;
}

inline pci::PedestrianTrack simple_track(int length, int frame_rate = 30, const std::string& video = "v",
                                         const std::string& ped = "p") {
  pci::PedestrianTrack track{video, ped, frame_rate, {}};
  for (int i = 0; i < length; ++i) track.frames.push_back(frame_record(i, 100.0, i >= length / 2 ? 1 : 0));
  return track;
}

struct CliFixture {
  std::string train_tracks, val_tracks, test_tracks, store;
  int feature_dim = 8;
};

// Track files plus a pooled feature store. Pedestrians start crossing
// part-way through; feature 0 rises ahead of the crossing label.
inline CliFixture write_cli_fixture(const TempDir& dir, int feature_dim = 8, int length = 24) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<float> noise(0.0f, 1.0f);
  std::uniform_int_distribution<int> onset_dist(6, length + 6);
  pci::FeatureStore store(pci::FeatureLayout::pooled, feature_dim);

  auto make_split = [&](const std::string& name, int tracks, const std::string& path) {
    std::vector<pci::PedestrianTrack> out;
    for (int k = 0; k < tracks; ++k) {
      const int rate = (k == 0) ? 60 : 30;
      const int frames = rate == 60 ? 2 * length : length;
      const int onset = onset_dist(rng) * (rate / 30);
      pci::PedestrianTrack track{name + "_video" + std::to_string(k / 2), "ped" + std::to_string(k), rate, {}};
      for (int i = 0; i < frames; ++i) {
        pci::FrameRecord f;
        f.frame_index = 100 + i;
        const double height = (i % 11 == 5) ? 40.0 : 120.0;
        f.bbox = {400.0 + 10.0 * i, 300.0, 400.0 + 10.0 * i + height / 2, 300.0 + height};
        f.occlusion = (i % 13 == 7) ? pci::Occlusion::full : (i % 5 == 1 ? pci::Occlusion::partial : pci::Occlusion::none);
        f.looking = (i / 3) % 2;
        f.orientation = static_cast<pci::Orientation>((k + i / 4) % 4);
        f.movement = i >= onset - 6 * (rate / 30) ? pci::Movement::moving : pci::Movement::standing;
        f.crossing = i >= onset ? 1 : 0;
        f.image_size = {1920, 1080};
        track.frames.push_back(f);

        Eigen::VectorXf row = Eigen::VectorXf::NullaryExpr(feature_dim, [&] { return 4.0f * noise(rng); });
        row[0] = (i >= onset - 8 * (rate / 30) ? 6.0f : 1.0f) + noise(rng);
        store.add({track.video_id, track.pedestrian_id, f.frame_index}, {row.data(), static_cast<std::size_t>(row.size())});
      }
      out.push_back(std::move(track));
    }
    std::ofstream file(path);
    pci::write_tracks(file, out);
  };

  CliFixture fx;
  fx.feature_dim = feature_dim;
  fx.train_tracks = dir.file("train.jsonl");
  fx.val_tracks = dir.file("val.jsonl");
  fx.test_tracks = dir.file("test.jsonl");
  fx.store = dir.file("features.bin");
  make_split("train", 8, fx.train_tracks);
  make_split("val", 4, fx.val_tracks);
  make_split("test", 4, fx.test_tracks);
  store.save(fx.store, pci::FeatureStore::default_index_path(fx.store));
  return fx;
}

}  // namespace fixtures

#endif  // PCI_TESTS_FIXTURES_HPP
