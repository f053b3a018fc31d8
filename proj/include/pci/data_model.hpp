#ifndef PCI_DATA_MODEL_HPP
#define PCI_DATA_MODEL_HPP

#include <array>
#include <cstddef>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "pci/types.hpp"

namespace pci {

enum class Occlusion { none = 0, partial = 1, full = 2 };
enum class Orientation { front = 0, back = 1, left = 2, right = 3 };
enum class Movement { standing = 0, moving = 1 };

enum class Split { train, validation, test };

// Pixel box with corners (x1, y1) top-left and (x2, y2) bottom-right.
struct BBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }
  bool operator==(const BBox&) const = default;
};

struct ImageSize {
  int width = 0;
  int height = 0;
  bool operator==(const ImageSize&) const = default;
};

struct FrameRecord {
  int frame_index = 0;
  BBox bbox;
  Occlusion occlusion = Occlusion::none;
  int looking = 0;
  Orientation orientation = Orientation::front;
  Movement movement = Movement::standing;
  int crossing = 0;
  ImageSize image_size;
  bool operator==(const FrameRecord&) const = default;
};

struct PedestrianTrack {
  std::string video_id;
  std::string pedestrian_id;
  int frame_rate = 30;
  std::vector<FrameRecord> frames;

  std::size_t length() const { return frames.size(); }
  bool operator==(const PedestrianTrack&) const = default;
};

enum class HorizonMode { single, multi };

inline constexpr int kMultiHorizonSteps = 8;

// Frame offsets of the predicted labels relative to the current frame t.
// Single mode predicts t+M only; multi mode predicts eight equispaced offsets
// over (0, M], rounded to the nearest frame and at least one frame ahead.
std::vector<int> horizon_offsets(int horizon, HorizonMode mode);

struct SampleSource {
  std::string video_id;
  std::string pedestrian_id;
  int t = 0;  // position of the current frame inside the track
  bool operator==(const SampleSource&) const = default;
};

// One input window: frames t-N..t and the crossing labels at each horizon offset.
struct Sample {
  std::vector<FrameRecord> frames;
  std::vector<int> labels;
  SampleSource source;
};

std::vector<PedestrianTrack> parse_tracks(std::istream& in);
std::vector<PedestrianTrack> parse_tracks(const std::filesystem::path& path);
void write_tracks(std::ostream& out, const std::vector<PedestrianTrack>& tracks);

// 60 fps tracks keep every second frame (original frame indices are kept);
// 30 fps tracks pass through.
PedestrianTrack downsample_track(const PedestrianTrack& track);

// Drops fully occluded frames and frames shorter than min_height. Only the
// training split is filtered; other splits are returned unchanged.
PedestrianTrack filter_training_track(const PedestrianTrack& track, double min_height = 50.0,
                                      Split split = Split::train);

// Windows are cut by list position, t in [N, P-M-1], so the count is max(0, P-N-M).
std::vector<Sample> make_windows(const PedestrianTrack& track, int n_past, int horizon,
                                 HorizonMode mode = HorizonMode::single);

// The single window ending at position t. Throws when t lies outside [N, P-M-1].
Sample window_at(const PedestrianTrack& track, int t, int n_past, int horizon,
                 HorizonMode mode = HorizonMode::single);

struct SquareBox {
  BBox box;
  bool shrunk = false;  // side had to be reduced to fit the image
};

SquareBox square_bbox(const BBox& bbox, const ImageSize& image);

std::array<double, 2> normalize_center(const BBox& bbox, const ImageSize& image);

// Downsample every track, filter the training split and drop emptied tracks.
struct PreparedTracks {
  std::vector<PedestrianTrack> tracks;
  std::size_t dropped = 0;
};
PreparedTracks prepare_tracks(const std::vector<PedestrianTrack>& tracks, Split split,
                              double min_height = 50.0);

}  // namespace pci

#endif  // PCI_DATA_MODEL_HPP
