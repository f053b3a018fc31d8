#include "pci/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

#include <json.hpp>

namespace pci {

using nlohmann::json;

std::vector<int> horizon_offsets(int horizon, HorizonMode mode) {
  if (horizon < 1) throw Error("horizon must be at least 1 frame");
  if (mode == HorizonMode::single) return {horizon};
  std::vector<int> offsets;
  offsets.reserve(kMultiHorizonSteps);
  for (int step = 1; step <= kMultiHorizonSteps; ++step) {
    const auto rounded = std::lround(static_cast<double>(horizon) * step / kMultiHorizonSteps);
    offsets.push_back(std::max<int>(1, static_cast<int>(rounded)));
  }
  return offsets;
}

namespace {

class RecordError : public Error {
 public:
  using Error::Error;
};

const json& field(const json& object, const char* name) {
  auto it = object.find(name);
  if (it == object.end()) throw RecordError(std::string("missing field '") + name + "'");
  return *it;
}

int int_field(const json& object, const char* name) {
  const json& value = field(object, name);
  if (!value.is_number_integer()) throw RecordError(std::string("field '") + name + "' must be an integer");
  return value.get<int>();
}

int code_field(const json& object, const char* name, int cardinality) {
  const int code = int_field(object, name);
  if (code < 0 || code >= cardinality) {
    throw RecordError("unknown " + std::string(name) + " " + std::to_string(code));
  }
  return code;
}

FrameRecord parse_frame(const json& j) {
  if (!j.is_object()) throw RecordError("frame must be an object");
  FrameRecord frame;
  frame.frame_index = int_field(j, "frame");

  const json& box = field(j, "bbox");
  if (!box.is_array() || box.size() != 4) throw RecordError("field 'bbox' must be [x1,y1,x2,y2]");
  for (const auto& v : box) {
    if (!v.is_number()) throw RecordError("field 'bbox' must hold numbers");
  }
  frame.bbox = {box[0].get<double>(), box[1].get<double>(), box[2].get<double>(), box[3].get<double>()};
  if (!(frame.bbox.x2 > frame.bbox.x1) || !(frame.bbox.y2 > frame.bbox.y1)) {
    throw RecordError("field 'bbox' requires x2 > x1 and y2 > y1");
  }

  frame.occlusion = static_cast<Occlusion>(code_field(j, "occlusion", 3));
  frame.looking = code_field(j, "looking", 2);
  frame.orientation = static_cast<Orientation>(code_field(j, "orientation", 4));
  frame.movement = static_cast<Movement>(code_field(j, "movement", 2));
  frame.crossing = code_field(j, "crossing", 2);

  const json& size = field(j, "image_size");
  if (!size.is_array() || size.size() != 2 || !size[0].is_number_integer() || !size[1].is_number_integer()) {
    throw RecordError("field 'image_size' must be [w,h] integers");
  }
  frame.image_size = {size[0].get<int>(), size[1].get<int>()};
  if (frame.image_size.width <= 0 || frame.image_size.height <= 0) {
    throw RecordError("field 'image_size' must be positive");
  }
  return frame;
}

PedestrianTrack parse_track(const json& j) {
  if (!j.is_object()) throw RecordError("record must be a JSON object");
  PedestrianTrack track;
  const json& video = field(j, "video_id");
  const json& ped = field(j, "pedestrian_id");
  if (!video.is_string() || !ped.is_string()) throw RecordError("video_id and pedestrian_id must be strings");
  track.video_id = video.get<std::string>();
  track.pedestrian_id = ped.get<std::string>();
  track.frame_rate = int_field(j, "frame_rate");

  const json& frames = field(j, "frames");
  if (!frames.is_array()) throw RecordError("field 'frames' must be an array");
  track.frames.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    try {
      track.frames.push_back(parse_frame(frames[i]));
    } catch (const RecordError& e) {
      throw RecordError("frames[" + std::to_string(i) + "]: " + e.what());
    }
    if (i > 0 && track.frames[i].frame_index <= track.frames[i - 1].frame_index) {
      throw RecordError("frames[" + std::to_string(i) + "]: frame indices must be strictly increasing");
    }
  }
  return track;
}

}  // namespace

std::vector<PedestrianTrack> parse_tracks(std::istream& in) {
  std::vector<PedestrianTrack> tracks;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      tracks.push_back(parse_track(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error("track file line " + std::to_string(line_number) + ": " + e.what());
    } catch (const RecordError& e) {
      throw Error("track file line " + std::to_string(line_number) + ": " + e.what());
    }
  }
  return tracks;
}

std::vector<PedestrianTrack> parse_tracks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open track file " + path.string());
  return parse_tracks(in);
}

void write_tracks(std::ostream& out, const std::vector<PedestrianTrack>& tracks) {
  for (const auto& track : tracks) {
    json frames = json::array();
    for (const auto& f : track.frames) {
      frames.push_back({{"frame", f.frame_index},
                        {"bbox", {f.bbox.x1, f.bbox.y1, f.bbox.x2, f.bbox.y2}},
                        {"occlusion", static_cast<int>(f.occlusion)},
                        {"looking", f.looking},
                        {"orientation", static_cast<int>(f.orientation)},
                        {"movement", static_cast<int>(f.movement)},
                        {"crossing", f.crossing},
                        {"image_size", {f.image_size.width, f.image_size.height}}});
    }
    json record = {{"video_id", track.video_id},
                   {"pedestrian_id", track.pedestrian_id},
                   {"frame_rate", track.frame_rate},
                   {"frames", std::move(frames)}};
    out << record.dump() << '\n';
  }
}

PedestrianTrack downsample_track(const PedestrianTrack& track) {
  if (track.frame_rate == 30) return track;
  if (track.frame_rate != 60) {
    throw Error("unsupported frame rate " + std::to_string(track.frame_rate) + " (expected 30 or 60)");
  }
  PedestrianTrack out = track;
  out.frame_rate = 30;
  out.frames.clear();
  for (std::size_t i = 0; i < track.frames.size(); i += 2) out.frames.push_back(track.frames[i]);
  return out;
}

PedestrianTrack filter_training_track(const PedestrianTrack& track, double min_height, Split split) {
  if (!(min_height > 0)) throw Error("min_height must be positive");
  if (split != Split::train) return track;
  PedestrianTrack out = track;
  std::erase_if(out.frames, [&](const FrameRecord& f) {
    return f.occlusion == Occlusion::full || f.bbox.height() < min_height;
  });
  return out;
}

namespace {

Sample build_window(const PedestrianTrack& track, int t, int n_past, const std::vector<int>& offsets) {
  Sample sample;
  sample.source = {track.video_id, track.pedestrian_id, t};
  sample.frames.assign(track.frames.begin() + (t - n_past), track.frames.begin() + t + 1);
  sample.labels.reserve(offsets.size());
  for (int offset : offsets) sample.labels.push_back(track.frames[static_cast<std::size_t>(t + offset)].crossing);
  return sample;
}

void check_window_args(int n_past, int horizon) {
  if (n_past < 0) throw Error("number of past frames must be non-negative");
  if (horizon < 1) throw Error("horizon must be at least 1 frame");
}

}  // namespace

std::vector<Sample> make_windows(const PedestrianTrack& track, int n_past, int horizon, HorizonMode mode) {
  check_window_args(n_past, horizon);
  const auto offsets = horizon_offsets(horizon, mode);
  const int length = static_cast<int>(track.length());
  std::vector<Sample> samples;
  for (int t = n_past; t <= length - horizon - 1; ++t) samples.push_back(build_window(track, t, n_past, offsets));
  return samples;
}

Sample window_at(const PedestrianTrack& track, int t, int n_past, int horizon, HorizonMode mode) {
  check_window_args(n_past, horizon);
  const int last = static_cast<int>(track.length()) - horizon - 1;
  if (t < n_past || t > last) {
    throw Error("t=" + std::to_string(t) + " outside the valid window range [N, P-M-1] = [" +
                std::to_string(n_past) + ", " + std::to_string(last) + "] for track " + track.video_id + "/" +
                track.pedestrian_id);
  }
  return build_window(track, t, n_past, horizon_offsets(horizon, mode));
}

SquareBox square_bbox(const BBox& bbox, const ImageSize& image) {
  if (!(bbox.x2 > bbox.x1) || !(bbox.y2 > bbox.y1)) throw Error("invalid bbox");
  if (image.width <= 0 || image.height <= 0) throw Error("invalid image size");

  SquareBox result;
  double side = std::max(bbox.width(), bbox.height());
  const double limit = std::min(image.width, image.height);
  if (side > limit) {
    side = limit;
    result.shrunk = true;
  }
  auto place = [side](double center, double extent) {
    double lo = center - 0.5 * side;
    if (lo < 0) lo = 0;
    if (lo + side > extent) lo = extent - side;
    return lo;
  };
  const double x1 = place(bbox.center_x(), image.width);
  const double y1 = place(bbox.center_y(), image.height);
  result.box = {x1, y1, x1 + side, y1 + side};
  return result;
}

std::array<double, 2> normalize_center(const BBox& bbox, const ImageSize& image) {
  if (image.width <= 0 || image.height <= 0) throw Error("image dimensions must be non-zero");
  return {bbox.center_x() / image.width, bbox.center_y() / image.height};
}

PreparedTracks prepare_tracks(const std::vector<PedestrianTrack>& tracks, Split split, double min_height) {
  PreparedTracks prepared;
  for (const auto& track : tracks) {
    auto processed = filter_training_track(downsample_track(track), min_height, split);
    if (processed.frames.empty()) {
      ++prepared.dropped;
      continue;
    }
    prepared.tracks.push_back(std::move(processed));
  }
  if (prepared.dropped > 0) {
    std::clog << "dropped " << prepared.dropped << " track(s) emptied by filtering\n";
  }
  return prepared;
}

}  // namespace pci
