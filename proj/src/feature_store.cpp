#include "pci/feature_store.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "pci/binary_io.hpp"

namespace pci {

namespace {
constexpr std::array<char, 8> kMagic = {'P', 'C', 'I', 'F', 'E', 'A', 'T', '1'};
}

Eigen::VectorXf avg_pool(std::span<const float> feature_map, Index channels) {
  if (channels <= 0 || static_cast<Index>(feature_map.size()) != channels * kPoolCells) {
    throw Error("avg_pool expects " + std::to_string(channels) + "x7x7 = " +
                std::to_string(channels * kPoolCells) + " values, got " + std::to_string(feature_map.size()));
  }
  Eigen::Map<const Eigen::MatrixXf> grid(feature_map.data(), kPoolCells, channels);
  return grid.colwise().mean().transpose();
}

std::string to_string(const FeatureKey& key) {
  return key.video_id + "/" + key.pedestrian_id + "/" + std::to_string(key.frame);
}

FeatureStore::FeatureStore(FeatureLayout layout, Index row_len) : layout_(layout), row_len_(row_len) {
  if (row_len <= 0) throw Error("feature row length must be positive");
  if (layout == FeatureLayout::raw && row_len % kPoolCells != 0) {
    throw Error("raw feature rows must hold C x 7 x 7 values");
  }
}

Index FeatureStore::feature_dim() const {
  return layout_ == FeatureLayout::raw ? row_len() / kPoolCells : row_len();
}

Index FeatureStore::add(const FeatureKey& key, std::span<const float> row) {
  if (static_cast<Index>(row.size()) != row_len()) {
    throw Error("row for " + to_string(key) + " has " + std::to_string(row.size()) + " values, store expects " +
                std::to_string(row_len()));
  }
  if (index_.contains(key)) throw Error("duplicate feature row for " + to_string(key));
  const Index r = row_count();
  values_.insert(values_.end(), row.begin(), row.end());
  index_.emplace(key, r);
  return r;
}

std::optional<Index> FeatureStore::find(const FeatureKey& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const float> FeatureStore::row(Index r) const {
  if (r < 0 || r >= row_count()) throw Error("feature row out of range");
  return std::span<const float>(values_).subspan(static_cast<std::size_t>(r * row_len_),
                                                 static_cast<std::size_t>(row_len_));
}

Eigen::VectorXf FeatureStore::feature(const FeatureKey& key) const {
  auto r = find(key);
  if (!r) throw Error("missing feature row for " + to_string(key));
  auto values = row(*r);
  if (layout_ == FeatureLayout::raw) return avg_pool(values, feature_dim());
  return Eigen::Map<const Eigen::VectorXf>(values.data(), row_len());
}

std::filesystem::path FeatureStore::default_index_path(const std::filesystem::path& store_path) {
  auto p = store_path;
  p += ".index.json";
  return p;
}

void FeatureStore::save(const std::filesystem::path& store_path, const std::filesystem::path& index_path) const {
  {
    std::ofstream out(store_path, std::ios::binary);
    if (!out) throw IoError("cannot write feature store " + store_path.string());
    out.write(kMagic.data(), kMagic.size());
    binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(row_count()));
    binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(row_len()));
    binary::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(layout_));
    binary::write_floats(out, values_);
    if (!out) throw IoError("failed writing feature store " + store_path.string());
  }

  nlohmann::json rows = nlohmann::json::array();
  std::vector<const std::pair<const FeatureKey, Index>*> by_row(static_cast<std::size_t>(row_count()));
  for (const auto& entry : index_) by_row[static_cast<std::size_t>(entry.second)] = &entry;
  for (const auto* entry : by_row) {
    if (entry == nullptr) continue;
    rows.push_back({{"video_id", entry->first.video_id},
                    {"pedestrian_id", entry->first.pedestrian_id},
                    {"frame", entry->first.frame},
                    {"row", entry->second}});
  }
  std::ofstream idx(index_path);
  if (!idx) throw IoError("cannot write feature index " + index_path.string());
  idx << nlohmann::json{{"rows", std::move(rows)}}.dump(1) << '\n';
}

FeatureStore FeatureStore::load(const std::filesystem::path& store_path, const std::filesystem::path& index_path) {
  std::ifstream in(store_path, std::ios::binary);
  if (!in) throw IoError("cannot open feature store " + store_path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw Error(store_path.string() + " is not a PCIFEAT1 feature store");
  const auto row_count = binary::read_le<std::uint32_t>(in, "row_count");
  const auto row_len = binary::read_le<std::uint32_t>(in, "row_len");
  const auto layout = binary::read_le<std::uint8_t>(in, "layout flag");
  if (layout > 1) throw Error("unknown feature layout flag " + std::to_string(layout));

  const auto payload = static_cast<std::uintmax_t>(row_count) * row_len * sizeof(float);
  if (payload != std::filesystem::file_size(store_path) - 17) {
    throw Error(store_path.string() + ": header declares " + std::to_string(row_count) + "x" + std::to_string(row_len) +
                " floats but the payload size differs");
  }

  FeatureStore store(static_cast<FeatureLayout>(layout), row_len);
  store.values_.resize(static_cast<std::size_t>(row_count) * row_len);
  binary::read_floats(in, store.values_, "feature payload");
  if (in.peek() != std::char_traits<char>::eof()) throw Error("trailing bytes after feature payload");

  std::ifstream idx(index_path);
  if (!idx) throw IoError("cannot open feature index " + index_path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(idx);
    for (const auto& entry : doc.at("rows")) {
      FeatureKey key{entry.at("video_id").get<std::string>(), entry.at("pedestrian_id").get<std::string>(),
                     entry.at("frame").get<int>()};
      const Index r = entry.at("row").get<Index>();
      if (r < 0 || r >= store.row_count()) throw Error("index row " + std::to_string(r) + " out of range");
      if (!store.index_.emplace(key, r).second) throw Error("duplicate index entry " + to_string(key));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed feature index " + index_path.string() + ": " + e.what());
  }
  return store;
}

}  // namespace pci
