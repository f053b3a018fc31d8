#ifndef PCI_FEATURE_STORE_HPP
#define PCI_FEATURE_STORE_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "pci/types.hpp"

namespace pci {

inline constexpr int kPoolCells = 49;  // 7x7 spatial grid

// Mean over the 7x7 grid of every channel. The map is channel-major
// (channel c occupies [c*49, (c+1)*49)), as emitted by a C x 7 x 7 tensor.
Eigen::VectorXf avg_pool(std::span<const float> feature_map, Index channels = 512);

enum class FeatureLayout : std::uint8_t { pooled = 0, raw = 1 };

struct FeatureKey {
  std::string video_id;
  std::string pedestrian_id;
  int frame = 0;
  auto operator<=>(const FeatureKey&) const = default;
};

std::string to_string(const FeatureKey& key);

// Per-frame image features. Binary file: "PCIFEAT1", u32 row_count,
// u32 row_len, u8 layout, then row_count*row_len little-endian float32.
// The (video, pedestrian, frame) -> row index lives in a JSON sidecar.
class FeatureStore {
 public:
  using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  FeatureStore() = default;
  FeatureStore(FeatureLayout layout, Index row_len);

  FeatureLayout layout() const { return layout_; }
  Index row_len() const { return row_len_; }
  Index row_count() const { return row_len_ == 0 ? 0 : static_cast<Index>(values_.size()) / row_len_; }
  // Width of the vectors handed to the model (channels for raw maps).
  Index feature_dim() const;

  // Appends a row; returns its row number. Throws on duplicate key or width mismatch.
  Index add(const FeatureKey& key, std::span<const float> row);

  bool contains(const FeatureKey& key) const { return index_.contains(key); }
  std::optional<Index> find(const FeatureKey& key) const;

  // Stored row, exactly as on disk.
  std::span<const float> row(Index r) const;
  // Row as a model feature: pooled on the fly for raw layouts.
  Eigen::VectorXf feature(const FeatureKey& key) const;

  const std::map<FeatureKey, Index>& index() const { return index_; }
  Eigen::Map<const RowMatrix> rows() const { return {values_.data(), row_count(), row_len_}; }

  void save(const std::filesystem::path& store_path, const std::filesystem::path& index_path) const;
  static FeatureStore load(const std::filesystem::path& store_path, const std::filesystem::path& index_path);

  static std::filesystem::path default_index_path(const std::filesystem::path& store_path);

 private:
  FeatureLayout layout_ = FeatureLayout::pooled;
  Index row_len_ = 0;
  std::vector<float> values_;  // row-major payload
  std::map<FeatureKey, Index> index_;
};

}  // namespace pci

#endif  // PCI_FEATURE_STORE_HPP
