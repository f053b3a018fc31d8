#ifndef PCI_CHECKPOINT_HPP
#define PCI_CHECKPOINT_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "pci/model.hpp"
#include "pci/optim.hpp"

namespace pci {

struct WindowConfig {
  int n_past = 15;
  int horizon = 30;
  bool operator==(const WindowConfig&) const = default;
};

struct Checkpoint {
  Model<float> model;
  WindowConfig window;
  RescaleMode rescale = RescaleMode::none;
  float global_scale = 0.0f;
  int batch_size = 64;
  std::uint64_t seed = 0;
  std::string manifest_id;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// "PCICKPT1", u32 version, u32 header length, JSON header (config, window,
// rescale, seed, manifest id, parameter layout), u64 parameter count, then
// the flat parameter vector as little-endian float32 in ParamLayout order.
void save_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pci

#endif  // PCI_CHECKPOINT_HPP
