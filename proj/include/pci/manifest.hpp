#ifndef PCI_MANIFEST_HPP
#define PCI_MANIFEST_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace pci {

// SHA-1 of "blob <size>\0<content>", as `git hash-object` computes it.
std::string git_blob_hash(const std::string& content);
std::string git_blob_hash_file(const std::filesystem::path& path);

struct ManifestInput {
  std::string role;
  std::string path;
  std::string hash;
};

// Record of one run. The id hashes everything except output paths, so two
// runs over identical inputs and settings share it.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::vector<ManifestInput> inputs;
  std::vector<std::string> outputs;

  void add_input(std::string role, const std::filesystem::path& path);
  std::string id() const;
  nlohmann::json to_json() const;
  void save(const std::filesystem::path& path) const;
};

}  // namespace pci

#endif  // PCI_MANIFEST_HPP
