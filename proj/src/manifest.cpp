#include "pci/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>

#include <openssl/evp.h>

#include "pci/types.hpp"

namespace pci {

namespace {
std::string sha1_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha1(), nullptr) != 1) {
    throw Error("SHA-1 digest failed");
  }
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < length; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}
}  // namespace

std::string git_blob_hash(const std::string& content) {
  std::string blob = "blob " + std::to_string(content.size());
  blob.push_back('\0');
  blob += content;
  return sha1_hex(blob);
}

std::string git_blob_hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return git_blob_hash(content);
}

void RunManifest::add_input(std::string role, const std::filesystem::path& path) {
  inputs.push_back({std::move(role), path.string(), git_blob_hash_file(path)});
}

std::string RunManifest::id() const {
  nlohmann::json identity = {{"command", command}, {"config", config}, {"seed", seed}};
  nlohmann::json hashes = nlohmann::json::array();
  for (const auto& input : inputs) hashes.push_back({input.role, input.hash});
  identity["inputs"] = std::move(hashes);
  return git_blob_hash(identity.dump());
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json in = nlohmann::json::array();
  for (const auto& input : inputs) in.push_back({{"role", input.role}, {"path", input.path}, {"hash", input.hash}});
  return {{"id", id()}, {"command", command}, {"config", config}, {"seed", seed}, {"inputs", std::move(in)},
          {"outputs", outputs}};
}

void RunManifest::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << to_json().dump(2) << '\n';
}

}  // namespace pci
