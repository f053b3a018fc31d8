#include "pci/checkpoint.hpp"

#include <array>
#include <fstream>

#include <json.hpp>

#include "pci/binary_io.hpp"

namespace pci {

namespace {
constexpr std::array<char, 8> kMagic = {'P', 'C', 'I', 'C', 'K', 'P', 'T', '1'};
}

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  nlohmann::json layout = nlohmann::json::array();
  for (const auto& b : ckpt.model.layout().blocks()) {
    layout.push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}});
  }
  const nlohmann::json header = {
      {"config", to_json(ckpt.model.config())},
      {"window", {{"n_past", ckpt.window.n_past}, {"horizon", ckpt.window.horizon}}},
      {"rescale", {{"mode", to_string(ckpt.rescale)}, {"global_scale", ckpt.global_scale}}},
      {"batch_size", ckpt.batch_size},
      {"seed", ckpt.seed},
      {"manifest_id", ckpt.manifest_id},
      {"layout", std::move(layout)}};
  const std::string text = header.dump();

  out.write(kMagic.data(), kMagic.size());
  binary::write_le<std::uint32_t>(out, kCheckpointVersion);
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const auto& params = ckpt.model.parameters();
  binary::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(params.size()));
  binary::write_floats(out, {params.data(), static_cast<std::size_t>(params.size())});
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  save_checkpoint(out, ckpt);
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw Error("not a PCICKPT1 checkpoint");
  const auto version = binary::read_le<std::uint32_t>(in, "checkpoint version");
  if (version != kCheckpointVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = binary::read_le<std::uint32_t>(in, "header length");
  std::string text(header_len, '\0');
  in.read(text.data(), header_len);
  if (!in) throw Error("truncated checkpoint header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed checkpoint header: ") + e.what());
  }

  try {
    Checkpoint ckpt{Model<float>(model_config_from_json(header.at("config"))), {}, RescaleMode::none, 0.0f, 64, 0, {}};
    ckpt.window.n_past = header.at("window").at("n_past").get<int>();
    ckpt.window.horizon = header.at("window").at("horizon").get<int>();
    ckpt.rescale = parse_rescale_mode(header.at("rescale").at("mode").get<std::string>());
    ckpt.global_scale = static_cast<float>(header.at("rescale").at("global_scale").get<double>());
    ckpt.batch_size = header.at("batch_size").get<int>();
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.manifest_id = header.at("manifest_id").get<std::string>();

    const auto& blocks = ckpt.model.layout().blocks();
    const auto& stored = header.at("layout");
    if (stored.size() != blocks.size()) throw Error("checkpoint layout does not match its config");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      if (stored[i].at("name").get<std::string>() != blocks[i].name || stored[i].at("rows").get<Index>() != blocks[i].rows ||
          stored[i].at("cols").get<Index>() != blocks[i].cols) {
        throw Error("checkpoint block " + blocks[i].name + " does not match its config");
      }
    }

    const auto count = binary::read_le<std::uint64_t>(in, "parameter count");
    auto& params = ckpt.model.parameters();
    if (count != static_cast<std::uint64_t>(params.size())) throw Error("checkpoint parameter count mismatch");
    binary::read_floats(in, {params.data(), static_cast<std::size_t>(params.size())}, "parameters");
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed checkpoint header: ") + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

}  // namespace pci
