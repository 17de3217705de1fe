#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pcgs/byte_io.hpp"
#include "pcgs/codec.hpp"
#include "pcgs/core_model.hpp"

namespace pcgs {

inline constexpr char kModelMagic[] = "PCGSMODL";
inline constexpr uint16_t kModelVersion = 1;

// Scene/model interchange file: magic, version, then tagged chunks LCFG,
// LOCS, FEAT, SCAL, OFFS, MASK, HASH, NETW.
std::vector<uint8_t> write_scene_model(const SceneModel& model);
SceneModel read_scene_model(std::span<const uint8_t> bytes);

// Same container with a RECO chunk (level, presence masks) in place of
// the model chunks; absent anchors and Gaussians are written as zeros.
std::vector<uint8_t> write_reconstruction(const Reconstruction& recon);

struct ReconstructionFile {
  int level = 0;
  AnchorScene values;
  std::vector<uint8_t> anchor_present;
  std::vector<uint8_t> gauss_present;
};
ReconstructionFile read_reconstruction(std::span<const uint8_t> bytes);

// Section payloads shared with the bitstream header.
void put_level_config(ByteWriter& w, const LevelConfig& cfg);
LevelConfig get_level_config(ByteReader& r);
void put_hash_grid(ByteWriter& w, const HashGrid& grid);
HashGrid get_hash_grid(ByteReader& r);
void put_entropy_net(ByteWriter& w, const EntropyNet& net);  // excludes the grid
EntropyNet get_entropy_net(ByteReader& r);

std::vector<uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes);

}  // namespace pcgs
