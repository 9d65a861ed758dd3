#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sap/mlp.hpp"

namespace sap::ad {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointHeader {
  std::uint32_t version = kCheckpointVersion;
  std::string module;
  std::vector<std::uint64_t> widths;
  std::string activation = "relu";
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  // Free-form tags (layout name, env, config hash). Written sorted by key.
  std::map<std::string, std::string> meta;
};

struct Checkpoint {
  CheckpointHeader header;
  Mlp net;
};

std::string encode_checkpoint(const CheckpointHeader& header, const Mlp& net);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const CheckpointHeader& header,
                     const Mlp& net);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sap::ad
