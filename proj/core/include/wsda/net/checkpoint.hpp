#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "wsda/net/model.hpp"

namespace wsda::net {

inline constexpr char kCheckpointMagic[4] = {'W', 'S', 'D', 'A'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout: "WSDA", u32 version, then per tensor until EOF:
//   u64 name length, name bytes, u64 rank, rank x u64 extents, numel x f64 values.
// All integers and reals little-endian.
void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path);

void save_params(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_params(const std::filesystem::path& path, const ModelConfig& config);

}  // namespace wsda::net
