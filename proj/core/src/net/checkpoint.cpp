#include "wsda/net/checkpoint.hpp"

#include <fstream>

#include "wsda/binary_io.hpp"
#include "wsda/error.hpp"

namespace wsda::net {

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os.write(kCheckpointMagic, 4);
  binary::put_u32(os, kCheckpointVersion);
  for (const auto& nt : tensors) {
    binary::put_u64(os, nt.name.size());
    binary::put_bytes(os, nt.name);
    binary::put_u64(os, nt.value.rank());
    for (std::size_t e : nt.value.shape()) binary::put_u64(os, e);
    for (double v : nt.value.data()) binary::put_f64(os, v);
  }
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  binary::Reader r(is, "checkpoint " + path.string());
  if (r.bytes(4) != std::string(kCheckpointMagic, 4)) throw FormatError("bad checkpoint magic");
  const std::uint32_t version = r.u32();
  if (version > kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) +
                      " is newer than supported version " + std::to_string(kCheckpointVersion));
  }
  std::vector<NamedTensor> out;
  while (!r.at_end()) {
    NamedTensor nt;
    nt.name = r.bytes(r.u64());
    const std::uint64_t rank = r.u64();
    if (rank == 0 || rank > 8) throw FormatError("implausible tensor rank in checkpoint");
    num::Shape shape(rank);
    std::uint64_t numel = 1;
    for (auto& e : shape) {
      e = r.u64();
      if (e == 0 || e > (1u << 30)) throw FormatError("implausible tensor extent in checkpoint");
      numel *= e;
    }
    std::vector<double> vals(numel);
    for (double& v : vals) v = r.f64();
    nt.value = Tensor(std::move(shape), std::move(vals));
    out.push_back(std::move(nt));
  }
  return out;
}

void save_params(const std::filesystem::path& path, const ModelParams& params) {
  write_checkpoint(path, params.flatten());
}

ModelParams load_params(const std::filesystem::path& path, const ModelConfig& config) {
  const auto tensors = read_checkpoint(path);
  return ModelParams::from_flat(config, tensors);
}

}  // namespace wsda::net
