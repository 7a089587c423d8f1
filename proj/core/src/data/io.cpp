#include <fstream>

#include "wsda/binary_io.hpp"
#include "wsda/data/dataset.hpp"
#include "wsda/error.hpp"

namespace wsda::data {

namespace {

void put_str(std::ostream& os, const std::string& s) {
  binary::put_u32(os, static_cast<std::uint32_t>(s.size()));
  binary::put_bytes(os, s);
}

void put_reals(std::ostream& os, const std::vector<double>& v) {
  binary::put_u64(os, v.size());
  for (double x : v) binary::put_f64(os, x);
}

void put_tensor(std::ostream& os, const Tensor& t) {
  binary::put_u64(os, t.rank());
  for (std::size_t e : t.shape()) binary::put_u64(os, e);
  for (double x : t.data()) binary::put_f64(os, x);
}

std::string get_str(binary::Reader& r) { return r.bytes(r.u32()); }

std::uint64_t get_count(binary::Reader& r, std::uint64_t limit = (1ull << 32)) {
  const std::uint64_t n = r.u64();
  if (n > limit) throw FormatError("dataset: implausible count field");
  return n;
}

std::vector<double> get_reals(binary::Reader& r) {
  std::vector<double> v(get_count(r, 1ull << 28));
  for (double& x : v) x = r.f64();
  return v;
}

Tensor get_tensor(binary::Reader& r) {
  const std::uint64_t rank = r.u64();
  if (rank == 0 || rank > 8) throw FormatError("dataset: implausible tensor rank");
  num::Shape shape(rank);
  std::uint64_t numel = 1;
  for (auto& e : shape) {
    e = r.u64();
    if (e == 0 || e > (1u << 24)) throw FormatError("dataset: implausible tensor extent");
    numel *= e;
  }
  if (numel > (1ull << 28)) throw FormatError("dataset: implausible tensor size");
  std::vector<double> vals(numel);
  for (double& x : vals) x = r.f64();
  return Tensor(std::move(shape), std::move(vals));
}

void put_spec(std::ostream& os, const GenSpec& s) {
  for (std::uint64_t v : {std::uint64_t{s.seed}, std::uint64_t{s.subjects},
                          std::uint64_t{s.sequences}, std::uint64_t{s.frames},
                          std::uint64_t{s.channels}, std::uint64_t{s.height},
                          std::uint64_t{s.width}, std::uint64_t{s.bumps_min},
                          std::uint64_t{s.bumps_max}, std::uint64_t{s.window},
                          std::uint64_t{s.stride}}) {
    binary::put_u64(os, v);
  }
  for (double v : {s.bump_width_min, s.bump_width_max, s.peak_min, s.peak_max, s.shift, s.noise,
                   s.amplitude}) {
    binary::put_f64(os, v);
  }
}

GenSpec get_spec(binary::Reader& r) {
  GenSpec s;
  s.seed = r.u64();
  s.subjects = r.u64();
  s.sequences = r.u64();
  s.frames = r.u64();
  s.channels = r.u64();
  s.height = r.u64();
  s.width = r.u64();
  s.bumps_min = r.u64();
  s.bumps_max = r.u64();
  s.window = r.u64();
  s.stride = r.u64();
  s.bump_width_min = r.f64();
  s.bump_width_max = r.f64();
  s.peak_min = r.f64();
  s.peak_max = r.f64();
  s.shift = r.f64();
  s.noise = r.f64();
  s.amplitude = r.f64();
  return s;
}

}  // namespace

void dataset_write(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open dataset for writing: " + path.string());
  os.write(kDatasetMagic, 4);
  binary::put_u32(os, kDatasetVersion);
  put_spec(os, dataset.spec);
  binary::put_u64(os, dataset.bags.size());
  for (const auto& bag : dataset.bags) {
    put_str(os, bag.id);
    put_str(os, bag.subject);
    put_str(os, bag.sequence);
    binary::put_u32(os, static_cast<std::uint32_t>(bag.domain));
    binary::put_f64(os, bag.label);
    binary::put_u64(os, bag.first_frame);
    put_reals(os, bag.hidden);
    put_reals(os, bag.frame_labels);
    binary::put_u64(os, bag.instances.size());
    for (const auto& inst : bag.instances) {
      binary::put_u64(os, inst.window_index);
      binary::put_u64(os, inst.range.start);
      binary::put_u64(os, inst.range.end);
      put_tensor(os, inst.window);
      put_reals(os, inst.frame_labels);
      put_reals(os, inst.hidden);
    }
  }
  if (!os) throw IoError("failed writing dataset: " + path.string());
}

Dataset dataset_read(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open dataset: " + path.string());
  binary::Reader r(is, "dataset " + path.string());
  if (r.bytes(4) != std::string(kDatasetMagic, 4)) {
    throw FormatError("dataset " + path.string() + ": bad magic (expected WSDS)");
  }
  const std::uint32_t version = r.u32();
  if (version == 0 || version > kDatasetVersion) {
    throw FormatError("dataset version " + std::to_string(version) +
                      " is not supported (supported: 1.." + std::to_string(kDatasetVersion) + ")");
  }
  Dataset ds;
  ds.spec = get_spec(r);
  const std::uint64_t nbags = get_count(r, 1ull << 24);
  ds.bags.reserve(nbags);
  for (std::uint64_t b = 0; b < nbags; ++b) {
    Bag bag;
    bag.id = get_str(r);
    bag.subject = get_str(r);
    bag.sequence = get_str(r);
    const std::uint32_t dom = r.u32();
    if (dom > 1) throw FormatError("dataset: domain tag must be 0 or 1");
    bag.domain = static_cast<Domain>(dom);
    bag.label = r.f64();
    bag.first_frame = r.u64();
    bag.hidden = get_reals(r);
    bag.frame_labels = get_reals(r);
    const std::uint64_t ninst = get_count(r, 1ull << 24);
    bag.instances.reserve(ninst);
    for (std::uint64_t i = 0; i < ninst; ++i) {
      Instance inst;
      inst.window_index = r.u64();
      inst.range.start = r.u64();
      inst.range.end = r.u64();
      inst.window = get_tensor(r);
      inst.frame_labels = get_reals(r);
      inst.hidden = get_reals(r);
      bag.instances.push_back(std::move(inst));
    }
    ds.bags.push_back(std::move(bag));
  }
  if (!r.at_end()) throw FormatError("dataset " + path.string() + ": trailing bytes");
  return ds;
}

}  // namespace wsda::data
