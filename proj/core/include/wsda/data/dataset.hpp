#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "wsda/num/tensor.hpp"

namespace wsda::data {

using num::Tensor;

enum class Domain : int { source = 0, target = 1 };

const char* domain_name(Domain d);

/// Half-open frame interval [start, end) within a sequence.
struct FrameRange {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - start; }
  friend bool operator==(const FrameRange&, const FrameRange&) = default;
};

/// One fixed-length window of frames.
struct Instance {
  Tensor window;  // [C, W, H, Wd]
  std::size_t window_index = 0;
  FrameRange range;                  // absolute frames of the owning sequence
  std::vector<double> frame_labels;  // empty when the frames are not annotated
  std::vector<double> hidden;        // ground-truth per-frame intensity (evaluation only)
  friend bool operator==(const Instance&, const Instance&) = default;
};

/// A bag of instances carrying one weak label Y = max(hidden).
struct Bag {
  std::string id;
  std::string subject;
  std::string sequence;  // originating sequence id (chunk bags share it)
  Domain domain = Domain::source;
  double label = 0.0;            // Y_i
  std::size_t first_frame = 0;   // offset of hidden[0] within the sequence
  std::vector<double> hidden;    // per frame, n_i = hidden.size()
  std::vector<double> frame_labels;  // per frame; empty when not annotated
  std::vector<Instance> instances;

  std::size_t frame_count() const { return hidden.size(); }
  bool annotated() const { return !frame_labels.empty(); }
  friend bool operator==(const Bag&, const Bag&) = default;
};

/// Parameters of the synthetic two-domain generator.
struct GenSpec {
  std::uint64_t seed = 1;
  std::size_t subjects = 6;   // per domain
  std::size_t sequences = 4;  // per subject
  std::size_t frames = 64;    // L
  std::size_t channels = 1;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t bumps_min = 1;
  std::size_t bumps_max = 3;
  double bump_width_min = 3.0;  // Gaussian sigma in frames
  double bump_width_max = 8.0;
  double peak_min = 0.0;  // PSPI scale, before quantization
  double peak_max = 15.0;
  double shift = 0.6;  // domain-shift strength applied to target renders, in [0,1]
  double noise = 0.1;
  double amplitude = 1.0;
  std::size_t window = 8;  // W
  std::size_t stride = 4;  // S

  void validate() const;
  friend bool operator==(const GenSpec&, const GenSpec&) = default;
};

struct Dataset {
  std::vector<Bag> bags;
  GenSpec spec;

  std::size_t bag_count() const { return bags.size(); }  // N
  std::size_t window_count(Domain d) const;               // N_s or N_T
  std::size_t window_count() const;
  /// Distinct subject ids in first-appearance order.
  std::vector<std::string> subjects() const;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// -- MIL rules --------------------------------------------------------------

/// [kS, kS+W) for k = 0 .. floor((L-W)/S).
std::vector<FrameRange> window_sequence(std::size_t frames, std::size_t window, std::size_t stride);

/// PSPI 0..15 to ordinal level 0..5: 0,1,2,3 map to themselves, 4-5 to 4, 6-15 to 5.
int quantize_pspi(int pspi);

/// Y = max(hidden).
double bag_label(const std::vector<double>& hidden);

/// Labels every frame of a Y = 0 bag as neutral (0).
Bag expand_zero_bag(Bag bag);

/// Copies hidden intensities into frame labels (full annotation).
Dataset annotate_frames(Dataset dataset);
/// Drops all frame labels (weak labels only).
Dataset strip_frame_labels(Dataset dataset);

// -- generation and re-bagging ---------------------------------------------

struct DomainPair {
  Dataset source;
  Dataset target;
};

/// Source bags carry frame labels; target bags carry only Y.
DomainPair synth_generate(const GenSpec& spec);

/// Re-bags each sequence into chunks of `bag_length` frames labelled by the
/// chunk maximum; a chunk keeps the windows that lie entirely inside it.
Dataset reduce_annotation(const Dataset& dataset, std::size_t bag_length);

struct Split {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Test = all bags of `test_subject`; the remaining subjects are split
/// train/validation subject-wise with a seeded shuffle at train:val = 15:9.
Split loso_split(const Dataset& dataset, const std::string& test_subject, std::uint64_t seed,
                 double train_share = 15.0 / 24.0);

// -- file format --------------------------------------------------------------

inline constexpr char kDatasetMagic[4] = {'W', 'S', 'D', 'S'};
inline constexpr std::uint32_t kDatasetVersion = 1;

void dataset_write(const Dataset& dataset, const std::filesystem::path& path);
Dataset dataset_read(const std::filesystem::path& path);

/// Stable 64-bit mix of a seed and a string key (per-bag seeds).
std::uint64_t derive_seed(std::uint64_t seed, const std::string& key);

}  // namespace wsda::data
