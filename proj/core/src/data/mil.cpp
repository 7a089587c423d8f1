#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "wsda/data/dataset.hpp"
#include "wsda/error.hpp"

namespace wsda::data {

const char* domain_name(Domain d) { return d == Domain::source ? "source" : "target"; }

std::size_t Dataset::window_count(Domain d) const {
  std::size_t n = 0;
  for (const auto& b : bags)
    if (b.domain == d) n += b.instances.size();
  return n;
}

std::size_t Dataset::window_count() const {
  return window_count(Domain::source) + window_count(Domain::target);
}

std::vector<std::string> Dataset::subjects() const {
  std::vector<std::string> out;
  for (const auto& b : bags) {
    if (std::find(out.begin(), out.end(), b.subject) == out.end()) out.push_back(b.subject);
  }
  return out;
}

std::vector<FrameRange> window_sequence(std::size_t frames, std::size_t window, std::size_t stride) {
  if (window == 0 || stride == 0) throw WindowingError("window length and stride must be >= 1");
  if (frames < window) {
    throw WindowingError("sequence of " + std::to_string(frames) +
                         " frames is shorter than the window length " + std::to_string(window));
  }
  std::vector<FrameRange> out;
  for (std::size_t start = 0; start + window <= frames; start += stride) {
    out.push_back({start, start + window});
  }
  return out;
}

int quantize_pspi(int pspi) {
  if (pspi < 0 || pspi > 15) {
    throw DomainError("PSPI value " + std::to_string(pspi) + " outside 0..15");
  }
  if (pspi <= 3) return pspi;
  if (pspi <= 5) return 4;
  return 5;
}

double bag_label(const std::vector<double>& hidden) {
  if (hidden.empty()) throw ProtocolError("bag label of an empty bag");
  return *std::max_element(hidden.begin(), hidden.end());
}

Bag expand_zero_bag(Bag bag) {
  if (bag.label != 0.0) {
    throw ProtocolError("zero-bag expansion on bag '" + bag.id + "' with label " +
                        std::to_string(bag.label));
  }
  bag.hidden.assign(bag.hidden.size(), 0.0);
  bag.frame_labels.assign(bag.hidden.size(), 0.0);
  for (auto& inst : bag.instances) {
    inst.hidden.assign(inst.range.size(), 0.0);
    inst.frame_labels.assign(inst.range.size(), 0.0);
  }
  return bag;
}

Dataset annotate_frames(Dataset dataset) {
  for (auto& bag : dataset.bags) {
    bag.frame_labels = bag.hidden;
    for (auto& inst : bag.instances) inst.frame_labels = inst.hidden;
  }
  return dataset;
}

Dataset strip_frame_labels(Dataset dataset) {
  for (auto& bag : dataset.bags) {
    bag.frame_labels.clear();
    for (auto& inst : bag.instances) inst.frame_labels.clear();
  }
  return dataset;
}

Dataset reduce_annotation(const Dataset& dataset, std::size_t bag_length) {
  if (bag_length == 0) throw WindowingError("bag length must be >= 1");
  Dataset out;
  out.spec = dataset.spec;
  for (const auto& bag : dataset.bags) {
    const std::size_t n = bag.frame_count();
    if (bag_length > n) {
      throw WindowingError("bag length " + std::to_string(bag_length) + " exceeds the " +
                           std::to_string(n) + " frames of bag '" + bag.id + "'");
    }
    if (n % bag_length != 0) {
      throw WindowingError("bag length " + std::to_string(bag_length) +
                           " does not divide the " + std::to_string(n) + " frames of bag '" +
                           bag.id + "'");
    }
    for (std::size_t c = 0; c < n / bag_length; ++c) {
      const std::size_t lo = bag.first_frame + c * bag_length;
      const std::size_t hi = lo + bag_length;
      Bag chunk;
      chunk.id = n == bag_length ? bag.id : bag.id + "-c" + std::to_string(c);
      chunk.subject = bag.subject;
      chunk.sequence = bag.sequence;
      chunk.domain = bag.domain;
      chunk.first_frame = lo;
      const auto off = static_cast<std::ptrdiff_t>(lo - bag.first_frame);
      chunk.hidden.assign(bag.hidden.begin() + off, bag.hidden.begin() + off + bag_length);
      if (bag.annotated()) {
        chunk.frame_labels.assign(bag.frame_labels.begin() + off,
                                  bag.frame_labels.begin() + off + bag_length);
      }
      for (const auto& inst : bag.instances) {
        if (inst.range.start >= lo && inst.range.end <= hi) chunk.instances.push_back(inst);
      }
      if (chunk.instances.empty()) {
        throw WindowingError("bag length " + std::to_string(bag_length) +
                             " holds no complete window of bag '" + bag.id + "'");
      }
      chunk.label = bag_label(chunk.hidden);
      out.bags.push_back(std::move(chunk));
    }
  }
  return out;
}

Split loso_split(const Dataset& dataset, const std::string& test_subject, std::uint64_t seed,
                 double train_share) {
  auto subjects = dataset.subjects();
  auto it = std::find(subjects.begin(), subjects.end(), test_subject);
  if (it == subjects.end()) throw ProtocolError("unknown subject '" + test_subject + "'");
  if (!(train_share > 0.0 && train_share <= 1.0)) {
    throw ConfigError("train share must be in (0,1]");
  }
  subjects.erase(it);
  std::mt19937_64 rng(derive_seed(seed, "loso:" + test_subject));
  std::shuffle(subjects.begin(), subjects.end(), rng);

  std::size_t n_val = static_cast<std::size_t>(
      std::llround(static_cast<double>(subjects.size()) * (1.0 - train_share)));
  if (subjects.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, subjects.size() - 1);
  else n_val = 0;
  const std::set<std::string> val(subjects.begin(), subjects.begin() + n_val);

  Split s;
  s.train.spec = s.validation.spec = s.test.spec = dataset.spec;
  for (const auto& bag : dataset.bags) {
    if (bag.subject == test_subject) s.test.bags.push_back(bag);
    else if (val.count(bag.subject)) s.validation.bags.push_back(bag);
    else s.train.bags.push_back(bag);
  }
  return s;
}

std::uint64_t derive_seed(std::uint64_t seed, const std::string& key) {
  // FNV-1a over the key, folded into the seed with a splitmix64 finalizer
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : key) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (h | 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace wsda::data
