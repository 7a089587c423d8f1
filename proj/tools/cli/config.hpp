#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wsda/data/dataset.hpp"
#include "wsda/net/model.hpp"
#include "wsda/objective/objective.hpp"

namespace wsda::cli {

/// Parsed run configuration.
///
/// File format: one `key = value` per line, `#` starts a comment. Keys are
/// dotted (gen.*, model.*, train.*, fold.*, sweep.*, scenarios.*) plus the
/// top-level `seed`, `out`, `scenario` and `data.dir`. Unknown keys and
/// malformed values are ConfigErrors naming the key; `seed` is required.
struct RunConfig {
  std::uint64_t seed = 1;
  std::filesystem::path out = "out";
  std::string scenario = "wsda";
  /// Read source.wsds / target.wsds from here instead of generating.
  std::optional<std::filesystem::path> data_dir;

  data::GenSpec gen;
  net::ModelConfig model;
  objective::TrainingConfig training;

  std::size_t bag_length = 0;
  std::string test_subject;
  bool full_loso = false;

  std::vector<std::size_t> sweep_lengths{8, 16, 32, 64};
  std::vector<std::string> scenario_list{"source_only", "uda", "wsda", "sda"};
  /// Seeds for the scenarios and sweep commands; empty means {seed}.
  std::vector<std::uint64_t> seeds;

  /// Every key with its effective value, sorted, one `key = value` per line.
  std::string canonical() const;
  /// FNV-1a 64 of canonical().
  std::uint64_t hash() const;

  /// Copy with every seed (generator, init, shuffling) set to `s`.
  RunConfig with_seed(std::uint64_t s) const;
  std::vector<std::uint64_t> run_seeds() const;
};

/// Applies `text`, then the environment (WSDA_OUT), then `key=value` overrides.
RunConfig parse_config(std::string_view text, std::span<const std::string> overrides = {});
RunConfig load_config(const std::filesystem::path& path,
                      std::span<const std::string> overrides = {});

/// Names of all accepted keys.
std::vector<std::string> config_keys();

}  // namespace wsda::cli
