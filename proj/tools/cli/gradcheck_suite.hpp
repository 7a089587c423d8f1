#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wsda/num/gradcheck.hpp"

namespace wsda::cli {

struct GradCheckCase {
  std::string name;
  num::GradCheckResult result;
  std::size_t redraws = 0;  // points rejected for sitting within eps of a relu/max kink
};

inline constexpr double kGradCheckEps = 1e-4;
inline constexpr double kGradCheckTolerance = 1e-6;
/// Points whose forward pass comes within this of a kink are redrawn (ten steps).
inline constexpr double kMinKinkMargin = 1e-3;

/// Finite-difference checks of every tape op and of the full adversarial loss
/// graph (both the reversed theta_f/theta_l/theta_wl pass and the theta_d pass)
/// at points drawn from `seed`.
std::vector<GradCheckCase> gradcheck_suite(std::uint64_t seed);

double worst_error(const std::vector<GradCheckCase>& cases);

}  // namespace wsda::cli
