#include <algorithm>
#include <cmath>
#include <random>

#include "wsda/data/dataset.hpp"
#include "wsda/error.hpp"

namespace wsda::data {

void GenSpec::validate() const {
  auto req = [](bool c, const char* m) {
    if (!c) throw ConfigError(m);
  };
  req(subjects >= 1 && sequences >= 1, "gen.subjects and gen.sequences must be >= 1");
  req(channels >= 1 && height >= 1 && width >= 1, "gen frame extents must be >= 1");
  req(window >= 1 && stride >= 1, "gen.window and gen.stride must be >= 1");
  req(frames >= window, "gen.frames must be >= gen.window");
  req(bumps_min <= bumps_max, "gen.bumps_min must be <= gen.bumps_max");
  req(bump_width_min > 0.0 && bump_width_min <= bump_width_max, "invalid gen bump width range");
  req(peak_min >= 0.0 && peak_min <= peak_max && peak_max <= 15.0,
      "gen peak range must lie within [0,15]");
  req(shift >= 0.0 && shift <= 1.0, "gen.shift must be in [0,1]");
  req(noise >= 0.0 && amplitude > 0.0, "gen.noise must be >= 0 and gen.amplitude > 0");
}

namespace {

constexpr double kSpotRadius = 0.6;

struct Appearance {
  double brightness;
  double gain;
  double center_y, center_x;
  double radius;
};

struct Shift {
  double contrast = 1.0;
  double offset = 0.0;
  double grad_y = 0.0, grad_x = 0.0;
  double noise_scale = 1.0;
  // small flickering light unrelated to the expression
  double spot_y = 0.0, spot_x = 0.0;
  std::vector<double> flicker;  // per-frame spot intensity; empty means no spot
};

Appearance draw_appearance(std::mt19937_64& rng, const GenSpec& s) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Appearance a;
  a.brightness = -0.1 + 0.2 * u(rng);
  a.gain = 0.85 + 0.3 * u(rng);
  a.center_y = (static_cast<double>(s.height) - 1.0) / 2.0 + (u(rng) - 0.5);
  a.center_x = (static_cast<double>(s.width) - 1.0) / 2.0 + (u(rng) - 0.5);
  a.radius = 0.2 * static_cast<double>(std::min(s.height, s.width)) * (0.8 + 0.4 * u(rng));
  return a;
}

// Covariate shift of the target camera: reduced contrast, a per-sequence
// brightness offset and background gradient, a flickering light spot near a
// corner, and stronger sensor noise.
Shift draw_shift(std::mt19937_64& rng, const GenSpec& s) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double strength = s.shift;
  Shift sh;
  sh.contrast = 1.0 - 0.5 * strength;
  sh.offset = 0.5 * strength * (2.0 * u(rng) - 1.0);
  const double angle = 2.0 * M_PI * u(rng);
  const double mag = strength * (0.5 + 0.5 * u(rng));
  sh.grad_y = mag * std::sin(angle);
  sh.grad_x = mag * std::cos(angle);
  sh.noise_scale = 1.0 + strength;
  const double edge_y = 0.15 * static_cast<double>(s.height);
  const double edge_x = 0.15 * static_cast<double>(s.width);
  sh.spot_y = u(rng) < 0.5 ? edge_y : static_cast<double>(s.height) - 1.0 - edge_y;
  sh.spot_x = u(rng) < 0.5 ? edge_x : static_cast<double>(s.width) - 1.0 - edge_x;
  sh.flicker.resize(s.frames);
  for (double& f : sh.flicker) f = 1.5 * strength * u(rng);
  return sh;
}

std::vector<double> latent_curve(std::mt19937_64& rng, const GenSpec& s) {
  std::uniform_int_distribution<std::size_t> nb(s.bumps_min, s.bumps_max);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t bumps = nb(rng);
  std::vector<double> curve(s.frames, 0.0);
  for (std::size_t b = 0; b < bumps; ++b) {
    const double center = u(rng) * static_cast<double>(s.frames);
    const double width = s.bump_width_min + (s.bump_width_max - s.bump_width_min) * u(rng);
    const double peak = s.peak_min + (s.peak_max - s.peak_min) * u(rng);
    for (std::size_t t = 0; t < s.frames; ++t) {
      const double d = (static_cast<double>(t) - center) / width;
      curve[t] += peak * std::exp(-0.5 * d * d);
    }
  }
  for (double& v : curve) v = std::clamp(v, 0.0, 15.0);
  return curve;
}

Bag make_bag(const GenSpec& s, Domain domain, const std::string& subject, std::size_t q,
             const Appearance& look) {
  Bag bag;
  bag.subject = subject;
  bag.id = subject + "-q" + std::to_string(q);
  bag.sequence = bag.id;
  bag.domain = domain;
  std::mt19937_64 rng(derive_seed(s.seed, bag.id));

  const auto curve = latent_curve(rng, s);
  bag.hidden.resize(s.frames);
  for (std::size_t t = 0; t < s.frames; ++t) {
    bag.hidden[t] = quantize_pspi(static_cast<int>(std::lround(curve[t])));
  }
  bag.label = bag_label(bag.hidden);

  // both domains draw a shift so the random streams line up; source applies none
  const Shift drawn = draw_shift(rng, s);
  const Shift sh = domain == Domain::target ? drawn : Shift{};

  std::normal_distribution<double> noise(0.0, 1.0);
  Tensor frames({s.channels, s.frames, s.height, s.width}, 0.0);
  const double cy = (static_cast<double>(s.height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(s.width) - 1.0) / 2.0;
  const double half = static_cast<double>(std::max(s.height, s.width)) / 2.0;
  const double sigma = s.noise * sh.noise_scale;
  for (std::size_t c = 0; c < s.channels; ++c) {
    for (std::size_t t = 0; t < s.frames; ++t) {
      const double level = bag.hidden[t] / 5.0;
      for (std::size_t y = 0; y < s.height; ++y) {
        for (std::size_t x = 0; x < s.width; ++x) {
          const double dy = static_cast<double>(y) - look.center_y;
          const double dx = static_cast<double>(x) - look.center_x;
          const double blob = std::exp(-(dy * dy + dx * dx) / (2.0 * look.radius * look.radius));
          double v = look.brightness + s.amplitude * look.gain * level * blob;
          if (!sh.flicker.empty()) {
            const double sy = static_cast<double>(y) - sh.spot_y;
            const double sx = static_cast<double>(x) - sh.spot_x;
            v += sh.flicker[t] * std::exp(-(sy * sy + sx * sx) / (2.0 * kSpotRadius * kSpotRadius));
          }
          v = sh.contrast * v + sh.offset +
              (sh.grad_y * (static_cast<double>(y) - cy) + sh.grad_x * (static_cast<double>(x) - cx)) /
                  half;
          v += sigma * noise(rng);
          frames[((c * s.frames + t) * s.height + y) * s.width + x] = v;
        }
      }
    }
  }

  const std::size_t plane = s.height * s.width;
  const auto ranges = window_sequence(s.frames, s.window, s.stride);
  for (std::size_t k = 0; k < ranges.size(); ++k) {
    Instance inst;
    inst.window_index = k;
    inst.range = ranges[k];
    inst.window = Tensor({s.channels, s.window, s.height, s.width}, 0.0);
    for (std::size_t c = 0; c < s.channels; ++c) {
      for (std::size_t t = 0; t < s.window; ++t) {
        const std::size_t src = (c * s.frames + ranges[k].start + t) * plane;
        const std::size_t dst = (c * s.window + t) * plane;
        for (std::size_t p = 0; p < plane; ++p) inst.window[dst + p] = frames[src + p];
      }
    }
    inst.hidden.assign(bag.hidden.begin() + static_cast<std::ptrdiff_t>(ranges[k].start),
                       bag.hidden.begin() + static_cast<std::ptrdiff_t>(ranges[k].end));
    if (domain == Domain::source) inst.frame_labels = inst.hidden;
    bag.instances.push_back(std::move(inst));
  }
  if (domain == Domain::source) bag.frame_labels = bag.hidden;
  if (bag.label == 0.0) bag = expand_zero_bag(std::move(bag));
  if (domain == Domain::target) {
    bag.frame_labels.clear();
    for (auto& inst : bag.instances) inst.frame_labels.clear();
  }
  return bag;
}

Dataset make_domain(const GenSpec& s, Domain domain) {
  Dataset ds;
  ds.spec = s;
  const std::string prefix = domain == Domain::source ? "src-s" : "tgt-s";
  for (std::size_t i = 0; i < s.subjects; ++i) {
    const std::string subject = prefix + (i < 10 ? "0" : "") + std::to_string(i);
    std::mt19937_64 rng(derive_seed(s.seed, "appearance:" + subject));
    const Appearance look = draw_appearance(rng, s);
    for (std::size_t q = 0; q < s.sequences; ++q) ds.bags.push_back(make_bag(s, domain, subject, q, look));
  }
  return ds;
}

}  // namespace

DomainPair synth_generate(const GenSpec& spec) {
  spec.validate();
  return {make_domain(spec, Domain::source), make_domain(spec, Domain::target)};
}

}  // namespace wsda::data
