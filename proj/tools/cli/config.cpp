#include "cli/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "wsda/error.hpp"
#include "wsda/train/scenario.hpp"

namespace wsda::cli {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t begin = 0;
  while (true) {
    const auto end = s.find(sep, begin);
    parts.push_back(trim(s.substr(begin, end == std::string_view::npos ? end : end - begin)));
    if (end == std::string_view::npos) break;
    begin = end + 1;
  }
  return parts;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expect) {
  throw ConfigError("key '" + key + "': expected " + expect + ", got '" + value + "'");
}

template <class T>
T parse_number(const std::string& key, const std::string& value, const char* expect) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end || value.empty()) bad_value(key, value, expect);
  return out;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  return parse_number<std::size_t>(key, value, "a non-negative integer");
}

double parse_real(const std::string& key, const std::string& value) {
  return parse_number<double>(key, value, "a number");
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "true or false");
}

// "channels:kernel:dt:ds" per block, comma separated.
std::vector<net::ConvBlockSpec> parse_blocks(const std::string& key, const std::string& value) {
  std::vector<net::ConvBlockSpec> blocks;
  for (const auto& item : split(value, ',')) {
    const auto f = split(item, ':');
    if (f.size() != 4) bad_value(key, value, "blocks as channels:kernel:dt:ds[,...]");
    const std::size_t k = parse_size(key, f[1]);
    blocks.push_back({parse_size(key, f[0]), {k, k, k}, parse_size(key, f[2]), parse_size(key, f[3])});
  }
  return blocks;
}

std::string format_blocks(const std::vector<net::ConvBlockSpec>& blocks) {
  std::string out;
  for (const auto& b : blocks) {
    if (!out.empty()) out += ',';
    out += std::to_string(b.channels) + ':' + std::to_string(b.kernel[0]) + ':' +
           std::to_string(b.temporal_stride) + ':' + std::to_string(b.spatial_stride);
  }
  return out;
}

template <class T, class Parse>
std::vector<T> parse_list(const std::string& key, const std::string& value, Parse parse) {
  std::vector<T> out;
  for (const auto& item : split(value, ',')) out.push_back(parse(key, item));
  return out;
}

template <class T>
std::string join(const std::vector<T>& items) {
  std::ostringstream os;
  for (std::size_t i = 0; i < items.size(); ++i) os << (i ? "," : "") << items[i];
  return os.str();
}

std::string real(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define WSDA_SIZE(member)                                                                \
  Field {                                                                                \
    [](RunConfig& c, const std::string& k, const std::string& v) { c.member = parse_size(k, v); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }                     \
  }
#define WSDA_REAL(member)                                                                \
  Field {                                                                                \
    [](RunConfig& c, const std::string& k, const std::string& v) { c.member = parse_real(k, v); }, \
        [](const RunConfig& c) { return real(c.member); }                               \
  }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"seed", {[](RunConfig& c, const std::string& k, const std::string& v) {
                  c = c.with_seed(parse_number<std::uint64_t>(k, v, "an unsigned integer"));
                },
                [](const RunConfig& c) { return std::to_string(c.seed); }}},
      {"out", {[](RunConfig& c, const std::string&, const std::string& v) { c.out = v; },
               [](const RunConfig& c) { return c.out.string(); }}},
      {"scenario", {[](RunConfig& c, const std::string& k, const std::string& v) {
                      try {
                        train::Scenario::parse(v);
                      } catch (const Error&) {
                        bad_value(k, v, "a scenario name");
                      }
                      c.scenario = v;
                    },
                    [](const RunConfig& c) { return c.scenario; }}},
      {"data.dir", {[](RunConfig& c, const std::string&, const std::string& v) {
                      if (v.empty()) c.data_dir.reset(); else c.data_dir = v;
                    },
                    [](const RunConfig& c) { return c.data_dir ? c.data_dir->string() : ""; }}},
      {"gen.subjects", WSDA_SIZE(gen.subjects)},
      {"gen.sequences", WSDA_SIZE(gen.sequences)},
      {"gen.frames", WSDA_SIZE(gen.frames)},
      {"gen.channels", WSDA_SIZE(gen.channels)},
      {"gen.height", WSDA_SIZE(gen.height)},
      {"gen.width", WSDA_SIZE(gen.width)},
      {"gen.bumps_min", WSDA_SIZE(gen.bumps_min)},
      {"gen.bumps_max", WSDA_SIZE(gen.bumps_max)},
      {"gen.bump_width_min", WSDA_REAL(gen.bump_width_min)},
      {"gen.bump_width_max", WSDA_REAL(gen.bump_width_max)},
      {"gen.peak_min", WSDA_REAL(gen.peak_min)},
      {"gen.peak_max", WSDA_REAL(gen.peak_max)},
      {"gen.shift", WSDA_REAL(gen.shift)},
      {"gen.noise", WSDA_REAL(gen.noise)},
      {"gen.amplitude", WSDA_REAL(gen.amplitude)},
      {"gen.window", WSDA_SIZE(gen.window)},
      {"gen.stride", WSDA_SIZE(gen.stride)},
      {"model.blocks", {[](RunConfig& c, const std::string& k, const std::string& v) {
                          c.model.blocks = parse_blocks(k, v);
                        },
                        [](const RunConfig& c) { return format_blocks(c.model.blocks); }}},
      {"model.head_hidden", WSDA_SIZE(model.head_hidden)},
      {"model.init_scale", WSDA_REAL(model.init_scale)},
      {"train.lr", WSDA_REAL(training.lr)},
      {"train.momentum", WSDA_REAL(training.momentum)},
      {"train.weight_decay", WSDA_REAL(training.weight_decay)},
      {"train.batch_size", WSDA_SIZE(training.batch_size)},
      {"train.max_epochs", WSDA_SIZE(training.max_epochs)},
      {"train.gamma", WSDA_REAL(training.gamma)},
      {"train.anneal_start", WSDA_SIZE(training.anneal_start)},
      {"train.anneal_every", WSDA_SIZE(training.anneal_every)},
      {"train.anneal_factor", WSDA_REAL(training.anneal_factor)},
      {"train.patience", WSDA_SIZE(training.patience)},
      {"train.vanilla", {[](RunConfig& c, const std::string& k, const std::string& v) {
                           c.training.vanilla = parse_bool(k, v);
                         },
                         [](const RunConfig& c) { return std::string(c.training.vanilla ? "true" : "false"); }}},
      {"train.fixed_lambda", {[](RunConfig& c, const std::string& k, const std::string& v) {
                                if (v.empty()) c.training.fixed_lambda.reset();
                                else c.training.fixed_lambda = parse_real(k, v);
                              },
                              [](const RunConfig& c) {
                                return c.training.fixed_lambda ? real(*c.training.fixed_lambda) : "";
                              }}},
      {"fold.bag_length", WSDA_SIZE(bag_length)},
      {"fold.test_subject", {[](RunConfig& c, const std::string&, const std::string& v) { c.test_subject = v; },
                             [](const RunConfig& c) { return c.test_subject; }}},
      {"fold.full_loso", {[](RunConfig& c, const std::string& k, const std::string& v) {
                            c.full_loso = parse_bool(k, v);
                          },
                          [](const RunConfig& c) { return std::string(c.full_loso ? "true" : "false"); }}},
      {"sweep.bag_lengths", {[](RunConfig& c, const std::string& k, const std::string& v) {
                               c.sweep_lengths = parse_list<std::size_t>(k, v, parse_size);
                             },
                             [](const RunConfig& c) { return join(c.sweep_lengths); }}},
      {"scenarios.list", {[](RunConfig& c, const std::string& k, const std::string& v) {
                            auto names = split(v, ',');
                            for (const auto& n : names) {
                              try {
                                train::Scenario::parse(n);
                              } catch (const Error&) {
                                bad_value(k, n, "a scenario name");
                              }
                            }
                            c.scenario_list = std::move(names);
                          },
                          [](const RunConfig& c) { return join(c.scenario_list); }}},
      {"scenarios.seeds", {[](RunConfig& c, const std::string& k, const std::string& v) {
                             c.seeds = v.empty() ? std::vector<std::uint64_t>{}
                                                 : parse_list<std::uint64_t>(k, v, [](const std::string& key, const std::string& s) {
                                                     return parse_number<std::uint64_t>(key, s, "an unsigned integer");
                                                   });
                           },
                           [](const RunConfig& c) { return join(c.seeds); }}},
  };
  return table;
}

#undef WSDA_SIZE
#undef WSDA_REAL

void apply(RunConfig& config, const std::string& key, const std::string& value) {
  const auto& table = fields();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown key '" + key + "'");
  it->second.set(config, key, value);
}

std::pair<std::string, std::string> split_assignment(std::string_view line, const char* where) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError(std::string(where) + ": expected key = value, got '" + trim(line) + "'");
  return {trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
}

}  // namespace

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(*this) + "\n";
  return out;
}

std::uint64_t RunConfig::hash() const {
  std::uint64_t h = 14695981039346656037ull;
  for (const unsigned char ch : canonical()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

RunConfig RunConfig::with_seed(std::uint64_t s) const {
  RunConfig c = *this;
  c.seed = c.gen.seed = c.model.seed = c.training.seed = s;
  return c;
}

std::vector<std::uint64_t> RunConfig::run_seeds() const {
  return seeds.empty() ? std::vector<std::uint64_t>{seed} : seeds;
}

RunConfig parse_config(std::string_view text, std::span<const std::string> overrides) {
  RunConfig config;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const std::string where = "line " + std::to_string(number);
    auto [key, value] = split_assignment(line, where.c_str());
    if (!seen.insert(key).second) throw ConfigError(where + ": duplicate key '" + key + "'");
    apply(config, key, value);
  }
  if (!seen.contains("seed")) throw ConfigError("missing key 'seed'");

  if (const char* env = std::getenv("WSDA_OUT"); env && *env) config.out = env;
  for (const auto& item : overrides) {
    auto [key, value] = split_assignment(item, "override");
    apply(config, key, value);
  }

  config.gen.validate();
  config.training.validate();
  config.model.in_channels = config.gen.channels;
  config.model.height = config.gen.height;
  config.model.width = config.gen.width;
  config.model.window = config.gen.window;
  config.model.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path, std::span<const std::string> overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), overrides);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, field] : fields()) keys.push_back(key);
  return keys;
}

}  // namespace wsda::cli
