#include "streamcl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "streamcl/errors.hpp"
#include "streamcl/metrics.hpp"

namespace streamcl {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
    throw ConfigError("'" + std::string(key) + "': expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("'" + std::string(key) + "': expected a finite real, got '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("'" + std::string(key) + "': expected true or false");
}

std::vector<std::size_t> parse_list(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(parse_uint(key, trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (out.empty()) throw ConfigError("'" + std::string(key) + "': empty list");
  return out;
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"sim.grid_size", [](RunConfig& c, auto k, auto v) { c.sim.grid_size = parse_uint(k, v); }},
      {"sim.steps", [](RunConfig& c, auto k, auto v) { c.sim.steps = parse_uint(k, v); }},
      {"sim.amplitude", [](RunConfig& c, auto k, auto v) { c.sim.amplitude = parse_real(k, v); }},
      {"sim.packet_center", [](RunConfig& c, auto k, auto v) { c.sim.packet_center = parse_real(k, v); }},
      {"sim.velocity", [](RunConfig& c, auto k, auto v) { c.sim.velocity = parse_real(k, v); }},
      {"sim.sigma_z", [](RunConfig& c, auto k, auto v) { c.sim.sigma_z = parse_real(k, v); }},
      {"sim.sigma_r", [](RunConfig& c, auto k, auto v) { c.sim.sigma_r = parse_real(k, v); }},
      {"sim.wavenumber", [](RunConfig& c, auto k, auto v) { c.sim.wavenumber = parse_real(k, v); }},
      {"sim.phase", [](RunConfig& c, auto k, auto v) { c.sim.phase = parse_real(k, v); }},
      {"sim.noise_std", [](RunConfig& c, auto k, auto v) { c.sim.noise_std = parse_real(k, v); }},
      {"sim.seed", [](RunConfig& c, auto k, auto v) { c.sim.seed = parse_uint(k, v); }},
      {"arch.channels", [](RunConfig& c, auto k, auto v) { c.arch.channels = parse_list(k, v); }},
      {"arch.latent_dim", [](RunConfig& c, auto k, auto v) { c.arch.latent_dim = parse_uint(k, v); }},
      {"strategy.kind",
       [](RunConfig& c, auto k, auto v) {
         auto& s = c.strategy.strategy;
         if (v == "naive") {
           s.kind = StrategyKind::Naive;
         } else if (v == "ewc" || v == "online_ewc") {
           s.kind = StrategyKind::OnlineEWC;
         } else if (v == "agem") {
           s.kind = StrategyKind::AGEM;
         } else if (v == "latent_agem") {
           s.kind = StrategyKind::LatentAGEM;
         } else {
           throw ConfigError("'" + std::string(k) + "': unknown strategy '" + std::string(v) + "'");
         }
       }},
      {"strategy.projection",
       [](RunConfig& c, auto k, auto v) {
         if (v == "global") {
           c.strategy.strategy.projection = Projection::Global;
         } else if (v == "layerwise") {
           c.strategy.strategy.projection = Projection::Layerwise;
         } else {
           throw ConfigError("'" + std::string(k) + "': expected global or layerwise");
         }
       }},
      {"strategy.condition_variant",
       [](RunConfig& c, auto k, auto v) {
         if (v == "standard") {
           c.strategy.condition = ConditionVariant::Standard;
         } else if (v == "literal") {
           c.strategy.condition = ConditionVariant::Literal;
         } else {
           throw ConfigError("'" + std::string(k) + "': expected standard or literal");
         }
       }},
      {"strategy.reference_batch", [](RunConfig& c, auto k, auto v) { c.strategy.reference_batch = parse_uint(k, v); }},
      {"ewc.lambda", [](RunConfig& c, auto k, auto v) { c.strategy.ewc_lambda = parse_real(k, v); }},
      {"ewc.gamma", [](RunConfig& c, auto k, auto v) { c.strategy.ewc_gamma = parse_real(k, v); }},
      {"memory.capacity", [](RunConfig& c, auto k, auto v) { c.strategy.memory_capacity = parse_uint(k, v); }},
      {"cache.capacity", [](RunConfig& c, auto k, auto v) { c.cache_capacity = parse_uint(k, v); }},
      {"train.epochs_per_task", [](RunConfig& c, auto k, auto v) { c.epochs_per_task = parse_uint(k, v); }},
      {"train.lr", [](RunConfig& c, auto k, auto v) { c.adam.lr = parse_real(k, v); }},
      {"train.beta1", [](RunConfig& c, auto k, auto v) { c.adam.beta1 = parse_real(k, v); }},
      {"train.beta2", [](RunConfig& c, auto k, auto v) { c.adam.beta2 = parse_real(k, v); }},
      {"train.eps", [](RunConfig& c, auto k, auto v) { c.adam.eps = parse_real(k, v); }},
      {"transport",
       [](RunConfig& c, auto k, auto v) {
         if (v == "inproc") {
           c.transport = TransportKind::InProc;
         } else if (v == "tcp") {
           c.transport = TransportKind::Tcp;
         } else {
           throw ConfigError("'" + std::string(k) + "': expected inproc or tcp");
         }
       }},
      {"concurrency",
       [](RunConfig& c, auto k, auto v) {
         if (v == "threaded") {
           c.concurrency = Concurrency::Threaded;
         } else if (v == "single") {
           c.concurrency = Concurrency::Single;
         } else {
           throw ConfigError("'" + std::string(k) + "': expected threaded or single");
         }
       }},
      {"seed", [](RunConfig& c, auto k, auto v) { c.seed = parse_uint(k, v); }},
      {"output.dir", [](RunConfig& c, auto, auto v) { c.output_dir = std::string(v); }},
      {"output.plots", [](RunConfig& c, auto k, auto v) { c.plots = parse_bool(k, v); }},
  };
  return table;
}

std::string strategy_kind_key(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::Naive: return "naive";
    case StrategyKind::OnlineEWC: return "ewc";
    case StrategyKind::AGEM: return "agem";
    case StrategyKind::LatentAGEM: return "latent_agem";
  }
  return "?";
}

std::string core_text(const RunConfig& c) {
  std::ostringstream os;
  os << "sim.grid_size = " << c.sim.grid_size << '\n'
     << "sim.steps = " << c.sim.steps << '\n'
     << "sim.amplitude = " << format_real(c.sim.amplitude) << '\n'
     << "sim.packet_center = " << format_real(c.sim.packet_center) << '\n'
     << "sim.velocity = " << format_real(c.sim.velocity) << '\n'
     << "sim.sigma_z = " << format_real(c.sim.sigma_z) << '\n'
     << "sim.sigma_r = " << format_real(c.sim.sigma_r) << '\n'
     << "sim.wavenumber = " << format_real(c.sim.wavenumber) << '\n'
     << "sim.phase = " << format_real(c.sim.phase) << '\n'
     << "sim.noise_std = " << format_real(c.sim.noise_std) << '\n'
     << "sim.seed = " << c.sim.seed << '\n';
  os << "arch.channels = ";
  for (std::size_t i = 0; i < c.arch.channels.size(); ++i) os << (i ? "," : "") << c.arch.channels[i];
  os << '\n' << "arch.latent_dim = " << c.arch.latent_dim << '\n';
  os << "strategy.kind = " << strategy_kind_key(c.strategy.strategy.kind) << '\n'
     << "strategy.projection = " << (c.strategy.strategy.projection == Projection::Layerwise ? "layerwise" : "global")
     << '\n'
     << "strategy.condition_variant = "
     << (c.strategy.condition == ConditionVariant::Literal ? "literal" : "standard") << '\n'
     << "strategy.reference_batch = " << c.strategy.reference_batch << '\n'
     << "ewc.lambda = " << format_real(c.strategy.ewc_lambda) << '\n'
     << "ewc.gamma = " << format_real(c.strategy.ewc_gamma) << '\n'
     << "memory.capacity = " << c.strategy.memory_capacity << '\n'
     << "cache.capacity = " << c.cache_capacity << '\n'
     << "train.epochs_per_task = " << c.epochs_per_task << '\n'
     << "train.lr = " << format_real(c.adam.lr) << '\n'
     << "train.beta1 = " << format_real(c.adam.beta1) << '\n'
     << "train.beta2 = " << format_real(c.adam.beta2) << '\n'
     << "train.eps = " << format_real(c.adam.eps) << '\n'
     << "transport = " << (c.transport == TransportKind::Tcp ? "tcp" : "inproc") << '\n'
     << "concurrency = " << (c.concurrency == Concurrency::Single ? "single" : "threaded") << '\n'
     << "seed = " << c.seed << '\n';
  return os.str();
}

}  // namespace

void RunConfig::validate() const {
  sim.validate();
  if (sim.grid_size < kSsimWindow) {
    throw ConfigError("sim.grid_size must be at least " + std::to_string(kSsimWindow) + " for SSIM evaluation");
  }
  if (arch.input_dim != sim.grid_size) throw ConfigError("arch input size must equal sim.grid_size");
  arch.validate();
  strategy.validate();
  if (epochs_per_task < 1) throw ConfigError("train.epochs_per_task must be >= 1");
  if (cache_capacity < 1) throw ConfigError("cache.capacity must be >= 1");
  if (!(adam.lr > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) ||
      !(adam.eps > 0.0)) {
    throw ConfigError("invalid optimizer hyperparameters");
  }
  if (concurrency == Concurrency::Single && transport != TransportKind::InProc) {
    throw ConfigError("single-threaded mode requires transport = inproc");
  }
}

std::string RunConfig::to_text() const {
  std::string text = core_text(*this);
  if (!output_dir.empty()) text += "output.dir = " + output_dir.string() + '\n';
  text += std::string("output.plots = ") + (plots ? "true" : "false") + '\n';
  return text;
}

std::string RunConfig::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : core_text(*this)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
  return out;
}

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    if (value.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty value for '" + std::string(key) + "'");
    it->second(cfg, key, value);
  }
  cfg.arch.input_dim = cfg.sim.grid_size;
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace streamcl
