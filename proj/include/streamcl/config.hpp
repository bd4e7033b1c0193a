#pragma once

// Run configuration: a flat "key = value" text file with dotted keys.
// '#' starts a comment. Unknown keys and malformed values are ConfigErrors.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "streamcl/autoencoder.hpp"
#include "streamcl/field_sim.hpp"
#include "streamcl/strategies.hpp"

namespace streamcl {

enum class TransportKind { InProc, Tcp };
/// Threaded runs the producer in its own thread; Single interleaves producer
/// and trainer on one thread (in-process transport only).
enum class Concurrency { Threaded, Single };

struct RunConfig {
  SimConfig sim;
  ArchSpec arch;  // arch.input_dim always mirrors sim.grid_size
  StrategyConfig strategy;
  std::size_t epochs_per_task = 40;
  AdamHyper adam;
  std::size_t cache_capacity = 4;
  TransportKind transport = TransportKind::InProc;
  Concurrency concurrency = Concurrency::Threaded;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;  // empty: write nothing
  bool plots = false;

  void validate() const;
  /// Canonical key = value text; parse_config(to_text()) reproduces the config.
  [[nodiscard]] std::string to_text() const;
  /// FNV-1a 64 of the canonical text minus output settings, as 16 hex digits.
  [[nodiscard]] std::string digest() const;
};

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace streamcl
