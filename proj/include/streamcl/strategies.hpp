#pragma once

// Continual-learning strategies: naive fine-tuning, Online-EWC, A-GEM with
// raw-field replay, and A-GEM with latent replay (global or layerwise
// projection).

#include <cstddef>
#include <cstdint>
#include <deque>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "streamcl/autoencoder.hpp"

namespace streamcl {

using Rng = std::mt19937_64;

enum class StrategyKind { Naive, OnlineEWC, AGEM, LatentAGEM };
enum class Projection { Global, Layerwise };

/// Which inner product gates the projection. Standard: project iff
/// g.g_ref < 0. Literal: evaluate the gate on the projected gradient,
/// which holds by construction, so the projection is always applied.
enum class ConditionVariant { Standard, Literal };

struct Strategy {
  StrategyKind kind = StrategyKind::Naive;
  Projection projection = Projection::Global;

  /// naive | ewc | agem | latent-global | latent-layerwise
  [[nodiscard]] std::string name() const;
  static Strategy parse(std::string_view name);
  bool operator==(const Strategy&) const = default;
};

/// Squared reference-gradient norm below which projection is skipped.
inline constexpr double kDegenerateReference = 1e-12;

GradientVector project_gradient(const GradientVector& g, const GradientVector& g_ref,
                                ConditionVariant variant = ConditionVariant::Standard);

/// project_gradient applied independently to every segment of `partition`.
GradientVector project_layerwise(const GradientVector& g, const GradientVector& g_ref, const Partition& partition,
                                 ConditionVariant variant = ConditionVariant::Standard);

enum class MemoryKind : std::uint8_t { RawField = 0, Latent = 1 };

struct MemoryItem {
  std::uint32_t task_id = 0;
  std::vector<double> payload;  // a normalized field volume or a latent code
};

/// Capacity-bounded FIFO replay store with homogeneous payloads.
class EpisodicMemory {
 public:
  EpisodicMemory(MemoryKind kind, std::size_t capacity, std::size_t payload_size);

  /// Throws ConfigError on a payload of the wrong kind or size.
  void insert(std::uint32_t task_id, MemoryKind kind, std::vector<double> payload);
  /// n draws uniformly with replacement. Throws ConfigError when empty.
  [[nodiscard]] std::vector<const MemoryItem*> sample(std::size_t n, Rng& rng) const;

  [[nodiscard]] MemoryKind kind() const { return kind_; }
  [[nodiscard]] std::size_t capacity() const { return capacity_; }
  [[nodiscard]] std::size_t payload_size() const { return payload_size_; }
  [[nodiscard]] std::size_t size() const { return items_.size(); }
  [[nodiscard]] bool empty() const { return items_.empty(); }
  [[nodiscard]] const std::deque<MemoryItem>& items() const { return items_; }

  /// "STREAMCL-MEM v1\n", kind byte, count (u32 LE), then per item task_id
  /// (u32 LE), length (u32 LE) and float32 LE values.
  [[nodiscard]] std::vector<std::uint8_t> serialize() const;
  static EpisodicMemory deserialize(std::span<const std::uint8_t> bytes, std::size_t capacity);

 private:
  MemoryKind kind_;
  std::size_t capacity_;
  std::size_t payload_size_;
  std::deque<MemoryItem> items_;
};

GradientVector agem_reference_gradient(const Autoencoder& model, const ParamSet& params, const EpisodicMemory& mem,
                                       std::size_t n, Rng& rng);
GradientVector latent_agem_reference_gradient(const Autoencoder& model, const ParamSet& params,
                                              const EpisodicMemory& mem, std::size_t n, Rng& rng);

struct FisherState {
  std::vector<double> fisher;
  std::vector<double> anchor;
  double decay = 0.9;     // gamma
  double strength = 100;  // lambda

  [[nodiscard]] bool initialized() const { return !anchor.empty(); }
};

/// F <- gamma F + mean of per-sample squared gradients; anchor <- params.
void update_fisher(FisherState& fs, const Autoencoder& model, const ParamSet& params, std::span<const Volume> batch);

/// g + lambda F (theta - anchor). Returns g unchanged before the first update.
GradientVector ewc_regularized_gradient(const GradientVector& g, const ParamSet& params, const FisherState& fs);

struct StrategyConfig {
  Strategy strategy;
  ConditionVariant condition = ConditionVariant::Standard;
  std::size_t memory_capacity = 10;
  std::size_t reference_batch = 10;
  double ewc_lambda = 100.0;
  double ewc_gamma = 0.9;

  void validate() const;
};

/// Replay memory and Fisher estimate carried across tasks.
struct StrategyState {
  EpisodicMemory memory;
  FisherState fisher;

  static StrategyState create(const StrategyConfig& cfg, const Autoencoder& model);
};

struct StepInfo {
  double loss = 0.0;
  bool reference_used = false;
  bool projected = false;  // some segment was changed by projection
};

/// One optimization step of the configured strategy on `batch`.
StepInfo strategy_step(const StrategyConfig& cfg, const Autoencoder& model, ParamSet& params, AdamState& opt,
                       std::span<const Volume> batch, StrategyState& state, Rng& rng, const AdamHyper& hyper);

/// Task-boundary bookkeeping: memory insertion or Fisher update.
void strategy_end_task(const StrategyConfig& cfg, const Autoencoder& model, const ParamSet& params,
                       std::span<const Volume> task_batch, std::uint32_t task_id, StrategyState& state, Rng& rng);

}  // namespace streamcl
