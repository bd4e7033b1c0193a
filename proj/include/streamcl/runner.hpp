#pragma once

// Experiment orchestration: producer -> transport -> scheduling unit ->
// trainer, followed by post-training evaluation on every streamed step.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "streamcl/autoencoder.hpp"
#include "streamcl/config.hpp"
#include "streamcl/field_sim.hpp"
#include "streamcl/metrics.hpp"
#include "streamcl/strategies.hpp"

namespace streamcl {

/// Ground-truth frames kept for post-training evaluation only. The trainer
/// never holds a reference to it; every read is counted.
class EvalStore {
 public:
  void append(const FieldFrame& frame) { frames_.push_back(frame); }
  const std::vector<FieldFrame>& read() {
    ++reads_;
    return frames_;
  }
  [[nodiscard]] std::size_t size() const { return frames_.size(); }
  [[nodiscard]] std::uint64_t reads() const { return reads_; }
  /// FNV-1a 64 over step indices, dims and value bits.
  [[nodiscard]] std::string digest() const;

 private:
  std::vector<FieldFrame> frames_;
  std::uint64_t reads_ = 0;
};

/// Owns the model parameters, optimizer and strategy state.
class Trainer {
 public:
  Trainer(const RunConfig& cfg, const Autoencoder& model);

  /// Must be called once before the first task.
  void set_scale(double scale);
  [[nodiscard]] double scale() const { return scale_; }

  /// epochs_per_task strategy steps on the frame, then task-boundary updates.
  void train_task(const FieldFrame& frame);

  [[nodiscard]] const ParamSet& params() const { return params_; }
  [[nodiscard]] const StrategyState& state() const { return state_; }
  [[nodiscard]] std::size_t tasks_trained() const { return tasks_trained_; }
  [[nodiscard]] std::uint64_t projections() const { return projections_; }
  [[nodiscard]] double last_loss() const { return last_loss_; }

 private:
  StrategyConfig strategy_;
  AdamHyper adam_;
  std::size_t epochs_per_task_;
  const Autoencoder& model_;
  ParamSet params_;
  AdamState opt_;
  StrategyState state_;
  Rng rng_;
  double scale_ = 0.0;
  std::size_t tasks_trained_ = 0;
  std::uint64_t projections_ = 0;
  double last_loss_ = 0.0;
};

/// Per-run input scale: max |value| over the first drained cache, 1 if zero.
double input_scale(const std::vector<FieldFrame>& first_cache);

enum class RunStatus { Ok, Aborted, NumericFailure };

struct RunResult {
  RunStatus status = RunStatus::Ok;
  std::string message;
  MetricsReport report;
  ParamSet final_params;  // float32-rounded, as checkpointed
  double scale = 1.0;
  std::uint64_t frames_received = 0;
  std::uint64_t tasks_trained = 0;
  std::uint64_t pauses = 0;
  std::uint64_t resumes = 0;
  std::uint64_t eval_reads_before_end = 0;
  std::uint64_t projections = 0;
  std::string stream_digest;
};

/// Evaluates reconstruction of every frame under `params`.
MetricsReport evaluate(const RunConfig& cfg, const Autoencoder& model, const ParamSet& params,
                       const std::vector<FieldFrame>& frames, double scale);

/// Fault injection for tests.
struct RunHooks {
  /// Producer drops the connection after sending this many frames.
  std::optional<std::size_t> producer_abort_after;
};

/// Runs the full streaming pipeline and writes outputs to cfg.output_dir
/// when it is set.
RunResult run_experiment(const RunConfig& cfg, const RunHooks& hooks = {});

struct ComparisonRow {
  Strategy strategy;
  std::string seed;  // a seed number, or "mean"
  double avg_l1 = 0.0;
  double avg_ssim = 0.0;
  std::uint64_t mem_overhead_bytes = 0;
  std::string status;  // ok | aborted | numeric_failure
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  std::vector<RunResult> runs;  // one per (strategy, seed), in row order
  [[nodiscard]] std::string csv() const;
};

/// Runs every (strategy, seed) on the same simulated stream. Each run writes
/// into <output_dir>/<strategy>_seed<N>; the merged CSV goes to
/// <output_dir>/comparison.csv.
Comparison compare_strategies(const RunConfig& base, const std::vector<Strategy>& strategies,
                              const std::vector<std::uint64_t>& seeds);

/// Re-evaluates a checkpoint against the stream regenerated from `cfg`.
MetricsReport evaluate_checkpoint(const RunConfig& cfg, const std::filesystem::path& checkpoint);

/// Binary PPM grid: ground-truth row and reconstruction row, one column per
/// task, showing the central x-slice with a blue-white-red map over [-1, 1].
void write_reconstruction_grid(const std::filesystem::path& path, const std::vector<Volume>& truth,
                               const std::vector<Volume>& recon, std::size_t pixel = 8);

std::string_view to_string(RunStatus status);

}  // namespace streamcl
