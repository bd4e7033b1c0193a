#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "streamcl/autoencoder.hpp"
#include "streamcl/field_sim.hpp"
#include "streamcl/strategies.hpp"
#include "streamcl/volume.hpp"

namespace streamcl {

/// Mean absolute voxel difference. Throws ShapeError on mismatched dims.
double l1_metric(const Volume& x, const Volume& y);

inline constexpr std::size_t kSsimWindow = 7;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

/// Normalized 1D Gaussian taps of the SSIM window.
std::vector<double> ssim_gaussian_taps();

/// Volumetric SSIM averaged over all valid 7x7x7 window positions. The
/// dynamic range is max(x) - min(x) of the ground truth `x` (1 if constant).
/// Throws ShapeError on mismatched dims or any side shorter than the window.
double ssim3d(const Volume& x, const Volume& y);
double ssim3d(const Volume& x, const Volume& y, double dynamic_range);

/// Extra bytes a strategy keeps beyond the model and optimizer (float32 payloads).
std::uint64_t memory_overhead(const Strategy& strategy, const ArchSpec& arch, const SimConfig& sim,
                              std::size_t memory_capacity);

struct TaskMetrics {
  std::uint32_t task_id = 0;
  double l1 = 0.0;
  double ssim = 0.0;
};

struct MetricsReport {
  std::vector<TaskMetrics> per_task;
  double avg_l1 = 0.0;
  double avg_ssim = 0.0;
  std::uint64_t mem_overhead_bytes = 0;
  Strategy strategy;
  std::uint64_t seed = 0;
  std::string config_digest;
  bool partial = false;

  /// Recomputes the averages from per_task.
  void finalize();
};

/// strategy,seed,task_id,l1,ssim
std::string per_task_csv(const MetricsReport& report);
/// strategy,seed,avg_l1,avg_ssim,mem_overhead_bytes
std::string summary_csv(const MetricsReport& report);
std::string summary_csv_header();
std::string summary_csv_row(const MetricsReport& report);

/// Shortest decimal form that round-trips a double.
std::string format_real(double v);

}  // namespace streamcl
