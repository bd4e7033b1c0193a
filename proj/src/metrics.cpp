#include "streamcl/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "streamcl/errors.hpp"

namespace streamcl {

double l1_metric(const Volume& x, const Volume& y) {
  if (x.dims != y.dims || x.values.size() != y.values.size()) throw ShapeError("l1_metric: shape mismatch");
  if (x.values.empty()) throw ShapeError("l1_metric: empty volume");
  double s = 0.0;
  for (std::size_t i = 0; i < x.values.size(); ++i) s += std::abs(x.values[i] - y.values[i]);
  return s / static_cast<double>(x.values.size());
}

std::vector<double> ssim_gaussian_taps() {
  std::vector<double> taps(kSsimWindow);
  const double mid = static_cast<double>(kSsimWindow - 1) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    const double d = static_cast<double>(i) - mid;
    taps[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    total += taps[i];
  }
  for (double& t : taps) t /= total;
  return taps;
}

namespace {

// Valid-mode separable Gaussian filter; output dims shrink by window-1 per axis.
Volume gaussian_filter_valid(const Volume& in, const std::vector<double>& taps) {
  const std::size_t k = taps.size();
  Volume cur = in;
  for (int axis = 0; axis < 3; ++axis) {
    Dims od = cur.dims;
    if (axis == 0) od.x -= static_cast<std::uint32_t>(k - 1);
    if (axis == 1) od.y -= static_cast<std::uint32_t>(k - 1);
    if (axis == 2) od.z -= static_cast<std::uint32_t>(k - 1);
    Volume out(od);
    for (std::size_t x = 0; x < od.x; ++x)
      for (std::size_t y = 0; y < od.y; ++y)
        for (std::size_t z = 0; z < od.z; ++z) {
          double s = 0.0;
          for (std::size_t t = 0; t < k; ++t) {
            s += taps[t] * cur.at(x + (axis == 0 ? t : 0), y + (axis == 1 ? t : 0), z + (axis == 2 ? t : 0));
          }
          out.at(x, y, z) = s;
        }
    cur = std::move(out);
  }
  return cur;
}

Volume product(const Volume& a, const Volume& b) {
  Volume out(a.dims);
  for (std::size_t i = 0; i < a.values.size(); ++i) out.values[i] = a.values[i] * b.values[i];
  return out;
}

}  // namespace

double ssim3d(const Volume& x, const Volume& y) {
  if (x.values.empty()) throw ShapeError("ssim3d: empty volume");
  const auto [lo, hi] = std::minmax_element(x.values.begin(), x.values.end());
  const double range = *hi - *lo;
  return ssim3d(x, y, range > 0.0 ? range : 1.0);
}

double ssim3d(const Volume& x, const Volume& y, double dynamic_range) {
  if (x.dims != y.dims || x.values.size() != y.values.size()) throw ShapeError("ssim3d: shape mismatch");
  if (x.dims.x < kSsimWindow || x.dims.y < kSsimWindow || x.dims.z < kSsimWindow) {
    throw ShapeError("ssim3d: every side must be at least the window size");
  }
  const double c1 = (kSsimK1 * dynamic_range) * (kSsimK1 * dynamic_range);
  const double c2 = (kSsimK2 * dynamic_range) * (kSsimK2 * dynamic_range);
  const auto taps = ssim_gaussian_taps();

  const Volume mu_x = gaussian_filter_valid(x, taps);
  const Volume mu_y = gaussian_filter_valid(y, taps);
  const Volume e_xx = gaussian_filter_valid(product(x, x), taps);
  const Volume e_yy = gaussian_filter_valid(product(y, y), taps);
  const Volume e_xy = gaussian_filter_valid(product(x, y), taps);

  double total = 0.0;
  for (std::size_t i = 0; i < mu_x.values.size(); ++i) {
    const double mx = mu_x.values[i];
    const double my = mu_y.values[i];
    const double vx = e_xx.values[i] - mx * mx;
    const double vy = e_yy.values[i] - my * my;
    const double cxy = e_xy.values[i] - mx * my;
    total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mu_x.values.size());
}

std::uint64_t memory_overhead(const Strategy& strategy, const ArchSpec& arch, const SimConfig& sim,
                              std::size_t memory_capacity) {
  constexpr std::uint64_t kFloat = 4;
  const std::uint64_t m = memory_capacity;
  switch (strategy.kind) {
    case StrategyKind::Naive: return 0;
    case StrategyKind::AGEM: {
      const std::uint64_t d = sim.grid_size;
      return m * d * d * d * kFloat;
    }
    case StrategyKind::LatentAGEM: return m * arch.latent_dim * kFloat;
    case StrategyKind::OnlineEWC: return 2 * static_cast<std::uint64_t>(parameter_count(arch)) * kFloat;
  }
  return 0;
}

void MetricsReport::finalize() {
  double l1 = 0.0;
  double ssim = 0.0;
  for (const auto& t : per_task) {
    l1 += t.l1;
    ssim += t.ssim;
  }
  const double n = per_task.empty() ? 1.0 : static_cast<double>(per_task.size());
  avg_l1 = l1 / n;
  avg_ssim = ssim / n;
}

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string per_task_csv(const MetricsReport& report) {
  std::ostringstream os;
  os << "strategy,seed,task_id,l1,ssim\n";
  for (const auto& t : report.per_task) {
    os << report.strategy.name() << ',' << report.seed << ',' << t.task_id << ',' << format_real(t.l1) << ','
       << format_real(t.ssim) << '\n';
  }
  return os.str();
}

std::string summary_csv_header() { return "strategy,seed,avg_l1,avg_ssim,mem_overhead_bytes\n"; }

std::string summary_csv_row(const MetricsReport& report) {
  std::ostringstream os;
  os << report.strategy.name() << ',' << report.seed << ',' << format_real(report.avg_l1) << ','
     << format_real(report.avg_ssim) << ',' << report.mem_overhead_bytes << '\n';
  return os.str();
}

std::string summary_csv(const MetricsReport& report) { return summary_csv_header() + summary_csv_row(report); }

}  // namespace streamcl
