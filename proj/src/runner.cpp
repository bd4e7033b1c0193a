#include "streamcl/runner.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "streamcl/checkpoint.hpp"
#include "streamcl/errors.hpp"
#include "streamcl/producer.hpp"
#include "streamcl/scheduling_unit.hpp"
#include "streamcl/transport.hpp"

namespace streamcl {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv_mix(std::uint64_t& h, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= kFnvPrime;
  }
}

std::string hex64(std::uint64_t h) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

void write_outputs(const RunConfig& cfg, const Autoencoder& model, const RunResult& result,
                   const Trainer* trainer, const std::vector<FieldFrame>& frames) {
  if (cfg.output_dir.empty()) return;
  std::filesystem::create_directories(cfg.output_dir);
  const auto& dir = cfg.output_dir;
  write_text(dir / "tasks.csv", per_task_csv(result.report));
  write_text(dir / "summary.csv", summary_csv(result.report));
  write_text(dir / "config.txt", cfg.to_text());

  std::ostringstream rep;
  rep << "strategy: " << result.report.strategy.name() << '\n'
      << "seed: " << result.report.seed << '\n'
      << "config digest: " << result.report.config_digest << '\n'
      << "status: " << to_string(result.status) << (result.report.partial ? " (partial report)" : "") << '\n';
  if (!result.message.empty()) rep << "message: " << result.message << '\n';
  rep << "evaluation frames: the streamed training frames (forgetting measurement)\n"
      << "input scale: " << format_real(result.scale) << '\n'
      << "frames received: " << result.frames_received << '\n'
      << "tasks trained: " << result.tasks_trained << '\n'
      << "pause/resume: " << result.pauses << '/' << result.resumes << '\n'
      << "projections applied: " << result.projections << '\n'
      << "avg_l1: " << format_real(result.report.avg_l1) << '\n'
      << "avg_ssim: " << format_real(result.report.avg_ssim) << '\n'
      << "mem_overhead_bytes: " << result.report.mem_overhead_bytes << '\n';
  write_text(dir / "report.txt", rep.str());

  if (result.final_params.flat.empty()) return;
  save_checkpoint(dir / "model.ckpt", model, result.final_params);
  if (trainer && !trainer->state().memory.empty()) {
    write_file(dir / "memory.bin", trainer->state().memory.serialize());
  }
  if (cfg.plots && !frames.empty()) {
    std::vector<Volume> truth;
    std::vector<Volume> recon;
    for (const auto& f : frames) {
      truth.push_back(to_volume(f, result.scale));
      recon.push_back(model.reconstruct(result.final_params, truth.back()));
    }
    write_reconstruction_grid(dir / ("recon_" + result.report.strategy.name() + ".ppm"), truth, recon);
  }
}

}  // namespace

std::string_view to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Ok: return "ok";
    case RunStatus::Aborted: return "aborted";
    case RunStatus::NumericFailure: return "numeric_failure";
  }
  return "?";
}

std::string EvalStore::digest() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& f : frames_) {
    fnv_mix(h, f.step_index);
    fnv_mix(h, f.dims.x);
    fnv_mix(h, f.dims.y);
    fnv_mix(h, f.dims.z);
    for (float v : f.values) fnv_mix(h, std::bit_cast<std::uint32_t>(v));
  }
  return hex64(h);
}

double input_scale(const std::vector<FieldFrame>& first_cache) {
  double m = 0.0;
  for (const auto& f : first_cache) {
    for (float v : f.values) m = std::max(m, std::abs(static_cast<double>(v)));
  }
  return m > 0.0 ? m : 1.0;
}

Trainer::Trainer(const RunConfig& cfg, const Autoencoder& model)
    : strategy_(cfg.strategy),
      adam_(cfg.adam),
      epochs_per_task_(cfg.epochs_per_task),
      model_(model),
      params_(model.init_params(cfg.seed)),
      state_(StrategyState::create(cfg.strategy, model)),
      rng_(cfg.seed ^ 0x5eed5eed5eed5eedULL) {}

void Trainer::set_scale(double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw NumericError("invalid input scale");
  scale_ = scale;
}

void Trainer::train_task(const FieldFrame& frame) {
  if (scale_ == 0.0) throw ConfigError("trainer scale not set before the first task");
  const std::vector<Volume> batch{to_volume(frame, scale_)};
  for (std::size_t epoch = 0; epoch < epochs_per_task_; ++epoch) {
    const StepInfo info = strategy_step(strategy_, model_, params_, opt_, batch, state_, rng_, adam_);
    last_loss_ = info.loss;
    if (info.projected) ++projections_;
  }
  strategy_end_task(strategy_, model_, params_, batch, frame.step_index, state_, rng_);
  ++tasks_trained_;
}

MetricsReport evaluate(const RunConfig& cfg, const Autoencoder& model, const ParamSet& params,
                       const std::vector<FieldFrame>& frames, double scale) {
  MetricsReport report;
  report.strategy = cfg.strategy.strategy;
  report.seed = cfg.seed;
  report.config_digest = cfg.digest();
  report.mem_overhead_bytes = memory_overhead(cfg.strategy.strategy, cfg.arch, cfg.sim, cfg.strategy.memory_capacity);
  for (const auto& f : frames) {
    const Volume x = to_volume(f, scale);
    const Volume y = model.reconstruct(params, x);
    report.per_task.push_back({f.step_index, l1_metric(x, y), ssim3d(x, y)});
  }
  report.finalize();
  return report;
}

RunResult run_experiment(const RunConfig& cfg, const RunHooks& hooks) {
  cfg.validate();
  const Autoencoder model(cfg.arch);
  Trainer trainer(cfg, model);
  EvalStore eval_store;
  RunResult result;

  StreamPair streams =
      cfg.transport == TransportKind::Tcp ? make_tcp_pair() : make_inproc_pair();
  MessageChannel producer_channel(std::move(streams.first));
  MessageChannel trainer_channel(std::move(streams.second));
  Producer producer(cfg.sim, producer_channel);
  if (hooks.producer_abort_after) producer.abort_after(*hooks.producer_abort_after);
  SchedulingUnit unit(trainer_channel, cfg.cache_capacity);

  bool scale_set = false;
  auto process_cache = [&] {
    DrainResult drained = unit.drain();
    if (!scale_set) {
      trainer.set_scale(input_scale(drained.frames));
      scale_set = true;
    }
    for (const auto& frame : drained.frames) {
      eval_store.append(frame);
      trainer.train_task(frame);
    }
  };
  // Returns true at end of stream.
  auto handle = [&](PumpEvent ev) {
    if (ev == PumpEvent::CacheFull) process_cache();
    if (ev == PumpEvent::EndOfStream) {
      if (!unit.scheduler().empty()) process_cache();
      return true;
    }
    return false;
  };

  std::thread producer_thread;
  try {
    if (cfg.concurrency == Concurrency::Threaded) {
      producer_thread = std::thread([&] { producer.run(); });
      while (!handle(unit.pump(true))) {
      }
    } else {
      bool done = false;
      while (!done) {
        const ProducerStatus ps = producer.step();
        PumpEvent ev;
        while (!done && (ev = unit.pump(false)) != PumpEvent::Idle) done = handle(ev);
        if (!done && ps == ProducerStatus::Aborted) throw TransportError("producer aborted");
        if (!done && ps == ProducerStatus::Finished && unit.pump(false) == PumpEvent::Idle) {
          throw TransportError("producer finished without END reaching the trainer");
        }
      }
    }
  } catch (const TransportError& e) {
    result.status = RunStatus::Aborted;
    result.message = e.what();
    // Frames already cached arrived intact; train on them before stopping.
    try {
      if (!unit.scheduler().empty()) process_cache();
    } catch (const NumericError& ne) {
      result.status = RunStatus::NumericFailure;
      result.message = ne.what();
    }
  } catch (const NumericError& e) {
    result.status = RunStatus::NumericFailure;
    result.message = e.what();
  } catch (...) {
    trainer_channel.close();
    if (producer_thread.joinable()) producer_thread.join();
    throw;
  }
  if (result.status != RunStatus::Ok) trainer_channel.close();
  if (producer_thread.joinable()) producer_thread.join();

  result.scale = scale_set ? trainer.scale() : 1.0;
  result.frames_received = trainer_channel.frames_received();
  result.tasks_trained = trainer.tasks_trained();
  result.pauses = unit.pauses_sent();
  result.resumes = unit.resumes_sent();
  result.projections = trainer.projections();
  result.eval_reads_before_end = eval_store.reads();
  result.stream_digest = eval_store.digest();
  if (result.eval_reads_before_end != 0) throw std::logic_error("evaluation store read during training");

  std::vector<FieldFrame> frames;
  if (result.status != RunStatus::NumericFailure) {
    frames = eval_store.read();
    result.final_params = round_to_float(trainer.params());
    result.report = evaluate(cfg, model, result.final_params, frames, result.scale);
  } else {
    result.report.strategy = cfg.strategy.strategy;
    result.report.seed = cfg.seed;
    result.report.config_digest = cfg.digest();
    result.report.mem_overhead_bytes =
        memory_overhead(cfg.strategy.strategy, cfg.arch, cfg.sim, cfg.strategy.memory_capacity);
  }
  result.report.partial = result.status != RunStatus::Ok;
  write_outputs(cfg, model, result, &trainer, frames);
  return result;
}

std::string Comparison::csv() const {
  std::ostringstream os;
  os << "strategy,seed,avg_l1,avg_ssim,mem_overhead_bytes,status\n";
  for (const auto& r : rows) {
    os << r.strategy.name() << ',' << r.seed << ',' << format_real(r.avg_l1) << ',' << format_real(r.avg_ssim)
       << ',' << r.mem_overhead_bytes << ',' << r.status << '\n';
  }
  return os.str();
}

Comparison compare_strategies(const RunConfig& base, const std::vector<Strategy>& strategies,
                              const std::vector<std::uint64_t>& seeds) {
  if (strategies.empty()) throw ConfigError("compare: at least one strategy is required");
  if (seeds.empty()) throw ConfigError("compare: at least one seed is required");
  Comparison cmp;
  for (const Strategy& s : strategies) {
    double sum_l1 = 0.0;
    double sum_ssim = 0.0;
    std::size_t ok = 0;
    std::uint64_t overhead = 0;
    for (std::uint64_t seed : seeds) {
      RunConfig cfg = base;
      cfg.strategy.strategy = s;
      cfg.seed = seed;
      if (!base.output_dir.empty()) cfg.output_dir = base.output_dir / (s.name() + "_seed" + std::to_string(seed));
      RunResult run = run_experiment(cfg);
      const auto& rep = run.report;
      overhead = rep.mem_overhead_bytes;
      cmp.rows.push_back({s, std::to_string(seed), rep.avg_l1, rep.avg_ssim, rep.mem_overhead_bytes,
                          std::string(to_string(run.status))});
      if (run.status == RunStatus::Ok) {
        sum_l1 += rep.avg_l1;
        sum_ssim += rep.avg_ssim;
        ++ok;
      }
      cmp.runs.push_back(std::move(run));
    }
    const double n = ok ? static_cast<double>(ok) : 1.0;
    cmp.rows.push_back({s, "mean", sum_l1 / n, sum_ssim / n, overhead, ok == seeds.size() ? "ok" : "incomplete"});
  }
  if (!base.output_dir.empty()) {
    std::filesystem::create_directories(base.output_dir);
    write_text(base.output_dir / "comparison.csv", cmp.csv());
  }
  return cmp;
}

MetricsReport evaluate_checkpoint(const RunConfig& cfg, const std::filesystem::path& checkpoint) {
  cfg.validate();
  const Autoencoder model(cfg.arch);
  const ParamSet params = load_checkpoint(checkpoint, model);
  std::vector<FieldFrame> frames;
  for (std::size_t t = 0; t < cfg.sim.steps; ++t) frames.push_back(generate_frame(cfg.sim, t));
  // The trainer drains the cache only when it is full or the stream ended,
  // so the first drained cache is always the first min(C, T) frames.
  const std::size_t first = std::min(cfg.cache_capacity, frames.size());
  const double scale = input_scale({frames.begin(), frames.begin() + static_cast<std::ptrdiff_t>(first)});
  return evaluate(cfg, model, params, frames, scale);
}

void write_reconstruction_grid(const std::filesystem::path& path, const std::vector<Volume>& truth,
                               const std::vector<Volume>& recon, std::size_t pixel) {
  if (truth.empty() || truth.size() != recon.size()) throw ShapeError("plot: mismatched volume lists");
  const Dims d = truth.front().dims;
  const std::size_t gap = pixel;
  const std::size_t tile_w = d.z * pixel;
  const std::size_t tile_h = d.y * pixel;
  const std::size_t width = truth.size() * tile_w + (truth.size() + 1) * gap;
  const std::size_t height = 2 * tile_h + 3 * gap;
  std::vector<std::uint8_t> rgb(width * height * 3, 255);

  auto paint = [&](const Volume& v, std::size_t col, std::size_t row) {
    const std::size_t x = v.dims.x / 2;
    const std::size_t ox = gap + col * (tile_w + gap);
    const std::size_t oy = gap + row * (tile_h + gap);
    for (std::size_t y = 0; y < v.dims.y; ++y)
      for (std::size_t z = 0; z < v.dims.z; ++z) {
        const double s = std::clamp(v.at(x, y, z), -1.0, 1.0);
        const std::uint8_t r = to_byte(s >= 0 ? 1.0 : 1.0 + s);
        const std::uint8_t g = to_byte(1.0 - std::abs(s));
        const std::uint8_t b = to_byte(s <= 0 ? 1.0 : 1.0 - s);
        for (std::size_t py = 0; py < pixel; ++py)
          for (std::size_t px = 0; px < pixel; ++px) {
            const std::size_t idx = ((oy + y * pixel + py) * width + ox + z * pixel + px) * 3;
            rgb[idx] = r;
            rgb[idx + 1] = g;
            rgb[idx + 2] = b;
          }
      }
  };
  for (std::size_t i = 0; i < truth.size(); ++i) {
    paint(truth[i], i, 0);
    paint(recon[i], i, 1);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "P6\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

}  // namespace streamcl
