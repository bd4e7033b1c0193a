#include "streamcl/strategies.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "streamcl/errors.hpp"

namespace streamcl {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Projects g in place against g_ref over one segment. Returns true when g changed.
bool project_segment(std::span<double> g, std::span<const double> g_ref, ConditionVariant variant) {
  const double ref_sq = dot(g_ref, g_ref);
  if (ref_sq < kDegenerateReference) return false;
  const double gdot = dot(g, g_ref);
  if (variant == ConditionVariant::Standard && gdot >= 0.0) return false;
  const double c = gdot / ref_sq;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] -= c * g_ref[i];
  return true;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  if (pos + 4 > bytes.size()) throw CheckpointError("memory file truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
  pos += 4;
  return v;
}

constexpr std::string_view kMemoryHeader = "STREAMCL-MEM v1\n";

}  // namespace

std::string Strategy::name() const {
  switch (kind) {
    case StrategyKind::Naive: return "naive";
    case StrategyKind::OnlineEWC: return "ewc";
    case StrategyKind::AGEM: return "agem";
    case StrategyKind::LatentAGEM: return projection == Projection::Layerwise ? "latent-layerwise" : "latent-global";
  }
  return "?";
}

Strategy Strategy::parse(std::string_view name) {
  if (name == "naive") return {StrategyKind::Naive, Projection::Global};
  if (name == "ewc") return {StrategyKind::OnlineEWC, Projection::Global};
  if (name == "agem") return {StrategyKind::AGEM, Projection::Global};
  if (name == "latent-global") return {StrategyKind::LatentAGEM, Projection::Global};
  if (name == "latent-layerwise") return {StrategyKind::LatentAGEM, Projection::Layerwise};
  throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

GradientVector project_gradient(const GradientVector& g, const GradientVector& g_ref, ConditionVariant variant) {
  if (g.flat.size() != g_ref.flat.size()) throw ShapeError("project_gradient: length mismatch");
  GradientVector out = g;
  project_segment(out.flat, g_ref.flat, variant);
  return out;
}

GradientVector project_layerwise(const GradientVector& g, const GradientVector& g_ref, const Partition& partition,
                                 ConditionVariant variant) {
  if (g.flat.size() != g_ref.flat.size()) throw ShapeError("project_layerwise: length mismatch");
  if (g.partition != partition || g_ref.partition != partition) {
    throw ShapeError("project_layerwise: partition mismatch");
  }
  std::size_t covered = 0;
  for (const auto& seg : partition) {
    if (seg.offset + seg.length > g.flat.size()) throw ShapeError("project_layerwise: segment out of bounds");
    covered += seg.length;
  }
  if (covered != g.flat.size()) throw ShapeError("project_layerwise: partition does not cover the gradient");

  GradientVector out = g;
  for (const auto& seg : partition) {
    project_segment(std::span(out.flat).subspan(seg.offset, seg.length),
                    std::span<const double>(g_ref.flat).subspan(seg.offset, seg.length), variant);
  }
  return out;
}

EpisodicMemory::EpisodicMemory(MemoryKind kind, std::size_t capacity, std::size_t payload_size)
    : kind_(kind), capacity_(capacity), payload_size_(payload_size) {
  if (capacity == 0) throw ConfigError("memory capacity must be positive");
}

void EpisodicMemory::insert(std::uint32_t task_id, MemoryKind kind, std::vector<double> payload) {
  if (kind != kind_) throw ConfigError("memory payload kind mismatch");
  if (payload.size() != payload_size_) throw ConfigError("memory payload size mismatch");
  items_.push_back({task_id, std::move(payload)});
  if (items_.size() > capacity_) items_.pop_front();
}

std::vector<const MemoryItem*> EpisodicMemory::sample(std::size_t n, Rng& rng) const {
  if (items_.empty()) throw ConfigError("sampling from an empty memory");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<const MemoryItem*> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(&items_[pick(rng)]);
  return out;
}

std::vector<std::uint8_t> EpisodicMemory::serialize() const {
  std::vector<std::uint8_t> out(kMemoryHeader.begin(), kMemoryHeader.end());
  out.push_back(static_cast<std::uint8_t>(kind_));
  put_u32(out, static_cast<std::uint32_t>(items_.size()));
  for (const auto& item : items_) {
    put_u32(out, item.task_id);
    put_u32(out, static_cast<std::uint32_t>(item.payload.size()));
    for (double v : item.payload) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

EpisodicMemory EpisodicMemory::deserialize(std::span<const std::uint8_t> bytes, std::size_t capacity) {
  if (bytes.size() < kMemoryHeader.size() + 1 ||
      std::memcmp(bytes.data(), kMemoryHeader.data(), kMemoryHeader.size()) != 0) {
    throw CheckpointError("not a STREAMCL-MEM v1 file");
  }
  std::size_t pos = kMemoryHeader.size();
  const std::uint8_t kind_byte = bytes[pos++];
  if (kind_byte > static_cast<std::uint8_t>(MemoryKind::Latent)) throw CheckpointError("unknown memory kind");
  const auto kind = static_cast<MemoryKind>(kind_byte);
  const std::uint32_t count = get_u32(bytes, pos);
  std::vector<MemoryItem> items;
  std::size_t payload_size = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    MemoryItem item;
    item.task_id = get_u32(bytes, pos);
    const std::uint32_t len = get_u32(bytes, pos);
    if (i > 0 && len != payload_size) throw CheckpointError("inhomogeneous memory payloads");
    payload_size = len;
    item.payload.resize(len);
    for (auto& v : item.payload) v = std::bit_cast<float>(get_u32(bytes, pos));
    items.push_back(std::move(item));
  }
  if (pos != bytes.size()) throw CheckpointError("trailing bytes in memory file");
  if (count > capacity) throw CheckpointError("memory file exceeds capacity");
  EpisodicMemory mem(kind, capacity, payload_size);
  for (auto& item : items) mem.insert(item.task_id, kind, std::move(item.payload));
  return mem;
}

GradientVector agem_reference_gradient(const Autoencoder& model, const ParamSet& params, const EpisodicMemory& mem,
                                       std::size_t n, Rng& rng) {
  if (mem.kind() != MemoryKind::RawField) throw ConfigError("A-GEM requires a raw-field memory");
  std::vector<Volume> batch;
  for (const MemoryItem* item : mem.sample(n, rng)) {
    Volume v;
    v.dims = model.input_dims();
    v.values = item->payload;
    batch.push_back(std::move(v));
  }
  return model.grad_recon(params, batch).grad;
}

GradientVector latent_agem_reference_gradient(const Autoencoder& model, const ParamSet& params,
                                              const EpisodicMemory& mem, std::size_t n, Rng& rng) {
  if (mem.kind() != MemoryKind::Latent) throw ConfigError("latent A-GEM requires a latent memory");
  std::vector<LatentCode> latents;
  for (const MemoryItem* item : mem.sample(n, rng)) latents.push_back({item->payload});
  return model.grad_latent_cycle(params, latents).grad;
}

void update_fisher(FisherState& fs, const Autoencoder& model, const ParamSet& params, std::span<const Volume> batch) {
  if (batch.empty()) throw ShapeError("update_fisher: empty batch");
  const std::size_t n = params.flat.size();
  if (fs.fisher.empty()) fs.fisher.assign(n, 0.0);
  if (fs.fisher.size() != n) throw ShapeError("update_fisher: Fisher length mismatch");

  std::vector<double> fresh(n, 0.0);
  for (const Volume& x : batch) {
    const auto g = model.grad_recon(params, std::span(&x, 1)).grad;
    for (std::size_t i = 0; i < n; ++i) fresh[i] += g.flat[i] * g.flat[i];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < n; ++i) fs.fisher[i] = fs.decay * fs.fisher[i] + fresh[i] * inv;
  fs.anchor = params.flat;
}

GradientVector ewc_regularized_gradient(const GradientVector& g, const ParamSet& params, const FisherState& fs) {
  if (!fs.initialized()) return g;
  if (g.flat.size() != params.flat.size() || fs.fisher.size() != g.flat.size() ||
      fs.anchor.size() != g.flat.size()) {
    throw ShapeError("ewc_regularized_gradient: length mismatch");
  }
  GradientVector out = g;
  for (std::size_t i = 0; i < out.flat.size(); ++i) {
    out.flat[i] += fs.strength * fs.fisher[i] * (params.flat[i] - fs.anchor[i]);
  }
  return out;
}

void StrategyConfig::validate() const {
  if (memory_capacity == 0) throw ConfigError("memory.capacity must be positive");
  if (reference_batch == 0) throw ConfigError("strategy.reference_batch must be positive");
  if (!(ewc_lambda >= 0.0) || !std::isfinite(ewc_lambda)) throw ConfigError("ewc.lambda must be >= 0");
  if (!(ewc_gamma >= 0.0 && ewc_gamma <= 1.0)) throw ConfigError("ewc.gamma must lie in [0, 1]");
}

StrategyState StrategyState::create(const StrategyConfig& cfg, const Autoencoder& model) {
  cfg.validate();
  const bool latent = cfg.strategy.kind == StrategyKind::LatentAGEM;
  StrategyState s{EpisodicMemory(latent ? MemoryKind::Latent : MemoryKind::RawField, cfg.memory_capacity,
                                 latent ? model.arch().latent_dim : model.input_dims().count()),
                  FisherState{}};
  s.fisher.decay = cfg.ewc_gamma;
  s.fisher.strength = cfg.ewc_lambda;
  return s;
}

StepInfo strategy_step(const StrategyConfig& cfg, const Autoencoder& model, ParamSet& params, AdamState& opt,
                       std::span<const Volume> batch, StrategyState& state, Rng& rng, const AdamHyper& hyper) {
  if (batch.empty()) throw ShapeError("strategy_step: empty batch");
  auto [loss, grad] = model.grad_recon(params, batch);
  if (!std::isfinite(loss)) throw NumericError("non-finite training loss");
  StepInfo info{loss, false, false};

  switch (cfg.strategy.kind) {
    case StrategyKind::Naive:
      break;
    case StrategyKind::OnlineEWC:
      grad = ewc_regularized_gradient(grad, params, state.fisher);
      break;
    case StrategyKind::AGEM:
    case StrategyKind::LatentAGEM: {
      const bool latent = cfg.strategy.kind == StrategyKind::LatentAGEM;
      if (state.memory.kind() != (latent ? MemoryKind::Latent : MemoryKind::RawField)) {
        throw ConfigError("strategy/memory kind mismatch");
      }
      if (state.memory.empty()) break;
      const std::size_t n = std::min(cfg.reference_batch, state.memory.size());
      const GradientVector ref = latent ? latent_agem_reference_gradient(model, params, state.memory, n, rng)
                                        : agem_reference_gradient(model, params, state.memory, n, rng);
      GradientVector projected = (latent && cfg.strategy.projection == Projection::Layerwise)
                                     ? project_layerwise(grad, ref, model.partition(), cfg.condition)
                                     : project_gradient(grad, ref, cfg.condition);
      info.reference_used = true;
      info.projected = projected.flat != grad.flat;
      grad = std::move(projected);
      break;
    }
  }
  apply_update(params, grad, opt, hyper);
  return info;
}

void strategy_end_task(const StrategyConfig& cfg, const Autoencoder& model, const ParamSet& params,
                       std::span<const Volume> task_batch, std::uint32_t task_id, StrategyState& state, Rng& rng) {
  if (task_batch.empty()) throw ShapeError("strategy_end_task: empty task batch");
  switch (cfg.strategy.kind) {
    case StrategyKind::Naive:
      break;
    case StrategyKind::OnlineEWC:
      update_fisher(state.fisher, model, params, task_batch);
      break;
    case StrategyKind::AGEM:
    case StrategyKind::LatentAGEM: {
      std::uniform_int_distribution<std::size_t> pick(0, task_batch.size() - 1);
      const Volume& chosen = task_batch[pick(rng)];
      if (cfg.strategy.kind == StrategyKind::AGEM) {
        state.memory.insert(task_id, MemoryKind::RawField, chosen.values);
      } else {
        state.memory.insert(task_id, MemoryKind::Latent, model.encode(params, chosen).values);
      }
      break;
    }
  }
}

}  // namespace streamcl
