#include "streamcl/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "streamcl/errors.hpp"

namespace streamcl {

namespace {

constexpr std::size_t kKernel = 3;
constexpr std::size_t kTaps = kKernel * kKernel * kKernel;

std::size_t cube(std::size_t n) { return n * n * n; }

}  // namespace

void ArchSpec::validate() const {
  if (input_dim == 0) throw ConfigError("arch: input_dim must be positive");
  if (channels.empty()) throw ConfigError("arch: at least one conv stage is required");
  if (latent_dim == 0) throw ConfigError("arch: latent_dim must be positive");
  for (std::size_t c : channels) {
    if (c == 0) throw ConfigError("arch: channel counts must be positive");
  }
  const std::size_t factor = std::size_t{1} << channels.size();
  if (input_dim % factor != 0) {
    throw ConfigError("arch: input_dim " + std::to_string(input_dim) + " is not divisible by 2^" +
                      std::to_string(channels.size()));
  }
}

std::size_t parameter_count(const ArchSpec& arch) {
  arch.validate();
  std::size_t total = 0;
  std::size_t in_c = 1;
  for (std::size_t c : arch.channels) {
    total += c * in_c * kTaps + c;
    in_c = c;
  }
  const std::size_t bottleneck = arch.channels.back() * cube(arch.input_dim >> arch.channels.size());
  total += bottleneck * arch.latent_dim + arch.latent_dim;
  total += arch.latent_dim * bottleneck + bottleneck;
  for (std::size_t i = arch.channels.size(); i-- > 0;) {
    const std::size_t out_c = i == 0 ? 1 : arch.channels[i - 1];
    total += arch.channels[i] * out_c * kTaps + out_c;
  }
  return total;
}

std::vector<std::vector<double>> ParamSet::to_tensors() const {
  std::vector<std::vector<double>> out;
  out.reserve(partition.size());
  for (std::size_t i = 0; i < partition.size(); ++i) {
    auto seg = segment(i);
    out.emplace_back(seg.begin(), seg.end());
  }
  return out;
}

ParamSet ParamSet::from_tensors(const std::vector<std::vector<double>>& tensors, Partition partition) {
  if (tensors.size() != partition.size()) throw ShapeError("tensor count does not match partition");
  ParamSet p;
  std::size_t total = 0;
  for (const auto& seg : partition) total = std::max(total, seg.offset + seg.length);
  p.flat.assign(total, 0.0);
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].size() != partition[i].length) {
      throw ShapeError("tensor '" + partition[i].name + "' has the wrong length");
    }
    std::copy(tensors[i].begin(), tensors[i].end(), p.flat.begin() + static_cast<std::ptrdiff_t>(partition[i].offset));
  }
  p.partition = std::move(partition);
  return p;
}

Autoencoder::Autoencoder(ArchSpec arch) : arch_(std::move(arch)) {
  arch_.validate();
  const std::size_t stages = arch_.channels.size();

  std::size_t in_c = 1;
  std::size_t size = arch_.input_dim;
  for (std::size_t i = 0; i < stages; ++i) {
    add_layer(LayerKind::Conv, in_c, arch_.channels[i], size, size / 2, true, "enc.conv" + std::to_string(i));
    in_c = arch_.channels[i];
    size /= 2;
  }
  const std::size_t bottleneck = in_c * cube(size);
  add_layer(LayerKind::Dense, bottleneck, arch_.latent_dim, 1, 1, true, "enc.dense");
  add_layer(LayerKind::Dense, arch_.latent_dim, bottleneck, 1, 1, true, "dec.dense");
  for (std::size_t i = stages; i-- > 0;) {
    const std::size_t out_c = i == 0 ? 1 : arch_.channels[i - 1];
    add_layer(LayerKind::ConvTranspose, arch_.channels[i], out_c, size, size * 2, i != 0,
              "dec.deconv" + std::to_string(stages - 1 - i));
    size *= 2;
  }

  const std::size_t n_enc = stages + 1;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    (i < n_enc ? encoder_order_ : decoder_order_).push_back(i);
  }
  recon_order_ = encoder_order_;
  recon_order_.insert(recon_order_.end(), decoder_order_.begin(), decoder_order_.end());
  cycle_order_ = decoder_order_;
  cycle_order_.insert(cycle_order_.end(), encoder_order_.begin(), encoder_order_.end());
}

void Autoencoder::add_layer(LayerKind kind, std::size_t in_c, std::size_t out_c, std::size_t in_size,
                            std::size_t out_size, bool activation, const std::string& name) {
  std::vector<std::size_t> wshape;
  switch (kind) {
    case LayerKind::Conv: wshape = {out_c, in_c, kKernel, kKernel, kKernel}; break;
    case LayerKind::ConvTranspose: wshape = {in_c, out_c, kKernel, kKernel, kKernel}; break;
    case LayerKind::Dense: wshape = {out_c, in_c}; break;
  }
  std::size_t wlen = 1;
  for (std::size_t d : wshape) wlen *= d;

  Layer layer{kind, in_c, out_c, in_size, out_size, activation, partition_.size(), partition_.size() + 1};
  partition_.push_back({name + ".weight", wshape, parameter_count_, wlen});
  parameter_count_ += wlen;
  partition_.push_back({name + ".bias", {out_c}, parameter_count_, out_c});
  parameter_count_ += out_c;
  layers_.push_back(layer);
}

ParamSet Autoencoder::zero_params() const {
  return ParamSet{std::vector<double>(parameter_count_, 0.0), partition_};
}

ParamSet Autoencoder::init_params(std::uint64_t seed) const {
  ParamSet p = zero_params();
  std::mt19937_64 rng(seed);
  for (const Layer& layer : layers_) {
    double fan_in = 0.0;
    switch (layer.kind) {
      case LayerKind::Conv: fan_in = static_cast<double>(layer.in_channels * kTaps); break;
      // each output voxel of a stride-2 transposed conv sees ~27/8 taps per input channel
      case LayerKind::ConvTranspose: fan_in = static_cast<double>(layer.in_channels * kTaps) / 8.0; break;
      case LayerKind::Dense: fan_in = static_cast<double>(layer.in_channels); break;
    }
    const double bound = std::sqrt(3.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    const ParamSegment& w = partition_[layer.weight_segment];
    for (std::size_t i = 0; i < w.length; ++i) p.flat[w.offset + i] = dist(rng);
  }
  return p;
}

void Autoencoder::check_params(const ParamSet& params) const {
  if (params.flat.size() != parameter_count_ || params.partition != partition_) {
    throw ShapeError("parameter set does not match the architecture");
  }
}

void Autoencoder::forward_layer(const Layer& layer, const ParamSet& params, std::span<const double> in,
                                std::vector<double>& out) const {
  const double* w = params.flat.data() + partition_[layer.weight_segment].offset;
  const double* b = params.flat.data() + partition_[layer.bias_segment].offset;
  out.assign(layer.out_count(), 0.0);

  switch (layer.kind) {
    case LayerKind::Dense: {
      for (std::size_t o = 0; o < layer.out_channels; ++o) {
        const double* row = w + o * layer.in_channels;
        double s = b[o];
        for (std::size_t i = 0; i < layer.in_channels; ++i) s += row[i] * in[i];
        out[o] = s;
      }
      break;
    }
    case LayerKind::Conv: {
      const std::size_t S = layer.in_size;
      const std::size_t O = layer.out_size;
      for (std::size_t o = 0; o < layer.out_channels; ++o) {
        for (std::size_t ox = 0; ox < O; ++ox)
          for (std::size_t oy = 0; oy < O; ++oy)
            for (std::size_t oz = 0; oz < O; ++oz) {
              double s = b[o];
              for (std::size_t c = 0; c < layer.in_channels; ++c) {
                const double* wk = w + (o * layer.in_channels + c) * kTaps;
                const double* plane = in.data() + c * cube(S);
                for (std::size_t kx = 0; kx < kKernel; ++kx) {
                  const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(2 * ox + kx) - 1;
                  if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(S)) continue;
                  for (std::size_t ky = 0; ky < kKernel; ++ky) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(2 * oy + ky) - 1;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(S)) continue;
                    for (std::size_t kz = 0; kz < kKernel; ++kz) {
                      const std::ptrdiff_t iz = static_cast<std::ptrdiff_t>(2 * oz + kz) - 1;
                      if (iz < 0 || iz >= static_cast<std::ptrdiff_t>(S)) continue;
                      s += wk[(kx * kKernel + ky) * kKernel + kz] *
                           plane[(static_cast<std::size_t>(ix) * S + static_cast<std::size_t>(iy)) * S +
                                 static_cast<std::size_t>(iz)];
                    }
                  }
                }
              }
              out[((o * O + ox) * O + oy) * O + oz] = s;
            }
      }
      break;
    }
    case LayerKind::ConvTranspose: {
      const std::size_t S = layer.in_size;
      const std::size_t O = layer.out_size;
      for (std::size_t o = 0; o < layer.out_channels; ++o) {
        std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(o * cube(O)), cube(O), b[o]);
      }
      for (std::size_t c = 0; c < layer.in_channels; ++c)
        for (std::size_t ix = 0; ix < S; ++ix)
          for (std::size_t iy = 0; iy < S; ++iy)
            for (std::size_t iz = 0; iz < S; ++iz) {
              const double v = in[((c * S + ix) * S + iy) * S + iz];
              if (v == 0.0) continue;
              for (std::size_t o = 0; o < layer.out_channels; ++o) {
                const double* wk = w + (c * layer.out_channels + o) * kTaps;
                double* plane = out.data() + o * cube(O);
                for (std::size_t kx = 0; kx < kKernel; ++kx) {
                  const std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(2 * ix + kx) - 1;
                  if (ox < 0 || ox >= static_cast<std::ptrdiff_t>(O)) continue;
                  for (std::size_t ky = 0; ky < kKernel; ++ky) {
                    const std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(2 * iy + ky) - 1;
                    if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(O)) continue;
                    for (std::size_t kz = 0; kz < kKernel; ++kz) {
                      const std::ptrdiff_t oz = static_cast<std::ptrdiff_t>(2 * iz + kz) - 1;
                      if (oz < 0 || oz >= static_cast<std::ptrdiff_t>(O)) continue;
                      plane[(static_cast<std::size_t>(ox) * O + static_cast<std::size_t>(oy)) * O +
                            static_cast<std::size_t>(oz)] += wk[(kx * kKernel + ky) * kKernel + kz] * v;
                    }
                  }
                }
              }
            }
      break;
    }
  }
  if (layer.activation) {
    for (double& v : out) v = std::tanh(v);
  }
}

void Autoencoder::backward_layer(const Layer& layer, const ParamSet& params, std::span<const double> in,
                                 std::span<const double> out, std::vector<double>& dout,
                                 std::vector<double>* din, std::vector<double>& grad) const {
  // dout becomes the gradient w.r.t. the pre-activation.
  if (layer.activation) {
    for (std::size_t i = 0; i < dout.size(); ++i) dout[i] *= 1.0 - out[i] * out[i];
  }
  const double* w = params.flat.data() + partition_[layer.weight_segment].offset;
  double* gw = grad.data() + partition_[layer.weight_segment].offset;
  double* gb = grad.data() + partition_[layer.bias_segment].offset;
  if (din) din->assign(layer.in_count(), 0.0);

  switch (layer.kind) {
    case LayerKind::Dense: {
      for (std::size_t o = 0; o < layer.out_channels; ++o) {
        const double d = dout[o];
        gb[o] += d;
        if (d == 0.0) continue;
        const double* row = w + o * layer.in_channels;
        double* grow = gw + o * layer.in_channels;
        for (std::size_t i = 0; i < layer.in_channels; ++i) {
          grow[i] += d * in[i];
          if (din) (*din)[i] += d * row[i];
        }
      }
      break;
    }
    case LayerKind::Conv: {
      const std::size_t S = layer.in_size;
      const std::size_t O = layer.out_size;
      for (std::size_t o = 0; o < layer.out_channels; ++o) {
        for (std::size_t ox = 0; ox < O; ++ox)
          for (std::size_t oy = 0; oy < O; ++oy)
            for (std::size_t oz = 0; oz < O; ++oz) {
              const double d = dout[((o * O + ox) * O + oy) * O + oz];
              gb[o] += d;
              if (d == 0.0) continue;
              for (std::size_t c = 0; c < layer.in_channels; ++c) {
                const std::size_t wbase = (o * layer.in_channels + c) * kTaps;
                const double* plane = in.data() + c * cube(S);
                double* dplane = din ? din->data() + c * cube(S) : nullptr;
                for (std::size_t kx = 0; kx < kKernel; ++kx) {
                  const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(2 * ox + kx) - 1;
                  if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(S)) continue;
                  for (std::size_t ky = 0; ky < kKernel; ++ky) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(2 * oy + ky) - 1;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(S)) continue;
                    for (std::size_t kz = 0; kz < kKernel; ++kz) {
                      const std::ptrdiff_t iz = static_cast<std::ptrdiff_t>(2 * oz + kz) - 1;
                      if (iz < 0 || iz >= static_cast<std::ptrdiff_t>(S)) continue;
                      const std::size_t k = (kx * kKernel + ky) * kKernel + kz;
                      const std::size_t ii = (static_cast<std::size_t>(ix) * S + static_cast<std::size_t>(iy)) * S +
                                             static_cast<std::size_t>(iz);
                      gw[wbase + k] += d * plane[ii];
                      if (dplane) dplane[ii] += d * w[wbase + k];
                    }
                  }
                }
              }
            }
      }
      break;
    }
    case LayerKind::ConvTranspose: {
      const std::size_t S = layer.in_size;
      const std::size_t O = layer.out_size;
      for (std::size_t o = 0; o < layer.out_channels; ++o) {
        const double* plane = dout.data() + o * cube(O);
        double s = 0.0;
        for (std::size_t i = 0; i < cube(O); ++i) s += plane[i];
        gb[o] += s;
      }
      for (std::size_t c = 0; c < layer.in_channels; ++c)
        for (std::size_t ix = 0; ix < S; ++ix)
          for (std::size_t iy = 0; iy < S; ++iy)
            for (std::size_t iz = 0; iz < S; ++iz) {
              const std::size_t ii = ((c * S + ix) * S + iy) * S + iz;
              const double v = in[ii];
              double acc = 0.0;
              for (std::size_t o = 0; o < layer.out_channels; ++o) {
                const std::size_t wbase = (c * layer.out_channels + o) * kTaps;
                const double* plane = dout.data() + o * cube(O);
                for (std::size_t kx = 0; kx < kKernel; ++kx) {
                  const std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(2 * ix + kx) - 1;
                  if (ox < 0 || ox >= static_cast<std::ptrdiff_t>(O)) continue;
                  for (std::size_t ky = 0; ky < kKernel; ++ky) {
                    const std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(2 * iy + ky) - 1;
                    if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(O)) continue;
                    for (std::size_t kz = 0; kz < kKernel; ++kz) {
                      const std::ptrdiff_t oz = static_cast<std::ptrdiff_t>(2 * iz + kz) - 1;
                      if (oz < 0 || oz >= static_cast<std::ptrdiff_t>(O)) continue;
                      const std::size_t k = (kx * kKernel + ky) * kKernel + kz;
                      const double d = plane[(static_cast<std::size_t>(ox) * O + static_cast<std::size_t>(oy)) * O +
                                             static_cast<std::size_t>(oz)];
                      gw[wbase + k] += d * v;
                      acc += d * w[wbase + k];
                    }
                  }
                }
              }
              if (din) (*din)[ii] = acc;
            }
      break;
    }
  }
}

void Autoencoder::forward(std::span<const std::size_t> order, const ParamSet& params,
                          std::span<const double> input, Activations& acts) const {
  acts.resize(order.size() + 1);
  acts[0].assign(input.begin(), input.end());
  for (std::size_t i = 0; i < order.size(); ++i) {
    forward_layer(layers_[order[i]], params, acts[i], acts[i + 1]);
  }
}

void Autoencoder::backward(std::span<const std::size_t> order, const ParamSet& params, const Activations& acts,
                           std::vector<double> dout, std::vector<double>& grad) const {
  std::vector<double> din;
  for (std::size_t i = order.size(); i-- > 0;) {
    backward_layer(layers_[order[i]], params, acts[i], acts[i + 1], dout, i > 0 ? &din : nullptr, grad);
    if (i > 0) std::swap(dout, din);
  }
}

LatentCode Autoencoder::encode(const ParamSet& params, const Volume& input) const {
  check_params(params);
  if (input.dims != input_dims() || input.values.size() != input_dims().count()) {
    throw ShapeError("encode: input shape does not match the architecture");
  }
  Activations acts;
  forward(encoder_order_, params, input.values, acts);
  return LatentCode{std::move(acts.back())};
}

Volume Autoencoder::decode(const ParamSet& params, const LatentCode& latent) const {
  check_params(params);
  if (latent.values.size() != arch_.latent_dim) throw ShapeError("decode: latent length mismatch");
  Activations acts;
  forward(decoder_order_, params, latent.values, acts);
  Volume out;
  out.dims = input_dims();
  out.values = std::move(acts.back());
  return out;
}

Volume Autoencoder::reconstruct(const ParamSet& params, const Volume& input) const {
  return decode(params, encode(params, input));
}

double Autoencoder::recon_loss(const ParamSet& params, std::span<const Volume> batch) const {
  if (batch.empty()) throw ShapeError("recon_loss: empty batch");
  double total = 0.0;
  for (const Volume& x : batch) {
    const Volume y = reconstruct(params, x);
    double s = 0.0;
    for (std::size_t i = 0; i < x.values.size(); ++i) {
      const double d = y.values[i] - x.values[i];
      s += d * d;
    }
    total += s / static_cast<double>(x.values.size());
  }
  return total / static_cast<double>(batch.size());
}

LossAndGradient Autoencoder::grad_recon(const ParamSet& params, std::span<const Volume> batch) const {
  check_params(params);
  if (batch.empty()) throw ShapeError("grad_recon: empty batch");
  LossAndGradient result;
  result.grad.flat.assign(parameter_count_, 0.0);
  result.grad.partition = partition_;
  Activations acts;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  for (const Volume& x : batch) {
    if (x.dims != input_dims()) throw ShapeError("grad_recon: input shape does not match the architecture");
    forward(recon_order_, params, x.values, acts);
    const std::vector<double>& y = acts.back();
    const double n = static_cast<double>(y.size());
    std::vector<double> dout(y.size());
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double d = y[i] - x.values[i];
      s += d * d;
      dout[i] = 2.0 * d / n * inv_batch;
    }
    result.loss += s / n;
    backward(recon_order_, params, acts, std::move(dout), result.grad.flat);
  }
  result.loss *= inv_batch;
  return result;
}

double Autoencoder::latent_cycle_loss(const ParamSet& params, std::span<const LatentCode> latents) const {
  if (latents.empty()) throw ShapeError("latent_cycle_loss: no latents");
  double total = 0.0;
  for (const LatentCode& e : latents) {
    const LatentCode cycled = encode(params, decode(params, e));
    for (std::size_t j = 0; j < e.values.size(); ++j) {
      const double d = cycled.values[j] - e.values[j];
      total += d * d;
    }
  }
  return total / static_cast<double>(latents.size());
}

LossAndGradient Autoencoder::grad_latent_cycle(const ParamSet& params, std::span<const LatentCode> latents) const {
  check_params(params);
  if (latents.empty()) throw ShapeError("grad_latent_cycle: no latents");
  LossAndGradient result;
  result.grad.flat.assign(parameter_count_, 0.0);
  result.grad.partition = partition_;
  Activations acts;
  const double inv_batch = 1.0 / static_cast<double>(latents.size());
  for (const LatentCode& e : latents) {
    if (e.values.size() != arch_.latent_dim) throw ShapeError("grad_latent_cycle: latent length mismatch");
    forward(cycle_order_, params, e.values, acts);
    const std::vector<double>& y = acts.back();
    std::vector<double> dout(y.size());
    for (std::size_t j = 0; j < y.size(); ++j) {
      const double d = y[j] - e.values[j];
      result.loss += d * d;
      dout[j] = 2.0 * d * inv_batch;
    }
    backward(cycle_order_, params, acts, std::move(dout), result.grad.flat);
  }
  result.loss *= inv_batch;
  return result;
}

void apply_update(ParamSet& params, const GradientVector& grad, AdamState& state, const AdamHyper& hyper) {
  if (grad.flat.size() != params.flat.size()) throw ShapeError("apply_update: gradient length mismatch");
  for (double g : grad.flat) {
    if (!std::isfinite(g)) throw NumericError("non-finite gradient; update rejected");
  }
  const std::size_t n = params.flat.size();
  if (state.m.empty()) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
  }
  if (state.m.size() != n || state.v.size() != n) throw ShapeError("apply_update: optimizer state mismatch");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad.flat[i];
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params.flat[i] -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
  }
}

ParamSet round_to_float(const ParamSet& params) {
  ParamSet out = params;
  for (double& v : out.flat) v = static_cast<double>(static_cast<float>(v));
  return out;
}

}  // namespace streamcl
