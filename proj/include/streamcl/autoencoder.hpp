#pragma once

// 3D convolutional autoencoder with hand-written backpropagation.
//
// Encoder: stride-2 3x3x3 convolutions (zero padding 1), flatten, dense to the
// latent size. Decoder: dense back to the last conv volume, then stride-2
// transposed convolutions mirroring the encoder down to one channel. tanh
// follows every layer except the final decoder layer, whose output is linear.
//
// Activations are laid out channel-major, z-fastest. All arithmetic is double.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "streamcl/volume.hpp"

namespace streamcl {

struct ArchSpec {
  std::size_t input_dim = 16;
  std::vector<std::size_t> channels{8, 16, 32};
  std::size_t latent_dim = 32;

  /// Throws ConfigError unless input_dim is divisible by 2^stages and all
  /// sizes are positive.
  void validate() const;
  bool operator==(const ArchSpec&) const = default;
};

/// A named parameter tensor inside the flat parameter vector.
struct ParamSegment {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t length = 0;
  bool operator==(const ParamSegment&) const = default;
};

using Partition = std::vector<ParamSegment>;

struct ParamSet {
  std::vector<double> flat;
  Partition partition;

  [[nodiscard]] std::span<const double> segment(std::size_t i) const {
    return std::span(flat).subspan(partition[i].offset, partition[i].length);
  }
  [[nodiscard]] std::vector<std::vector<double>> to_tensors() const;
  /// Throws ShapeError when the tensors do not match the partition.
  static ParamSet from_tensors(const std::vector<std::vector<double>>& tensors, Partition partition);
};

struct GradientVector {
  std::vector<double> flat;
  Partition partition;
};

struct LatentCode {
  std::vector<double> values;
};

struct LossAndGradient {
  double loss = 0.0;
  GradientVector grad;
};

class Autoencoder {
 public:
  explicit Autoencoder(ArchSpec arch);

  [[nodiscard]] const ArchSpec& arch() const { return arch_; }
  [[nodiscard]] const Partition& partition() const { return partition_; }
  [[nodiscard]] std::size_t parameter_count() const { return parameter_count_; }
  [[nodiscard]] Dims input_dims() const { return Dims::cube(arch_.input_dim); }

  /// Fan-in-scaled uniform weights, zero biases; deterministic per seed.
  [[nodiscard]] ParamSet init_params(std::uint64_t seed) const;
  [[nodiscard]] ParamSet zero_params() const;

  [[nodiscard]] LatentCode encode(const ParamSet& params, const Volume& input) const;
  [[nodiscard]] Volume decode(const ParamSet& params, const LatentCode& latent) const;
  [[nodiscard]] Volume reconstruct(const ParamSet& params, const Volume& input) const;

  /// Mean over batch and voxels of (decode(encode(x)) - x)^2.
  [[nodiscard]] double recon_loss(const ParamSet& params, std::span<const Volume> batch) const;
  [[nodiscard]] LossAndGradient grad_recon(const ParamSet& params, std::span<const Volume> batch) const;

  /// Mean over latents of the squared norm of encode(decode(e)) - e.
  [[nodiscard]] double latent_cycle_loss(const ParamSet& params, std::span<const LatentCode> latents) const;
  /// Gradient w.r.t. all parameters; the stored latents are constants.
  [[nodiscard]] LossAndGradient grad_latent_cycle(const ParamSet& params,
                                                  std::span<const LatentCode> latents) const;

 private:
  enum class LayerKind { Conv, ConvTranspose, Dense };

  struct Layer {
    LayerKind kind;
    std::size_t in_channels;
    std::size_t out_channels;
    std::size_t in_size;   // spatial side; 1 for dense
    std::size_t out_size;
    bool activation;
    std::size_t weight_segment;
    std::size_t bias_segment;

    [[nodiscard]] std::size_t in_count() const { return in_channels * in_size * in_size * in_size; }
    [[nodiscard]] std::size_t out_count() const { return out_channels * out_size * out_size * out_size; }
  };

  using Activations = std::vector<std::vector<double>>;

  void add_layer(LayerKind kind, std::size_t in_c, std::size_t out_c, std::size_t in_size,
                 std::size_t out_size, bool activation, const std::string& name);
  void check_params(const ParamSet& params) const;

  void forward_layer(const Layer& layer, const ParamSet& params, std::span<const double> in,
                     std::vector<double>& out) const;
  void backward_layer(const Layer& layer, const ParamSet& params, std::span<const double> in,
                      std::span<const double> out, std::vector<double>& dout, std::vector<double>* din,
                      std::vector<double>& grad) const;

  void forward(std::span<const std::size_t> order, const ParamSet& params, std::span<const double> input,
               Activations& acts) const;
  void backward(std::span<const std::size_t> order, const ParamSet& params, const Activations& acts,
                std::vector<double> dout, std::vector<double>& grad) const;

  ArchSpec arch_;
  std::vector<Layer> layers_;
  Partition partition_;
  std::size_t parameter_count_ = 0;
  std::vector<std::size_t> encoder_order_;
  std::vector<std::size_t> decoder_order_;
  std::vector<std::size_t> recon_order_;
  std::vector<std::size_t> cycle_order_;
};

/// Closed-form parameter count of an architecture.
std::size_t parameter_count(const ArchSpec& arch);

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

/// One Adam step. A non-finite gradient throws NumericError and leaves both
/// params and state untouched.
void apply_update(ParamSet& params, const GradientVector& grad, AdamState& state, const AdamHyper& hyper);

/// Copy of `params` with every entry rounded to float32.
ParamSet round_to_float(const ParamSet& params);

}  // namespace streamcl
