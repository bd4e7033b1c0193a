#pragma once

// Model checkpoints:
//   STREAMCL-CKPT v1
//   arch <input_dim> <c1,c2,...> <latent_dim>
//   tensors <count>
//   <name> <shape as AxBx...> <offset>     (one line per tensor)
//   data <parameter count>
//   <parameter count float32 LE values>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "streamcl/autoencoder.hpp"

namespace streamcl {

std::vector<std::uint8_t> serialize_checkpoint(const Autoencoder& model, const ParamSet& params);
/// Throws CheckpointError when the bytes are malformed or the manifest does
/// not match `model`.
ParamSet deserialize_checkpoint(const Autoencoder& model, std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Autoencoder& model, const ParamSet& params);
ParamSet load_checkpoint(const std::filesystem::path& path, const Autoencoder& model);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace streamcl
