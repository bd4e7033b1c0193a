#include "streamcl/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>
#include <string>

#include "streamcl/errors.hpp"

namespace streamcl {

namespace {

std::string arch_line(const ArchSpec& arch) {
  std::string s = "arch " + std::to_string(arch.input_dim) + ' ';
  for (std::size_t i = 0; i < arch.channels.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(arch.channels[i]);
  }
  return s + ' ' + std::to_string(arch.latent_dim);
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s;
}

std::string manifest(const Autoencoder& model) {
  std::string m = "STREAMCL-CKPT v1\n" + arch_line(model.arch()) + '\n';
  m += "tensors " + std::to_string(model.partition().size()) + '\n';
  for (const auto& seg : model.partition()) {
    m += seg.name + ' ' + shape_string(seg.shape) + ' ' + std::to_string(seg.offset) + '\n';
  }
  m += "data " + std::to_string(model.parameter_count()) + '\n';
  return m;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Autoencoder& model, const ParamSet& params) {
  if (params.flat.size() != model.parameter_count()) throw CheckpointError("parameter count mismatch");
  const std::string head = manifest(model);
  std::vector<std::uint8_t> out(head.begin(), head.end());
  out.reserve(out.size() + 4 * params.flat.size());
  for (double v : params.flat) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  return out;
}

ParamSet deserialize_checkpoint(const Autoencoder& model, std::span<const std::uint8_t> bytes) {
  const std::string expected = manifest(model);
  if (bytes.size() < expected.size()) throw CheckpointError("checkpoint truncated or manifest mismatch");
  const std::string_view actual(reinterpret_cast<const char*>(bytes.data()), expected.size());
  if (actual != expected) {
    if (!actual.starts_with("STREAMCL-CKPT v1\n")) throw CheckpointError("not a STREAMCL-CKPT v1 file");
    throw CheckpointError("checkpoint manifest does not match the configured architecture");
  }
  const std::size_t n = model.parameter_count();
  if (bytes.size() != expected.size() + 4 * n) throw CheckpointError("checkpoint data length mismatch");
  ParamSet p = model.zero_params();
  const std::uint8_t* d = bytes.data() + expected.size();
  for (std::size_t i = 0; i < n; ++i, d += 4) {
    const std::uint32_t bits = static_cast<std::uint32_t>(d[0]) | (static_cast<std::uint32_t>(d[1]) << 8) |
                               (static_cast<std::uint32_t>(d[2]) << 16) | (static_cast<std::uint32_t>(d[3]) << 24);
    p.flat[i] = std::bit_cast<float>(bits);
  }
  return p;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed for " + path.string());
}

void save_checkpoint(const std::filesystem::path& path, const Autoencoder& model, const ParamSet& params) {
  write_file(path, serialize_checkpoint(model, params));
}

ParamSet load_checkpoint(const std::filesystem::path& path, const Autoencoder& model) {
  return deserialize_checkpoint(model, read_file(path));
}

}  // namespace streamcl
