#include "pdl/binary_io.hpp"
#include "pdl/nn/model.hpp"

#include <cstring>

namespace pdl::nn {

namespace {

constexpr char kMagic[4] = {'P', 'D', 'L', 'M'};
using binary::put;

}  // namespace

std::string encode_checkpoint(Model& model) {
  const ModelSpec& spec = model.spec();
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(spec.input_shape.size()));
  for (int d : spec.input_shape) put<std::int32_t>(out, d);
  put<double>(out, spec.l2);
  put<double>(out, spec.learning_rate);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(spec.layers.size()));
  for (const LayerSpec& l : spec.layers) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.kind));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.config.size()));
    for (int c : l.config) put<std::int32_t>(out, c);
  }
  const auto buffers = model.buffers();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(buffers.size()));
  for (const Eigen::ArrayXd* b : buffers) {
    put<std::uint64_t>(out, static_cast<std::uint64_t>(b->size()));
    for (Eigen::Index i = 0; i < b->size(); ++i) put<double>(out, (*b)[i]);
  }
  for (const TargetTransform& t : model.targets.targets) {
    put<double>(out, t.lambda);
    put<double>(out, t.shift);
    put<double>(out, t.lo);
    put<double>(out, t.hi);
  }
  return out;
}

Model decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw ParseError("checkpoint: bad magic", 0);
  binary::Reader r(bytes, "checkpoint");
  r.take(4, "magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) throw ParseError("checkpoint: unsupported version " + std::to_string(version), 4);
  auto count = [&](const char* what, std::uint32_t limit) {
    const std::size_t at = r.pos();
    const auto n = r.get<std::uint32_t>(what);
    if (n > limit) throw ParseError(std::string("checkpoint: implausible ") + what, at);
    return n;
  };
  ModelSpec spec;
  const auto dims = count("input rank", 8);
  for (std::uint32_t i = 0; i < dims; ++i) spec.input_shape.push_back(r.get<std::int32_t>("input shape"));
  spec.l2 = r.get<double>("l2");
  spec.learning_rate = r.get<double>("learning rate");
  const auto layers = count("layer count", 4096);
  for (std::uint32_t i = 0; i < layers; ++i) {
    const std::size_t at = r.pos();
    const auto kind = r.get<std::uint32_t>("layer kind");
    if (kind < 1 || kind > 7) throw ParseError("checkpoint: unknown layer kind", at);
    LayerSpec ls{static_cast<LayerKind>(kind), {}};
    const auto nc = count("layer config", 16);
    for (std::uint32_t k = 0; k < nc; ++k) ls.config.push_back(r.get<std::int32_t>("layer config"));
    spec.layers.push_back(std::move(ls));
  }
  Model model(std::move(spec));
  const auto buffers = model.buffers();
  const std::size_t at = r.pos();
  if (r.get<std::uint32_t>("buffer count") != buffers.size()) throw ParseError("checkpoint: buffer count mismatch", at);
  for (Eigen::ArrayXd* b : buffers) {
    const std::size_t pos = r.pos();
    if (r.get<std::uint64_t>("buffer size") != static_cast<std::uint64_t>(b->size()))
      throw ParseError("checkpoint: buffer size mismatch", pos);
    for (Eigen::Index i = 0; i < b->size(); ++i) (*b)[i] = r.get<double>("parameters");
  }
  for (TargetTransform& t : model.targets.targets) {
    t.lambda = r.get<double>("normalizer");
    t.shift = r.get<double>("normalizer");
    t.lo = r.get<double>("normalizer");
    t.hi = r.get<double>("normalizer");
  }
  if (r.remaining() != 0) throw ParseError("checkpoint: trailing bytes", r.pos());
  return model;
}

void save_checkpoint(Model& model, const std::filesystem::path& path) { binary::write_file(path, encode_checkpoint(model)); }

Model load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(binary::read_file(path)); }

}  // namespace pdl::nn
