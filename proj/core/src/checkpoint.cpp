#include <fstream>
#include <iterator>

#include "binary_io.hpp"
#include "dos/model.hpp"

namespace dos {

namespace detail {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_file_bytes(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

}  // namespace detail

namespace {

constexpr std::string_view kMagic = "DOSCKPT1";

void write_blocks(detail::ByteWriter& w, const std::vector<Dense>& blocks) {
  for (const auto& b : blocks) {
    w.f64s(b.weight.data());
    w.f64s(b.bias);
  }
}

void read_blocks(detail::ByteReader& r, std::vector<Dense>& blocks) {
  for (auto& b : blocks) {
    r.f64s(b.weight.data());
    r.f64s(b.bias);
  }
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  detail::ByteWriter w;
  w.bytes(kMagic);
  const auto& dims = ckpt.model.layer_dims();
  w.u32(static_cast<std::uint32_t>(dims.size()));
  for (std::size_t d : dims) w.u32(static_cast<std::uint32_t>(d));
  write_blocks(w, ckpt.model.layers());

  const auto& opt = ckpt.optimizer;
  w.f64(opt.config.learning_rate);
  w.f64(opt.learning_rate);
  w.f64(opt.config.momentum);
  w.f64(opt.config.weight_decay);
  w.f64(opt.config.decay_factor);
  w.u32(static_cast<std::uint32_t>(opt.config.milestones.size()));
  for (std::size_t m : opt.config.milestones) w.u64(m);
  if (opt.velocity.size() != ckpt.model.layers().size()) {
    throw Error(ErrorKind::State, "optimizer velocity does not match model layers");
  }
  write_blocks(w, opt.velocity);

  w.u64(ckpt.epoch);
  w.u64(ckpt.seed);
  w.u64(ckpt.config_hash);
  return std::move(w.buffer());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "checkpoint");
  if (r.remaining() < kMagic.size()) r.fail("file too short for header");
  const std::string magic = r.bytes(kMagic.size());
  if (magic.substr(0, 7) != kMagic.substr(0, 7)) r.fail("bad magic, not a checkpoint");
  if (magic != kMagic) r.fail("unsupported checkpoint version '" + magic.substr(7) + "'");

  const std::uint32_t n_dims = r.u32();
  if (n_dims < 2 || n_dims > 64) r.fail("implausible layer count " + std::to_string(n_dims));
  std::vector<std::size_t> dims(n_dims);
  std::size_t params = 0;
  for (std::size_t i = 0; i < n_dims; ++i) {
    dims[i] = r.u32();
    if (dims[i] == 0) r.fail("zero layer width");
    if (i > 0) params += dims[i - 1] * dims[i] + dims[i];
  }
  // Two parameter-sized blocks (weights + velocity) must fit in what is left.
  if (params > r.remaining() / 16) r.fail("truncated parameter blocks");

  Checkpoint ckpt;
  ckpt.model = MlpModel(dims);
  read_blocks(r, ckpt.model.layers());

  auto& opt = ckpt.optimizer;
  opt.config.learning_rate = r.f64();
  opt.learning_rate = r.f64();
  opt.config.momentum = r.f64();
  opt.config.weight_decay = r.f64();
  opt.config.decay_factor = r.f64();
  const std::uint32_t n_milestones = r.u32();
  if (n_milestones > r.remaining() / 8) r.fail("truncated milestone list");
  opt.config.milestones.resize(n_milestones);
  for (auto& m : opt.config.milestones) m = static_cast<std::size_t>(r.u64());
  opt.velocity = zero_gradients(ckpt.model).layers;
  read_blocks(r, opt.velocity);

  ckpt.epoch = r.u64();
  ckpt.seed = r.u64();
  ckpt.config_hash = r.u64();
  if (!r.at_end()) r.fail("trailing bytes after checkpoint");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_file_bytes(path));
}

}  // namespace dos
