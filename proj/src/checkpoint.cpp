#include <cstring>

#include "binio.hpp"
#include "qamcs/error.hpp"
#include "qamcs/io.hpp"
#include "qamcs/unfolded.hpp"

namespace qamcs {

namespace {
constexpr char kMagic[4] = {'Q', 'A', 'M', 'U'};
constexpr std::uint32_t kFlagTrainableA = 1u << 0;
constexpr std::uint32_t kFlagDeblock = 1u << 1;
}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const UnfoldedModel& model) {
  model.validate();
  detail::ByteWriter w;
  w.bytes({reinterpret_cast<const std::uint8_t*>(kMagic), 4});
  w.u32(kQamuVersion);
  w.u32(static_cast<std::uint32_t>(model.iterations));
  w.u32(static_cast<std::uint32_t>(model.block_size));
  w.u32(static_cast<std::uint32_t>(model.channels()));
  w.u32(static_cast<std::uint32_t>(model.a.m));
  w.u32((model.trainable_a ? kFlagTrainableA : 0u) | (model.has_deblock() ? kFlagDeblock : 0u));
  for (double p : get_parameters(model)) w.f64(p);
  return std::move(w.buffer());
}

UnfoldedModel decode_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw IoError(IoErrc::bad_magic, "not a QAMU checkpoint");
  const auto version = r.u32("version");
  if (version != kQamuVersion)
    throw IoError(IoErrc::bad_version, "unsupported QAMU version " + std::to_string(version));
  const std::uint32_t k = r.u32("K"), b = r.u32("B"), c = r.u32("C"), m = r.u32("M"), flags = r.u32("flags");
  if (k > 64 || b == 0 || b > 1024 || c == 0 || c > 4096 || m == 0 || m > std::uint64_t{b} * b ||
      (flags & ~(kFlagTrainableA | kFlagDeblock)) != 0)
    throw IoError(IoErrc::invalid_payload, "implausible QAMU header");

  UnfoldedModel model;
  model.iterations = k;
  model.block_size = b;
  model.a = MeasurementMatrix{m, std::size_t{b} * b, std::vector<double>(std::size_t{m} * b * b), 0};
  model.trainable_a = (flags & kFlagTrainableA) != 0;
  model.theta.assign(k, LearnedDenoiser::zeros(c));
  if (flags & kFlagDeblock) model.deblockers.assign(k, DeblockParams{});
  const std::size_t count = parameter_count(model);
  r.need(count * 8, "parameters");
  std::vector<double> params(count);
  for (auto& p : params) p = r.f64("parameters");
  if (r.remaining() != 0) throw IoError(IoErrc::invalid_payload, "trailing bytes after QAMU parameters");
  set_parameters(model, params);
  return model;
}

void save_checkpoint(const UnfoldedModel& model, const std::filesystem::path& path) {
  detail::write_file(path, encode_checkpoint(model));
}

UnfoldedModel load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_file(path));
}

}  // namespace qamcs
