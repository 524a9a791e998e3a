#include "qamcs/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

#include "binio.hpp"

namespace qamcs {

namespace detail {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoErrc::io_failure, "cannot open " + path.string() + " for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoErrc::io_failure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(IoErrc::io_failure, "write failed for " + path.string());
}

}  // namespace detail

namespace {

constexpr std::uint8_t kMagic[4] = {0x51, 0x41, 0x4D, 0x50};

struct Header {
  std::uint32_t version;
  std::uint32_t rows;
  std::uint32_t cols;
};

void write_header(detail::ByteWriter& w, std::uint32_t version, std::size_t rows, std::size_t cols) {
  if (rows > std::numeric_limits<std::uint32_t>::max() ||
      cols > std::numeric_limits<std::uint32_t>::max()) {
    throw IoError(IoErrc::size_overflow, "dimensions do not fit the QAMP header");
  }
  w.bytes(kMagic);
  w.u32(version);
  w.u32(static_cast<std::uint32_t>(rows));
  w.u32(static_cast<std::uint32_t>(cols));
}

void write_label(detail::ByteWriter& w, const std::string& label) {
  if (label.size() > 255) throw IoError(IoErrc::label_too_long, "unit label longer than 255 bytes");
  w.u8(static_cast<std::uint8_t>(label.size()));
  w.text(label);
}

Header read_header(detail::ByteReader& r, std::uint32_t expected_version) {
  if (r.remaining() < 4) throw IoError(IoErrc::bad_magic, "bad magic (file too short)");
  const auto magic = r.take(4, "magic");
  for (int i = 0; i < 4; ++i) {
    if (magic[i] != kMagic[i]) throw IoError(IoErrc::bad_magic, "bad magic");
  }
  Header h{};
  h.version = r.u32("version");
  if (h.version != expected_version) {
    throw IoError(IoErrc::bad_version, "unsupported QAMP version " + std::to_string(h.version) +
                                           " (expected " + std::to_string(expected_version) + ")");
  }
  h.rows = r.u32("rows");
  h.cols = r.u32("cols");
  if (h.rows == 0 || h.cols == 0) throw IoError(IoErrc::invalid_payload, "zero-sized map");
  const std::uint64_t count = std::uint64_t{h.rows} * std::uint64_t{h.cols};
  if (count > kQampMaxElements) {
    throw IoError(IoErrc::size_overflow,
                  "size overflow: " + std::to_string(h.rows) + "x" + std::to_string(h.cols));
  }
  return h;
}

std::string read_label(detail::ByteReader& r) {
  const std::uint8_t len = r.u8("label length");
  const auto bytes = r.take(len, "label");
  std::string label(bytes.begin(), bytes.end());
  if (r.remaining() != 0) throw IoError(IoErrc::invalid_payload, "trailing bytes after label");
  return label;
}

}  // namespace

std::string_view to_string(IoErrc code) {
  switch (code) {
    case IoErrc::bad_magic: return "bad magic";
    case IoErrc::bad_version: return "bad version";
    case IoErrc::truncated: return "truncated payload";
    case IoErrc::size_overflow: return "size overflow";
    case IoErrc::invalid_payload: return "invalid payload";
    case IoErrc::label_too_long: return "label too long";
    case IoErrc::io_failure: return "i/o failure";
  }
  return "unknown";
}

std::vector<std::uint8_t> encode_map(const ParametricMap& map) {
  if (map.empty()) throw IoError(IoErrc::invalid_payload, "empty input");
  detail::ByteWriter w;
  write_header(w, kQampMapVersion, map.rows(), map.cols());
  for (double v : map.values()) w.f64(v);
  write_label(w, map.unit());
  return std::move(w.buffer());
}

ParametricMap decode_map(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  const Header h = read_header(r, kQampMapVersion);
  const std::size_t count = std::size_t{h.rows} * h.cols;
  r.need(count * 8, "map payload");
  std::vector<double> data(count);
  for (auto& v : data) v = r.f64("map payload");
  std::string label = read_label(r);
  return ParametricMap(h.rows, h.cols, std::move(data), std::move(label));
}

void save_map(const ParametricMap& map, const std::filesystem::path& path) {
  detail::write_file(path, encode_map(map));
}

ParametricMap load_map(const std::filesystem::path& path) {
  return decode_map(detail::read_file(path));
}

std::vector<std::uint8_t> encode_mask(const BinaryMask& mask) {
  if (mask.cells.empty() || mask.cells.size() != mask.rows * mask.cols) {
    throw IoError(IoErrc::invalid_payload, "mask cell count does not match its dimensions");
  }
  detail::ByteWriter w;
  write_header(w, kQampMaskVersion, mask.rows, mask.cols);
  for (auto c : mask.cells) {
    if (c > 1) throw IoError(IoErrc::invalid_payload, "mask cell outside {0,1}");
    w.u8(c);
  }
  write_label(w, std::string(to_string(mask.pattern)));
  return std::move(w.buffer());
}

BinaryMask decode_mask(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  const Header h = read_header(r, kQampMaskVersion);
  const std::size_t count = std::size_t{h.rows} * h.cols;
  const auto payload = r.take(count, "mask payload");
  BinaryMask mask{h.rows, h.cols, {payload.begin(), payload.end()}, MaskPattern::random};
  for (auto c : mask.cells) {
    if (c > 1) throw IoError(IoErrc::invalid_payload, "mask cell outside {0,1}");
  }
  const std::string label = read_label(r);
  try {
    mask.pattern = mask_pattern_from_string(label);
  } catch (const Error&) {
    throw IoError(IoErrc::invalid_payload, "unknown mask pattern label '" + label + "'");
  }
  return mask;
}

void save_mask(const BinaryMask& mask, const std::filesystem::path& path) {
  detail::write_file(path, encode_mask(mask));
}

BinaryMask load_mask(const std::filesystem::path& path) {
  return decode_mask(detail::read_file(path));
}

void save_matrix(const MeasurementMatrix& a, const std::filesystem::path& path) {
  save_map(ParametricMap(a.m, a.n, a.entries, "matrix"), path);
}

MeasurementMatrix load_matrix(const std::filesystem::path& path) {
  auto map = load_map(path);
  if (map.unit() != "matrix") {
    throw IoError(IoErrc::invalid_payload, "file is not a measurement matrix");
  }
  const auto v = map.values();
  return MeasurementMatrix{map.rows(), map.cols(), {v.begin(), v.end()}, 0};
}

void export_csv(const ParametricMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrc::io_failure, "cannot open " + path.string() + " for writing");
  for (std::size_t r = 0; r < map.rows(); ++r) {
    for (std::size_t c = 0; c < map.cols(); ++c) {
      if (c) out << ',';
      out << format_double(map(r, c));
    }
    out << '\n';
  }
  if (!out) throw IoError(IoErrc::io_failure, "write failed for " + path.string());
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  if (text == "nan" || text == "na") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw Error("cannot parse number '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace qamcs
