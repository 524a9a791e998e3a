#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qamcs/error.hpp"
#include "qamcs/map.hpp"
#include "qamcs/sampling.hpp"

namespace qamcs {

// QAMP container, little-endian throughout:
//   0..3   magic "QAMP"
//   4..7   version (1 = f64 map, 2 = u8 binary mask)
//   8..11  rows
//   12..15 cols
//   payload rows*cols values, row-major
//   1 byte label length L, then L bytes of UTF-8 label

enum class IoErrc {
  bad_magic,
  bad_version,
  truncated,
  size_overflow,
  invalid_payload,
  label_too_long,
  io_failure,
};

std::string_view to_string(IoErrc code);

class IoError : public Error {
 public:
  IoError(IoErrc code, const std::string& what) : Error(what), code_(code) {}
  IoErrc code() const noexcept { return code_; }

 private:
  IoErrc code_;
};

inline constexpr std::uint32_t kQampMapVersion = 1;
inline constexpr std::uint32_t kQampMaskVersion = 2;
/// Upper bound on rows*cols accepted when decoding.
inline constexpr std::uint64_t kQampMaxElements = std::uint64_t{1} << 31;

std::vector<std::uint8_t> encode_map(const ParametricMap& map);
ParametricMap decode_map(std::span<const std::uint8_t> bytes);
void save_map(const ParametricMap& map, const std::filesystem::path& path);
ParametricMap load_map(const std::filesystem::path& path);

/// Masks use version 2; the label carries the pattern name.
std::vector<std::uint8_t> encode_mask(const BinaryMask& mask);
BinaryMask decode_mask(std::span<const std::uint8_t> bytes);
void save_mask(const BinaryMask& mask, const std::filesystem::path& path);
BinaryMask load_mask(const std::filesystem::path& path);

/// Matrices are stored as version-1 maps labelled "matrix".
void save_matrix(const MeasurementMatrix& a, const std::filesystem::path& path);
MeasurementMatrix load_matrix(const std::filesystem::path& path);

/// Plain CSV, one image row per line.
void export_csv(const ParametricMap& map, const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double; "inf", "-inf", "nan".
std::string format_double(double v);
double parse_double(std::string_view text);

}  // namespace qamcs
