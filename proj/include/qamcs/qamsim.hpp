#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "qamcs/exec.hpp"
#include "qamcs/map.hpp"

namespace qamcs {

/// Gaussian-modulated cosine, unit peak, centred on sample n/2. Sample i sits
/// at t = (i - n/2) / fs, so a delay tau moves the pulse to sample n/2 + tau*fs.
struct ReferencePulse {
  double f0 = 500e6;
  double fractional_bandwidth = 0.6;
  double fs = 4e9;
  double duration = 128e-9;
  double sigma_t = 0.0;  // envelope standard deviation, s
  std::vector<double> samples;

  std::size_t center() const noexcept { return samples.size() / 2; }
  /// Riemann-sum energy sum(s^2) / fs.
  double energy() const;
};

/// sigma_t puts the -6 dB point of the spectrum at f0 * (1 +- bw / 2).
/// Throws if fs <= 2 f0 (1 + bw) or the window holds fewer than 8 samples.
ReferencePulse synth_reference(double f0 = 500e6, double fractional_bandwidth = 0.6, double fs = 4e9,
                               double duration = 128e-9);

struct EchoParams {
  double a1 = 0.0;
  double a2 = 0.0;
  double t1 = 0.0;  // s
  double t2 = 0.0;  // s
  /// Magnitude factor exp(-attenuation * |f|) on the second echo; seconds.
  double attenuation = 0.0;
};

struct EchoRecord {
  std::vector<double> samples;
  double fs = 0.0;
  EchoParams params;  // generating parameters
};

/// S = a1 S0(t - t1) + a2 S0*(t - t2) with frequency-domain delays.
/// Throws when a delay is negative or moves the pulse centre out of the window,
/// or when a2 != 0 and t2 <= t1.
EchoRecord synth_echo(const ReferencePulse& pulse, const EchoParams& params);

struct EchoEstimate {
  EchoParams params;
  /// False when only one peak passed the separation and height tests; then a2 = 0.
  bool resolved = false;
};

/// Matched filter: cross-correlation with S0 normalised by ||S0||^2, two
/// separated peaks refined by parabolic interpolation. The earlier peak is t1.
EchoEstimate estimate_echo_params(const std::vector<double>& record, const ReferencePulse& pulse);

/// Minimum peak separation used by estimate_echo_params, s: the -6 dB width
/// of the matched-filter envelope.
double min_peak_separation(const ReferencePulse& pulse);

/// Full width at half amplitude of the analytic-signal envelope, s.
double envelope_width(const std::vector<double>& signal, double fs);

/// c = 2 d / (t2 - t1); throws unless t2 > t1 and d > 0.
double sos_from_delays(double t1, double t2, double d);

struct Phantom {
  ParametricMap sos_map;   // m/s
  double thickness = 6e-6;  // m
  double c0 = 1500.0;       // coupling medium, m/s
};

struct PhantomSpec {
  std::size_t n_inclusions = 3;
  double inclusion_min = 1560.0;
  double value_max = 1650.0;
  double background = 1500.0;
  double background_amplitude = 20.0;
  double thickness = 6e-6;
  double c0 = 1500.0;
};

/// Smallest ellipse semi-axis generate_phantom uses, pixels.
double phantom_min_semi_axis(std::size_t rows, std::size_t cols);

/// Smooth background within background +- amplitude plus non-overlapping
/// elliptical inclusions of constant SoS in [inclusion_min, value_max].
/// Throws if rows or cols < 8 or the inclusions cannot be placed.
Phantom generate_phantom(std::size_t rows, std::size_t cols, const PhantomSpec& spec, std::uint64_t seed);

struct AcquisitionConfig {
  double f0 = 500e6;
  double fractional_bandwidth = 0.6;
  double fs = 4e9;
  double duration = 128e-9;
  double water_path = 7.5e-6;  // m; t1 = 2 water_path / c0
  double a1 = 0.3;
  double a2 = 0.5;
  double attenuation = 0.0;
  double noise_std = 0.0;  // added to every RF sample
  std::uint64_t seed = 0;
};

struct Acquisition {
  ParametricMap sos;  // masked pixels hold the mean of the resolved ones
  std::vector<std::uint8_t> unresolved;
  std::size_t unresolved_count = 0;
  /// rows * cols * samples, filled only when requested.
  std::vector<float> rf;
  std::size_t samples_per_trace = 0;
};

/// Raster scan: per pixel synthesise the two-interface echo for that pixel's
/// SoS, estimate the delays and map them back to SoS. Pixel order does not
/// affect the result.
Acquisition acquire_and_map(const Phantom& phantom, const AcquisitionConfig& config, bool keep_rf = false,
                            Exec exec = Exec::parallel);

/// Raw f32 little-endian cube `path` plus `path`.hdr with dims, fs and f0.
void export_rf_cube(const Acquisition& acq, const AcquisitionConfig& config, const std::filesystem::path& path);

}  // namespace qamcs
