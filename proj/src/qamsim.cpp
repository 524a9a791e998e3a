#include "qamcs/qamsim.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <exception>
#include <fstream>
#include <numbers>
#include <random>

#include "binio.hpp"
#include "fft.hpp"
#include "qamcs/error.hpp"
#include "qamcs/io.hpp"
#include "rng.hpp"

namespace qamcs {

namespace {

using cplx = std::complex<double>;

// Delays the pulse by tau (and attenuates when alpha > 0) with a phase ramp on
// a 2n zero-padded transform, then crops back to n samples.
std::vector<double> delayed(const std::vector<cplx>& spectrum, detail::Fft& fft, std::size_t n, double fs,
                            double tau, double alpha) {
  const std::size_t len = fft.size();
  const double shift = tau * fs;  // samples
  std::vector<cplx> y(spectrum.size());
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    if (2 * k == len) continue;  // Nyquist bin has no consistent real phase
    const double phase = -2.0 * std::numbers::pi * static_cast<double>(k) * shift / static_cast<double>(len);
    double gain = 1.0;
    if (alpha > 0.0) gain = std::exp(-alpha * static_cast<double>(k) * fs / static_cast<double>(len));
    y[k] = spectrum[k] * std::polar(gain, phase);
  }
  auto out = fft.inverse(y);
  out.resize(n);
  const double inv = 1.0 / static_cast<double>(len);
  for (auto& v : out) v *= inv;
  return out;
}

void check_delay(const ReferencePulse& pulse, double t, const char* name) {
  const double pos = static_cast<double>(pulse.center()) + t * pulse.fs;
  if (!(t >= 0.0) || !(pos <= static_cast<double>(pulse.samples.size() - 1)))
    throw Error(std::string("delay ") + name + " lies outside the record window");
}

// Vertex of the parabola through (-1, a), (0, b), (1, c): offset and value.
std::pair<double, double> parabolic(double a, double b, double c) {
  const double den = a - 2.0 * b + c;
  if (den == 0.0) return {0.0, b};
  const double p = std::clamp(0.5 * (a - c) / den, -0.5, 0.5);
  return {p, b - 0.25 * (a - c) * p};
}

}  // namespace

double ReferencePulse::energy() const {
  double s = 0.0;
  for (double v : samples) s += v * v;
  return s / fs;
}

ReferencePulse synth_reference(double f0, double bw, double fs, double duration) {
  if (!(f0 > 0.0) || !(bw > 0.0) || !(fs > 0.0) || !(duration > 0.0))
    throw Error("pulse parameters must be positive");
  if (!(fs > 2.0 * f0 * (1.0 + bw))) throw Error("sampling rate violates the Nyquist margin fs > 2 f0 (1 + bw)");
  const auto n = static_cast<std::size_t>(std::llround(duration * fs));
  if (n < 8) throw Error("pulse window holds fewer than 8 samples");

  ReferencePulse p;
  p.f0 = f0;
  p.fractional_bandwidth = bw;
  p.fs = fs;
  p.duration = duration;
  // spectrum exp(-2 pi^2 sigma^2 (f - f0)^2) is at half amplitude at f0 +- bw f0 / 2
  const double half_band = 0.5 * bw * f0;
  p.sigma_t = std::sqrt(std::log(2.0) / 2.0) / (std::numbers::pi * half_band);
  p.samples.resize(n);
  const auto c = static_cast<double>(n / 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (static_cast<double>(i) - c) / fs;
    p.samples[i] = std::exp(-t * t / (2.0 * p.sigma_t * p.sigma_t)) * std::cos(2.0 * std::numbers::pi * f0 * t);
  }
  return p;
}

EchoRecord synth_echo(const ReferencePulse& pulse, const EchoParams& e) {
  const std::size_t n = pulse.samples.size();
  if (n == 0) throw Error("empty reference pulse");
  if (!(e.attenuation >= 0.0)) throw Error("attenuation must be >= 0");
  EchoRecord rec;
  rec.fs = pulse.fs;
  rec.params = e;
  rec.samples.assign(n, 0.0);
  if (e.a1 != 0.0) check_delay(pulse, e.t1, "t1");
  if (e.a2 != 0.0) {
    check_delay(pulse, e.t2, "t2");
    if (!(e.t2 > e.t1)) throw Error("second echo must arrive after the first (t2 > t1)");
  }
  if (e.a1 == 0.0 && e.a2 == 0.0) return rec;

  detail::Fft fft(2 * n);
  const auto spectrum = fft.forward(pulse.samples);
  if (e.a1 != 0.0) {
    const auto s1 = delayed(spectrum, fft, n, pulse.fs, e.t1, 0.0);
    for (std::size_t i = 0; i < n; ++i) rec.samples[i] += e.a1 * s1[i];
  }
  if (e.a2 != 0.0) {
    const auto s2 = delayed(spectrum, fft, n, pulse.fs, e.t2, e.attenuation);
    for (std::size_t i = 0; i < n; ++i) rec.samples[i] += e.a2 * s2[i];
  }
  return rec;
}

double min_peak_separation(const ReferencePulse& pulse) {
  // autocorrelation envelope has standard deviation sigma_t * sqrt(2)
  return 2.0 * std::sqrt(2.0 * std::log(2.0)) * pulse.sigma_t * std::sqrt(2.0);
}

EchoEstimate estimate_echo_params(const std::vector<double>& record, const ReferencePulse& pulse) {
  const std::size_t n = pulse.samples.size();
  if (record.size() != n) throw Error("record and pulse lengths differ");
  double p_energy = 0.0;
  for (double v : pulse.samples) p_energy += v * v;
  if (!(p_energy > 0.0)) throw Error("reference pulse has no energy");

  detail::Fft fft(2 * n);
  const auto spec_r = fft.forward(record);
  const auto spec_p = fft.forward(pulse.samples);
  std::vector<cplx> prod(spec_r.size());
  for (std::size_t k = 0; k < prod.size(); ++k) prod[k] = spec_r[k] * std::conj(spec_p[k]);
  const auto raw = fft.inverse(prod);

  // r[j] at lag j - (n - 1)
  const std::size_t len = 2 * n, count = 2 * n - 1;
  const double scale = 1.0 / (static_cast<double>(len) * p_energy);
  std::vector<double> r(count);
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t idx = j >= n - 1 ? j - (n - 1) : len - (n - 1 - j);
    r[j] = raw[idx] * scale;
  }

  auto refine = [&](std::size_t j) {
    if (j == 0 || j + 1 == count) return std::pair<double, double>{static_cast<double>(j), r[j]};
    auto [off, val] = parabolic(r[j - 1], r[j], r[j + 1]);
    return std::pair<double, double>{static_cast<double>(j) + off, val};
  };

  const auto first = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
  const double sep = min_peak_separation(pulse) * pulse.fs;
  std::size_t second = count;
  for (std::size_t j = 1; j + 1 < count; ++j) {
    if (std::abs(static_cast<double>(j) - static_cast<double>(first)) < sep) continue;
    if (!(r[j] >= r[j - 1] && r[j] > r[j + 1])) continue;
    if (r[j] < 0.2 * r[first]) continue;
    if (second == count || r[j] > r[second]) second = j;
  }

  const double lag0 = static_cast<double>(n - 1);
  EchoEstimate est;
  auto [p1, v1] = refine(first);
  if (second == count) {
    est.params.t1 = (p1 - lag0) / pulse.fs;
    est.params.a1 = v1;
    return est;
  }
  auto [p2, v2] = refine(second);
  if (p2 < p1) {
    std::swap(p1, p2);
    std::swap(v1, v2);
  }
  est.resolved = true;
  est.params.t1 = (p1 - lag0) / pulse.fs;
  est.params.t2 = (p2 - lag0) / pulse.fs;
  est.params.a1 = v1;
  est.params.a2 = v2;
  return est;
}

double envelope_width(const std::vector<double>& signal, double fs) {
  const std::size_t n = signal.size();
  if (n < 2 || !(fs > 0.0)) throw Error("envelope_width needs at least 2 samples and fs > 0");
  detail::Fft fft(2 * n);
  const auto half = fft.forward(signal);
  const std::size_t len = 2 * n;
  std::vector<cplx> full(len, cplx{});
  full[0] = half[0];
  for (std::size_t k = 1; k < n; ++k) full[k] = 2.0 * half[k];
  full[n] = half[n];
  const auto z = fft.inverse_complex(full);
  std::vector<double> env(n);
  for (std::size_t i = 0; i < n; ++i) env[i] = std::abs(z[i]) / static_cast<double>(len);

  const auto peak = static_cast<std::size_t>(std::max_element(env.begin(), env.end()) - env.begin());
  const double half_level = 0.5 * env[peak];
  if (!(half_level > 0.0)) return 0.0;
  double left = 0.0, right = static_cast<double>(n - 1);
  for (std::size_t i = peak; i > 0; --i)
    if (env[i - 1] < half_level) {
      left = static_cast<double>(i - 1) + (half_level - env[i - 1]) / (env[i] - env[i - 1]);
      break;
    }
  for (std::size_t i = peak; i + 1 < n; ++i)
    if (env[i + 1] < half_level) {
      right = static_cast<double>(i) + (env[i] - half_level) / (env[i] - env[i + 1]);
      break;
    }
  return (right - left) / fs;
}

double sos_from_delays(double t1, double t2, double d) {
  if (!(t2 > t1)) throw Error("sos_from_delays needs t2 > t1");
  if (!(d > 0.0)) throw Error("sos_from_delays needs thickness d > 0");
  return 2.0 * d / (t2 - t1);
}

double phantom_min_semi_axis(std::size_t rows, std::size_t cols) {
  return std::max(1.5, static_cast<double>(std::min(rows, cols)) / 16.0);
}

Phantom generate_phantom(std::size_t rows, std::size_t cols, const PhantomSpec& spec, std::uint64_t seed) {
  if (rows < 8 || cols < 8) throw Error("phantom needs at least 8x8 pixels");
  if (!(spec.value_max >= spec.inclusion_min)) throw Error("phantom inclusion range is empty");
  if (!(spec.background_amplitude >= 0.0)) throw Error("background amplitude must be >= 0");

  auto gen = detail::make_engine(seed, 0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Phantom ph;
  ph.thickness = spec.thickness;
  ph.c0 = spec.c0;
  ph.sos_map = ParametricMap(rows, cols, "m/s");

  // weights sum to one, so the field stays within +-1
  constexpr int kWaves = 3;
  double kx[kWaves], ky[kWaves], phi[kWaves], w[kWaves], wsum = 0.0;
  for (int q = 0; q < kWaves; ++q) {
    kx[q] = 2.0 * std::numbers::pi * (0.5 + 1.5 * u01(gen)) / static_cast<double>(cols);
    ky[q] = 2.0 * std::numbers::pi * (0.5 + 1.5 * u01(gen)) / static_cast<double>(rows);
    phi[q] = 2.0 * std::numbers::pi * u01(gen);
    w[q] = 0.5 + u01(gen);
    wsum += w[q];
  }
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      double f = 0.0;
      for (int q = 0; q < kWaves; ++q)
        f += w[q] / wsum * std::cos(kx[q] * static_cast<double>(j) + ky[q] * static_cast<double>(i) + phi[q]);
      ph.sos_map(i, j) = spec.background + spec.background_amplitude * std::clamp(f, -1.0, 1.0);
    }

  // inclusion label per pixel, 0 = background
  std::vector<std::size_t> owner(rows * cols, 0);
  const double r_min = phantom_min_semi_axis(rows, cols);
  const double r_max = std::max(r_min, static_cast<double>(std::min(rows, cols)) / 5.0);
  std::vector<std::vector<std::size_t>> shapes;
  std::size_t attempts = 0, rounds = 0;
  while (shapes.size() < spec.n_inclusions) {
    // a dead end restarts the layout from scratch
    if (++attempts > 2000) {
      if (++rounds >= 50) throw Error("could not place " + std::to_string(spec.n_inclusions) + " inclusions");
      attempts = 0;
      shapes.clear();
      std::fill(owner.begin(), owner.end(), 0);
    }
    const double ri = r_min + (r_max - r_min) * u01(gen);
    const double rj = r_min + (r_max - r_min) * u01(gen);
    // integer centres, ellipse fully inside the image
    const auto lo_i = static_cast<std::size_t>(std::ceil(ri)), lo_j = static_cast<std::size_t>(std::ceil(rj));
    if (rows < 2 * lo_i + 1 || cols < 2 * lo_j + 1) throw Error("phantom too small for its inclusions");
    const std::size_t ci = lo_i + static_cast<std::size_t>(u01(gen) * static_cast<double>(rows - 2 * lo_i));
    const std::size_t cj = lo_j + static_cast<std::size_t>(u01(gen) * static_cast<double>(cols - 2 * lo_j));
    std::vector<std::size_t> cells;
    bool clash = false;
    for (std::size_t i = ci - lo_i; i <= ci + lo_i && !clash; ++i)
      for (std::size_t j = cj - lo_j; j <= cj + lo_j; ++j) {
        const double di = (static_cast<double>(i) - static_cast<double>(ci)) / ri;
        const double dj = (static_cast<double>(j) - static_cast<double>(cj)) / rj;
        if (di * di + dj * dj > 1.0) continue;
        if (owner[i * cols + j] != 0) {
          clash = true;
          break;
        }
        cells.push_back(i * cols + j);
      }
    if (clash) continue;
    for (std::size_t c : cells) owner[c] = shapes.size() + 1;
    shapes.push_back(std::move(cells));
  }
  for (const auto& cells : shapes) {
    const double value = spec.inclusion_min + (spec.value_max - spec.inclusion_min) * u01(gen);
    for (std::size_t c : cells) ph.sos_map.values()[c] = value;
  }
  return ph;
}

Acquisition acquire_and_map(const Phantom& phantom, const AcquisitionConfig& cfg, bool keep_rf, Exec exec) {
  const auto& map = phantom.sos_map;
  if (map.empty()) throw Error("phantom is empty");
  if (!(phantom.thickness > 0.0) || !(phantom.c0 > 0.0)) throw Error("phantom thickness and c0 must be > 0");
  if (!(cfg.noise_std >= 0.0)) throw Error("noise_std must be >= 0");
  map.check_finite();
  const auto pulse = synth_reference(cfg.f0, cfg.fractional_bandwidth, cfg.fs, cfg.duration);
  const double t1 = 2.0 * cfg.water_path / phantom.c0;
  const std::size_t n = pulse.samples.size();

  Acquisition acq;
  acq.unresolved.assign(map.size(), 0);
  acq.samples_per_trace = keep_rf ? n : 0;
  if (keep_rf) acq.rf.assign(map.size() * n, 0.0f);
  std::vector<double> est(map.size(), 0.0);
  std::vector<std::exception_ptr> errors(map.size());
  const auto count = static_cast<std::ptrdiff_t>(map.size());

#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (std::ptrdiff_t p = 0; p < count; ++p) {
    const auto i = static_cast<std::size_t>(p);
    try {
      EchoParams e;
      e.a1 = cfg.a1;
      e.a2 = cfg.a2;
      e.t1 = t1;
      e.t2 = t1 + 2.0 * phantom.thickness / map.values()[i];
      e.attenuation = cfg.attenuation;
      auto rec = synth_echo(pulse, e);
      if (cfg.noise_std > 0.0) {
        auto g = detail::make_engine(cfg.seed, i);
        std::normal_distribution<double> d(0.0, cfg.noise_std);
        for (auto& v : rec.samples) v += d(g);
      }
      if (keep_rf)
        std::transform(rec.samples.begin(), rec.samples.end(), acq.rf.begin() + static_cast<std::ptrdiff_t>(i * n),
                       [](double v) { return static_cast<float>(v); });
      const auto fit = estimate_echo_params(rec.samples, pulse);
      if (fit.resolved && fit.params.t2 > fit.params.t1) {
        est[i] = sos_from_delays(fit.params.t1, fit.params.t2, phantom.thickness);
      } else {
        acq.unresolved[i] = 1;
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  double sum = 0.0;
  std::size_t good = 0;
  for (std::size_t i = 0; i < est.size(); ++i)
    if (!acq.unresolved[i]) {
      sum += est[i];
      ++good;
    }
  acq.unresolved_count = est.size() - good;
  if (good == 0) throw Error("no pixel produced two resolved echoes");
  const double fill = sum / static_cast<double>(good);
  for (std::size_t i = 0; i < est.size(); ++i)
    if (acq.unresolved[i]) est[i] = fill;
  acq.sos = ParametricMap(map.rows(), map.cols(), std::move(est), "m/s");
  return acq;
}

void export_rf_cube(const Acquisition& acq, const AcquisitionConfig& cfg, const std::filesystem::path& path) {
  if (acq.rf.empty() || acq.samples_per_trace == 0) throw Error("acquisition holds no RF data");
  detail::ByteWriter w;
  for (float v : acq.rf) w.u32(std::bit_cast<std::uint32_t>(v));
  detail::write_file(path, w.buffer());
  auto hdr = path;
  hdr += ".hdr";
  std::ofstream out(hdr, std::ios::trunc);
  if (!out) throw IoError(IoErrc::io_failure, "cannot open " + hdr.string() + " for writing");
  out << "format f32le\n"
      << "rows " << acq.sos.rows() << '\n'
      << "cols " << acq.sos.cols() << '\n'
      << "samples " << acq.samples_per_trace << '\n'
      << "fs " << format_double(cfg.fs) << '\n'
      << "f0 " << format_double(cfg.f0) << '\n';
  if (!out) throw IoError(IoErrc::io_failure, "write failed for " + hdr.string());
}

}  // namespace qamcs
