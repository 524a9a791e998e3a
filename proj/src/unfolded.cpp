#include "qamcs/unfolded.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <random>
#include <string>

#include "qamcs/error.hpp"
#include "qamcs/kernels.hpp"
#include "rng.hpp"

namespace qamcs {

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Intermediates of one forward pass needed by the backward pass.
struct Tape {
  std::vector<std::vector<double>> truth;                  // x~ blocks
  std::vector<std::vector<double>> y;                      // measurements
  std::vector<std::vector<std::vector<double>>> x;         // [k] blocks entering iteration k+1
  std::vector<std::vector<std::vector<double>>> h;         // [k] conv1 output, C*N per block
  std::vector<std::vector<std::vector<double>>> n;         // [k] denoiser output
  std::vector<std::vector<std::vector<double>>> v;         // [k] y - A(x + n)
  std::vector<ParametricMap> pre_deblock;                  // [k] reassembled image
};

// h = conv1(x), n = conv2(relu(h)); h is returned through `h_out` when given.
std::vector<double> denoise_block(std::span<const double> x, std::size_t b, const LearnedDenoiser& t,
                                  std::vector<double>* h_out, Exec exec) {
  const std::size_t c = t.channels;
  std::vector<double> h(c * b * b), n(b * b);
  conv3x3(x, {1, b, b}, t.conv1, c, h, exec);
  std::vector<double> r(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) r[i] = h[i] > 0.0 ? h[i] : 0.0;
  conv3x3(r, {c, b, b}, t.conv2, 1, n, exec);
  if (h_out) *h_out = std::move(h);
  return n;
}

ParametricMap forward_pass(std::span<const std::vector<double>> y_blocks, const BlockGrid& grid,
                           const UnfoldedModel& model, const UnfoldedOptions& options, Tape* tape) {
  model.validate();
  const std::size_t b = model.block_size, n = b * b, m = model.a.m;
  if (grid.block_size != b) throw Error("grid block size does not match the model");
  if (y_blocks.size() != grid.block_count()) throw Error("measurement block count does not match the grid");
  for (const auto& y : y_blocks)
    if (y.size() != m) throw Error("measurement block length does not match A");

  const std::size_t nb = y_blocks.size();
  const auto count = static_cast<std::ptrdiff_t>(nb);
  // inner kernels stay serial; the block loop carries the parallelism
  const Exec exec = options.exec;

  std::vector<std::vector<double>> x(nb, std::vector<double>(n));
  for (std::size_t i = 0; i < nb; ++i) model.a.apply_transpose(y_blocks[i], x[i]);
  if (tape) {
    tape->y.assign(y_blocks.begin(), y_blocks.end());
    tape->x.clear();
    tape->h.assign(model.iterations, std::vector<std::vector<double>>(nb));
    tape->n.assign(model.iterations, std::vector<std::vector<double>>(nb));
    tape->v.assign(model.iterations, std::vector<std::vector<double>>(nb));
    tape->pre_deblock.assign(model.iterations, {});
  }
  if (model.iterations == 0) return reassemble_vectors(x, grid);

  ParametricMap image;
  std::vector<std::exception_ptr> errors(nb);
  for (std::size_t k = 1; k <= model.iterations; ++k) {
    if (tape) tape->x.push_back(x);
    std::vector<std::vector<double>> next(nb);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (std::ptrdiff_t bi = 0; bi < count; ++bi) {
      const auto i = static_cast<std::size_t>(bi);
      try {
        std::vector<double> h;
        std::vector<double> nz = options.denoiser
                                     ? options.denoiser(k, i, x[i])
                                     : denoise_block(x[i], b, model.theta[k - 1], tape ? &h : nullptr, Exec::serial);
        if (nz.size() != n) throw Error("denoiser output has the wrong length");
        std::vector<double> w(n), aw(m), v(m), out(n);
        for (std::size_t j = 0; j < n; ++j) w[j] = x[i][j] + nz[j];
        model.a.apply(w, aw);
        for (std::size_t j = 0; j < m; ++j) v[j] = y_blocks[i][j] - aw[j];
        model.a.apply_transpose(v, out);
        for (std::size_t j = 0; j < n; ++j) out[j] += w[j];
        next[i] = std::move(out);
        if (tape) {
          tape->h[k - 1][i] = std::move(h);
          tape->n[k - 1][i] = std::move(nz);
          tape->v[k - 1][i] = std::move(v);
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    for (const auto& blk : next)
      if (!all_finite(blk)) throw DivergenceError("non-finite unfolded iterate", k);

    image = reassemble_vectors(next, grid);
    if (model.has_deblock()) {
      if (tape) tape->pre_deblock[k - 1] = image;
      image = deblock(image, model.deblockers[k - 1], exec);
      if (!all_finite(image.values())) throw DivergenceError("non-finite deblocked iterate", k);
    }
    x = partition_vectors(image, grid);
    if (options.observer) options.observer(k, x);
  }
  return image;
}

void add_outer(std::vector<double>& g, std::span<const double> u, std::span<const double> w, double scale) {
  // g += scale * u w^T, g is |u| x |w| row-major
  const std::size_t cols = w.size();
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double s = scale * u[i];
    if (s == 0.0) continue;
    double* row = g.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) row[j] += s * w[j];
  }
}

}  // namespace

LearnedDenoiser LearnedDenoiser::zeros(std::size_t channels) {
  return {channels, std::vector<double>(channels * 9, 0.0), std::vector<double>(channels * 9, 0.0)};
}

std::vector<double> learned_denoiser_apply(std::span<const double> x, std::size_t rows, std::size_t cols,
                                           const LearnedDenoiser& theta, Exec exec) {
  if (theta.channels == 0 || theta.conv1.size() != theta.channels * 9 || theta.conv2.size() != theta.channels * 9)
    throw Error("learned denoiser kernels do not match its channel count");
  if (x.size() != rows * cols) throw Error("denoiser input length does not match its shape");
  const std::size_t c = theta.channels;
  std::vector<double> h(c * rows * cols), out(rows * cols);
  conv3x3(x, {1, rows, cols}, theta.conv1, c, h, exec);
  for (auto& v : h) v = v > 0.0 ? v : 0.0;
  conv3x3(h, {c, rows, cols}, theta.conv2, 1, out, exec);
  return out;
}

ParametricMap deblock(const ParametricMap& map, const DeblockParams& params, Exec exec) {
  if (map.empty()) throw Error("deblock: empty input");
  std::vector<double> corr(map.size());
  conv3x3(map.values(), {1, map.rows(), map.cols()}, params.kernel, 1, corr, exec);
  ParametricMap out = map;
  auto v = out.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += params.gain * corr[i];
  return out;
}

void UnfoldedModel::validate() const {
  if (iterations != theta.size()) throw Error("theta list length differs from K");
  if (block_size == 0) throw Error("block size must be >= 1");
  if (a.n != block_size * block_size)
    throw Error("A has " + std::to_string(a.n) + " columns, block needs " + std::to_string(block_size * block_size));
  if (a.m == 0 || a.m > a.n || a.entries.size() != a.m * a.n) throw Error("A has inconsistent dimensions");
  for (const auto& t : theta)
    if (t.channels != channels() || t.conv1.size() != t.channels * 9 || t.conv2.size() != t.channels * 9)
      throw Error("denoiser kernels have inconsistent shapes");
  if (has_deblock() && deblockers.size() != iterations) throw Error("deblock list length differs from K");
}

bool UnfoldedModel::operator==(const UnfoldedModel& o) const {
  if (iterations != o.iterations || block_size != o.block_size || trainable_a != o.trainable_a ||
      a.m != o.a.m || a.n != o.a.n || a.entries != o.a.entries || deblockers.size() != o.deblockers.size() ||
      theta.size() != o.theta.size())
    return false;
  for (std::size_t k = 0; k < theta.size(); ++k)
    if (theta[k].channels != o.theta[k].channels || theta[k].conv1 != o.theta[k].conv1 ||
        theta[k].conv2 != o.theta[k].conv2)
      return false;
  for (std::size_t k = 0; k < deblockers.size(); ++k)
    if (deblockers[k].kernel != o.deblockers[k].kernel || deblockers[k].gain != o.deblockers[k].gain) return false;
  return true;
}

namespace {

// Modified Gram-Schmidt on the rows, so A A^T = I and A^T A is a projection.
void orthonormalize_rows(MeasurementMatrix& a) {
  for (std::size_t i = 0; i < a.m; ++i) {
    double* ri = &a.entries[i * a.n];
    for (std::size_t j = 0; j < i; ++j) {
      const double* rj = &a.entries[j * a.n];
      double d = 0.0;
      for (std::size_t c = 0; c < a.n; ++c) d += ri[c] * rj[c];
      for (std::size_t c = 0; c < a.n; ++c) ri[c] -= d * rj[c];
    }
    double nrm = 0.0;
    for (std::size_t c = 0; c < a.n; ++c) nrm += ri[c] * ri[c];
    nrm = std::sqrt(nrm);
    if (!(nrm > 1e-12)) throw Error("degenerate measurement matrix");
    for (std::size_t c = 0; c < a.n; ++c) ri[c] /= nrm;
  }
}

}  // namespace

UnfoldedModel make_unfolded_model(const ModelConfig& cfg) {
  if (cfg.iterations < 1 || cfg.iterations > 9) throw Error("K must be in 1..9");
  if (cfg.channels == 0) throw Error("channel count must be >= 1");
  if (!(cfg.ratio > 0.0 && cfg.ratio <= 1.0)) throw Error("ratio must be in (0, 1]");
  const std::size_t n = cfg.block_size * cfg.block_size;
  if (n == 0) throw Error("block size must be >= 1");
  const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.ratio * static_cast<double>(n))));

  UnfoldedModel model;
  model.iterations = cfg.iterations;
  model.block_size = cfg.block_size;
  model.a = gaussian_matrix(m, n, cfg.seed);
  orthonormalize_rows(model.a);
  model.trainable_a = cfg.trainable_a;
  const double s1 = std::sqrt(2.0 / 9.0);
  const double s2 = 0.01;
  for (std::size_t k = 0; k < cfg.iterations; ++k) {
    auto gen = detail::make_engine(cfg.seed, 1000 + k);
    std::normal_distribution<double> dist(0.0, 1.0);
    auto t = LearnedDenoiser::zeros(cfg.channels);
    for (auto& w : t.conv1) w = s1 * dist(gen);
    for (auto& w : t.conv2) w = s2 * dist(gen);
    model.theta.push_back(std::move(t));
  }
  if (cfg.deblock) model.deblockers.assign(cfg.iterations, DeblockParams{});
  return model;
}

std::size_t parameter_count(const UnfoldedModel& model) {
  return model.a.entries.size() + model.iterations * model.channels() * 18 + model.deblockers.size() * 10;
}

std::vector<double> get_parameters(const UnfoldedModel& model) {
  std::vector<double> p;
  p.reserve(parameter_count(model));
  p.insert(p.end(), model.a.entries.begin(), model.a.entries.end());
  for (const auto& t : model.theta) {
    p.insert(p.end(), t.conv1.begin(), t.conv1.end());
    p.insert(p.end(), t.conv2.begin(), t.conv2.end());
  }
  for (const auto& d : model.deblockers) {
    p.insert(p.end(), d.kernel.begin(), d.kernel.end());
    p.push_back(d.gain);
  }
  return p;
}

void set_parameters(UnfoldedModel& model, std::span<const double> p) {
  if (p.size() != parameter_count(model)) throw Error("parameter vector has the wrong length");
  auto it = p.begin();
  auto take = [&it](auto& dst) {
    std::copy_n(it, dst.size(), dst.begin());
    it += static_cast<std::ptrdiff_t>(dst.size());
  };
  take(model.a.entries);
  for (auto& t : model.theta) {
    take(t.conv1);
    take(t.conv2);
  }
  for (auto& d : model.deblockers) {
    take(d.kernel);
    d.gain = *it++;
  }
}

std::vector<std::uint8_t> trainable_mask(const UnfoldedModel& model) {
  std::vector<std::uint8_t> mask(parameter_count(model), 1);
  if (!model.trainable_a) std::fill_n(mask.begin(), model.a.entries.size(), 0);
  return mask;
}

ParametricMap unfolded_forward(std::span<const std::vector<double>> y_blocks, const BlockGrid& grid,
                               const UnfoldedModel& model, const UnfoldedOptions& options) {
  return forward_pass(y_blocks, grid, model, options, nullptr);
}

ParametricMap unfolded_forward(const CsProblem& problem, const UnfoldedModel& model,
                               const UnfoldedOptions& options) {
  if (!problem.is_matrix()) throw Error("the unfolded model needs a block measurement problem");
  const auto& a = std::get<MeasurementMatrix>(problem.op);
  if (a.m != model.a.m || a.n != model.a.n) throw Error("problem matrix shape differs from the model's A");
  return forward_pass(problem.y, problem.grid, model, options, nullptr);
}

ParametricMap normalize(const ParametricMap& map, ValueRange r) {
  if (!(r.hi > r.lo)) throw Error("value range needs hi > lo");
  ParametricMap out(map.rows(), map.cols());
  auto src = map.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = (src[i] - r.lo) / (r.hi - r.lo);
  return out;
}

ParametricMap denormalize(const ParametricMap& map, ValueRange r, std::string unit) {
  if (!(r.hi > r.lo)) throw Error("value range needs hi > lo");
  ParametricMap out(map.rows(), map.cols(), std::move(unit));
  auto src = map.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = r.lo + src[i] * (r.hi - r.lo);
  return out;
}

namespace {

// Forward with tape on noiseless measurements of `truth`; returns the output image.
ParametricMap taped_forward(const UnfoldedModel& model, const ParametricMap& truth, Tape& tape, BlockGrid& grid) {
  grid = BlockGrid::for_map(truth.rows(), truth.cols(), model.block_size);
  tape.truth = partition_vectors(truth, grid);
  std::vector<std::vector<double>> y(tape.truth.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = apply_sampling(tape.truth[i], model.a);
  UnfoldedOptions opt;
  opt.exec = Exec::serial;
  return forward_pass(y, grid, model, opt, &tape);
}

double mse(const ParametricMap& out, const ParametricMap& truth) {
  double s = 0.0;
  auto a = out.values();
  auto b = truth.values();
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace

double sample_loss(const UnfoldedModel& model, const ParametricMap& truth) {
  Tape tape;
  BlockGrid grid;
  return mse(taped_forward(model, truth, tape, grid), truth);
}

std::vector<double> sample_gradient(const UnfoldedModel& model, const ParametricMap& truth, double* loss) {
  Tape tape;
  BlockGrid grid;
  const ParametricMap out = taped_forward(model, truth, tape, grid);
  if (loss) *loss = mse(out, truth);

  const std::size_t bs = model.block_size, n = bs * bs, m = model.a.m, c = model.channels();
  const std::size_t nb = tape.y.size(), kk = model.iterations;
  const std::size_t a_size = model.a.entries.size();
  std::vector<double> grad(parameter_count(model), 0.0);
  std::vector<double> g_a(model.trainable_a ? a_size : 0, 0.0);
  std::vector<std::vector<double>> g_y(nb, std::vector<double>(m, 0.0));

  // dL/dX for L = mean (X - T)^2
  ParametricMap g_img(out.rows(), out.cols());
  {
    const double scale = 2.0 / static_cast<double>(out.size());
    auto o = out.values();
    auto t = truth.values();
    auto g = g_img.values();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * (o[i] - t[i]);
  }

  std::vector<std::vector<double>> g_x;
  std::vector<double> gv(m), tmp_n(n), g_r(c * n);
  for (std::size_t k = kk; k >= 1; --k) {
    const std::size_t theta_off = a_size + (k - 1) * c * 18;
    if (model.has_deblock()) {
      const auto& d = model.deblockers[k - 1];
      const ParametricMap& pre = tape.pre_deblock[k - 1];
      const PlaneShape shape{1, pre.rows(), pre.cols()};
      const std::size_t deb_off = a_size + kk * c * 18 + (k - 1) * 10;
      std::vector<double> corr(pre.size());
      conv3x3(pre.values(), shape, d.kernel, 1, corr, Exec::serial);
      double g_gain = 0.0;
      auto g = g_img.values();
      for (std::size_t i = 0; i < g.size(); ++i) g_gain += g[i] * corr[i];
      grad[deb_off + 9] += g_gain;
      std::vector<double> g_kernel(9, 0.0);
      conv3x3_weight_grad(pre.values(), shape, g, 1, g_kernel, Exec::serial);
      for (std::size_t t = 0; t < 9; ++t) grad[deb_off + t] += d.gain * g_kernel[t];
      std::vector<double> back(pre.size());
      conv3x3_adjoint(g, shape, d.kernel, 1, back, Exec::serial);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += d.gain * back[i];
    }
    auto g_next = partition_vectors(g_img, grid);
    g_x.assign(nb, std::vector<double>(n));
    for (std::size_t i = 0; i < nb; ++i) {
      const auto& x = tape.x[k - 1][i];
      const auto& h = tape.h[k - 1][i];
      const auto& nz = tape.n[k - 1][i];
      const auto& v = tape.v[k - 1][i];
      const auto& gxp = g_next[i];
      // x' = w + A^T v, v = y - A w, w = x + n
      model.a.apply(gxp, gv);
      auto& gw = g_x[i];
      model.a.apply_transpose(gv, gw);
      for (std::size_t j = 0; j < n; ++j) gw[j] = gxp[j] - gw[j];
      for (std::size_t j = 0; j < m; ++j) g_y[i][j] += gv[j];
      if (model.trainable_a) {
        add_outer(g_a, v, gxp, 1.0);
        std::vector<double> w(n);
        for (std::size_t j = 0; j < n; ++j) w[j] = x[j] + nz[j];
        add_outer(g_a, gv, w, -1.0);
      }
      // n = conv2(relu(h)), h = conv1(x); gw is both dL/dx (direct) and dL/dn
      std::vector<double> r(c * n);
      for (std::size_t j = 0; j < r.size(); ++j) r[j] = h[j] > 0.0 ? h[j] : 0.0;
      std::span<double> g_w1(grad.data() + theta_off, c * 9);
      std::span<double> g_w2(grad.data() + theta_off + c * 9, c * 9);
      conv3x3_weight_grad(r, {c, bs, bs}, gw, 1, g_w2, Exec::serial);
      conv3x3_adjoint(gw, {1, bs, bs}, model.theta[k - 1].conv2, c, g_r, Exec::serial);
      for (std::size_t j = 0; j < g_r.size(); ++j)
        if (!(h[j] > 0.0)) g_r[j] = 0.0;
      conv3x3_weight_grad(x, {1, bs, bs}, g_r, c, g_w1, Exec::serial);
      conv3x3_adjoint(g_r, {c, bs, bs}, model.theta[k - 1].conv1, 1, tmp_n, Exec::serial);
      for (std::size_t j = 0; j < n; ++j) gw[j] += tmp_n[j];
    }
    // blocks entering iteration k > 1 were re-partitioned from an image
    if (k > 1) g_img = reassemble_vectors(g_x, grid);
  }
  if (kk == 0) g_x = partition_vectors(g_img, grid);

  // x^0 = A^T y, y = A x~
  for (std::size_t i = 0; i < nb; ++i) {
    model.a.apply(g_x[i], gv);
    for (std::size_t j = 0; j < m; ++j) g_y[i][j] += gv[j];
    if (model.trainable_a) {
      add_outer(g_a, tape.y[i], g_x[i], 1.0);
      add_outer(g_a, g_y[i], tape.truth[i], 1.0);
    }
  }
  if (model.trainable_a) std::copy(g_a.begin(), g_a.end(), grad.begin());
  return grad;
}

}  // namespace qamcs
