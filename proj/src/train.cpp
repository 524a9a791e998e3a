#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <random>

#include "qamcs/error.hpp"
#include "qamcs/io.hpp"
#include "qamcs/unfolded.hpp"
#include "rng.hpp"

namespace qamcs {

void TrainConfig::validate() const {
  if (batch_size < 1) throw Error("batch_size must be >= 1");
  // lr = 0 is accepted so that a no-op update can be checked
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw Error("learning_rate must be >= 0");
  if (epochs < 1) throw Error("epochs must be >= 1");
}

TrainResult train_model(UnfoldedModel model, std::span<const ParametricMap> dataset, const TrainConfig& cfg) {
  cfg.validate();
  model.validate();
  if (dataset.empty()) throw Error("training set is empty");
  for (const auto& d : dataset)
    if (d.rows() != dataset.front().rows() || d.cols() != dataset.front().cols())
      throw Error("training maps differ in shape");

  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<double> params = get_parameters(model);
  const auto mask = trainable_mask(model);
  std::vector<double> m1(params.size(), 0.0), m2(params.size(), 0.0);

  TrainResult result;
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto gen = detail::make_engine(cfg.seed, 0x747261696eULL);
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs && (cfg.max_steps == 0 || step < cfg.max_steps); ++epoch) {
    std::shuffle(order.begin(), order.end(), gen);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      if (cfg.max_steps != 0 && step >= cfg.max_steps) break;
      ++step;
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const auto count = static_cast<std::ptrdiff_t>(stop - start);
      std::vector<std::vector<double>> grads(stop - start);
      std::vector<double> losses(stop - start);
      std::vector<std::exception_ptr> errors(stop - start);

#pragma omp parallel for schedule(static) if (cfg.exec == Exec::parallel)
      for (std::ptrdiff_t s = 0; s < count; ++s) {
        const auto i = static_cast<std::size_t>(s);
        try {
          grads[i] = sample_gradient(model, dataset[order[start + i]], &losses[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
      for (auto& e : errors)
        if (e) {
          try {
            std::rethrow_exception(e);
          } catch (const Error& err) {
            throw TrainingError(err.what(), epoch, step);
          }
        }

      // fixed-order reduction
      const double inv = 1.0 / static_cast<double>(count);
      double loss = 0.0;
      for (double l : losses) loss += l;
      loss *= inv;
      if (!std::isfinite(loss)) throw TrainingError("non-finite training loss", epoch, step);
      result.curve.push_back({epoch, step, loss});

      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t p = 0; p < params.size(); ++p) {
        if (!mask[p]) continue;
        double g = 0.0;
        for (const auto& gr : grads) g += gr[p];
        g *= inv;
        m1[p] = beta1 * m1[p] + (1.0 - beta1) * g;
        m2[p] = beta2 * m2[p] + (1.0 - beta2) * g * g;
        const double mhat = m1[p] / bc1, vhat = m2[p] / bc2;
        params[p] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + eps);
      }
      set_parameters(model, params);
    }
  }
  result.model = std::move(model);
  return result;
}

std::vector<double> epoch_means(std::span<const LossRecord> curve) {
  std::vector<double> means;
  std::size_t epoch = 0, n = 0;
  double sum = 0.0;
  for (const auto& r : curve) {
    if (r.epoch != epoch && n > 0) {
      means.push_back(sum / static_cast<double>(n));
      sum = 0.0;
      n = 0;
    }
    epoch = r.epoch;
    sum += r.loss;
    ++n;
  }
  if (n > 0) means.push_back(sum / static_cast<double>(n));
  return means;
}

void export_loss_curve_csv(std::span<const LossRecord> curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrc::io_failure, "cannot open " + path.string() + " for writing");
  out << "epoch,step,loss\n";
  for (const auto& r : curve) out << r.epoch << ',' << r.step << ',' << format_double(r.loss) << '\n';
  if (!out) throw IoError(IoErrc::io_failure, "write failed for " + path.string());
}

GradientCheckResult gradient_check(std::span<const double> params,
                                   const std::function<double(std::span<const double>)>& loss,
                                   std::span<const double> analytic, std::span<const std::uint8_t> mask,
                                   double eps, double floor) {
  if (!(eps > 0.0)) throw Error("gradient_check needs eps > 0");
  if (analytic.size() != params.size() || mask.size() != params.size())
    throw Error("gradient_check: parameter, gradient and mask lengths differ");
  GradientCheckResult res;
  res.rel_errors.assign(params.size(), 0.0);
  std::vector<double> p(params.begin(), params.end());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!mask[i]) continue;
    const double orig = p[i];
    p[i] = orig + eps;
    const double up = loss(p);
    p[i] = orig - eps;
    const double down = loss(p);
    p[i] = orig;
    const double fd = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(fd), floor});
    const double rel = std::abs(analytic[i] - fd) / denom;
    res.rel_errors[i] = rel;
    if (res.checked++ == 0 || rel > res.max_rel_error) {
      res.max_rel_error = rel;
      res.worst_index = i;
    }
  }
  return res;
}

GradientCheckResult gradient_check(const UnfoldedModel& model, const ParametricMap& sample, double eps) {
  const auto params = get_parameters(model);
  const auto grad = sample_gradient(model, sample);
  UnfoldedModel probe = model;
  auto loss = [&](std::span<const double> p) {
    set_parameters(probe, p);
    return sample_loss(probe, sample);
  };
  return gradient_check(params, loss, grad, trainable_mask(model), eps);
}

}  // namespace qamcs
