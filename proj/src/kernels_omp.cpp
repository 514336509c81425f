#include <array>
#include <cassert>
#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "simfl/kernels.hpp"

namespace simfl::kernels::parallel {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void batch_gradient(std::span<const double> params,
                    std::span<const Sample* const> batch,
                    std::span<double> grad) {
  assert(grad.size() == kParamCount && !batch.empty());
  const auto n = static_cast<std::int64_t>(batch.size());
  std::vector<std::array<double, kClasses>> residual(batch.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < n; ++b) {
    forward(params, batch[b]->pixels, residual[b]);
    residual[b][batch[b]->label] -= 1.0;
  }
  const double inv = 1.0 / static_cast<double>(n);
  constexpr auto pixels = static_cast<std::int64_t>(kPixels);
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < pixels; ++p) {
    std::array<double, kClasses> acc{};
    for (std::int64_t b = 0; b < n; ++b) {
      const double xp = batch[b]->pixels[p];
      if (xp == 0.0) continue;
      for (std::size_t c = 0; c < kClasses; ++c) acc[c] += xp * residual[b][c];
    }
    for (std::size_t c = 0; c < kClasses; ++c) grad[p * kClasses + c] = acc[c] * inv;
  }
  std::array<double, kClasses> acc{};
  for (std::int64_t b = 0; b < n; ++b)
    for (std::size_t c = 0; c < kClasses; ++c) acc[c] += residual[b][c];
  for (std::size_t c = 0; c < kClasses; ++c) grad[kWeightCount + c] = acc[c] * inv;
}

double loss_sum(std::span<const double> params, std::span<const Sample> samples) {
  const auto n = static_cast<std::int64_t>(samples.size());
  std::vector<double> per_sample(samples.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    std::array<double, kClasses> out{};
    forward(params, samples[i].pixels, out);
    out[samples[i].label] -= 1.0;
    double sq = 0.0;
    for (double r : out) sq += r * r;
    per_sample[i] = 0.5 * sq;
  }
  // Ordered reduction keeps the sum identical to the serial loop.
  double total = 0.0;
  for (double v : per_sample) total += v;
  return total;
}

std::size_t count_correct(std::span<const double> params,
                          std::span<const Sample> samples) {
  const auto n = static_cast<std::int64_t>(samples.size());
  std::int64_t correct = 0;
#pragma omp parallel for schedule(static) reduction(+ : correct)
  for (std::int64_t i = 0; i < n; ++i) {
    std::array<double, kClasses> out{};
    forward(params, samples[i].pixels, out);
    if (static_cast<int>(argmax(out)) == samples[i].label) ++correct;
  }
  return static_cast<std::size_t>(correct);
}

void weighted_sum(std::span<const std::span<const double>> inputs,
                  std::span<const double> weights, std::span<double> out) {
  assert(inputs.size() == weights.size());
  const auto len = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < len; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < inputs.size(); ++j) acc += weights[j] * inputs[j][i];
    out[i] = acc;
  }
}

Matrix pairwise_sq_distances(const Matrix& points) {
  const auto n = static_cast<std::int64_t>(points.rows());
  Matrix d(points.rows(), points.rows());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = i + 1; j < n; ++j) {
      const double v = squared_distance(points.row(i), points.row(j));
      d(i, j) = v;
      d(j, i) = v;
    }
  return d;
}

}  // namespace simfl::kernels::parallel
