#include <array>
#include <cassert>
#include <vector>

#include "simfl/kernels.hpp"

namespace simfl::kernels {

void forward(std::span<const double> params, const Pixels& x,
             std::span<double, kClasses> out) {
  assert(params.size() == kParamCount);
  for (std::size_t c = 0; c < kClasses; ++c) out[c] = 0.0;
  for (std::size_t p = 0; p < kPixels; ++p) {
    const double xp = x[p];
    if (xp == 0.0) continue;
    const double* w = params.data() + p * kClasses;
    for (std::size_t c = 0; c < kClasses; ++c) out[c] += xp * w[c];
  }
  for (std::size_t c = 0; c < kClasses; ++c) out[c] += params[kWeightCount + c];
}

std::size_t argmax(std::span<const double, kClasses> out) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < kClasses; ++c)
    if (out[c] > out[best]) best = c;
  return best;
}

namespace serial {

void batch_gradient(std::span<const double> params,
                    std::span<const Sample* const> batch,
                    std::span<double> grad) {
  assert(grad.size() == kParamCount && !batch.empty());
  const std::size_t n = batch.size();
  std::vector<std::array<double, kClasses>> residual(n);
  for (std::size_t b = 0; b < n; ++b) {
    forward(params, batch[b]->pixels, residual[b]);
    residual[b][batch[b]->label] -= 1.0;
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t p = 0; p < kPixels; ++p) {
    std::array<double, kClasses> acc{};
    for (std::size_t b = 0; b < n; ++b) {
      const double xp = batch[b]->pixels[p];
      if (xp == 0.0) continue;
      for (std::size_t c = 0; c < kClasses; ++c) acc[c] += xp * residual[b][c];
    }
    for (std::size_t c = 0; c < kClasses; ++c) grad[p * kClasses + c] = acc[c] * inv;
  }
  std::array<double, kClasses> acc{};
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t c = 0; c < kClasses; ++c) acc[c] += residual[b][c];
  for (std::size_t c = 0; c < kClasses; ++c) grad[kWeightCount + c] = acc[c] * inv;
}

double loss_sum(std::span<const double> params, std::span<const Sample> samples) {
  double total = 0.0;
  std::array<double, kClasses> out{};
  for (const Sample& s : samples) {
    forward(params, s.pixels, out);
    out[s.label] -= 1.0;
    double sq = 0.0;
    for (double r : out) sq += r * r;
    total += 0.5 * sq;
  }
  return total;
}

std::size_t count_correct(std::span<const double> params,
                          std::span<const Sample> samples) {
  std::size_t correct = 0;
  std::array<double, kClasses> out{};
  for (const Sample& s : samples) {
    forward(params, s.pixels, out);
    if (static_cast<int>(argmax(out)) == s.label) ++correct;
  }
  return correct;
}

void weighted_sum(std::span<const std::span<const double>> inputs,
                  std::span<const double> weights, std::span<double> out) {
  assert(inputs.size() == weights.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < inputs.size(); ++j) acc += weights[j] * inputs[j][i];
    out[i] = acc;
  }
}

Matrix pairwise_sq_distances(const Matrix& points) {
  const std::size_t n = points.rows();
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = squared_distance(points.row(i), points.row(j));
      d(i, j) = v;
      d(j, i) = v;
    }
  return d;
}

}  // namespace serial
}  // namespace simfl::kernels
