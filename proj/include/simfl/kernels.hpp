#pragma once

// Data-parallel inner loops of training, evaluation, aggregation and
// clustering. Every kernel has a serial reference and an OpenMP version with
// the same signature; the OpenMP versions split work only across independent
// outputs and keep each output's accumulation order, so both produce
// bit-identical results for any thread count.

#include <cstddef>
#include <span>

#include "simfl/dataset.hpp"
#include "simfl/layout.hpp"
#include "simfl/linalg.hpp"

namespace simfl::kernels {

// out[c] = bias[c] + sum_p x[p] * w[p][c], accumulated in pixel order.
// `params` is the 7850-entry weights-then-bias layout.
void forward(std::span<const double> params, const Pixels& x,
             std::span<double, kClasses> out);

// Lowest index among the maxima.
std::size_t argmax(std::span<const double, kClasses> out);

namespace serial {

// 1/B sum_b x_b (out_b - onehot_b)^T into the weight block of `grad`, and
// the mean bias residual into its bias block.
void batch_gradient(std::span<const double> params,
                    std::span<const Sample* const> batch,
                    std::span<double> grad);

// Sum over samples of 1/2 ||out - onehot||^2.
double loss_sum(std::span<const double> params, std::span<const Sample> samples);

std::size_t count_correct(std::span<const double> params,
                          std::span<const Sample> samples);

// out[i] = sum_j weights[j] * inputs[j][i], summed in j order.
void weighted_sum(std::span<const std::span<const double>> inputs,
                  std::span<const double> weights, std::span<double> out);

// Symmetric n x n matrix of squared Euclidean distances between rows.
Matrix pairwise_sq_distances(const Matrix& points);

}  // namespace serial

// Same contracts as serial::.
namespace parallel {

void batch_gradient(std::span<const double> params,
                    std::span<const Sample* const> batch,
                    std::span<double> grad);
double loss_sum(std::span<const double> params, std::span<const Sample> samples);
std::size_t count_correct(std::span<const double> params,
                          std::span<const Sample> samples);
void weighted_sum(std::span<const std::span<const double>> inputs,
                  std::span<const double> weights, std::span<double> out);
Matrix pairwise_sq_distances(const Matrix& points);

// Threads the OpenMP runtime will use (1 when built without OpenMP).
int max_threads();

}  // namespace parallel

}  // namespace simfl::kernels
