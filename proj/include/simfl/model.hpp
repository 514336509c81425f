#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "simfl/dataset.hpp"
#include "simfl/layout.hpp"

namespace simfl {

// 784x10 weight matrix (pixel-major, class-minor) followed by 10 biases,
// stored contiguously in the same order as the wire layout.
class LinearParams {
 public:
  LinearParams() : values_(kParamCount, 0.0) {}
  explicit LinearParams(std::vector<double> flat);  // throws ArgError on size

  double& weight(std::size_t pixel, std::size_t cls) { return values_[pixel * kClasses + cls]; }
  double weight(std::size_t pixel, std::size_t cls) const { return values_[pixel * kClasses + cls]; }
  double& bias(std::size_t cls) { return values_[kWeightCount + cls]; }
  double bias(std::size_t cls) const { return values_[kWeightCount + cls]; }

  std::span<double> weights() { return {values_.data(), kWeightCount}; }
  std::span<const double> weights() const { return {values_.data(), kWeightCount}; }
  std::span<double> biases() { return {values_.data() + kWeightCount, kClasses}; }
  std::span<const double> biases() const { return {values_.data() + kWeightCount, kClasses}; }
  std::span<double> flat() { return values_; }
  std::span<const double> flat() const { return values_; }

  bool all_finite() const;

  bool operator==(const LinearParams&) const = default;

 private:
  std::vector<double> values_;
};

using ModelParams = LinearParams;

struct GradientUpdate {
  LinearParams grad;            // d_weights then d_bias
  std::size_t num_samples = 0;  // |D_i|, for aggregation weights
};

struct TrainConfig {
  int epochs = 1;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

// argmax of weights^T x + bias, ties to the lowest class.
int predict(const ModelParams& params, const Pixels& pixels);

// Mean of 1/2 ||output - onehot(label)||^2. Throws EmptyDataError.
double local_loss(const ModelParams& params, std::span<const Sample> samples);
double local_loss(const ModelParams& params, const ClientDataset& data);

// Analytic gradient of the mean loss over `batch`. Throws EmptyDataError.
GradientUpdate gradient(const ModelParams& params, std::span<const Sample> batch);

// Minibatch SGD from `start`: each epoch shuffles with a generator seeded by
// cfg.seed, walks batches of cfg.batch_size (last one may be short) and
// applies theta -= lr * grad. Returns the final model and the accumulated
// direction (start - final) / lr with num_samples = |data|.
std::pair<ModelParams, GradientUpdate> local_train(const ModelParams& start,
                                                   const ClientDataset& data,
                                                   const TrainConfig& cfg);

// Wire precision: the 7850-entry layout narrowed to f32.
std::vector<float> to_f32(const ModelParams& params);
ModelParams from_f32(std::span<const float> values);  // throws ArgError on size

}  // namespace simfl
