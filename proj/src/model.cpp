#include "simfl/model.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "simfl/errors.hpp"
#include "simfl/kernels.hpp"
#include "simfl/rng.hpp"

namespace simfl {

LinearParams::LinearParams(std::vector<double> flat) : values_(std::move(flat)) {
  if (values_.size() != kParamCount)
    throw ArgError("linear model needs " + std::to_string(kParamCount) +
                   " values, got " + std::to_string(values_.size()));
}

bool LinearParams::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be a positive finite number");
}

int predict(const ModelParams& params, const Pixels& pixels) {
  std::array<double, kClasses> out{};
  kernels::forward(params.flat(), pixels, out);
  return static_cast<int>(kernels::argmax(out));
}

double local_loss(const ModelParams& params, std::span<const Sample> samples) {
  if (samples.empty()) throw EmptyDataError("loss over an empty dataset");
  return kernels::parallel::loss_sum(params.flat(), samples) /
         static_cast<double>(samples.size());
}

double local_loss(const ModelParams& params, const ClientDataset& data) {
  return local_loss(params, std::span<const Sample>(data.samples));
}

GradientUpdate gradient(const ModelParams& params, std::span<const Sample> batch) {
  if (batch.empty()) throw EmptyDataError("gradient over an empty batch");
  std::vector<const Sample*> ptrs(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) ptrs[i] = &batch[i];
  GradientUpdate g;
  g.num_samples = batch.size();
  kernels::parallel::batch_gradient(params.flat(), ptrs, g.grad.flat());
  return g;
}

std::pair<ModelParams, GradientUpdate> local_train(const ModelParams& start,
                                                   const ClientDataset& data,
                                                   const TrainConfig& cfg) {
  cfg.validate();
  if (data.samples.empty())
    throw EmptyDataError("client " + std::to_string(data.client_id) + " has no data");
  const std::size_t n = data.samples.size();
  std::vector<const Sample*> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = &data.samples[i];

  Rng rng(cfg.seed);
  ModelParams theta = start;
  LinearParams step;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, n - begin);
      kernels::parallel::batch_gradient(
          theta.flat(), std::span<const Sample* const>(order).subspan(begin, len),
          step.flat());
      auto t = theta.flat();
      auto g = step.flat();
      for (std::size_t k = 0; k < kParamCount; ++k) t[k] -= cfg.learning_rate * g[k];
    }
  }

  GradientUpdate update;
  update.num_samples = n;
  auto d = update.grad.flat();
  for (std::size_t k = 0; k < kParamCount; ++k)
    d[k] = (start.flat()[k] - theta.flat()[k]) / cfg.learning_rate;
  return {std::move(theta), std::move(update)};
}

std::vector<float> to_f32(const ModelParams& params) {
  const auto src = params.flat();
  return {src.begin(), src.end()};
}

ModelParams from_f32(std::span<const float> values) {
  return ModelParams(std::vector<double>(values.begin(), values.end()));
}

}  // namespace simfl
