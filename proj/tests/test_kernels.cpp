#include <omp.h>

#include "doctest.h"
#include "simfl/kernels.hpp"
#include "helpers.hpp"

using namespace simfl;

namespace {

struct ThreadCount {
  explicit ThreadCount(int n) : saved(omp_get_max_threads()) { omp_set_num_threads(n); }
  ~ThreadCount() { omp_set_num_threads(saved); }
  int saved;
};

}  // namespace

TEST_CASE("parallel kernels are bit-identical to the serial ones") {
  std::mt19937_64 gen(11);
  for (int threads : {1, 3, 8}) {
    ThreadCount tc(threads);
    CHECK(kernels::parallel::max_threads() == threads);
    const ModelParams p = testutil::random_params(gen, 0.05);
    const auto samples = testutil::random_samples(gen, 37);
    std::vector<const Sample*> batch;
    for (const auto& s : samples) batch.push_back(&s);

    std::vector<double> gs(kParamCount), gp(kParamCount);
    kernels::serial::batch_gradient(p.flat(), batch, gs);
    kernels::parallel::batch_gradient(p.flat(), batch, gp);
    CHECK(gs == gp);

    CHECK(kernels::serial::loss_sum(p.flat(), samples) ==
          kernels::parallel::loss_sum(p.flat(), samples));
    CHECK(kernels::serial::count_correct(p.flat(), samples) ==
          kernels::parallel::count_correct(p.flat(), samples));

    std::vector<ModelParams> models;
    std::vector<std::span<const double>> inputs;
    std::vector<double> weights;
    for (int j = 0; j < 7; ++j) models.push_back(testutil::random_params(gen, 1.0));
    for (int j = 0; j < 7; ++j) {
      inputs.push_back(models[j].flat());
      weights.push_back(static_cast<double>(j + 1) / 28.0);
    }
    std::vector<double> ws(kParamCount), wp(kParamCount);
    kernels::serial::weighted_sum(inputs, weights, ws);
    kernels::parallel::weighted_sum(inputs, weights, wp);
    CHECK(ws == wp);

    Matrix pts(10, kParamCount);
    for (std::size_t i = 0; i < 10; ++i)
      std::copy(models[i % 7].flat().begin(), models[i % 7].flat().end(), pts.row(i).begin());
    pts(3, 5) += 1.0;
    CHECK(kernels::serial::pairwise_sq_distances(pts) ==
          kernels::parallel::pairwise_sq_distances(pts));
  }
}

TEST_CASE("forward and argmax") {
  ModelParams p;
  p.weight(0, 2) = 2.0;
  p.bias(5) = 1.5;
  Pixels x{};
  x[0] = 1.0f;
  std::array<double, kClasses> out{};
  kernels::forward(p.flat(), x, out);
  CHECK(out[2] == 2.0);
  CHECK(out[5] == 1.5);
  CHECK(kernels::argmax(out) == 2);
  std::array<double, kClasses> flat{};
  CHECK(kernels::argmax(flat) == 0);
}

TEST_CASE("pairwise distances are symmetric with zero diagonal") {
  Matrix pts(3, 2);
  pts(1, 0) = 3.0;
  pts(2, 1) = 4.0;
  const Matrix d = kernels::serial::pairwise_sq_distances(pts);
  CHECK(d(0, 1) == 9.0);
  CHECK(d(0, 2) == 16.0);
  CHECK(d(1, 2) == 25.0);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(d(i, i) == 0.0);
    for (std::size_t j = 0; j < 3; ++j) CHECK(d(i, j) == d(j, i));
  }
}
