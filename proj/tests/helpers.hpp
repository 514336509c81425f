#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "simfl/dataset.hpp"
#include "simfl/model.hpp"

namespace testutil {

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("simfl_test_" + name + "_" + std::to_string(std::random_device{}()));
  std::filesystem::create_directories(dir);
  return dir;
}

inline simfl::Sample random_sample(std::mt19937_64& gen, int label, double density = 0.3) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> byte(1, 255);
  simfl::Sample s;
  s.label = label;
  for (auto& p : s.pixels)
    p = u(gen) < density ? static_cast<float>(byte(gen)) / 255.0f : 0.0f;
  return s;
}

inline std::vector<simfl::Sample> random_samples(std::mt19937_64& gen, std::size_t n) {
  std::vector<simfl::Sample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_sample(gen, static_cast<int>(i % 10)));
  return out;
}

inline simfl::ModelParams random_params(std::mt19937_64& gen, double scale = 0.05) {
  std::normal_distribution<double> n(0.0, scale);
  simfl::ModelParams p;
  for (auto& v : p.flat()) v = n(gen);
  return p;
}

inline void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

}  // namespace testutil
