#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "simfl/dataset.hpp"
#include "simfl/model.hpp"

namespace simfl {

struct MetricsRecord {
  int round = 0;
  std::vector<double> client_accuracy;  // after this round's aggregation
  double mean_accuracy = 0.0;
  int active_count = 0;
  std::int64_t uploaded_params = 0;
  std::int64_t suppressed_params = 0;
  int clusters_correct = 0;
  int groups_total = 0;  // 0 in rounds without clustering

  bool operator==(const MetricsRecord&) const = default;
};

// Fraction of test samples predicted correctly. Throws EmptyDataError.
double evaluate_client(const ModelParams& params, const ClientDataset& test);

struct Savings {
  double per_client = 0.0;
  double server = 0.0;  // sum of per-client savings over all n clients
};

// Expected parameters not uploaded once update control starts at round r:
// per client params * (R - r) * (1 - tau). Throws ArgError unless
// 0 <= r <= R and 0 < tau <= 1.
Savings expected_savings(std::int64_t params_per_update, int rounds, int start_round,
                         double tau, int num_clients);

std::vector<std::string> csv_header(std::size_t num_clients);
std::string format_csv(std::span<const MetricsRecord> records, std::size_t num_clients = 10);
void emit_csv(std::span<const MetricsRecord> records, const std::filesystem::path& path,
              std::size_t num_clients = 10);

struct RunSummary {
  double final_mean_accuracy = 0.0;
  double clustering_accuracy = 0.0;  // accumulated correct / accumulated groups
  std::int64_t total_uploaded = 0;
  std::int64_t total_suppressed = 0;
  int rounds = 0;
};

RunSummary summarize(std::span<const MetricsRecord> records);

}  // namespace simfl
