#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "simfl/dataset.hpp"
#include "simfl/federation.hpp"
#include "simfl/metrics.hpp"
#include "simfl/model.hpp"

namespace simfl {

struct ExperimentConfig {
  FedConfig fed;
  TrainConfig train;
  std::filesystem::path data_dir = "data/mnist-subset";
  PartitionScheme scheme = PartitionScheme::Set2;
  std::filesystem::path output = "metrics.csv";
  std::string server = "127.0.0.1:8471";  // client mode
  std::uint16_t port = 8471;              // server mode
  int client_id = 0;                      // client mode
  std::size_t max_train = 0;              // 0 reads every sample
  std::size_t max_test = 0;
  double upload_timeout_s = 120.0;
  double register_timeout_s = 120.0;
  int bytes_per_param = 4;
  int protocol_version = kProtocolVersion;

  // Checks every module's preconditions; ConfigError names the field.
  void validate() const;

  bool operator==(const ExperimentConfig& o) const;
};

// Flat "key = value" settings. Keys are listed by setting_keys().
const std::vector<std::string>& setting_keys();
void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);
std::string get_setting(const ExperimentConfig& cfg, std::string_view key);

// '#' starts a comment; blank lines are ignored.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});
std::string write_config(const ExperimentConfig& cfg);

struct ClientData {
  std::vector<ClientDataset> train;
  std::vector<ClientDataset> test;
};

ClientData load_client_data(const ExperimentConfig& cfg);

struct SimResult {
  FederationRun run;
  RunSummary summary;
  std::string csv;
};

// Deterministic in-process run over the loopback transport.
SimResult simulate(const ExperimentConfig& cfg, const ClientData& data);

// Full `sim` subcommand: loads data, runs, writes the CSV (if output is
// non-empty) and prints the summary.
SimResult run_sim(const ExperimentConfig& cfg, std::ostream& out);

void print_summary(const ExperimentConfig& cfg, const RunSummary& s, std::ostream& out);

// Deployment mode. run_server returns after writing the CSV; run_client
// returns once the server sends Shutdown. Errors surface as exceptions
// (ProtocolError for a rejected registration).
RunSummary run_server(const ExperimentConfig& cfg, std::ostream& out);
void run_client(const ExperimentConfig& cfg, std::ostream& out);

// Clustering-accuracy grid over algorithms x update types x partition
// schemes, then measured vs expected suppression for start rounds 10..40.
void run_reproduce(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                   std::ostream& out);

// Writes per-client training caches to `out_dir` and test caches to
// `out_dir/test`.
void run_partition(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                   std::ostream& out);

}  // namespace simfl
