#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "simfl/clustering.hpp"
#include "simfl/dataset.hpp"
#include "simfl/metrics.hpp"
#include "simfl/model.hpp"
#include "simfl/rng.hpp"
#include "simfl/transport.hpp"

namespace simfl {

// Rounds are numbered 0..rounds-1. Update control governs rounds
// start_round..rounds-1, i.e. it is applied after `start_round` plain rounds.
struct FedConfig {
  int num_clients = kNumClients;
  int rounds = 50;
  double tau = 0.5;
  int clusters = 5;
  int start_round = 10;  // rounds + 1 (or anything > rounds - 1) disables control
  UpdateType update_type = UpdateType::WBG;
  Algorithm algorithm = Algorithm::Spectral;
  bool min_one_rep = false;
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
  // Clustering and coin flips decide round `round`. With tau = 1 every
  // client stays active, so nothing is clustered either.
  bool controls(int round) const { return tau < 1.0 && round >= start_round && round < rounds; }
};

struct DirectiveEntry {
  int client_id = 0;
  bool active = true;
  int cluster = -1;  // -1 when the round was not clustered

  bool operator==(const DirectiveEntry&) const = default;
};

struct RoundDirective {
  int round = 0;
  std::vector<DirectiveEntry> entries;  // ascending client id
  bool clustered = false;

  int active_count() const;
  bool is_active(int client_id) const;
  std::optional<ClusterAssignment> assignment() const;

  bool operator==(const RoundDirective&) const = default;
};

RoundDirective all_active_directive(int round, int num_clients);

DirectiveMsg to_wire(const RoundDirective& d);
RoundDirective from_wire(const DirectiveMsg& msg);

struct Upload {
  int client_id = 0;
  std::size_t num_samples = 0;
  ModelParams theta;
  UpdateVector update;
};

struct ModelContribution {
  ModelParams params;
  std::size_t num_samples = 0;
};

// Weighted mean with p_j = |D_j| / sum over the given set. Throws
// NoUpdatesError when empty, ArgError when every size is zero.
ModelParams aggregate(std::span<const ModelContribution> updates);

// One uniform draw per client in ascending id order: active iff u < tau.
// With min_one_rep, each cluster left without an active member activates one
// member chosen by a single extra uniform draw.
RoundDirective select_representatives(const ClusterAssignment& assignment, double tau,
                                      bool min_one_rep, Rng& rng);

struct ServerState {
  ModelParams global;
  std::map<int, UpdateVector> last_update;  // most recent upload per client
  int round = 0;
  RoundDirective directive;  // in force for `round`
  Rng coin_rng{0};
};

ServerState initial_server_state(const FedConfig& cfg);

struct RoundSummary {
  int round = 0;
  int active_count = 0;
  int uploads_received = 0;
  std::int64_t uploaded_params = 0;
  std::int64_t suppressed_params = 0;
  int clusters_correct = 0;
  int groups_total = 0;
  bool skipped_aggregation = false;
};

struct RoundOutcome {
  ServerState next;
  RoundSummary summary;  // for the round just finished
  std::optional<ClusterAssignment> assignment;  // clustering behind next.directive
};

// Closes round state.round: aggregates the uploads (suppressed clients send
// none), refreshes last_update, and decides the next round's directive.
// With no uploads the global model is kept and skipped_aggregation is set.
RoundOutcome server_round(const ServerState& state, const FedConfig& cfg,
                          std::span<const Upload> uploads);

// Trains when the directive marks the client active; otherwise does nothing.
std::optional<Upload> client_round(const ModelParams& global, const DirectiveEntry& entry,
                                   const ClientDataset& data, const TrainConfig& cfg,
                                   UpdateType update_type);

// Client-side protocol state machine, shared by the TCP client and the
// in-process simulation.
class ClientSession {
 public:
  ClientSession(ClientDataset train, ClientDataset test,
                std::uint8_t protocol_version = kProtocolVersion);

  Message hello() const;
  // Replies to send back; throws ProtocolError on a message out of place.
  std::vector<Message> handle(const Message& msg);

  int client_id() const { return train_.client_id; }
  bool finished() const { return finished_; }
  std::optional<RegisterStatus> rejection() const { return rejection_; }
  const ModelParams& model() const { return model_; }
  int trainings() const { return trainings_; }
  int suppressed_rounds() const { return suppressed_; }

 private:
  ClientDataset train_;
  ClientDataset test_;
  std::uint8_t protocol_version_;
  std::optional<RegisterAckMsg> settings_;
  std::optional<RegisterStatus> rejection_;
  ModelParams model_;
  bool finished_ = false;
  int trainings_ = 0;
  int suppressed_ = 0;
};

struct CoordinatorOptions {
  std::chrono::milliseconds upload_timeout{120000};
  std::chrono::milliseconds register_timeout{120000};
  std::ostream* log = nullptr;
};

struct FederationRun {
  std::vector<MetricsRecord> records;
  std::vector<RoundSummary> summaries;
  std::vector<ClusterAssignment> cluster_history;
  ModelParams final_model;
  std::vector<int> uploads_per_client;
};

// Server orchestration over any transport: registration barrier, then per
// round broadcast model + directive, drain uploads and evaluations in
// client-id order, and close the round with server_round.
FederationRun run_federation(ServerTransport& transport, const FedConfig& cfg,
                             const TrainConfig& train, const CoordinatorOptions& opts);

}  // namespace simfl
