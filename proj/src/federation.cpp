#include "simfl/federation.hpp"

#include <algorithm>
#include <cmath>

#include "simfl/errors.hpp"
#include "simfl/kernels.hpp"

namespace simfl {

namespace {

void log_line(const CoordinatorOptions& opts, const std::string& line) {
  if (opts.log) *opts.log << line << '\n' << std::flush;
}

}  // namespace

void FedConfig::validate() const {
  if (num_clients < 1) throw ConfigError("num_clients must be >= 1");
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
  if (clusters < 1 || clusters > num_clients)
    throw ConfigError("clusters must lie in [1, num_clients]");
  if (algorithm == Algorithm::Spectral && clusters < 2)
    throw ConfigError("spectral clustering needs clusters >= 2");
  if (start_round < 1 || start_round > rounds + 1)
    throw ConfigError("start_round must lie in [1, rounds + 1]");
}

int RoundDirective::active_count() const {
  return static_cast<int>(std::count_if(entries.begin(), entries.end(),
                                        [](const DirectiveEntry& e) { return e.active; }));
}

bool RoundDirective::is_active(int client_id) const {
  for (const auto& e : entries)
    if (e.client_id == client_id) return e.active;
  return false;
}

std::optional<ClusterAssignment> RoundDirective::assignment() const {
  if (!clustered) return std::nullopt;
  ClusterAssignment a;
  for (const auto& e : entries) {
    a.labels[e.client_id] = e.cluster;
    a.m = std::max(a.m, e.cluster + 1);
  }
  return a;
}

RoundDirective all_active_directive(int round, int num_clients) {
  RoundDirective d;
  d.round = round;
  for (int c = 0; c < num_clients; ++c) d.entries.push_back({c, true, -1});
  return d;
}

DirectiveMsg to_wire(const RoundDirective& d) {
  DirectiveMsg m;
  m.round = static_cast<std::uint32_t>(d.round);
  for (const auto& e : d.entries)
    m.entries.push_back({static_cast<std::uint16_t>(e.client_id),
                         static_cast<std::uint8_t>(e.active ? 1 : 0),
                         e.cluster < 0 ? kNoCluster : static_cast<std::uint8_t>(e.cluster)});
  return m;
}

RoundDirective from_wire(const DirectiveMsg& msg) {
  RoundDirective d;
  d.round = static_cast<int>(msg.round);
  for (const auto& e : msg.entries) {
    const int cluster = e.cluster == kNoCluster ? -1 : e.cluster;
    if (cluster >= 0) d.clustered = true;
    d.entries.push_back({e.client_id, e.active != 0, cluster});
  }
  return d;
}

ModelParams aggregate(std::span<const ModelContribution> updates) {
  if (updates.empty()) throw NoUpdatesError("no client models to aggregate");
  double total = 0.0;
  for (const auto& u : updates) total += static_cast<double>(u.num_samples);
  if (!(total > 0.0)) throw ArgError("aggregation weights sum to zero");
  std::vector<std::span<const double>> inputs;
  std::vector<double> weights;
  for (const auto& u : updates) {
    inputs.push_back(u.params.flat());
    weights.push_back(static_cast<double>(u.num_samples) / total);
  }
  ModelParams out;
  kernels::parallel::weighted_sum(inputs, weights, out.flat());
  // The weights sum to 1 only up to rounding; keep each coordinate inside
  // the inputs' range so equal inputs aggregate to themselves exactly.
  auto o = out.flat();
  for (std::size_t i = 0; i < kParamCount; ++i) {
    double lo = inputs[0][i], hi = inputs[0][i];
    for (const auto& in : inputs) {
      lo = std::min(lo, in[i]);
      hi = std::max(hi, in[i]);
    }
    o[i] = std::clamp(o[i], lo, hi);
  }
  return out;
}

RoundDirective select_representatives(const ClusterAssignment& assignment, double tau,
                                      bool min_one_rep, Rng& rng) {
  RoundDirective d;
  d.clustered = true;
  std::map<int, std::vector<int>> members;
  for (auto [client, cluster] : assignment.labels) {
    const bool active = rng.uniform() < tau;
    d.entries.push_back({client, active, cluster});
    members[cluster].push_back(client);
  }
  if (min_one_rep) {
    for (auto& [cluster, ids] : members) {
      const bool any = std::any_of(ids.begin(), ids.end(), [&](int id) {
        return std::find_if(d.entries.begin(), d.entries.end(), [&](const DirectiveEntry& e) {
                 return e.client_id == id;
               })->active;
      });
      if (any) continue;
      const auto pick = std::min(ids.size() - 1,
                                 static_cast<std::size_t>(rng.uniform() * static_cast<double>(ids.size())));
      for (auto& e : d.entries)
        if (e.client_id == ids[pick]) e.active = true;
    }
  }
  return d;
}

ServerState initial_server_state(const FedConfig& cfg) {
  ServerState s;
  s.round = 0;
  s.directive = all_active_directive(0, cfg.num_clients);
  s.coin_rng = Rng(derive_seed(cfg.seed, "coin"));
  return s;
}

RoundOutcome server_round(const ServerState& state, const FedConfig& cfg,
                          std::span<const Upload> uploads) {
  RoundOutcome out;
  out.next = state;
  ServerState& next = out.next;
  RoundSummary& summary = out.summary;
  const std::int64_t per_upload = static_cast<std::int64_t>(update_length(cfg.update_type));

  std::vector<const Upload*> ordered;
  for (const auto& u : uploads) ordered.push_back(&u);
  std::sort(ordered.begin(), ordered.end(),
            [](const Upload* a, const Upload* b) { return a->client_id < b->client_id; });
  for (std::size_t i = 1; i < ordered.size(); ++i)
    if (ordered[i]->client_id == ordered[i - 1]->client_id)
      throw ProtocolError("duplicate upload from client " + std::to_string(ordered[i]->client_id));

  summary.round = state.round;
  summary.active_count = state.directive.active_count();
  summary.uploads_received = static_cast<int>(ordered.size());
  summary.uploaded_params = per_upload * static_cast<std::int64_t>(ordered.size());
  summary.suppressed_params = per_upload * (cfg.num_clients - summary.active_count);
  if (auto a = state.directive.assignment()) {
    const auto truth = ground_truth_groups(cfg.num_clients);
    summary.groups_total = static_cast<int>(truth.size());
    summary.clusters_correct = correct_groups(*a, truth);
  }

  if (ordered.empty()) {
    summary.skipped_aggregation = true;
  } else {
    std::vector<ModelContribution> contributions;
    contributions.reserve(ordered.size());
    for (const Upload* u : ordered) contributions.push_back({u->theta, u->num_samples});
    next.global = aggregate(contributions);
  }
  for (const Upload* u : ordered) next.last_update[u->client_id] = u->update;

  next.round = state.round + 1;
  const bool have_all = static_cast<int>(next.last_update.size()) == cfg.num_clients;
  if (cfg.controls(next.round) && have_all) {
    std::vector<UpdateVector> points;
    for (const auto& [id, v] : next.last_update) points.push_back(v);
    const auto seed = derive_seed(cfg.seed, "cluster", static_cast<std::uint64_t>(next.round));
    ClusterAssignment a = run_clustering(cfg.algorithm, points, cfg.clusters, seed);
    next.directive = select_representatives(a, cfg.tau, cfg.min_one_rep, next.coin_rng);
    out.assignment = std::move(a);
  } else {
    next.directive = all_active_directive(next.round, cfg.num_clients);
  }
  next.directive.round = next.round;
  return out;
}

std::optional<Upload> client_round(const ModelParams& global, const DirectiveEntry& entry,
                                   const ClientDataset& data, const TrainConfig& cfg,
                                   UpdateType update_type) {
  if (!entry.active) return std::nullopt;
  auto [theta, grad] = local_train(global, data, cfg);
  Upload u;
  u.client_id = data.client_id;
  u.num_samples = data.samples.size();
  u.update = flatten_update(data.client_id, theta, grad, update_type);
  u.theta = std::move(theta);
  return u;
}

ClientSession::ClientSession(ClientDataset train, ClientDataset test,
                             std::uint8_t protocol_version)
    : train_(std::move(train)), test_(std::move(test)), protocol_version_(protocol_version) {}

Message ClientSession::hello() const {
  return RegisterMsg{static_cast<std::uint16_t>(train_.client_id),
                     static_cast<std::uint32_t>(train_.samples.size()), protocol_version_};
}

std::vector<Message> ClientSession::handle(const Message& msg) {
  if (const auto* ack = std::get_if<RegisterAckMsg>(&msg)) {
    if (ack->status != RegisterStatus::Accepted) {
      rejection_ = ack->status;
      finished_ = true;
      return {};
    }
    settings_ = *ack;
    return {};
  }
  if (std::holds_alternative<ShutdownMsg>(msg)) {
    finished_ = true;
    return {};
  }
  if (!settings_) throw ProtocolError("message before registration was accepted");

  if (const auto* g = std::get_if<GlobalModelMsg>(&msg)) {
    model_ = from_f32(g->params);
    MetricsAckMsg m;
    m.client_id = static_cast<std::uint16_t>(train_.client_id);
    m.round = g->round;
    m.correct = static_cast<std::uint32_t>(
        kernels::parallel::count_correct(model_.flat(), test_.samples));
    m.total = static_cast<std::uint32_t>(test_.samples.size());
    return {m};
  }
  if (const auto* d = std::get_if<DirectiveMsg>(&msg)) {
    const RoundDirective directive = from_wire(*d);
    auto it = std::find_if(directive.entries.begin(), directive.entries.end(),
                           [&](const DirectiveEntry& e) { return e.client_id == train_.client_id; });
    if (it == directive.entries.end())
      throw ProtocolError("directive does not cover client " + std::to_string(train_.client_id));
    TrainConfig cfg;
    cfg.epochs = static_cast<int>(settings_->epochs);
    cfg.batch_size = settings_->batch_size;
    cfg.learning_rate = settings_->learning_rate;
    cfg.seed = derive_seed(settings_->seed, "shuffle", static_cast<std::uint64_t>(train_.client_id),
                           d->round);
    auto upload = client_round(model_, *it, train_, cfg, settings_->update_type);
    if (!upload) {
      ++suppressed_;
      return {};
    }
    ++trainings_;
    LocalUpdateMsg m;
    m.client_id = static_cast<std::uint16_t>(upload->client_id);
    m.num_samples = static_cast<std::uint32_t>(upload->num_samples);
    m.theta = to_f32(upload->theta);
    m.update_type = settings_->update_type;
    m.update.assign(upload->update.values.begin(), upload->update.values.end());
    model_ = std::move(upload->theta);
    return {m};
  }
  throw ProtocolError("unexpected message for a client");
}

namespace {

struct Registry {
  std::map<int, ConnId> conn_of;
  std::map<ConnId, int> client_of;
  std::map<int, std::size_t> sizes;
  std::set<ConnId> dropped;  // rejected or closed by us
};

void handle_register(ServerTransport& transport, Registry& reg, ConnId conn,
                     const RegisterMsg& m, const FedConfig& cfg, const TrainConfig& train,
                     const CoordinatorOptions& opts) {
  RegisterAckMsg ack;
  ack.epochs = static_cast<std::uint32_t>(train.epochs);
  ack.batch_size = static_cast<std::uint32_t>(train.batch_size);
  ack.learning_rate = train.learning_rate;
  ack.seed = cfg.seed;
  ack.update_type = cfg.update_type;
  if (m.protocol_version != kProtocolVersion) {
    ack.status = RegisterStatus::VersionMismatch;
    log_line(opts, "rejecting client " + std::to_string(m.client_id) + ": protocol version " +
                       std::to_string(m.protocol_version));
  } else if (m.client_id >= cfg.num_clients || reg.conn_of.contains(m.client_id) ||
             m.num_samples == 0) {
    ack.status = RegisterStatus::BadClientId;
    log_line(opts, "rejecting registration from client " + std::to_string(m.client_id));
  }
  transport.send(conn, ack);
  if (ack.status != RegisterStatus::Accepted) {
    reg.dropped.insert(conn);
    transport.close(conn);
    return;
  }
  reg.conn_of[m.client_id] = conn;
  reg.client_of[conn] = m.client_id;
  reg.sizes[m.client_id] = m.num_samples;
}

}  // namespace

FederationRun run_federation(ServerTransport& transport, const FedConfig& cfg,
                             const TrainConfig& train, const CoordinatorOptions& opts) {
  cfg.validate();
  train.validate();
  using Clock = std::chrono::steady_clock;
  Registry reg;

  const auto reg_deadline = Clock::now() + opts.register_timeout;
  while (static_cast<int>(reg.conn_of.size()) < cfg.num_clients) {
    auto in = transport.receive(reg_deadline);
    if (!in)
      throw RuntimeAbort("registration timed out with " + std::to_string(reg.conn_of.size()) +
                         " of " + std::to_string(cfg.num_clients) + " clients");
    if (!in->msg) {
      if (reg.client_of.contains(in->conn))
        throw RuntimeAbort("client " + std::to_string(reg.client_of[in->conn]) +
                           " disconnected during registration");
      continue;
    }
    if (const auto* m = std::get_if<RegisterMsg>(&*in->msg)) {
      handle_register(transport, reg, in->conn, *m, cfg, train, opts);
    } else {
      throw ProtocolError("expected Register during registration");
    }
  }
  log_line(opts, "all " + std::to_string(cfg.num_clients) + " clients registered");

  auto broadcast = [&](const Message& msg) {
    for (const auto& [client, conn] : reg.conn_of) transport.send(conn, msg);
  };

  FederationRun run;
  run.uploads_per_client.assign(cfg.num_clients, 0);
  // evaluations[r][client] = (correct, total) for the model broadcast at round r.
  std::map<int, std::map<int, std::pair<std::uint32_t, std::uint32_t>>> evaluations;
  ServerState state = initial_server_state(cfg);

  // Drains until the expected uploads and evaluations are in, or the deadline.
  auto collect = [&](int round, const std::set<int>& uploaders, std::vector<Upload>& uploads) {
    std::set<int> awaiting_upload = uploaders;
    std::set<int> awaiting_eval;
    for (const auto& [client, conn] : reg.conn_of) awaiting_eval.insert(client);
    const auto deadline = Clock::now() + opts.upload_timeout;
    while (!awaiting_upload.empty() || !awaiting_eval.empty()) {
      auto in = transport.receive(deadline);
      if (!in) {
        log_line(opts, "round " + std::to_string(round) + ": timed out with " +
                           std::to_string(awaiting_upload.size()) + " uploads and " +
                           std::to_string(awaiting_eval.size()) + " evaluations missing");
        return;
      }
      if (reg.dropped.contains(in->conn)) continue;
      auto known = reg.client_of.find(in->conn);
      if (known == reg.client_of.end()) {
        // Late stranger after registration closed.
        if (in->msg) {
          transport.close(in->conn);
          reg.dropped.insert(in->conn);
        }
        continue;
      }
      const int client = known->second;
      if (!in->msg) throw RuntimeAbort("lost connection to client " + std::to_string(client));
      if (const auto* u = std::get_if<LocalUpdateMsg>(&*in->msg)) {
        if (u->client_id != client || !awaiting_upload.contains(client))
          throw ProtocolError("unexpected LocalUpdate from client " + std::to_string(client));
        if (u->update_type != cfg.update_type)
          throw ProtocolError("client " + std::to_string(client) + " sent the wrong update type");
        Upload up;
        up.client_id = client;
        up.num_samples = reg.sizes[client];
        up.theta = from_f32(u->theta);
        up.update.client_id = client;
        up.update.update_type = u->update_type;
        up.update.values.assign(u->update.begin(), u->update.end());
        uploads.push_back(std::move(up));
        awaiting_upload.erase(client);
        ++run.uploads_per_client[client];
      } else if (const auto* e = std::get_if<MetricsAckMsg>(&*in->msg)) {
        if (e->client_id != client)
          throw ProtocolError("MetricsAck carries the wrong client id");
        evaluations[static_cast<int>(e->round)][client] = {e->correct, e->total};
        if (static_cast<int>(e->round) == round) awaiting_eval.erase(client);
      } else {
        throw ProtocolError("unexpected message from client " + std::to_string(client));
      }
    }
  };

  for (int t = 0; t < cfg.rounds; ++t) {
    broadcast(GlobalModelMsg{static_cast<std::uint32_t>(t), to_f32(state.global)});
    broadcast(to_wire(state.directive));
    std::set<int> uploaders;
    for (const auto& e : state.directive.entries)
      if (e.active) uploaders.insert(e.client_id);
    std::vector<Upload> uploads;
    collect(t, uploaders, uploads);

    RoundOutcome outcome = server_round(state, cfg, uploads);
    if (outcome.summary.skipped_aggregation)
      log_line(opts, "round " + std::to_string(t) + ": SkippedAggregation, no uploads");
    if (auto a = state.directive.assignment()) run.cluster_history.push_back(*a);
    run.summaries.push_back(outcome.summary);
    state = std::move(outcome.next);
  }
  // Final model evaluation.
  broadcast(GlobalModelMsg{static_cast<std::uint32_t>(cfg.rounds), to_f32(state.global)});
  {
    std::vector<Upload> none;
    collect(cfg.rounds, {}, none);
  }
  broadcast(ShutdownMsg{});

  for (const RoundSummary& s : run.summaries) {
    MetricsRecord r;
    r.round = s.round;
    r.client_accuracy.assign(cfg.num_clients, 0.0);
    const auto& evals = evaluations[s.round + 1];
    double sum = 0.0;
    for (int c = 0; c < cfg.num_clients; ++c) {
      auto it = evals.find(c);
      if (it != evals.end() && it->second.second > 0)
        r.client_accuracy[c] = static_cast<double>(it->second.first) / it->second.second;
      else
        log_line(opts, "round " + std::to_string(s.round) + ": no evaluation from client " +
                           std::to_string(c));
      sum += r.client_accuracy[c];
    }
    r.mean_accuracy = sum / cfg.num_clients;
    r.active_count = s.active_count;
    r.uploaded_params = s.uploaded_params;
    r.suppressed_params = s.suppressed_params;
    r.clusters_correct = s.clusters_correct;
    r.groups_total = s.groups_total;
    run.records.push_back(std::move(r));
  }
  run.final_model = state.global;
  return run;
}

}  // namespace simfl
