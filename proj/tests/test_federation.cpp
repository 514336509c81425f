#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "simfl/errors.hpp"
#include "simfl/experiment.hpp"
#include "simfl/federation.hpp"
#include "simfl/kernels.hpp"
#include "simfl/rng.hpp"
#include "helpers.hpp"

using namespace simfl;

namespace {

ClusterAssignment pair_assignment() {
  ClusterAssignment a{{}, 5};
  for (int c = 0; c < 10; ++c) a.labels[c] = c / 2;
  return a;
}

ClientDataset toy_client(std::mt19937_64& gen, int id, std::size_t n) {
  ClientDataset d;
  d.client_id = id;
  d.allowed_digits = allowed_digits(PartitionScheme::Set1, id);
  for (std::size_t i = 0; i < n; ++i)
    d.samples.push_back(testutil::random_sample(gen, *d.allowed_digits.begin() + static_cast<int>(i % 2)));
  return d;
}

Upload make_upload(int id, std::size_t n, const ModelParams& theta, UpdateType t) {
  GradientUpdate g{theta, n};
  return {id, n, theta, flatten_update(id, theta, g, t)};
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.data_dir = SIMFL_DATA_DIR;
  cfg.max_train = 1200;
  cfg.max_test = 300;
  cfg.output.clear();
  return cfg;
}

}  // namespace

TEST_CASE("aggregate examples") {
  std::mt19937_64 gen(40);
  const ModelParams a = testutil::random_params(gen), b = testutil::random_params(gen);
  CHECK(aggregate(std::vector<ModelContribution>{{a, 7}}) == a);
  const auto mean = aggregate(std::vector<ModelContribution>{{a, 4}, {b, 4}});
  const auto weighted = aggregate(std::vector<ModelContribution>{{a, 1}, {b, 3}});
  for (std::size_t i = 0; i < kParamCount; ++i) {
    CHECK(mean.flat()[i] == doctest::Approx(0.5 * a.flat()[i] + 0.5 * b.flat()[i]).epsilon(1e-14));
    CHECK(weighted.flat()[i] ==
          doctest::Approx(0.25 * a.flat()[i] + 0.75 * b.flat()[i]).epsilon(1e-14));
  }
  CHECK_THROWS_AS(aggregate({}), NoUpdatesError);
  CHECK_THROWS_AS(aggregate(std::vector<ModelContribution>{{a, 0}}), ArgError);
}

TEST_CASE("aggregate: convexity and weighted least squares") {
  std::mt19937_64 gen(41);
  std::uniform_int_distribution<std::size_t> size(1, 900);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<ModelContribution> cs;
    for (int j = 0; j < 1 + trial % 6; ++j) cs.push_back({testutil::random_params(gen, 1.0), size(gen)});
    const auto agg = aggregate(cs);
    double total = 0.0;
    for (const auto& c : cs) total += static_cast<double>(c.num_samples);
    for (std::size_t i = 0; i < kParamCount; ++i) {
      double lo = INFINITY, hi = -INFINITY, grad = 0.0;
      for (const auto& c : cs) {
        lo = std::min(lo, c.params.flat()[i]);
        hi = std::max(hi, c.params.flat()[i]);
        grad += static_cast<double>(c.num_samples) / total * (agg.flat()[i] - c.params.flat()[i]);
      }
      REQUIRE(agg.flat()[i] >= lo);
      REQUIRE(agg.flat()[i] <= hi);
      // Stationarity of sum_j p_j ||theta - theta_j||^2.
      REQUIRE(std::abs(grad) <= 1e-10);
    }
  }
}

TEST_CASE("select_representatives: tau 1 keeps everyone") {
  Rng rng(5);
  const auto d = select_representatives(pair_assignment(), 1.0, false, rng);
  CHECK(d.active_count() == 10);
  CHECK(d.clustered);
  for (const auto& e : d.entries) CHECK(e.cluster == e.client_id / 2);
}

TEST_CASE("select_representatives: one draw per client in id order") {
  Rng rng(6), replay(6);
  const auto d = select_representatives(pair_assignment(), 0.3, false, rng);
  REQUIRE(d.entries.size() == 10);
  for (int c = 0; c < 10; ++c) {
    CHECK(d.entries[c].client_id == c);
    CHECK(d.entries[c].active == (replay.uniform() < 0.3));
  }
  CHECK(rng == replay);
  Rng again(6);
  CHECK(select_representatives(pair_assignment(), 0.3, false, again) == d);
}

TEST_CASE("select_representatives: Monte Carlo mean active fraction") {
  Rng rng(7);
  double active = 0.0;
  for (int trial = 0; trial < 10000; ++trial)
    active += select_representatives(pair_assignment(), 0.5, false, rng).active_count();
  CHECK(std::abs(active / 100000.0 - 0.5) <= 0.02);
}

TEST_CASE("select_representatives: min_one_rep covers every cluster") {
  Rng rng(8);
  for (int trial = 0; trial < 500; ++trial) {
    const auto d = select_representatives(pair_assignment(), 0.1, true, rng);
    for (int g = 0; g < 5; ++g) CHECK((d.is_active(2 * g) || d.is_active(2 * g + 1)));
  }
}

TEST_CASE("directive wire conversion round-trips") {
  Rng rng(9);
  auto d = select_representatives(pair_assignment(), 0.5, false, rng);
  d.round = 17;
  const auto w = to_wire(d);
  CHECK(w.round == 17);
  CHECK(w.entries.size() == 10);
  CHECK(from_wire(w) == d);
  const auto plain = all_active_directive(3, 10);
  CHECK(!plain.clustered);
  CHECK(!plain.assignment());
  CHECK(to_wire(plain).entries[4].cluster == kNoCluster);
  CHECK(from_wire(to_wire(plain)) == plain);
  CHECK(*d.assignment() == pair_assignment());
}

TEST_CASE("server_round: plain rounds before the start round") {
  FedConfig cfg;
  cfg.update_type = UpdateType::WW;
  auto state = initial_server_state(cfg);
  CHECK(state.directive.active_count() == 10);
  std::mt19937_64 gen(42);
  for (int r = 0; r < cfg.start_round - 1; ++r) {
    std::vector<Upload> ups;
    for (int c = 0; c < 10; ++c) ups.push_back(make_upload(c, 10, testutil::random_params(gen), cfg.update_type));
    auto out = server_round(state, cfg, ups);
    CHECK(out.summary.round == r);
    CHECK(out.summary.uploaded_params == 10 * 7840);
    CHECK(out.summary.suppressed_params == 0);
    CHECK(out.summary.groups_total == 0);
    CHECK(out.next.directive.round == r + 1);
    CHECK(out.next.directive.active_count() == 10);
    CHECK(!out.next.directive.clustered);
    CHECK(!out.assignment);
    state = out.next;
  }
}

TEST_CASE("server_round: identical models are a fixed point") {
  FedConfig cfg;
  std::mt19937_64 gen(43);
  const ModelParams theta = testutil::random_params(gen);
  std::vector<Upload> ups;
  for (int c = 9; c >= 0; --c) ups.push_back(make_upload(c, 5 + c, theta, cfg.update_type));
  const auto out = server_round(initial_server_state(cfg), cfg, ups);
  CHECK(out.next.global == theta);
  CHECK(out.next.last_update.size() == 10);
}

TEST_CASE("server_round: clustering starts at the start round and reuses stale uploads") {
  FedConfig cfg;
  cfg.start_round = 2;
  cfg.update_type = UpdateType::WW;
  cfg.algorithm = Algorithm::Agglomerative;
  auto state = initial_server_state(cfg);
  std::mt19937_64 gen(44);
  // Pairs share a centre, so single linkage recovers them exactly.
  std::vector<ModelParams> centre;
  for (int g = 0; g < 5; ++g) centre.push_back(testutil::random_params(gen, 1.0));
  auto upload_for = [&](int c) {
    ModelParams p = centre[c / 2];
    p.flat()[0] += 1e-3 * c;
    return make_upload(c, 10, p, cfg.update_type);
  };
  std::vector<Upload> all;
  for (int c = 0; c < 10; ++c) all.push_back(upload_for(c));
  state = server_round(state, cfg, all).next;
  auto out = server_round(state, cfg, all);
  REQUIRE(out.assignment);
  CHECK(out.next.directive.clustered);
  CHECK(correct_groups(*out.assignment, ground_truth_groups()) == 5);

  std::vector<Upload> active;
  for (int c = 0; c < 10; ++c)
    if (out.next.directive.is_active(c)) active.push_back(upload_for(c));
  const int active_count = out.next.directive.active_count();
  auto third = server_round(out.next, cfg, active);
  CHECK(third.summary.active_count == active_count);
  CHECK(third.summary.uploaded_params == 7840 * static_cast<std::int64_t>(active.size()));
  CHECK(third.summary.suppressed_params == 7840 * (10 - active_count));
  CHECK(third.summary.groups_total == 5);
  CHECK(third.summary.clusters_correct == 5);
  CHECK(third.next.last_update == out.next.last_update);
}

TEST_CASE("server_round: zero uploads keep the model and duplicates are rejected") {
  FedConfig cfg;
  std::mt19937_64 gen(45);
  auto state = initial_server_state(cfg);
  state.global = testutil::random_params(gen);
  const auto out = server_round(state, cfg, {});
  CHECK(out.summary.skipped_aggregation);
  CHECK(out.next.global == state.global);
  std::vector<Upload> dup{make_upload(1, 5, state.global, cfg.update_type),
                          make_upload(1, 5, state.global, cfg.update_type)};
  CHECK_THROWS_AS(server_round(state, cfg, dup), ProtocolError);
}

TEST_CASE("server_round: tau 1 never clusters") {
  FedConfig cfg;
  cfg.tau = 1.0;
  cfg.start_round = 1;
  std::mt19937_64 gen(46);
  std::vector<Upload> ups;
  for (int c = 0; c < 10; ++c) ups.push_back(make_upload(c, 5, testutil::random_params(gen), cfg.update_type));
  auto state = initial_server_state(cfg);
  for (int r = 0; r < 3; ++r) {
    auto out = server_round(state, cfg, ups);
    CHECK(!out.assignment);
    state = out.next;
  }
  CHECK(state.coin_rng == initial_server_state(cfg).coin_rng);
}

TEST_CASE("client_round: suppressed clients do nothing, active ones train") {
  std::mt19937_64 gen(47);
  const auto data = toy_client(gen, 3, 1);
  const ModelParams global = testutil::random_params(gen, 0.02);
  TrainConfig cfg{.epochs = 1, .batch_size = 32, .learning_rate = 0.1, .seed = 2};
  CHECK(!client_round(global, {3, false, 1}, data, cfg, UpdateType::WG));
  const auto up = client_round(global, {3, true, 1}, data, cfg, UpdateType::WG);
  REQUIRE(up);
  const auto g = gradient(global, data.samples);
  CHECK(up->client_id == 3);
  CHECK(up->num_samples == 1);
  for (std::size_t i = 0; i < kParamCount; ++i)
    REQUIRE(up->theta.flat()[i] == global.flat()[i] - 0.1 * g.grad.flat()[i]);
  CHECK(up->update.values.size() == 7840);
  CHECK_THROWS_AS(client_round(global, {3, true, 1}, ClientDataset{}, cfg, UpdateType::WG),
                  EmptyDataError);
}

TEST_CASE("client session state machine") {
  std::mt19937_64 gen(48);
  const auto train = toy_client(gen, 4, 6);
  const auto test = toy_client(gen, 4, 4);
  ClientSession s(train, test);
  const auto hello = std::get<RegisterMsg>(s.hello());
  CHECK(hello.client_id == 4);
  CHECK(hello.num_samples == 6);
  CHECK(hello.protocol_version == kProtocolVersion);

  CHECK_THROWS_AS(s.handle(GlobalModelMsg{0, std::vector<float>(kParamCount)}), ProtocolError);
  RegisterAckMsg ack;
  ack.update_type = UpdateType::WBG;
  CHECK(s.handle(ack).empty());

  const auto model = to_f32(testutil::random_params(gen, 0.02));
  auto replies = s.handle(GlobalModelMsg{0, model});
  REQUIRE(replies.size() == 1);
  const auto metrics = std::get<MetricsAckMsg>(replies[0]);
  CHECK(metrics.client_id == 4);
  CHECK(metrics.total == 4);
  CHECK(metrics.correct == kernels::serial::count_correct(from_f32(model).flat(), test.samples));

  auto d = all_active_directive(0, 10);
  replies = s.handle(to_wire(d));
  REQUIRE(replies.size() == 1);
  const auto up = std::get<LocalUpdateMsg>(replies[0]);
  CHECK(up.client_id == 4);
  CHECK(up.update_type == UpdateType::WBG);
  CHECK(up.update.size() == 7850);
  CHECK(s.trainings() == 1);

  d.entries[4].active = false;
  CHECK(s.handle(to_wire(d)).empty());
  CHECK(s.suppressed_rounds() == 1);

  DirectiveMsg foreign{1, {{0, 1, kNoCluster}}};
  CHECK_THROWS_AS(s.handle(foreign), ProtocolError);
  CHECK_THROWS_AS(s.handle(RegisterMsg{}), ProtocolError);
  s.handle(ShutdownMsg{});
  CHECK(s.finished());
}

TEST_CASE("client session: rejected registration finishes") {
  std::mt19937_64 gen(49);
  ClientSession s(toy_client(gen, 1, 2), toy_client(gen, 1, 2), 9);
  RegisterAckMsg ack;
  ack.status = RegisterStatus::VersionMismatch;
  s.handle(ack);
  CHECK(s.finished());
  CHECK(s.rejection() == RegisterStatus::VersionMismatch);
}

TEST_CASE("fed config validation") {
  CHECK_NOTHROW(FedConfig{}.validate());
  FedConfig c;
  c.tau = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.clusters = 11;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.start_round = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.start_round = 51;
  CHECK_NOTHROW(c.validate());
  c.start_round = 52;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(!FedConfig{}.controls(9));
  CHECK(FedConfig{}.controls(10));
  CHECK(FedConfig{}.controls(49));
  CHECK(!FedConfig{}.controls(50));
}

TEST_CASE("upload counts follow the replayed coin flips") {
  auto cfg = small_config();
  const auto data = load_client_data(cfg);
  const auto result = simulate(cfg, data);
  // Every client uploads in round 0, so clustering runs from round 10 on and
  // the coin stream sees exactly one draw per client per controlled round.
  Rng coins(derive_seed(cfg.fed.seed, "coin"));
  std::vector<int> expected(10, cfg.fed.start_round);
  for (int r = cfg.fed.start_round; r < cfg.fed.rounds; ++r)
    for (int c = 0; c < 10; ++c) expected[c] += coins.uniform() < cfg.fed.tau ? 1 : 0;
  CHECK(result.run.uploads_per_client == expected);
  for (int n : expected) {
    CHECK(n >= 10);
    CHECK(n <= 50);
  }
  CHECK(result.run.records.size() == 50);
  CHECK(result.run.cluster_history.size() == 40);
}

TEST_CASE("simulation is deterministic") {
  auto cfg = small_config();
  cfg.fed.rounds = 15;
  const auto data = load_client_data(cfg);
  const auto a = simulate(cfg, data);
  const auto b = simulate(cfg, data);
  CHECK(a.csv == b.csv);
  CHECK(a.run.final_model == b.run.final_model);
  cfg.fed.seed = 2;
  CHECK(simulate(cfg, data).csv != a.csv);
}

TEST_CASE("coordinator: registration outcomes over loopback") {
  auto cfg = small_config();
  cfg.fed.rounds = 2;
  cfg.fed.start_round = 3;
  const auto data = load_client_data(cfg);

  SUBCASE("version mismatch is rejected, then the barrier times out") {
    LoopbackTransport t;
    std::vector<std::unique_ptr<ClientSession>> sessions;
    for (int c = 0; c < 10; ++c) {
      sessions.push_back(std::make_unique<ClientSession>(data.train[c], data.test[c], c == 5 ? 2 : 1));
      auto* s = sessions.back().get();
      t.connect([s](const Message& m) { return s->handle(m); }, s->hello());
    }
    CoordinatorOptions opts;
    opts.register_timeout = std::chrono::milliseconds(50);
    CHECK_THROWS_AS(run_federation(t, cfg.fed, cfg.train, opts), RuntimeAbort);
    CHECK(sessions[5]->rejection() == RegisterStatus::VersionMismatch);
    CHECK(!sessions[4]->rejection());
  }
  SUBCASE("bad client id is rejected") {
    LoopbackTransport t;
    ClientDataset odd = data.train[0];
    odd.client_id = 12;
    ClientSession s(odd, data.test[0]);
    t.connect([&s](const Message& m) { return s.handle(m); }, s.hello());
    CoordinatorOptions opts;
    opts.register_timeout = std::chrono::milliseconds(20);
    CHECK_THROWS_AS(run_federation(t, cfg.fed, cfg.train, opts), RuntimeAbort);
    CHECK(s.rejection() == RegisterStatus::BadClientId);
  }
}
