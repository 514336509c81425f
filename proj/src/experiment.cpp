#include "simfl/experiment.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "simfl/errors.hpp"
#include "simfl/tcp.hpp"

namespace simfl {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  const std::string v = trim(value);
  T out{};
  if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      out = static_cast<T>(std::stod(v, &used));
      if (used != v.size()) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      throw ConfigError(std::string(key) + ": expected a number, got '" + v + "'");
    }
  } else {
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
      throw ConfigError(std::string(key) + ": expected an integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  const std::string v = trim(value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(std::string(key) + ": expected true or false, got '" + v + "'");
}

std::string real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Setting {
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<std::pair<std::string, Setting>>& settings() {
  using C = ExperimentConfig;
  static const std::vector<std::pair<std::string, Setting>> table = {
      {"clients", {[](C& c, std::string_view v) { c.fed.num_clients = parse_number<int>("clients", v); },
                   [](const C& c) { return std::to_string(c.fed.num_clients); }}},
      {"rounds", {[](C& c, std::string_view v) { c.fed.rounds = parse_number<int>("rounds", v); },
                  [](const C& c) { return std::to_string(c.fed.rounds); }}},
      {"tau", {[](C& c, std::string_view v) { c.fed.tau = parse_number<double>("tau", v); },
               [](const C& c) { return real(c.fed.tau); }}},
      {"clusters", {[](C& c, std::string_view v) { c.fed.clusters = parse_number<int>("clusters", v); },
                    [](const C& c) { return std::to_string(c.fed.clusters); }}},
      {"start_round",
       {[](C& c, std::string_view v) { c.fed.start_round = parse_number<int>("start_round", v); },
        [](const C& c) { return std::to_string(c.fed.start_round); }}},
      {"update_type",
       {[](C& c, std::string_view v) { c.fed.update_type = parse_update_type(trim(v)); },
        [](const C& c) { return to_string(c.fed.update_type); }}},
      {"algorithm", {[](C& c, std::string_view v) { c.fed.algorithm = parse_algorithm(trim(v)); },
                     [](const C& c) { return to_string(c.fed.algorithm); }}},
      {"min_one_rep",
       {[](C& c, std::string_view v) { c.fed.min_one_rep = parse_bool("min_one_rep", v); },
        [](const C& c) { return std::string(c.fed.min_one_rep ? "true" : "false"); }}},
      {"seed", {[](C& c, std::string_view v) { c.fed.seed = parse_number<std::uint64_t>("seed", v); },
                [](const C& c) { return std::to_string(c.fed.seed); }}},
      {"epochs", {[](C& c, std::string_view v) { c.train.epochs = parse_number<int>("epochs", v); },
                  [](const C& c) { return std::to_string(c.train.epochs); }}},
      {"batch_size",
       {[](C& c, std::string_view v) { c.train.batch_size = parse_number<std::size_t>("batch_size", v); },
        [](const C& c) { return std::to_string(c.train.batch_size); }}},
      {"learning_rate",
       {[](C& c, std::string_view v) { c.train.learning_rate = parse_number<double>("learning_rate", v); },
        [](const C& c) { return real(c.train.learning_rate); }}},
      {"data_dir", {[](C& c, std::string_view v) { c.data_dir = trim(v); },
                    [](const C& c) { return c.data_dir.string(); }}},
      {"scheme", {[](C& c, std::string_view v) { c.scheme = parse_scheme(trim(v)); },
                  [](const C& c) { return std::string(to_string(c.scheme)); }}},
      {"output", {[](C& c, std::string_view v) { c.output = trim(v); },
                  [](const C& c) { return c.output.string(); }}},
      {"server", {[](C& c, std::string_view v) { c.server = trim(v); },
                  [](const C& c) { return c.server; }}},
      {"port", {[](C& c, std::string_view v) { c.port = parse_number<std::uint16_t>("port", v); },
                [](const C& c) { return std::to_string(c.port); }}},
      {"client_id", {[](C& c, std::string_view v) { c.client_id = parse_number<int>("client_id", v); },
                     [](const C& c) { return std::to_string(c.client_id); }}},
      {"max_train",
       {[](C& c, std::string_view v) { c.max_train = parse_number<std::size_t>("max_train", v); },
        [](const C& c) { return std::to_string(c.max_train); }}},
      {"max_test", {[](C& c, std::string_view v) { c.max_test = parse_number<std::size_t>("max_test", v); },
                    [](const C& c) { return std::to_string(c.max_test); }}},
      {"upload_timeout",
       {[](C& c, std::string_view v) { c.upload_timeout_s = parse_number<double>("upload_timeout", v); },
        [](const C& c) { return real(c.upload_timeout_s); }}},
      {"register_timeout",
       {[](C& c, std::string_view v) {
          c.register_timeout_s = parse_number<double>("register_timeout", v);
        },
        [](const C& c) { return real(c.register_timeout_s); }}},
      {"bytes_per_param",
       {[](C& c, std::string_view v) { c.bytes_per_param = parse_number<int>("bytes_per_param", v); },
        [](const C& c) { return std::to_string(c.bytes_per_param); }}},
      {"protocol_version",
       {[](C& c, std::string_view v) {
          c.protocol_version = parse_number<int>("protocol_version", v);
        },
        [](const C& c) { return std::to_string(c.protocol_version); }}},
  };
  return table;
}

const Setting& find_setting(std::string_view key) {
  for (const auto& [k, s] : settings())
    if (k == key) return s;
  throw ConfigError("unknown setting '" + std::string(key) + "'");
}

std::chrono::milliseconds to_ms(double seconds) {
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(seconds * 1000.0)));
}

CoordinatorOptions coordinator_options(const ExperimentConfig& cfg, std::ostream* log) {
  CoordinatorOptions opts;
  opts.upload_timeout = to_ms(cfg.upload_timeout_s);
  opts.register_timeout = to_ms(cfg.register_timeout_s);
  opts.log = log;
  return opts;
}

std::string fixed(double v, int prec) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

}  // namespace

void ExperimentConfig::validate() const {
  fed.validate();
  train.validate();
  if (fed.num_clients != kNumClients)
    throw ConfigError("clients: the digit partitions define exactly 10 clients");
  if (client_id < 0 || client_id >= fed.num_clients)
    throw ConfigError("client_id: must lie in [0, clients)");
  if (bytes_per_param < 1) throw ConfigError("bytes_per_param: must be >= 1");
  if (!(upload_timeout_s > 0.0)) throw ConfigError("upload_timeout: must be positive");
  if (!(register_timeout_s > 0.0)) throw ConfigError("register_timeout: must be positive");
  if (protocol_version < 0 || protocol_version > 255)
    throw ConfigError("protocol_version: must fit in a byte");
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  for (const auto& [key, s] : settings())
    if (s.get(*this) != s.get(o)) return false;
  return true;
}

const std::vector<std::string>& setting_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [key, s] : settings()) k.push_back(key);
    return k;
  }();
  return keys;
}

void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  find_setting(key).set(cfg, value);
}

std::string get_setting(const ExperimentConfig& cfg, std::string_view key) {
  return find_setting(key).get(cfg);
}

ExperimentConfig parse_config(std::string_view text, ExperimentConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    apply_setting(base, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string write_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [key, s] : settings()) out += key + " = " + s.get(cfg) + "\n";
  return out;
}

ClientData load_client_data(const ExperimentConfig& cfg) {
  const auto limit = [](std::size_t v) { return v == 0 ? SIZE_MAX : v; };
  const MnistSplits splits = load_mnist(cfg.data_dir, limit(cfg.max_train), limit(cfg.max_test));
  return ClientData{partition(splits.train, cfg.scheme), partition_test(splits.test, cfg.scheme)};
}

SimResult simulate(const ExperimentConfig& cfg, const ClientData& data) {
  cfg.validate();
  std::vector<ClientSession> sessions;
  sessions.reserve(data.train.size());
  for (std::size_t c = 0; c < data.train.size(); ++c)
    sessions.emplace_back(data.train[c], data.test[c],
                          static_cast<std::uint8_t>(cfg.protocol_version));
  LoopbackTransport loopback;
  for (auto& s : sessions)
    loopback.connect([&s](const Message& m) { return s.handle(m); }, s.hello());

  SimResult result;
  result.run = run_federation(loopback, cfg.fed, cfg.train, coordinator_options(cfg, nullptr));
  result.summary = summarize(result.run.records);
  result.csv = format_csv(result.run.records, static_cast<std::size_t>(cfg.fed.num_clients));
  return result;
}

void print_summary(const ExperimentConfig& cfg, const RunSummary& s, std::ostream& out) {
  const double mb = 1024.0 * 1024.0;
  out << "rounds:                " << s.rounds << "\n"
      << "final mean accuracy:   " << fixed(s.final_mean_accuracy, 4) << "\n"
      << "clustering accuracy:   " << fixed(s.clustering_accuracy, 4) << "\n"
      << "uploaded parameters:   " << s.total_uploaded << " ("
      << fixed(static_cast<double>(s.total_uploaded) * cfg.bytes_per_param / mb, 2) << " MB)\n"
      << "suppressed parameters: " << s.total_suppressed << " ("
      << fixed(static_cast<double>(s.total_suppressed) * cfg.bytes_per_param / mb, 2) << " MB)\n";
}

SimResult run_sim(const ExperimentConfig& cfg, std::ostream& out) {
  cfg.validate();
  const ClientData data = load_client_data(cfg);
  SimResult r = simulate(cfg, data);
  if (!cfg.output.empty()) emit_csv(r.run.records, cfg.output, cfg.fed.num_clients);
  print_summary(cfg, r.summary, out);
  return r;
}

RunSummary run_server(const ExperimentConfig& cfg, std::ostream& out) {
  cfg.validate();
  TcpServerTransport transport(cfg.port);
  out << "listening on port " << transport.port() << std::endl;
  const FederationRun run =
      run_federation(transport, cfg.fed, cfg.train, coordinator_options(cfg, &out));
  if (!cfg.output.empty()) emit_csv(run.records, cfg.output, cfg.fed.num_clients);
  const RunSummary s = summarize(run.records);
  print_summary(cfg, s, out);
  return s;
}

void run_client(const ExperimentConfig& cfg, std::ostream& out) {
  cfg.validate();
  ClientData data = load_client_data(cfg);
  ClientSession session(std::move(data.train.at(cfg.client_id)),
                        std::move(data.test.at(cfg.client_id)),
                        static_cast<std::uint8_t>(cfg.protocol_version));
  const auto [host, port] = parse_address(cfg.server);
  TcpClientConnection conn(host, port, to_ms(cfg.register_timeout_s));
  conn.send(session.hello());
  while (!session.finished()) {
    for (const Message& reply : session.handle(conn.receive())) conn.send(reply);
  }
  if (session.rejection())
    throw ProtocolError("server rejected registration (status " +
                        std::to_string(static_cast<int>(*session.rejection())) + ")");
  out << "client " << cfg.client_id << ": trained " << session.trainings() << " rounds, suppressed "
      << session.suppressed_rounds() << std::endl;
}

void run_reproduce(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                   std::ostream& out) {
  cfg.validate();
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  const Algorithm algos[] = {Algorithm::KMeans, Algorithm::Agglomerative, Algorithm::Spectral};
  const UpdateType types[] = {UpdateType::WW, UpdateType::WBW, UpdateType::WG, UpdateType::WBG};

  auto save = [&](const SimResult& r, const std::string& name) {
    if (out_dir.empty()) return;
    std::ofstream f(out_dir / name, std::ios::binary);
    f << r.csv;
  };

  for (PartitionScheme scheme : {PartitionScheme::Set1, PartitionScheme::Set2}) {
    ExperimentConfig c = cfg;
    c.scheme = scheme;
    const ClientData data = load_client_data(c);
    out << "Clustering accuracy, training " << to_string(scheme) << " (start round "
        << c.fed.start_round << ", tau " << c.fed.tau << ")\n";
    out << std::left << std::setw(8) << "type" << std::setw(10) << "kmeans" << std::setw(15)
        << "agglomerative" << "spectral\n";
    for (UpdateType t : types) {
      out << std::setw(8) << to_string(t);
      for (Algorithm a : algos) {
        c.fed.update_type = t;
        c.fed.algorithm = a;
        const SimResult r = simulate(c, data);
        save(r, std::string(to_string(scheme)) + "_" + to_string(a) + "_" + to_string(t) + ".csv");
        out << std::setw(a == Algorithm::KMeans ? 10 : 15)
            << (fixed(100.0 * r.summary.clustering_accuracy, 1) + "%");
      }
      out << "\n";
    }
    out << "\n";
  }

  ExperimentConfig c = cfg;
  c.fed.update_type = UpdateType::WG;  // 7840-parameter uploads
  const ClientData data = load_client_data(c);
  ExperimentConfig base = c;
  base.fed.start_round = base.fed.rounds + 1;
  const SimResult baseline = simulate(base, data);
  save(baseline, "baseline.csv");
  out << "Suppressed parameters per client (" << to_string(c.scheme) << ", "
      << to_string(c.fed.algorithm) << ", WG, tau " << c.fed.tau << ")\n";
  out << std::left << std::setw(8) << "start" << std::setw(14) << "expected" << std::setw(14)
      << "measured" << std::setw(16) << "final accuracy" << "baseline accuracy\n";
  for (int start : {10, 20, 30, 40}) {
    if (start > c.fed.rounds) continue;
    c.fed.start_round = start;
    const SimResult r = simulate(c, data);
    save(r, "start_" + std::to_string(start) + ".csv");
    const Savings e = expected_savings(static_cast<std::int64_t>(kWeightCount), c.fed.rounds, start,
                                       c.fed.tau, c.fed.num_clients);
    out << std::setw(8) << start << std::setw(14) << fixed(e.per_client, 0) << std::setw(14)
        << fixed(static_cast<double>(r.summary.total_suppressed) / c.fed.num_clients, 0)
        << std::setw(16) << fixed(r.summary.final_mean_accuracy, 4)
        << fixed(baseline.summary.final_mean_accuracy, 4) << "\n";
  }
}

void run_partition(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                   std::ostream& out) {
  const ClientData data = load_client_data(cfg);
  for (const auto& d : data.train) save_client_cache(out_dir, d);
  for (const auto& d : data.test) save_client_cache(out_dir / "test", d);
  for (const auto& d : data.train)
    out << "client " << d.client_id << ": " << d.samples.size() << " training samples\n";
}

}  // namespace simfl
