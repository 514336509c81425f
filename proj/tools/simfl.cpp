// Experiment runner: simulation, TCP deployment, table reproduction and
// dataset partitioning.

#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "simfl/errors.hpp"
#include "simfl/experiment.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kProtocolError = 2, kRuntimeAbort = 3 };

std::string flag_name(const std::string& key) {
  std::string f = key;
  for (char& c : f)
    if (c == '_') c = '-';
  return "--" + f;
}

struct SubcommandOptions {
  std::string config_file;
  std::map<std::string, std::string> overrides;
};

void add_setting_flags(CLI::App* app, SubcommandOptions& opts) {
  app->add_option("--config", opts.config_file, "flat key = value settings file");
  for (const std::string& key : simfl::setting_keys())
    app->add_option_function<std::string>(
        flag_name(key), [&opts, key](const std::string& v) { opts.overrides[key] = v; },
        "setting '" + key + "'");
}

simfl::ExperimentConfig build_config(const SubcommandOptions& opts) {
  simfl::ExperimentConfig cfg;
  if (!opts.config_file.empty()) cfg = simfl::load_config(opts.config_file, cfg);
  for (const auto& [key, value] : opts.overrides) simfl::apply_setting(cfg, key, value);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning with similarity-aware update control"};
  app.require_subcommand(1);

  SubcommandOptions sim_opts, server_opts, client_opts, repro_opts, part_opts;
  auto* sim = app.add_subcommand("sim", "run all clients in-process");
  add_setting_flags(sim, sim_opts);
  auto* server = app.add_subcommand("server", "coordinate TCP clients");
  add_setting_flags(server, server_opts);
  auto* client = app.add_subcommand("client", "train as one TCP client");
  add_setting_flags(client, client_opts);
  auto* repro = app.add_subcommand("reproduce", "clustering grid and suppression table");
  add_setting_flags(repro, repro_opts);
  std::string repro_dir;
  repro->add_option("--out-dir", repro_dir, "directory for per-run CSVs");
  auto* part = app.add_subcommand("partition", "write per-client IDX caches");
  add_setting_flags(part, part_opts);
  std::string part_dir = "partitions";
  part->add_option("--out-dir", part_dir, "cache directory");
  bool print_config = false;
  sim->add_flag("--print-config", print_config, "print the resolved settings and exit");

  app.require_subcommand(1);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (sim->parsed()) {
      const auto cfg = build_config(sim_opts);
      if (print_config) {
        std::cout << simfl::write_config(cfg);
        return kOk;
      }
      simfl::run_sim(cfg, std::cout);
    } else if (server->parsed()) {
      simfl::run_server(build_config(server_opts), std::cout);
    } else if (client->parsed()) {
      simfl::run_client(build_config(client_opts), std::cout);
    } else if (repro->parsed()) {
      if (!repro_opts.overrides.contains("seed"))
        throw simfl::ConfigError("seed: reproduce requires --seed");
      simfl::run_reproduce(build_config(repro_opts), repro_dir, std::cout);
    } else if (part->parsed()) {
      simfl::run_partition(build_config(part_opts), part_dir, std::cout);
    }
  } catch (const simfl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const simfl::FormatError& e) {
    std::cerr << "dataset error: " << e.what() << "\n";
    return kConfigError;
  } catch (const simfl::PartitionError& e) {
    std::cerr << "dataset error: " << e.what() << "\n";
    return kConfigError;
  } catch (const simfl::ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return kProtocolError;
  } catch (const std::exception& e) {
    std::cerr << "aborted: " << e.what() << "\n";
    return kRuntimeAbort;
  }
  return kOk;
}
