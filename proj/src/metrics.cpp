#include "simfl/metrics.hpp"

#include <cstdio>
#include <fstream>

#include "simfl/errors.hpp"
#include "simfl/kernels.hpp"

namespace simfl {

namespace {

std::string real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// RFC 4180: quote fields holding separators, quotes or line breaks.
std::string field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

double evaluate_client(const ModelParams& params, const ClientDataset& test) {
  if (test.samples.empty())
    throw EmptyDataError("client " + std::to_string(test.client_id) + " has no test data");
  const std::size_t correct = kernels::parallel::count_correct(params.flat(), test.samples);
  return static_cast<double>(correct) / static_cast<double>(test.samples.size());
}

Savings expected_savings(std::int64_t params_per_update, int rounds, int start_round,
                         double tau, int num_clients) {
  if (start_round < 0 || start_round > rounds)
    throw ArgError("start round must lie in [0, R]");
  if (!(tau > 0.0 && tau <= 1.0)) throw ArgError("tau must lie in (0, 1]");
  if (params_per_update < 0 || num_clients < 0) throw ArgError("negative count");
  Savings s;
  s.per_client = static_cast<double>(params_per_update) * (rounds - start_round) * (1.0 - tau);
  s.server = s.per_client * num_clients;
  return s;
}

std::vector<std::string> csv_header(std::size_t num_clients) {
  std::vector<std::string> h{"round"};
  for (std::size_t c = 0; c < num_clients; ++c) h.push_back("acc_c" + std::to_string(c));
  for (const char* name : {"acc_mean", "active_count", "uploaded_params", "suppressed_params",
                           "clusters_correct", "groups_total"})
    h.emplace_back(name);
  return h;
}

std::string format_csv(std::span<const MetricsRecord> records, std::size_t num_clients) {
  std::string out;
  auto row = [&out](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += field(fields[i]);
    }
    out += "\r\n";
  };
  row(csv_header(num_clients));
  for (const auto& r : records) {
    if (r.client_accuracy.size() != num_clients)
      throw ArgError("record has " + std::to_string(r.client_accuracy.size()) +
                     " client accuracies, expected " + std::to_string(num_clients));
    std::vector<std::string> f{std::to_string(r.round)};
    for (double a : r.client_accuracy) f.push_back(real(a));
    f.push_back(real(r.mean_accuracy));
    f.push_back(std::to_string(r.active_count));
    f.push_back(std::to_string(r.uploaded_params));
    f.push_back(std::to_string(r.suppressed_params));
    f.push_back(std::to_string(r.clusters_correct));
    f.push_back(std::to_string(r.groups_total));
    row(f);
  }
  return out;
}

void emit_csv(std::span<const MetricsRecord> records, const std::filesystem::path& path,
              std::size_t num_clients) {
  const std::string text = format_csv(records, num_clients);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

RunSummary summarize(std::span<const MetricsRecord> records) {
  RunSummary s;
  std::int64_t correct = 0;
  std::int64_t groups = 0;
  for (const auto& r : records) {
    s.total_uploaded += r.uploaded_params;
    s.total_suppressed += r.suppressed_params;
    correct += r.clusters_correct;
    groups += r.groups_total;
  }
  if (!records.empty()) s.final_mean_accuracy = records.back().mean_accuracy;
  s.clustering_accuracy = groups ? static_cast<double>(correct) / static_cast<double>(groups) : 0.0;
  s.rounds = static_cast<int>(records.size());
  return s;
}

}  // namespace simfl
