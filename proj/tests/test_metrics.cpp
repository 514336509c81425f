#include <fstream>
#include <sstream>

#include "doctest.h"
#include "simfl/errors.hpp"
#include "simfl/metrics.hpp"
#include "helpers.hpp"

using namespace simfl;

namespace {

MetricsRecord record(int round, double acc) {
  MetricsRecord r;
  r.round = round;
  r.client_accuracy.assign(10, acc);
  r.mean_accuracy = acc;
  r.active_count = 10 - round;
  r.uploaded_params = 7840LL * r.active_count;
  r.suppressed_params = 7840LL * round;
  r.clusters_correct = round % 6;
  r.groups_total = 5;
  return r;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  return out;
}

}  // namespace

TEST_CASE("evaluate_client counts correct predictions") {
  ModelParams p;
  p.bias(4) = 1.0;
  ClientDataset test;
  for (int label : {4, 4, 5, 4}) test.samples.push_back(Sample{{}, label});
  CHECK(evaluate_client(p, test) == 0.75);
  CHECK_THROWS_AS(evaluate_client(p, ClientDataset{}), EmptyDataError);
}

TEST_CASE("expected savings match the message-reduction table") {
  const std::pair<int, double> rows[] = {{10, 156800}, {20, 117600}, {30, 78400}, {40, 39200}};
  for (auto [r, per_client] : rows) {
    const auto s = expected_savings(7840, 50, r, 0.5, 10);
    CHECK(s.per_client == per_client);
    CHECK(s.server == per_client * 10);
  }
  CHECK(expected_savings(7840, 50, 50, 0.5, 10).per_client == 0.0);
  CHECK(expected_savings(7850, 50, 10, 1.0, 10).per_client == 0.0);
  CHECK(expected_savings(100, 10, 0, 0.25, 2).per_client == 750.0);
  CHECK_THROWS_AS(expected_savings(7840, 50, 51, 0.5, 10), ArgError);
  CHECK_THROWS_AS(expected_savings(7840, 50, -1, 0.5, 10), ArgError);
  CHECK_THROWS_AS(expected_savings(7840, 50, 10, 0.0, 10), ArgError);
  CHECK_THROWS_AS(expected_savings(7840, 50, 10, 1.5, 10), ArgError);
}

TEST_CASE("csv has a 17-column header and CRLF rows") {
  const auto header = csv_header(10);
  REQUIRE(header.size() == 17);
  CHECK(header.front() == "round");
  CHECK(header[1] == "acc_c0");
  CHECK(header[10] == "acc_c9");
  CHECK(header.back() == "groups_total");

  const std::vector<MetricsRecord> records{record(0, 0.5), record(1, 0.123456789)};
  const std::string csv = format_csv(records);
  std::vector<std::string> lines;
  for (std::size_t pos = 0; pos < csv.size();) {
    const auto end = csv.find("\r\n", pos);
    REQUIRE(end != std::string::npos);
    lines.push_back(csv.substr(pos, end - pos));
    pos = end + 2;
  }
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] ==
        "round,acc_c0,acc_c1,acc_c2,acc_c3,acc_c4,acc_c5,acc_c6,acc_c7,acc_c8,acc_c9,acc_mean,"
        "active_count,uploaded_params,suppressed_params,clusters_correct,groups_total");
  for (const auto& l : lines) CHECK(split(l).size() == 17);
  const auto second = split(lines[2]);
  CHECK(second[0] == "1");
  CHECK(second[1] == "0.123457");
  CHECK(second[12] == "9");
  CHECK(second[13] == "70560");
  CHECK(second[14] == "7840");
  CHECK(csv.find('\n') == csv.find("\r\n") + 1);

  MetricsRecord bad = record(0, 1.0);
  bad.client_accuracy.pop_back();
  CHECK_THROWS_AS(format_csv(std::vector{bad}), ArgError);
}

TEST_CASE("emit_csv writes the formatted bytes") {
  const auto dir = testutil::temp_dir("csv");
  const std::vector<MetricsRecord> records{record(0, 0.25)};
  emit_csv(records, dir / "m.csv");
  std::ifstream in(dir / "m.csv", std::ios::binary);
  const std::string text((std::istreambuf_iterator<char>(in)), {});
  CHECK(text == format_csv(records));
  CHECK_THROWS(emit_csv(records, dir / "missing" / "m.csv"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("summarize accumulates the records") {
  const std::vector<MetricsRecord> records{record(0, 0.1), record(1, 0.2), record(2, 0.3)};
  const auto s = summarize(records);
  CHECK(s.rounds == 3);
  CHECK(s.final_mean_accuracy == 0.3);
  CHECK(s.total_suppressed == 7840 * 3);
  CHECK(s.total_uploaded == 7840 * 27);
  CHECK(s.clustering_accuracy == doctest::Approx(3.0 / 15.0));
  MetricsRecord plain = record(0, 0.0);
  plain.groups_total = 0;
  plain.clusters_correct = 0;
  CHECK(summarize(std::vector{plain}).clustering_accuracy == 0.0);
}
