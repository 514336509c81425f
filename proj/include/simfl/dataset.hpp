#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "simfl/layout.hpp"

namespace simfl {

using Pixels = std::array<float, kPixels>;

struct Sample {
  Pixels pixels{};  // raw byte / 255, row-major
  int label = 0;

  bool operator==(const Sample&) const = default;
};

struct ClientDataset {
  int client_id = 0;
  std::vector<Sample> samples;
  std::set<int> allowed_digits;

  bool operator==(const ClientDataset&) const = default;
};

// Device training configuration: which digits each client pair holds.
enum class PartitionScheme { Set1, Set2 };

PartitionScheme parse_scheme(std::string_view s);  // "set1" | "set2"
std::string_view to_string(PartitionScheme s);

inline constexpr int kNumClients = 10;

// Digits held by a client under the scheme; clients 2k and 2k+1 share them.
std::set<int> allowed_digits(PartitionScheme scheme, int client_id);

// Ground-truth similarity groups {v0,v1}, {v2,v3}, ... as sets of client ids.
std::vector<std::set<int>> ground_truth_groups(int num_clients = kNumClients);

// IDX readers. Throw FormatError on wrong magic, bad dimensions, truncation,
// or (labels) any value above 9. `limit` caps how many items are read.
std::vector<Pixels> load_idx_images(const std::filesystem::path& path,
                                    std::size_t limit = SIZE_MAX);
std::vector<int> load_idx_labels(const std::filesystem::path& path,
                                 std::size_t limit = SIZE_MAX);
std::vector<Pixels> parse_idx_images(std::span<const std::uint8_t> bytes,
                                     std::size_t limit = SIZE_MAX);
std::vector<int> parse_idx_labels(std::span<const std::uint8_t> bytes,
                                  std::size_t limit = SIZE_MAX);

std::vector<std::uint8_t> encode_idx_images(std::span<const Pixels> images);
std::vector<std::uint8_t> encode_idx_labels(std::span<const int> labels);

std::vector<Sample> zip_samples(std::vector<Pixels> images,
                                const std::vector<int>& labels);

struct MnistSplits {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

// Reads train-{images-idx3,labels-idx1}-ubyte and t10k-... from `dir`.
MnistSplits load_mnist(const std::filesystem::path& dir,
                       std::size_t max_train = SIZE_MAX,
                       std::size_t max_test = SIZE_MAX);

// Splits training samples across the 10 clients. Within a digit group the
// group's samples alternate between the two clients in input order, the
// even positions going to the lower-numbered client. Throws PartitionError
// if a required digit is missing or a client would end up empty.
std::vector<ClientDataset> partition(std::span<const Sample> samples,
                                     PartitionScheme scheme);

// Test data: every client gets all samples of its own digits, unsplit.
std::vector<ClientDataset> partition_test(std::span<const Sample> samples,
                                          PartitionScheme scheme);

// Per-client cache: client_<id>_images.idx / client_<id>_labels.idx.
void save_client_cache(const std::filesystem::path& dir,
                       const ClientDataset& data);
ClientDataset load_client_cache(const std::filesystem::path& dir,
                                int client_id, PartitionScheme scheme);

}  // namespace simfl
