#include "simfl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "simfl/errors.hpp"

namespace simfl {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t at) {
  return (std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
         (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path,
                const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

// Index of the lower client of the pair holding `digit`, or -1.
int pair_for_digit(PartitionScheme scheme, int digit) {
  if (scheme == PartitionScheme::Set1) return (digit / 2) * 2;
  return digit % 2 == 0 ? digit : -1;
}

}  // namespace

PartitionScheme parse_scheme(std::string_view s) {
  if (s == "set1") return PartitionScheme::Set1;
  if (s == "set2") return PartitionScheme::Set2;
  throw ConfigError("scheme must be set1 or set2 (got '" + std::string(s) + "')");
}

std::string_view to_string(PartitionScheme s) {
  return s == PartitionScheme::Set1 ? "set1" : "set2";
}

std::set<int> allowed_digits(PartitionScheme scheme, int client_id) {
  if (client_id < 0 || client_id >= kNumClients)
    throw ArgError("client id out of range: " + std::to_string(client_id));
  const int base = (client_id / 2) * 2;
  if (scheme == PartitionScheme::Set1) return {base, base + 1};
  return {base};
}

std::vector<std::set<int>> ground_truth_groups(int num_clients) {
  std::vector<std::set<int>> groups;
  for (int c = 0; c + 1 < num_clients; c += 2) groups.push_back({c, c + 1});
  return groups;
}

std::vector<Pixels> parse_idx_images(std::span<const std::uint8_t> bytes,
                                     std::size_t limit) {
  if (bytes.size() < 16) throw FormatError("IDX3 header truncated");
  if (read_be32(bytes, 0) != kImagesMagic)
    throw FormatError("IDX3 magic mismatch");
  const std::size_t count = read_be32(bytes, 4);
  const std::uint32_t rows = read_be32(bytes, 8);
  const std::uint32_t cols = read_be32(bytes, 12);
  if (rows != kImageSide || cols != kImageSide)
    throw FormatError("IDX3 images must be 28x28, got " + std::to_string(rows) +
                      "x" + std::to_string(cols));
  if (bytes.size() - 16 < count * kPixels)
    throw FormatError("IDX3 payload truncated");
  const std::size_t n = std::min(count, limit);
  std::vector<Pixels> images(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* src = bytes.data() + 16 + i * kPixels;
    for (std::size_t p = 0; p < kPixels; ++p)
      images[i][p] = static_cast<float>(src[p]) / 255.0f;
  }
  return images;
}

std::vector<int> parse_idx_labels(std::span<const std::uint8_t> bytes,
                                  std::size_t limit) {
  if (bytes.size() < 8) throw FormatError("IDX1 header truncated");
  if (read_be32(bytes, 0) != kLabelsMagic)
    throw FormatError("IDX1 magic mismatch");
  const std::size_t count = read_be32(bytes, 4);
  if (bytes.size() - 8 < count) throw FormatError("IDX1 payload truncated");
  const std::size_t n = std::min(count, limit);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t v = bytes[8 + i];
    if (v > 9) throw FormatError("IDX1 label out of range: " + std::to_string(v));
    labels[i] = v;
  }
  return labels;
}

std::vector<Pixels> load_idx_images(const std::filesystem::path& path,
                                    std::size_t limit) {
  return parse_idx_images(read_file(path), limit);
}

std::vector<int> load_idx_labels(const std::filesystem::path& path,
                                 std::size_t limit) {
  return parse_idx_labels(read_file(path), limit);
}

std::vector<std::uint8_t> encode_idx_images(std::span<const Pixels> images) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + images.size() * kPixels);
  write_be32(out, kImagesMagic);
  write_be32(out, static_cast<std::uint32_t>(images.size()));
  write_be32(out, kImageSide);
  write_be32(out, kImageSide);
  for (const auto& img : images)
    for (float v : img)
      out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const int> labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.size());
  write_be32(out, kLabelsMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) out.push_back(static_cast<std::uint8_t>(l));
  return out;
}

std::vector<Sample> zip_samples(std::vector<Pixels> images,
                                const std::vector<int>& labels) {
  if (images.size() != labels.size())
    throw FormatError("image count " + std::to_string(images.size()) +
                      " does not match label count " +
                      std::to_string(labels.size()));
  std::vector<Sample> samples(images.size());
  for (std::size_t i = 0; i < images.size(); ++i)
    samples[i] = Sample{images[i], labels[i]};
  return samples;
}

MnistSplits load_mnist(const std::filesystem::path& dir, std::size_t max_train,
                       std::size_t max_test) {
  MnistSplits splits;
  splits.train = zip_samples(load_idx_images(dir / "train-images-idx3-ubyte", max_train),
                             load_idx_labels(dir / "train-labels-idx1-ubyte", max_train));
  splits.test = zip_samples(load_idx_images(dir / "t10k-images-idx3-ubyte", max_test),
                            load_idx_labels(dir / "t10k-labels-idx1-ubyte", max_test));
  return splits;
}

std::vector<ClientDataset> partition(std::span<const Sample> samples,
                                     PartitionScheme scheme) {
  std::vector<ClientDataset> clients(kNumClients);
  for (int c = 0; c < kNumClients; ++c) {
    clients[c].client_id = c;
    clients[c].allowed_digits = allowed_digits(scheme, c);
  }
  std::array<bool, kClasses> seen{};
  std::array<std::size_t, kNumClients> position{};  // per lower client of a pair
  for (const Sample& s : samples) {
    seen[s.label] = true;
    const int lower = pair_for_digit(scheme, s.label);
    if (lower < 0) continue;
    const int target = lower + static_cast<int>(position[lower]++ % 2);
    clients[target].samples.push_back(s);
  }
  for (int c = 0; c < kNumClients; c += 2) {
    for (int d : clients[c].allowed_digits)
      if (!seen[d])
        throw PartitionError("digit " + std::to_string(d) +
                             " absent from the input samples");
  }
  for (const auto& c : clients)
    if (c.samples.empty())
      throw PartitionError("client " + std::to_string(c.client_id) +
                           " would receive no samples");
  return clients;
}

std::vector<ClientDataset> partition_test(std::span<const Sample> samples,
                                          PartitionScheme scheme) {
  std::vector<ClientDataset> clients(kNumClients);
  for (int c = 0; c < kNumClients; ++c) {
    clients[c].client_id = c;
    clients[c].allowed_digits = allowed_digits(scheme, c);
    for (const Sample& s : samples)
      if (clients[c].allowed_digits.contains(s.label))
        clients[c].samples.push_back(s);
    if (clients[c].samples.empty())
      throw PartitionError("no test samples for client " + std::to_string(c));
  }
  return clients;
}

void save_client_cache(const std::filesystem::path& dir,
                       const ClientDataset& data) {
  std::filesystem::create_directories(dir);
  std::vector<Pixels> images;
  std::vector<int> labels;
  images.reserve(data.samples.size());
  for (const auto& s : data.samples) {
    images.push_back(s.pixels);
    labels.push_back(s.label);
  }
  const std::string stem = "client_" + std::to_string(data.client_id);
  write_file(dir / (stem + "_images.idx"), encode_idx_images(images));
  write_file(dir / (stem + "_labels.idx"), encode_idx_labels(labels));
}

ClientDataset load_client_cache(const std::filesystem::path& dir, int client_id,
                                PartitionScheme scheme) {
  const std::string stem = "client_" + std::to_string(client_id);
  ClientDataset data;
  data.client_id = client_id;
  data.allowed_digits = allowed_digits(scheme, client_id);
  data.samples = zip_samples(load_idx_images(dir / (stem + "_images.idx")),
                             load_idx_labels(dir / (stem + "_labels.idx")));
  for (const auto& s : data.samples)
    if (!data.allowed_digits.contains(s.label))
      throw FormatError("cached sample with digit " + std::to_string(s.label) +
                        " does not belong to client " + std::to_string(client_id));
  return data;
}

}  // namespace simfl
