#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "simfl/layout.hpp"
#include "simfl/linalg.hpp"
#include "simfl/model.hpp"

namespace simfl {

struct UpdateVector {
  int client_id = 0;
  std::vector<double> values;  // 7840 (WW, WG) or 7850 (WBW, WBG)
  UpdateType update_type = UpdateType::WW;

  bool operator==(const UpdateVector&) const = default;
};

struct ClusterAssignment {
  std::map<int, int> labels;  // client id -> cluster index in [0, m)
  int m = 0;

  bool operator==(const ClusterAssignment&) const = default;
};

// Members of each cluster, as sets, in cluster-index order.
std::vector<std::set<int>> clusters_of(const ClusterAssignment& a);

enum class Algorithm { KMeans, Agglomerative, Spectral };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view s);  // throws ConfigError

UpdateVector flatten_update(int client_id, const ModelParams& params,
                            const GradientUpdate& grad, UpdateType t);

// Stacks the vectors as rows. Throws ArgError on mixed lengths.
Matrix stack_points(std::span<const UpdateVector> points);

struct KMeansResult {
  std::vector<int> labels;     // per row, relabeled 0..m'-1 by first appearance
  Matrix centroids;            // rows in relabeled order
  std::vector<double> wcss;    // after each centroid update
  int iterations = 0;
};

// Lloyd iterations from k-means++ seeding (one seeded stream), at most 300,
// until assignments stop changing. An empty cluster takes the point farthest
// from its own centroid. Throws ArgError when m is out of [1, rows].
KMeansResult kmeans_rows(const Matrix& points, int m, std::uint64_t seed);

inline constexpr int kKMeansRestarts = 10;

// Lowest final WCSS over `restarts` runs of kmeans_rows; run 0 uses `seed`,
// run i > 0 uses derive_seed(seed, "restart", i). Earliest run wins ties.
KMeansResult kmeans_best(const Matrix& points, int m, std::uint64_t seed,
                         int restarts = kKMeansRestarts);

// Single-linkage merging of the closest pair (lowest index pair on ties)
// until m clusters remain.
std::vector<int> agglomerative_rows(const Matrix& points, int m);

struct SpectralOptions {
  std::optional<double> sigma;  // median pairwise distance when unset
  std::uint64_t seed = 0;
  int restarts = kKMeansRestarts;
};

struct SpectralEmbedding {
  Matrix affinity;
  Matrix laplacian;  // I - D^-1/2 W D^-1/2
  EigenDecomposition eigen;
  Matrix embedding;  // n x m, rows unit length or zero
  double sigma = 0.0;
};

SpectralEmbedding spectral_embedding(const Matrix& points, int m,
                                     std::optional<double> sigma);
std::vector<int> spectral_rows(const Matrix& points, int m,
                               const SpectralOptions& opts);

ClusterAssignment kmeans(std::span<const UpdateVector> points, int m,
                         std::uint64_t seed, int restarts = kKMeansRestarts);
ClusterAssignment agglomerative(std::span<const UpdateVector> points, int m);
ClusterAssignment spectral(std::span<const UpdateVector> points, int m,
                           std::optional<double> sigma, std::uint64_t seed);

ClusterAssignment run_clustering(Algorithm algo, std::span<const UpdateVector> points,
                                 int m, std::uint64_t seed);

// Sum of squared distances from each row to its labelled centroid.
double wcss(const Matrix& points, std::span<const int> labels, const Matrix& centroids);

// Number of ground-truth groups that appear exactly as some cluster.
int correct_groups(const ClusterAssignment& a, std::span<const std::set<int>> truth);

// Accumulated correct groups over accumulated group count. Throws ArgError
// when an assignment misses a client named in `truth`.
double clustering_accuracy(std::span<const ClusterAssignment> history,
                           std::span<const std::set<int>> truth);

}  // namespace simfl
