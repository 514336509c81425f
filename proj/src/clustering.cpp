#include "simfl/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "simfl/errors.hpp"
#include "simfl/kernels.hpp"
#include "simfl/rng.hpp"

namespace simfl {

namespace {

void check_cluster_count(const Matrix& points, int m, int min_m) {
  if (m < min_m || static_cast<std::size_t>(m) > points.rows())
    throw ArgError("cluster count " + std::to_string(m) + " invalid for " +
                   std::to_string(points.rows()) + " points");
}

// Relabels so cluster ids follow first appearance in row order.
std::vector<int> relabel(std::span<const int> labels, std::vector<int>* mapping = nullptr) {
  std::map<int, int> remap;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = remap.try_emplace(labels[i], static_cast<int>(remap.size()));
    out[i] = it->second;
  }
  if (mapping) {
    mapping->assign(remap.size(), 0);
    for (auto [old_id, new_id] : remap) (*mapping)[new_id] = old_id;
  }
  return out;
}

std::vector<int> assign_nearest(const Matrix& points, const Matrix& centers) {
  std::vector<int> labels(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centers.rows(); ++k) {
      const double d = squared_distance(points.row(i), centers.row(k));
      if (d < best) {
        best = d;
        labels[i] = static_cast<int>(k);
      }
    }
  }
  return labels;
}

void recompute_centroid(const Matrix& points, std::span<const int> labels,
                        int k, Matrix& centers) {
  auto c = centers.row(k);
  std::fill(c.begin(), c.end(), 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    if (labels[i] != k) continue;
    const auto p = points.row(i);
    for (std::size_t d = 0; d < c.size(); ++d) c[d] += p[d];
    ++count;
  }
  if (count == 0) return;
  for (double& v : c) v /= static_cast<double>(count);
}

// Centroids become cluster means; every empty cluster is refilled with the
// point farthest from its own centroid, drawn from a cluster that can spare it.
void update_with_repair(const Matrix& points, std::vector<int>& labels, Matrix& centers) {
  const int m = static_cast<int>(centers.rows());
  std::vector<std::size_t> counts(m, 0);
  for (int l : labels) ++counts[l];
  for (int k = 0; k < m; ++k)
    if (counts[k] > 0) recompute_centroid(points, labels, k, centers);
  for (int k = 0; k < m; ++k) {
    if (counts[k] > 0) continue;
    std::size_t far = points.rows();
    double far_d = -1.0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
      if (counts[labels[i]] < 2) continue;
      const double d = squared_distance(points.row(i), centers.row(labels[i]));
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    const int donor = labels[far];
    labels[far] = k;
    --counts[donor];
    ++counts[k];
    recompute_centroid(points, labels, k, centers);
    recompute_centroid(points, labels, donor, centers);
  }
}

Matrix kmeanspp_seed(const Matrix& points, int m, Rng& rng) {
  const std::size_t n = points.rows();
  Matrix centers(m, points.cols());
  std::vector<bool> chosen(n, false);
  auto take = [&](std::size_t idx, int k) {
    chosen[idx] = true;
    std::copy(points.row(idx).begin(), points.row(idx).end(), centers.row(k).begin());
  };
  take(rng.below(n), 0);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points.row(i), centers.row(0));
  for (int k = 1; k < m; ++k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        cum += d2[i];
        pick = i;
        if (cum > target) break;
      }
    } else {
      // Every point coincides with a center already; fall back to index order.
      for (std::size_t i = 0; i < n && pick == n; ++i)
        if (!chosen[i]) pick = i;
    }
    take(pick, k);
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], squared_distance(points.row(i), centers.row(k)));
  }
  return centers;
}

ClusterAssignment to_assignment(std::span<const UpdateVector> points,
                                const std::vector<int>& labels) {
  ClusterAssignment a;
  for (std::size_t i = 0; i < points.size(); ++i) {
    a.labels[points[i].client_id] = labels[i];
    a.m = std::max(a.m, labels[i] + 1);
  }
  return a;
}

}  // namespace

std::vector<std::set<int>> clusters_of(const ClusterAssignment& a) {
  std::vector<std::set<int>> out(a.m);
  for (auto [client, label] : a.labels) out.at(label).insert(client);
  return out;
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::KMeans: return "kmeans";
    case Algorithm::Agglomerative: return "agglomerative";
    case Algorithm::Spectral: return "spectral";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view s) {
  if (s == "kmeans") return Algorithm::KMeans;
  if (s == "agglomerative") return Algorithm::Agglomerative;
  if (s == "spectral") return Algorithm::Spectral;
  throw ConfigError("algorithm must be kmeans, agglomerative or spectral (got '" +
                    std::string(s) + "')");
}

UpdateVector flatten_update(int client_id, const ModelParams& params,
                            const GradientUpdate& grad, UpdateType t) {
  const auto src = uses_gradient(t) ? grad.grad.flat() : params.flat();
  UpdateVector v;
  v.client_id = client_id;
  v.update_type = t;
  v.values.assign(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(update_length(t)));
  return v;
}

Matrix stack_points(std::span<const UpdateVector> points) {
  if (points.empty()) return {};
  const std::size_t dim = points.front().values.size();
  Matrix m(points.size(), dim);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].values.size() != dim)
      throw ArgError("update vectors have mixed lengths");
    std::copy(points[i].values.begin(), points[i].values.end(), m.row(i).begin());
  }
  return m;
}

double wcss(const Matrix& points, std::span<const int> labels, const Matrix& centroids) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i)
    total += squared_distance(points.row(i), centroids.row(labels[i]));
  return total;
}

KMeansResult kmeans_rows(const Matrix& points, int m, std::uint64_t seed) {
  check_cluster_count(points, m, 1);
  Rng rng(seed);
  Matrix centers = kmeanspp_seed(points, m, rng);
  KMeansResult result;
  std::vector<int> labels = assign_nearest(points, centers);
  bool converged = false;
  for (int it = 0; it < 300; ++it) {
    update_with_repair(points, labels, centers);
    result.wcss.push_back(wcss(points, labels, centers));
    result.iterations = it + 1;
    std::vector<int> next = assign_nearest(points, centers);
    if (next == labels) {
      converged = true;
      break;
    }
    labels = std::move(next);
  }
  if (!converged) {
    update_with_repair(points, labels, centers);
    result.wcss.push_back(wcss(points, labels, centers));
  }
  std::vector<int> mapping;
  result.labels = relabel(labels, &mapping);
  result.centroids = Matrix(mapping.size(), points.cols());
  for (std::size_t k = 0; k < mapping.size(); ++k)
    std::copy(centers.row(mapping[k]).begin(), centers.row(mapping[k]).end(),
              result.centroids.row(k).begin());
  return result;
}

KMeansResult kmeans_best(const Matrix& points, int m, std::uint64_t seed, int restarts) {
  if (restarts < 1) throw ArgError("k-means restarts must be at least 1");
  KMeansResult best = kmeans_rows(points, m, seed);
  for (int i = 1; i < restarts; ++i) {
    KMeansResult r = kmeans_rows(points, m, derive_seed(seed, "restart", i));
    if (r.wcss.back() < best.wcss.back()) best = std::move(r);
  }
  return best;
}

std::vector<int> agglomerative_rows(const Matrix& points, int m) {
  check_cluster_count(points, m, 1);
  // Squared distances preserve the ordering of Euclidean ones.
  Matrix dist = kernels::parallel::pairwise_sq_distances(points);
  std::vector<std::vector<int>> clusters;
  for (std::size_t i = 0; i < points.rows(); ++i) clusters.push_back({static_cast<int>(i)});
  std::vector<std::vector<double>> link(points.rows(), std::vector<double>(points.rows()));
  for (std::size_t i = 0; i < points.rows(); ++i)
    for (std::size_t j = 0; j < points.rows(); ++j) link[i][j] = dist(i, j);

  while (clusters.size() > static_cast<std::size_t>(m)) {
    std::size_t best_a = 0, best_b = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < clusters.size(); ++a)
      for (std::size_t b = a + 1; b < clusters.size(); ++b)
        if (link[a][b] < best) {
          best = link[a][b];
          best_a = a;
          best_b = b;
        }
    clusters[best_a].insert(clusters[best_a].end(), clusters[best_b].begin(),
                            clusters[best_b].end());
    for (std::size_t k = 0; k < clusters.size(); ++k) {
      const double merged = std::min(link[best_a][k], link[best_b][k]);
      link[best_a][k] = merged;
      link[k][best_a] = merged;
    }
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(best_b));
    link.erase(link.begin() + static_cast<std::ptrdiff_t>(best_b));
    for (auto& row : link) row.erase(row.begin() + static_cast<std::ptrdiff_t>(best_b));
  }

  std::vector<int> labels(points.rows());
  for (std::size_t k = 0; k < clusters.size(); ++k)
    for (int i : clusters[k]) labels[i] = static_cast<int>(k);
  return relabel(labels);
}

SpectralEmbedding spectral_embedding(const Matrix& points, int m,
                                     std::optional<double> sigma) {
  check_cluster_count(points, m, 2);
  const std::size_t n = points.rows();
  const Matrix sq = kernels::parallel::pairwise_sq_distances(points);

  SpectralEmbedding out;
  if (sigma) {
    out.sigma = *sigma;
  } else {
    std::vector<double> d;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) d.push_back(std::sqrt(sq(i, j)));
    std::sort(d.begin(), d.end());
    const std::size_t h = d.size() / 2;
    out.sigma = d.size() % 2 ? d[h] : 0.5 * (d[h - 1] + d[h]);
  }
  if (!(out.sigma > 0.0) || !std::isfinite(out.sigma))
    throw DegenerateAffinityError("affinity bandwidth is zero: points coincide");

  out.affinity = Matrix(n, n);
  const double denom = 2.0 * out.sigma * out.sigma;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) out.affinity(i, j) = std::exp(-sq(i, j) / denom);

  std::vector<double> inv_sqrt_deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += out.affinity(i, j);
    if (deg > 0.0) inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
  }
  out.laplacian = Matrix::identity(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out.laplacian(i, j) -= inv_sqrt_deg[i] * out.affinity(i, j) * inv_sqrt_deg[j];

  out.eigen = eigh_jacobi(out.laplacian);
  out.embedding = Matrix(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double norm = 0.0;
    for (int k = 0; k < m; ++k) {
      out.embedding(i, k) = out.eigen.vectors(i, k);
      norm += out.embedding(i, k) * out.embedding(i, k);
    }
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (int k = 0; k < m; ++k) out.embedding(i, k) /= norm;
  }
  return out;
}

std::vector<int> spectral_rows(const Matrix& points, int m, const SpectralOptions& opts) {
  const SpectralEmbedding e = spectral_embedding(points, m, opts.sigma);
  return kmeans_best(e.embedding, m, opts.seed, opts.restarts).labels;
}

ClusterAssignment kmeans(std::span<const UpdateVector> points, int m, std::uint64_t seed,
                         int restarts) {
  return to_assignment(points, kmeans_best(stack_points(points), m, seed, restarts).labels);
}

ClusterAssignment agglomerative(std::span<const UpdateVector> points, int m) {
  return to_assignment(points, agglomerative_rows(stack_points(points), m));
}

ClusterAssignment spectral(std::span<const UpdateVector> points, int m,
                           std::optional<double> sigma, std::uint64_t seed) {
  return to_assignment(points,
                       spectral_rows(stack_points(points), m, SpectralOptions{sigma, seed}));
}

ClusterAssignment run_clustering(Algorithm algo, std::span<const UpdateVector> points,
                                 int m, std::uint64_t seed) {
  switch (algo) {
    case Algorithm::KMeans: return kmeans(points, m, seed);
    case Algorithm::Agglomerative: return agglomerative(points, m);
    case Algorithm::Spectral: return spectral(points, m, std::nullopt, seed);
  }
  throw ArgError("unknown clustering algorithm");
}

int correct_groups(const ClusterAssignment& a, std::span<const std::set<int>> truth) {
  const auto clusters = clusters_of(a);
  int correct = 0;
  for (const auto& group : truth)
    if (std::find(clusters.begin(), clusters.end(), group) != clusters.end()) ++correct;
  return correct;
}

double clustering_accuracy(std::span<const ClusterAssignment> history,
                           std::span<const std::set<int>> truth) {
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const auto& a : history) {
    for (const auto& group : truth)
      for (int client : group)
        if (!a.labels.contains(client))
          throw ArgError("assignment is missing client " + std::to_string(client));
    correct += static_cast<std::size_t>(correct_groups(a, truth));
    total += truth.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace simfl
