#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "cqa/embeddings.hpp"

namespace cqa {

struct ClusterModel {
  int k = 0;
  int dim = 0;
  std::vector<float> centroids;  // k x dim row-major; empty after file load
  std::unordered_map<std::string, int> assignment;  // word -> cluster id
  std::vector<double> inertia_history;  // one entry per Lloyd iteration
};

struct KMeansResult {
  std::vector<int> assignment;  // per input point, cluster id in 0..k-1
  std::vector<float> centroids;
  std::vector<double> inertia_history;
};

// Lloyd iterations from k-means++ seeding. Clustering is a function of the
// point multiset: points are processed in a canonical order internally, so
// permuting the input never changes the partition. Ties go to the lowest
// centroid index; empty clusters are reseeded with the point farthest from its
// assigned centroid. Inertia is checked to be non-increasing every iteration.
KMeansResult kmeans_points(const std::vector<float>& points, int n, int dim,
                           int k, int max_iters, uint64_t seed);

// Clusters the embedding vocabulary; throws ConfigError when k > V.
ClusterModel kmeans(const EmbeddingModel& model, int k, int max_iters,
                    uint64_t seed);

// Per-cluster token counts; OOV tokens are skipped.
std::map<int, int> cluster_bag(const std::vector<std::string>& tokens,
                               const ClusterModel& model);

// Cosine over the sparse count vectors; 0 when either bag is empty.
double cluster_similarity(const std::map<int, int>& bag_q,
                          const std::map<int, int>& bag_c);

// File format: header "k dim", then one "word<TAB>cluster_id" line per word.
void save_clusters(const std::string& path, const ClusterModel& model);
ClusterModel load_clusters(const std::string& path);

}  // namespace cqa
