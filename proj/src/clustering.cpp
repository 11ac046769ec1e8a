#include "cqa/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "cqa/errors.hpp"
#include "cqa/rng.hpp"

namespace cqa {

namespace {

double sq_dist(const float* a, const float* b, int dim) {
  double d = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    d += diff * diff;
  }
  return d;
}

// k-means++ seeding over the canonicalized points.
std::vector<float> seed_centroids(const std::vector<float>& pts, int n, int dim,
                                  int k, Rng& rng) {
  std::vector<float> centroids(static_cast<size_t>(k) * dim);
  std::vector<double> dist(n, std::numeric_limits<double>::max());
  int first = static_cast<int>(rng.below(static_cast<uint64_t>(n)));
  std::copy_n(pts.data() + static_cast<size_t>(first) * dim, dim, centroids.begin());
  for (int c = 1; c < k; ++c) {
    const float* prev = centroids.data() + static_cast<size_t>(c - 1) * dim;
    double total = 0.0;
    for (int p = 0; p < n; ++p) {
      double d = sq_dist(pts.data() + static_cast<size_t>(p) * dim, prev, dim);
      if (d < dist[p]) dist[p] = d;
      total += dist[p];
    }
    int chosen;
    if (total <= 0.0) {
      // all remaining points coincide with chosen centroids
      chosen = static_cast<int>(rng.below(static_cast<uint64_t>(n)));
    } else {
      double target = rng.uniform() * total;
      double cum = 0.0;
      chosen = n - 1;
      for (int p = 0; p < n; ++p) {
        cum += dist[p];
        if (cum >= target) {
          chosen = p;
          break;
        }
      }
    }
    std::copy_n(pts.data() + static_cast<size_t>(chosen) * dim, dim,
                centroids.begin() + static_cast<size_t>(c) * dim);
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans_points(const std::vector<float>& points, int n, int dim,
                           int k, int max_iters, uint64_t seed) {
  if (n <= 0 || dim <= 0) throw ConfigError("kmeans: need at least one point");
  if (k <= 0) throw ConfigError("kmeans: k must be >= 1");
  if (k > n) throw ConfigError("kmeans: k exceeds the number of points");
  if (points.size() != static_cast<size_t>(n) * dim)
    throw ConfigError("kmeans: point buffer size does not match n*dim");

  // Canonical lexicographic order makes the partition (and the floating-point
  // summation order) a function of the point multiset, not its presentation.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const float* pa = points.data() + static_cast<size_t>(a) * dim;
    const float* pb = points.data() + static_cast<size_t>(b) * dim;
    return std::lexicographical_compare(pa, pa + dim, pb, pb + dim);
  });
  std::vector<float> pts(static_cast<size_t>(n) * dim);
  for (int p = 0; p < n; ++p)
    std::copy_n(points.data() + static_cast<size_t>(order[p]) * dim, dim,
                pts.begin() + static_cast<size_t>(p) * dim);

  Rng rng(seed);
  std::vector<float> centroids = seed_centroids(pts, n, dim, k, rng);
  std::vector<int> assign(n, -1);
  KMeansResult result;

  for (int iter = 0; iter < max_iters; ++iter) {
    // Assignment: nearest centroid, ties to the lowest index.
    bool changed = false;
    double inertia = 0.0;
    for (int p = 0; p < n; ++p) {
      const float* pt = pts.data() + static_cast<size_t>(p) * dim;
      int best = 0;
      double best_d = sq_dist(pt, centroids.data(), dim);
      for (int c = 1; c < k; ++c) {
        double d = sq_dist(pt, centroids.data() + static_cast<size_t>(c) * dim, dim);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[p] != best) {
        assign[p] = best;
        changed = true;
      }
      inertia += best_d;
    }
    result.inertia_history.push_back(inertia);
    if (!changed && result.inertia_history.size() > 1) break;

    // Update step.
    std::vector<double> sums(static_cast<size_t>(k) * dim, 0.0);
    std::vector<int> sizes(k, 0);
    for (int p = 0; p < n; ++p) {
      const float* pt = pts.data() + static_cast<size_t>(p) * dim;
      double* s = sums.data() + static_cast<size_t>(assign[p]) * dim;
      for (int i = 0; i < dim; ++i) s[i] += pt[i];
      ++sizes[assign[p]];
    }
    for (int c = 0; c < k; ++c) {
      if (sizes[c] == 0) {
        // Reseed with the point farthest from its assigned centroid.
        int far_p = 0;
        double far_d = -1.0;
        for (int p = 0; p < n; ++p) {
          double d = sq_dist(pts.data() + static_cast<size_t>(p) * dim,
                             centroids.data() + static_cast<size_t>(assign[p]) * dim,
                             dim);
          if (d > far_d) {
            far_d = d;
            far_p = p;
          }
        }
        std::copy_n(pts.data() + static_cast<size_t>(far_p) * dim, dim,
                    centroids.begin() + static_cast<size_t>(c) * dim);
        assign[far_p] = c;
        continue;
      }
      float* cent = centroids.data() + static_cast<size_t>(c) * dim;
      const double* s = sums.data() + static_cast<size_t>(c) * dim;
      for (int i = 0; i < dim; ++i)
        cent[i] = static_cast<float>(s[i] / sizes[c]);
    }
  }

  // Map assignments back to the caller's point order.
  result.assignment.resize(n);
  for (int p = 0; p < n; ++p) result.assignment[order[p]] = assign[p];
  result.centroids = std::move(centroids);
  return result;
}

ClusterModel kmeans(const EmbeddingModel& model, int k, int max_iters,
                    uint64_t seed) {
  const int V = model.vocab.size();
  if (k > V)
    throw ConfigError("kmeans: k=" + std::to_string(k) +
                      " exceeds vocabulary size " + std::to_string(V));
  KMeansResult res =
      kmeans_points(model.input_vectors, V, model.dim, k, max_iters, seed);
  ClusterModel out;
  out.k = k;
  out.dim = model.dim;
  out.centroids = std::move(res.centroids);
  out.inertia_history = std::move(res.inertia_history);
  for (int w = 0; w < V; ++w)
    out.assignment[model.vocab.words[w]] = res.assignment[w];
  return out;
}

std::map<int, int> cluster_bag(const std::vector<std::string>& tokens,
                               const ClusterModel& model) {
  std::map<int, int> bag;
  for (const auto& tok : tokens) {
    auto it = model.assignment.find(tok);
    if (it != model.assignment.end()) ++bag[it->second];
  }
  return bag;
}

double cluster_similarity(const std::map<int, int>& bag_q,
                          const std::map<int, int>& bag_c) {
  if (bag_q.empty() || bag_c.empty()) return 0.0;
  double dot = 0.0, nq = 0.0, nc = 0.0;
  for (const auto& [c, count] : bag_q) {
    nq += static_cast<double>(count) * count;
    auto it = bag_c.find(c);
    if (it != bag_c.end()) dot += static_cast<double>(count) * it->second;
  }
  for (const auto& [c, count] : bag_c) nc += static_cast<double>(count) * count;
  if (nq == 0.0 || nc == 0.0) return 0.0;
  return dot / (std::sqrt(nq) * std::sqrt(nc));
}

void save_clusters(const std::string& path, const ClusterModel& model) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write clusters: " + path);
  out << model.k << ' ' << model.dim << '\n';
  // Sorted for a stable, diffable file.
  std::vector<std::pair<std::string, int>> rows(model.assignment.begin(),
                                                model.assignment.end());
  std::sort(rows.begin(), rows.end());
  for (const auto& [word, c] : rows) out << word << '\t' << c << '\n';
  if (!out) throw IoError("write failed: " + path);
}

ClusterModel load_clusters(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open clusters: " + path);
  ClusterModel model;
  std::string header;
  if (!std::getline(in, header)) throw FormatError("empty cluster file: " + path);
  {
    std::istringstream hs(header);
    if (!(hs >> model.k >> model.dim) || model.k <= 0)
      throw FormatError("bad cluster header in " + path);
  }
  std::string line;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw FormatError("missing tab on line " + std::to_string(line_no) +
                        " of " + path);
    const std::string word = line.substr(0, tab);
    int c;
    try {
      c = std::stoi(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw FormatError("bad cluster id on line " + std::to_string(line_no) +
                        " of " + path);
    }
    if (c < 0 || c >= model.k)
      throw FormatError("cluster id out of range on line " +
                        std::to_string(line_no) + " of " + path);
    model.assignment[word] = c;
  }
  return model;
}

}  // namespace cqa
