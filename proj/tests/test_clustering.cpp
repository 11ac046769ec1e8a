#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "cqa/clustering.hpp"
#include "cqa/errors.hpp"
#include "cqa/rng.hpp"
#include "helpers.hpp"

using namespace cqa;

namespace {

std::vector<float> random_points(Rng& rng, int n, int dim) {
  std::vector<float> pts(static_cast<size_t>(n) * dim);
  for (float& x : pts) x = static_cast<float>(rng.uniform() * 10.0 - 5.0);
  return pts;
}

// Exact minimum inertia over every 2-way partition (points assigned to the
// side's mean); brute force, only usable for small n.
double best_two_partition_inertia(const std::vector<float>& pts, int n, int dim) {
  double best = 1e300;
  for (unsigned mask = 1; mask < (1u << n) - 1u; ++mask) {
    std::vector<double> mean0(dim, 0.0), mean1(dim, 0.0);
    int n0 = 0, n1 = 0;
    for (int i = 0; i < n; ++i) {
      const bool side = (mask >> i) & 1u;
      for (int d = 0; d < dim; ++d)
        (side ? mean1 : mean0)[d] += pts[static_cast<size_t>(i) * dim + d];
      (side ? n1 : n0)++;
    }
    for (int d = 0; d < dim; ++d) {
      mean0[d] /= n0;
      mean1[d] /= n1;
    }
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) {
      const bool side = (mask >> i) & 1u;
      const auto& mean = side ? mean1 : mean0;
      for (int d = 0; d < dim; ++d) {
        const double diff = pts[static_cast<size_t>(i) * dim + d] - mean[d];
        inertia += diff * diff;
      }
    }
    best = std::min(best, inertia);
  }
  return best;
}

}  // namespace

TEST_SUITE("clustering") {

TEST_CASE("k equal to n gives zero inertia") {
  const std::vector<float> pts = {0, 0, 1, 0, 0, 1, 5, 5};
  const auto r = kmeans_points(pts, 4, 2, 4, 50, 3);
  REQUIRE(!r.inertia_history.empty());
  CHECK(r.inertia_history.back() == doctest::Approx(0.0).epsilon(1e-12));
  std::vector<int> sorted = r.assignment;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3});  // one point per cluster
}

TEST_CASE("k=1 converges to the global mean") {
  Rng rng(7);
  const int n = 25, dim = 3;
  const auto pts = random_points(rng, n, dim);
  const auto r = kmeans_points(pts, n, dim, 1, 50, 1);
  for (int d = 0; d < dim; ++d) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += pts[static_cast<size_t>(i) * dim + d];
    mean /= n;
    CHECK(r.centroids[d] == doctest::Approx(mean).epsilon(1e-5));
  }
  for (int a : r.assignment) CHECK(a == 0);
}

TEST_CASE("recovers two separated blobs exactly") {
  Rng rng(12);
  std::vector<float> pts;
  const int per_blob = 6, dim = 2;
  for (int i = 0; i < per_blob; ++i) {
    pts.push_back(static_cast<float>(rng.uniform() - 0.5));
    pts.push_back(static_cast<float>(rng.uniform() - 0.5));
  }
  for (int i = 0; i < per_blob; ++i) {
    pts.push_back(static_cast<float>(10.0 + rng.uniform() - 0.5));
    pts.push_back(static_cast<float>(10.0 + rng.uniform() - 0.5));
  }
  const int n = 2 * per_blob;
  const auto r = kmeans_points(pts, n, dim, 2, 100, 5);
  // matches the exhaustive optimum and separates the blobs
  const double oracle = best_two_partition_inertia(pts, n, dim);
  CHECK(r.inertia_history.back() == doctest::Approx(oracle).epsilon(1e-4));
  for (int i = 1; i < per_blob; ++i) CHECK(r.assignment[i] == r.assignment[0]);
  for (int i = per_blob + 1; i < n; ++i) CHECK(r.assignment[i] == r.assignment[per_blob]);
  CHECK(r.assignment[0] != r.assignment[per_blob]);
}

TEST_CASE("inertia history never increases") {
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed * 31);
    const int n = 40, dim = 3;
    const auto pts = random_points(rng, n, dim);
    const auto r = kmeans_points(pts, n, dim, 4, 30, seed);
    for (size_t i = 1; i < r.inertia_history.size(); ++i)
      CHECK(r.inertia_history[i] <= r.inertia_history[i - 1] + 1e-9);
  }
}

TEST_CASE("partition is invariant under input permutation") {
  Rng rng(21);
  const int n = 30, dim = 3, k = 5;
  const auto pts = random_points(rng, n, dim);

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = n - 1; i > 0; --i)
    std::swap(order[i], order[rng.below(static_cast<uint64_t>(i) + 1)]);
  std::vector<float> shuffled(pts.size());
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d)
      shuffled[static_cast<size_t>(i) * dim + d] = pts[static_cast<size_t>(order[i]) * dim + d];

  const auto r1 = kmeans_points(pts, n, dim, k, 50, 9);
  const auto r2 = kmeans_points(shuffled, n, dim, k, 50, 9);
  // same partition: co-membership of every pair agrees
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const bool together1 = r1.assignment[order[i]] == r1.assignment[order[j]];
      const bool together2 = r2.assignment[i] == r2.assignment[j];
      CHECK(together1 == together2);
    }
}

TEST_CASE("clustering a vocabulary") {
  const auto m = toy_embedding({"a", "b", "c", "d"},
                               {{0.0f, 0.0f}, {0.1f, 0.0f}, {5.0f, 5.0f}, {5.1f, 5.0f}});
  const auto model = kmeans(m, 2, 50, 4);
  CHECK(model.k == 2);
  CHECK(model.dim == 2);
  CHECK(model.assignment.size() == 4);
  CHECK(model.assignment.at("a") == model.assignment.at("b"));
  CHECK(model.assignment.at("c") == model.assignment.at("d"));
  CHECK(model.assignment.at("a") != model.assignment.at("c"));

  CHECK_THROWS_AS(kmeans(m, 5, 50, 4), ConfigError);  // k > V
}

TEST_CASE("cluster bags and similarity") {
  ClusterModel model;
  model.k = 8;
  model.assignment = {{"a", 0}, {"b", 7}};
  const auto bag = cluster_bag({"a", "a", "b", "oov"}, model);
  CHECK(bag == std::map<int, int>{{0, 2}, {7, 1}});

  const std::map<int, int> q{{0, 2}, {7, 1}};
  CHECK(cluster_similarity(q, q) == doctest::Approx(1.0));
  CHECK(cluster_similarity({{0, 2}}, {{0, 1}}) == doctest::Approx(1.0));
  CHECK(cluster_similarity({{0, 1}}, {{1, 1}}) == 0.0);
  CHECK(cluster_similarity({{0, 1}, {1, 1}}, {{0, 1}}) ==
        doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(cluster_similarity({}, q) == 0.0);
  CHECK(cluster_similarity(q, {}) == 0.0);
}

TEST_CASE("cluster file round-trip") {
  TempDir dir;
  const auto m = toy_embedding({"a", "b", "c"},
                               {{0.0f, 0.0f}, {0.1f, 0.1f}, {9.0f, 9.0f}});
  const auto model = kmeans(m, 2, 20, 2);
  save_clusters(dir.file("clusters.tsv"), model);
  const auto loaded = load_clusters(dir.file("clusters.tsv"));
  CHECK(loaded.k == model.k);
  CHECK(loaded.dim == model.dim);
  CHECK(loaded.assignment == model.assignment);

  write_file(dir.file("bad.tsv"), "not a header\n");
  CHECK_THROWS_AS(load_clusters(dir.file("bad.tsv")), FormatError);
  write_file(dir.file("badrow.tsv"), "2 2\nword_without_id\n");
  CHECK_THROWS_AS(load_clusters(dir.file("badrow.tsv")), FormatError);
  CHECK_THROWS_AS(load_clusters(dir.file("missing.tsv")), IoError);
}

}  // TEST_SUITE
