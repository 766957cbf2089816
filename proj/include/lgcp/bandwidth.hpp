#pragma once

#include <cstdint>
#include <vector>

#include "lgcp/geometry.hpp"
#include "lgcp/rng.hpp"

namespace lgcp {

struct Clustering {
  std::vector<Point> centroids;      // K centroids
  std::vector<int> assignment;       // per point, 0-based cluster id
  std::vector<int> sizes;            // per cluster
  int iterations = 0;
  bool converged = false;
  // Points are not stored; bandwidth_from_clustering takes them again.
};

// Lloyd iterations with k-means++ seeding from `rng`.  Assignment breaks
// distance ties by lowest centroid index; stops when the summed squared
// centroid displacement falls to `epsilon` or below, or at max_iter.
Clustering kmeans_cluster(const std::vector<Point>& points, int K, double epsilon,
                          int max_iter, Rng& rng);

// h = sqrt( (1/2K) sum_k (1/n_k) sum_{i in k} ||s_i - centroid_k||^2 ).
double bandwidth_from_clustering(const Clustering& c, const std::vector<Point>& points);

struct BandwidthOptions {
  int K = 5;
  double epsilon = 1e-5;
  int max_iter = 500;
};

double select_bandwidth(const std::vector<Point>& points, const BandwidthOptions& opt, Rng& rng);

}  // namespace lgcp
