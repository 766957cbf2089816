#include "lgcp/bandwidth.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace lgcp {

namespace {

int nearest_centroid(const Point& s, const std::vector<Point>& cent) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < cent.size(); ++k) {
    const double d = sq_dist(s, cent[k]);
    if (d < best_d) {  // strict: ties keep the lowest index
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

std::vector<Point> kmeanspp_seed(const std::vector<Point>& pts, int K, Rng& rng) {
  std::vector<Point> cent;
  cent.reserve(K);
  std::uniform_int_distribution<size_t> first(0, pts.size() - 1);
  cent.push_back(pts[first(rng)]);
  std::vector<double> d2(pts.size());
  while (static_cast<int>(cent.size()) < K) {
    double total = 0.0;
    for (size_t i = 0; i < pts.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const Point& c : cent) best = std::min(best, sq_dist(pts[i], c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      // All remaining mass at existing centroids (duplicate points); any pick works.
      cent.push_back(pts[first(rng)]);
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double target = u(rng), acc = 0.0;
    size_t pick = pts.size() - 1;
    for (size_t i = 0; i < pts.size(); ++i) {
      acc += d2[i];
      if (acc >= target) {
        pick = i;
        break;
      }
    }
    cent.push_back(pts[pick]);
  }
  return cent;
}

}  // namespace

Clustering kmeans_cluster(const std::vector<Point>& points, int K, double epsilon,
                          int max_iter, Rng& rng) {
  if (K <= 0) throw std::invalid_argument("cluster count must be positive");
  std::set<std::pair<double, double>> distinct;
  for (const Point& s : points) distinct.insert({s.x, s.y});
  if (static_cast<size_t>(K) > distinct.size())
    throw std::invalid_argument("cluster count exceeds number of distinct points");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");

  Clustering c;
  c.centroids = kmeanspp_seed(points, K, rng);
  c.assignment.assign(points.size(), 0);
  c.sizes.assign(K, 0);

  for (int it = 1; it <= max_iter; ++it) {
    c.iterations = it;
    for (size_t i = 0; i < points.size(); ++i) c.assignment[i] = nearest_centroid(points[i], c.centroids);
    std::vector<Point> next(K, Point{0.0, 0.0});
    std::vector<int> n(K, 0);
    for (size_t i = 0; i < points.size(); ++i) {
      const int k = c.assignment[i];
      next[k].x += points[i].x;
      next[k].y += points[i].y;
      ++n[k];
    }
    double shift2 = 0.0;
    for (int k = 0; k < K; ++k) {
      if (n[k] > 0) {
        next[k].x /= n[k];
        next[k].y /= n[k];
      } else {
        next[k] = c.centroids[k];  // empty cluster keeps its centroid
      }
      shift2 += sq_dist(next[k], c.centroids[k]);
    }
    c.centroids = next;
    c.sizes = n;
    if (shift2 <= epsilon) {
      c.converged = true;
      break;
    }
  }
  // Final assignment against the converged centroids.
  for (size_t i = 0; i < points.size(); ++i) c.assignment[i] = nearest_centroid(points[i], c.centroids);
  std::fill(c.sizes.begin(), c.sizes.end(), 0);
  for (int a : c.assignment) ++c.sizes[a];
  return c;
}

double bandwidth_from_clustering(const Clustering& c, const std::vector<Point>& points) {
  const int K = static_cast<int>(c.centroids.size());
  std::vector<double> sse(K, 0.0);
  for (size_t i = 0; i < points.size(); ++i)
    sse[c.assignment[i]] += sq_dist(points[i], c.centroids[c.assignment[i]]);
  double h2 = 0.0;
  for (int k = 0; k < K; ++k) {
    if (c.sizes[k] == 0) throw std::runtime_error("degenerate clustering: empty cluster");
    h2 += sse[k] / c.sizes[k];
  }
  return std::sqrt(h2 / (2.0 * K));
}

double select_bandwidth(const std::vector<Point>& points, const BandwidthOptions& opt, Rng& rng) {
  const Clustering c = kmeans_cluster(points, opt.K, opt.epsilon, opt.max_iter, rng);
  return bandwidth_from_clustering(c, points);
}

}  // namespace lgcp
