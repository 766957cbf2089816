#pragma once

#include <functional>
#include <vector>

#include "lgcp/geometry.hpp"
#include "lgcp/intensity.hpp"
#include "lgcp/point_pattern.hpp"
#include "lgcp/rng.hpp"

namespace lgcp {

struct KSurface {
  std::vector<double> r_grid;
  std::vector<int> t_grid;
  // values[ri][ti] = K_hat(r, t); baseline(r,t) = 2 pi r^2 t.
  std::vector<std::vector<double>> values;
  double baseline(double r, int t) const { return 2.0 * 3.14159265358979323846 * r * r * t; }
};

struct PcfCurve {
  std::vector<double> u_grid;
  std::vector<double> values;
  double h_s = 0.0;
};

struct AutocovCurve {
  std::vector<int> v_grid;     // 1..v_max
  std::vector<double> values;  // C_bar(v)
  // Per-day pieces kept for the conditional covariance fit.
  double lambda1_product_mean(int v) const;          // (1/(T-v)) sum_t l1(t) l1(t-v)
  std::vector<double> lambda1;                       // fitted series, index 0 = day t0
  int t0 = 0;
};

// Reciprocal of the inside fraction of the circle centred at s1 through s2.
// Weight 1 for coincident points by convention.
double ripley_weight_spatial(const Point& s1, const Point& s2, const ObservationWindow& w);

// Closed-form inside fraction for axis-aligned rectangles (test oracle and fast path).
double rect_circle_inside_fraction(const Point& c, double r, double x0, double y0, double x1,
                                   double y1);

// 1 if both reflections t1 +- |t2-t1| lie in [T0,T1], else 2.
double ripley_weight_temporal(int t1, int t2, int T0, int T1);

// Space-time inhomogeneous K: ordered distinct pairs, indicator in both lags,
// intensity reciprocals, spatial and temporal Ripley weights, 1/(|R| * T) front
// factor (T = number of day stamps in the range).
// intensity(s, t) must be strictly positive at every event.
KSurface st_inhom_K(const SpatioTemporalPointPattern& pat,
                    const std::function<double(const Point&, int)>& intensity,
                    const std::vector<double>& r_grid, const std::vector<int>& t_grid,
                    int n_threads = 1);

// Stoyan's rule of thumb.
double stoyan_bandwidth(double mean_intensity, double c = 0.15);

// Time-averaged pair correlation: same-day ordered pairs, Epanechnikov kernel in
// the spatial lag, spatial Ripley weight, 1/(2 pi u |R| T) front factor and
// per-day 1/lambda1(t)^2 weights.  lambda0 evaluated at event cells.
PcfCurve time_averaged_pcf(const SpatioTemporalPointPattern& pat, const SpatialDensity& lambda0,
                           const std::vector<double>& lambda1_by_day,
                           const std::vector<double>& u_grid, double h_s, int n_threads = 1);

// C_hat(t,v) = N_t N_{t-v} - lambda1(t) lambda1(t-v); C_bar(v) = mean over t.
AutocovCurve empirical_autocov(const std::vector<std::pair<int, long long>>& daily,
                               const std::vector<double>& lambda1_by_day, int v_max);

struct BivariateK {
  std::vector<double> u_grid;
  std::vector<double> k12;
  std::vector<double> k21;
  // Independence baseline pi u^2.
};

// Stationary cross-K with Ripley isotropic correction; intensities n/|R|.
BivariateK bivariate_K(const std::vector<Point>& pat1, const std::vector<Point>& pat2,
                       const ObservationWindow& w, const std::vector<double>& u_grid);

struct McTestResult {
  double observed_statistic = 0.0;
  std::vector<double> permuted_statistics;
  double fraction_below = 0.0;  // fraction of permuted statistics below observed
};

// Statistic U = sum over the (r,t) grid of (K_hat - 2 pi r^2 t); permutation
// shuffles the day stamps among events.
McTestResult spacetime_mc_test(const SpatioTemporalPointPattern& pat,
                               const std::function<double(const Point&, int)>& intensity,
                               int n_perm, const std::vector<double>& r_grid,
                               const std::vector<int>& t_grid, Rng& rng, int n_threads = 1);

struct Envelope {
  std::vector<double> lo;  // pointwise min
  std::vector<double> hi;  // pointwise max
};

// Pointwise min/max of `statistic` over n_sim patterns from `simulate`.
Envelope envelope(const std::function<std::vector<Point>(Rng&)>& simulate,
                  const std::function<std::vector<double>(const std::vector<Point>&)>& statistic,
                  int n_sim, Rng& rng);

}  // namespace lgcp
