#include "lgcp/summaries.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "lgcp/parallel.hpp"

namespace lgcp {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTau = 2.0 * kPi;

// Union length of angle intervals on the circle, inputs in [0, 2pi) possibly wrapping.
double union_length(std::vector<std::pair<double, double>> arcs) {
  std::vector<std::pair<double, double>> flat;
  for (auto [a, b] : arcs) {
    if (b - a >= kTau) return kTau;
    a = std::fmod(a, kTau);
    if (a < 0) a += kTau;
    b = std::fmod(b, kTau);
    if (b < 0) b += kTau;
    if (a <= b) {
      flat.push_back({a, b});
    } else {  // wraps past 2pi
      flat.push_back({a, kTau});
      flat.push_back({0.0, b});
    }
  }
  std::sort(flat.begin(), flat.end());
  double total = 0.0, cur_lo = 0.0, cur_hi = -1.0;
  for (auto [a, b] : flat) {
    if (a > cur_hi) {
      if (cur_hi > cur_lo) total += cur_hi - cur_lo;
      cur_lo = a;
      cur_hi = b;
    } else {
      cur_hi = std::max(cur_hi, b);
    }
  }
  if (cur_hi > cur_lo) total += cur_hi - cur_lo;
  return total;
}

// Grid-bucket index over points for radius-bounded pair queries.
class BucketIndex {
 public:
  BucketIndex(const std::vector<Point>& pts, double cell) : pts_(pts), cell_(cell) {
    if (pts.empty()) return;
    x0_ = y0_ = std::numeric_limits<double>::infinity();
    double x1 = -x0_, y1 = -y0_;
    for (const Point& s : pts) {
      x0_ = std::min(x0_, s.x);
      y0_ = std::min(y0_, s.y);
      x1 = std::max(x1, s.x);
      y1 = std::max(y1, s.y);
    }
    nx_ = std::max(1, static_cast<int>((x1 - x0_) / cell_) + 1);
    ny_ = std::max(1, static_cast<int>((y1 - y0_) / cell_) + 1);
    buckets_.resize(static_cast<size_t>(nx_) * ny_);
    for (size_t i = 0; i < pts.size(); ++i) buckets_[bucket_of(pts[i])].push_back(static_cast<int>(i));
  }

  // Visit indices j with ||p - pts[j]|| possibly <= radius (superset; caller filters).
  template <typename F>
  void for_candidates(const Point& p, double radius, F&& f) const {
    if (pts_.empty()) return;
    const int bi0 = std::max(0, static_cast<int>((p.x - radius - x0_) / cell_));
    const int bi1 = std::min(nx_ - 1, static_cast<int>((p.x + radius - x0_) / cell_));
    const int bj0 = std::max(0, static_cast<int>((p.y - radius - y0_) / cell_));
    const int bj1 = std::min(ny_ - 1, static_cast<int>((p.y + radius - y0_) / cell_));
    for (int bi = bi0; bi <= bi1; ++bi)
      for (int bj = bj0; bj <= bj1; ++bj)
        for (int j : buckets_[static_cast<size_t>(bi) * ny_ + bj]) f(j);
  }

 private:
  size_t bucket_of(const Point& p) const {
    int bi = std::min(nx_ - 1, std::max(0, static_cast<int>((p.x - x0_) / cell_)));
    int bj = std::min(ny_ - 1, std::max(0, static_cast<int>((p.y - y0_) / cell_)));
    return static_cast<size_t>(bi) * ny_ + bj;
  }
  const std::vector<Point>& pts_;
  double cell_;
  double x0_ = 0, y0_ = 0;
  int nx_ = 0, ny_ = 0;
  std::vector<std::vector<int>> buckets_;
};

}  // namespace

double rect_circle_inside_fraction(const Point& c, double r, double x0, double y0, double x1,
                                   double y1) {
  if (r <= 0.0) return 1.0;
  // Outside arcs per edge: for the half-plane x >= x0 the excluded arc is centred
  // at angle pi with half-width acos((c.x - x0)/r); similarly for the others.
  std::vector<std::pair<double, double>> arcs;
  const struct {
    double signed_dist;  // distance from centre to the edge, positive inside
    double centre_angle; // direction pointing out of the window through that edge
  } edges[4] = {
      {c.x - x0, kPi},          // left edge, outward direction = pi
      {x1 - c.x, 0.0},          // right edge
      {c.y - y0, 1.5 * kPi},    // bottom edge
      {y1 - c.y, 0.5 * kPi},    // top edge
  };
  for (const auto& e : edges) {
    if (e.signed_dist >= r) continue;                       // edge does not cut the circle
    const double half = std::acos(std::clamp(e.signed_dist / r, -1.0, 1.0));
    arcs.push_back({e.centre_angle - half, e.centre_angle + half});
  }
  if (arcs.empty()) return 1.0;
  return 1.0 - union_length(arcs) / kTau;
}

double ripley_weight_spatial(const Point& s1, const Point& s2, const ObservationWindow& w) {
  const double r = std::sqrt(sq_dist(s1, s2));
  if (r == 0.0) return 1.0;
  double frac;
  if (w.is_rectangle()) {
    double x0, y0, x1, y1;
    w.bounding_box(x0, y0, x1, y1);
    frac = rect_circle_inside_fraction(s1, r, x0, y0, x1, y1);
  } else {
    frac = circle_inside_fraction(s1, r, w);
  }
  if (!(frac > 0.0)) throw std::runtime_error("correction circle entirely outside the window");
  return 1.0 / frac;
}

double ripley_weight_temporal(int t1, int t2, int T0, int T1) {
  const int lag = std::abs(t2 - t1);
  if (lag == 0) return 1.0;
  const bool lo_in = (t1 - lag) >= T0;
  const bool hi_in = (t1 + lag) <= T1;
  if (lo_in && hi_in) return 1.0;
  if (!lo_in && !hi_in)
    throw std::runtime_error("temporal correction has no in-range reflection");
  return 2.0;
}

KSurface st_inhom_K(const SpatioTemporalPointPattern& pat,
                    const std::function<double(const Point&, int)>& intensity,
                    const std::vector<double>& r_grid, const std::vector<int>& t_grid,
                    int n_threads) {
  if (r_grid.empty() || t_grid.empty()) throw std::invalid_argument("empty lag grid");
  if (!std::is_sorted(r_grid.begin(), r_grid.end()) ||
      !std::is_sorted(t_grid.begin(), t_grid.end()))
    throw std::invalid_argument("lag grids must be sorted ascending");

  const std::vector<Event>& ev = pat.events();
  std::vector<Point> pts(ev.size());
  std::vector<double> lam(ev.size());
  for (size_t i = 0; i < ev.size(); ++i) {
    pts[i] = {ev[i].x, ev[i].y};
    lam[i] = intensity(pts[i], ev[i].t);
    if (!(lam[i] > 0.0))
      throw std::runtime_error("non-positive intensity at event " + std::to_string(i));
  }

  const double r_max = r_grid.back();
  const int t_max = t_grid.back();
  const size_t nr = r_grid.size(), nt = t_grid.size();
  BucketIndex index(pts, std::max(r_max, 1e-12));

  const int max_chunks = 4 * std::max(1, n_threads);
  std::vector<std::vector<double>> bins(max_chunks);
  parallel_chunks(0, static_cast<long long>(ev.size()), n_threads,
                  [&](int chunk, long long lo, long long hi) {
    auto& b = bins[chunk];
    if (b.empty()) b.assign(nr * nt, 0.0);
    for (long long i = lo; i < hi; ++i) {
      index.for_candidates(pts[i], r_max, [&](int j) {
        if (j == static_cast<int>(i)) return;
        const int dt = std::abs(ev[j].t - ev[i].t);
        if (dt > t_max) return;
        const double d = std::sqrt(sq_dist(pts[i], pts[j]));
        if (d > r_max) return;
        const size_t ri = std::lower_bound(r_grid.begin(), r_grid.end(), d) - r_grid.begin();
        const size_t ti = std::lower_bound(t_grid.begin(), t_grid.end(), dt) - t_grid.begin();
        if (ri >= nr || ti >= nt) return;
        const double w_r = ripley_weight_spatial(pts[i], pts[j], pat.window());
        const double w_t = ripley_weight_temporal(ev[i].t, ev[j].t, pat.t0(), pat.t1());
        b[ri * nt + ti] += w_r * w_t / (lam[i] * lam[j]);
      });
    }
  });

  std::vector<double> acc(nr * nt, 0.0);
  for (const auto& b : bins) {
    if (b.empty()) continue;
    for (size_t k = 0; k < acc.size(); ++k) acc[k] += b[k];
  }
  // Cumulative over both lags turns bin masses into K values.
  for (size_t ri = 0; ri < nr; ++ri)
    for (size_t ti = 1; ti < nt; ++ti) acc[ri * nt + ti] += acc[ri * nt + ti - 1];
  for (size_t ri = 1; ri < nr; ++ri)
    for (size_t ti = 0; ti < nt; ++ti) acc[ri * nt + ti] += acc[(ri - 1) * nt + ti];

  const double norm = 1.0 / (pat.window().area() * pat.n_days());
  KSurface out;
  out.r_grid = r_grid;
  out.t_grid = t_grid;
  out.values.assign(nr, std::vector<double>(nt));
  for (size_t ri = 0; ri < nr; ++ri)
    for (size_t ti = 0; ti < nt; ++ti) out.values[ri][ti] = acc[ri * nt + ti] * norm;
  return out;
}

double stoyan_bandwidth(double mean_intensity, double c) {
  if (!(mean_intensity > 0.0)) throw std::invalid_argument("mean intensity must be positive");
  return c / std::sqrt(mean_intensity);
}

PcfCurve time_averaged_pcf(const SpatioTemporalPointPattern& pat, const SpatialDensity& lambda0,
                           const std::vector<double>& lambda1_by_day,
                           const std::vector<double>& u_grid, double h_s, int n_threads) {
  if (!(h_s > 0.0)) throw std::invalid_argument("kernel bandwidth must be positive");
  for (double u : u_grid)
    if (!(u > 0.0)) throw std::invalid_argument("pair correlation lags must be positive");
  if (static_cast<int>(lambda1_by_day.size()) != pat.n_days())
    throw std::invalid_argument("lambda1 series length != day count");

  // Split events by day.
  const std::vector<Event>& ev = pat.events();
  std::vector<std::vector<Point>> by_day(pat.n_days());
  for (const Event& e : ev) by_day[e.t - pat.t0()].push_back({e.x, e.y});

  const double u_max = u_grid.back() + h_s;
  const size_t nu = u_grid.size();
  std::vector<double> total(nu, 0.0);

  for (int day = 0; day < pat.n_days(); ++day) {
    const auto& pts = by_day[day];
    if (pts.size() < 2) continue;  // contributes nothing
    const double l1 = lambda1_by_day[day];
    if (!(l1 > 0.0))
      throw std::runtime_error("non-positive lambda1 on a day with 2+ events (day index " +
                               std::to_string(day) + ")");
    std::vector<double> l0(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
      l0[i] = lambda0.value_at(pts[i].x, pts[i].y);
      if (!(l0[i] > 0.0))
        throw std::runtime_error("non-positive lambda0 at an event on day index " +
                                 std::to_string(day));
    }
    BucketIndex index(pts, std::max(u_max, 1e-12));
    const int max_chunks = 4 * std::max(1, n_threads);
    std::vector<std::vector<double>> parts(max_chunks);
    parallel_chunks(0, static_cast<long long>(pts.size()), n_threads,
                    [&](int chunk, long long lo, long long hi) {
      auto& acc = parts[chunk];
      if (acc.empty()) acc.assign(nu, 0.0);
      for (long long i = lo; i < hi; ++i) {
        index.for_candidates(pts[i], u_max, [&](int j) {
          if (j == static_cast<int>(i)) return;
          const double d = std::sqrt(sq_dist(pts[i], pts[j]));
          if (d > u_max) return;
          const double w = ripley_weight_spatial(pts[i], pts[j], pat.window()) /
                           (l0[i] * l0[j] * l1 * l1);
          // Epanechnikov in the lag difference, accumulated into nearby u bins.
          const auto lo_it = std::lower_bound(u_grid.begin(), u_grid.end(), d - h_s);
          for (size_t ui = lo_it - u_grid.begin(); ui < nu && u_grid[ui] <= d + h_s; ++ui) {
            const double x = (u_grid[ui] - d) / h_s;
            acc[ui] += w * 0.75 * (1.0 - x * x) / h_s;
          }
        });
      }
    });
    for (const auto& acc : parts) {
      if (acc.empty()) continue;
      for (size_t k = 0; k < nu; ++k) total[k] += acc[k];
    }
  }

  PcfCurve out;
  out.u_grid = u_grid;
  out.h_s = h_s;
  out.values.resize(nu);
  const double T = pat.n_days();
  for (size_t k = 0; k < nu; ++k)
    out.values[k] = total[k] / (kTau * u_grid[k] * pat.window().area() * T);
  return out;
}

double AutocovCurve::lambda1_product_mean(int v) const {
  const int T = static_cast<int>(lambda1.size());
  if (v <= 0 || v >= T) throw std::invalid_argument("lag outside (0, T)");
  double s = 0.0;
  for (int t = v; t < T; ++t) s += lambda1[t] * lambda1[t - v];
  return s / (T - v);
}

AutocovCurve empirical_autocov(const std::vector<std::pair<int, long long>>& daily,
                               const std::vector<double>& lambda1_by_day, int v_max) {
  const int T = static_cast<int>(daily.size());
  if (static_cast<int>(lambda1_by_day.size()) != T)
    throw std::invalid_argument("lambda1 series length != day count");
  if (v_max < 1 || v_max >= T) throw std::invalid_argument("v_max must be in [1, T)");
  AutocovCurve out;
  out.t0 = daily.empty() ? 0 : daily.front().first;
  out.lambda1 = lambda1_by_day;
  for (int v = 1; v <= v_max; ++v) {
    double s = 0.0;
    for (int t = v; t < T; ++t) {
      s += static_cast<double>(daily[t].second) * static_cast<double>(daily[t - v].second) -
           lambda1_by_day[t] * lambda1_by_day[t - v];
    }
    out.v_grid.push_back(v);
    out.values.push_back(s / (T - v));
  }
  return out;
}

BivariateK bivariate_K(const std::vector<Point>& pat1, const std::vector<Point>& pat2,
                       const ObservationWindow& w, const std::vector<double>& u_grid) {
  if (pat1.empty() || pat2.empty()) throw std::invalid_argument("empty pattern");
  const double u_max = u_grid.back();
  const size_t nu = u_grid.size();
  const double area = w.area();

  auto directed = [&](const std::vector<Point>& a, const std::vector<Point>& b) {
    std::vector<double> bins(nu, 0.0);
    BucketIndex index(b, std::max(u_max, 1e-12));
    for (const Point& s : a) {
      index.for_candidates(s, u_max, [&](int j) {
        const double d = std::sqrt(sq_dist(s, b[j]));
        if (d > u_max || d == 0.0) return;
        const size_t ui = std::lower_bound(u_grid.begin(), u_grid.end(), d) - u_grid.begin();
        if (ui >= nu) return;
        bins[ui] += ripley_weight_spatial(s, b[j], w);
      });
    }
    for (size_t k = 1; k < nu; ++k) bins[k] += bins[k - 1];
    const double norm = area / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
    for (double& v : bins) v *= norm;
    return bins;
  };

  BivariateK out;
  out.u_grid = u_grid;
  out.k12 = directed(pat1, pat2);
  out.k21 = directed(pat2, pat1);
  return out;
}

McTestResult spacetime_mc_test(const SpatioTemporalPointPattern& pat,
                               const std::function<double(const Point&, int)>& intensity,
                               int n_perm, const std::vector<double>& r_grid,
                               const std::vector<int>& t_grid, Rng& rng, int n_threads) {
  if (n_perm < 1) throw std::invalid_argument("need at least one permutation");

  auto statistic = [&](const SpatioTemporalPointPattern& p) {
    const KSurface K = st_inhom_K(p, intensity, r_grid, t_grid, n_threads);
    double u = 0.0;
    for (size_t ri = 0; ri < r_grid.size(); ++ri)
      for (size_t ti = 0; ti < t_grid.size(); ++ti)
        u += K.values[ri][ti] - K.baseline(r_grid[ri], t_grid[ti]);
    return u;
  };

  McTestResult res;
  res.observed_statistic = statistic(pat);

  std::vector<int> stamps;
  stamps.reserve(pat.size());
  for (const Event& e : pat.events()) stamps.push_back(e.t);

  int below = 0;
  for (int k = 0; k < n_perm; ++k) {
    std::shuffle(stamps.begin(), stamps.end(), rng);
    std::vector<Event> ev = pat.events();
    for (size_t i = 0; i < ev.size(); ++i) ev[i].t = stamps[i];
    const SpatioTemporalPointPattern perm(std::move(ev), pat.window(), pat.t0(), pat.t1());
    const double u = statistic(perm);
    res.permuted_statistics.push_back(u);
    if (u < res.observed_statistic) ++below;
  }
  res.fraction_below = static_cast<double>(below) / n_perm;
  return res;
}

Envelope envelope(const std::function<std::vector<Point>(Rng&)>& simulate,
                  const std::function<std::vector<double>(const std::vector<Point>&)>& statistic,
                  int n_sim, Rng& rng) {
  if (n_sim < 2) throw std::invalid_argument("need at least two simulations");
  Envelope env;
  for (int s = 0; s < n_sim; ++s) {
    std::vector<Point> pat;
    try {
      pat = simulate(rng);
    } catch (const std::exception& e) {
      throw std::runtime_error("simulation " + std::to_string(s) + " failed: " + e.what());
    }
    const std::vector<double> stat = statistic(pat);
    if (s == 0) {
      env.lo = stat;
      env.hi = stat;
    } else {
      if (stat.size() != env.lo.size()) throw std::runtime_error("statistic length changed");
      for (size_t k = 0; k < stat.size(); ++k) {
        env.lo[k] = std::min(env.lo[k], stat[k]);
        env.hi[k] = std::max(env.hi[k], stat[k]);
      }
    }
  }
  return env;
}

}  // namespace lgcp
