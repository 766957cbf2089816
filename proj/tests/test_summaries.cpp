#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "lgcp/intensity.hpp"
#include "lgcp/rng.hpp"
#include "lgcp/summaries.hpp"

using namespace lgcp;

namespace {

constexpr double kPi = 3.14159265358979323846;

SpatioTemporalPointPattern uniform_poisson(const ObservationWindow& w, int t0, int t1,
                                           double rate_per_day, Rng& rng) {
  double x0, y0, x1, y1;
  w.bounding_box(x0, y0, x1, y1);
  std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
  std::vector<Event> ev;
  for (int t = t0; t <= t1; ++t) {
    std::poisson_distribution<int> pois(rate_per_day);
    int n = pois(rng);
    while (n > 0) {
      const double x = ux(rng), y = uy(rng);
      if (w.contains({x, y})) {
        ev.push_back({x, y, t});
        --n;
      }
    }
  }
  return SpatioTemporalPointPattern(std::move(ev), w, t0, t1);
}

SpatialDensity constant_density(const ObservationWindow& w, int m, int p) {
  return normalize_to_density(Raster(GridSpec::cover(w, m, p), 7.0, RasterUnits::IntensityPerArea),
                              0.1);
}

// Full O(n^2 nr nt) evaluation of the cumulative pair-sum definition.
std::vector<std::vector<double>> brute_force_K(const SpatioTemporalPointPattern& pat,
                                               const std::function<double(const Point&, int)>& lam,
                                               const std::vector<double>& r_grid,
                                               const std::vector<int>& t_grid) {
  const auto& ev = pat.events();
  std::vector<std::vector<double>> K(r_grid.size(), std::vector<double>(t_grid.size(), 0.0));
  for (size_t ri = 0; ri < r_grid.size(); ++ri) {
    for (size_t ti = 0; ti < t_grid.size(); ++ti) {
      double acc = 0.0;
      for (size_t i = 0; i < ev.size(); ++i) {
        for (size_t j = 0; j < ev.size(); ++j) {
          if (i == j) continue;
          const Point si{ev[i].x, ev[i].y}, sj{ev[j].x, ev[j].y};
          const double d = std::sqrt(sq_dist(si, sj));
          if (d > r_grid[ri] || std::abs(ev[j].t - ev[i].t) > t_grid[ti]) continue;
          acc += ripley_weight_spatial(si, sj, pat.window()) *
                 ripley_weight_temporal(ev[i].t, ev[j].t, pat.t0(), pat.t1()) /
                 (lam(si, ev[i].t) * lam(sj, ev[j].t));
        }
      }
      K[ri][ti] = acc / (pat.window().area() * pat.n_days());
    }
  }
  return K;
}

}  // namespace

TEST_CASE("spatial edge weight: interior, half circle, quarter circle, partial cut") {
  const ObservationWindow w = ObservationWindow::rectangle(0, 0, 10, 10);
  // Deep interior: circle fully inside.
  CHECK(ripley_weight_spatial({5, 5}, {5.5, 5}, w) == 1.0);
  // Centre of the bottom edge: half the circle is outside.
  CHECK(ripley_weight_spatial({5, 0}, {5, 0.5}, w) == doctest::Approx(2.0).epsilon(1e-12));
  // Corner: quarter of the circle is inside.
  CHECK(ripley_weight_spatial({0, 0}, {0.3, 0}, w) == doctest::Approx(4.0).epsilon(1e-12));
  // One unit above the bottom edge with radius 2: excluded arc 2*acos(1/2).
  const double frac = 1.0 - 2.0 * std::acos(0.5) / (2.0 * kPi);  // = 2/3
  CHECK(ripley_weight_spatial({5, 1}, {5, 3}, w) == doctest::Approx(1.0 / frac).epsilon(1e-12));
  CHECK(rect_circle_inside_fraction({5, 1}, 2.0, 0, 0, 10, 10) ==
        doctest::Approx(frac).epsilon(1e-12));
  // Coincident points get weight 1 by convention.
  CHECK(ripley_weight_spatial({2, 2}, {2, 2}, w) == 1.0);
  // Weights never drop below 1.
  Rng rng(seed_stream(11, "ripley"));
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int k = 0; k < 200; ++k) {
    const Point a{u(rng), u(rng)}, b{u(rng), u(rng)};
    CHECK(ripley_weight_spatial(a, b, w) >= 1.0);
  }
}

TEST_CASE("polygon arc computation agrees with the rectangle closed form") {
  // Same rectangle with a redundant collinear vertex so the polygon path runs.
  const ObservationWindow poly({{0, 0}, {10, 0}, {10, 10}, {0, 10}, {0, 5}});
  REQUIRE(!poly.is_rectangle());
  Rng rng(seed_stream(12, "ripley-poly"));
  std::uniform_real_distribution<double> uc(0.5, 9.5), ur(0.1, 4.0);
  for (int k = 0; k < 100; ++k) {
    const Point c{uc(rng), uc(rng)};
    const double r = ur(rng);
    CAPTURE(c.x);
    CAPTURE(c.y);
    CAPTURE(r);
    CHECK(circle_inside_fraction(c, r, poly) ==
          doctest::Approx(rect_circle_inside_fraction(c, r, 0, 0, 10, 10)).epsilon(1e-9));
  }
}

TEST_CASE("temporal edge weight cases") {
  CHECK(ripley_weight_temporal(5, 5, 1, 10) == 1.0);   // lag 0
  CHECK(ripley_weight_temporal(5, 6, 1, 10) == 1.0);   // both reflections inside
  CHECK(ripley_weight_temporal(1, 3, 1, 10) == 2.0);   // left reflection outside
  CHECK(ripley_weight_temporal(10, 8, 1, 10) == 2.0);  // right reflection outside
  CHECK(ripley_weight_temporal(5, 10, 1, 10) == 2.0);
  // Unreachable for in-range stamps, but defensively guarded.
  CHECK_THROWS_AS(ripley_weight_temporal(3, 9, 1, 5), std::runtime_error);
}

TEST_CASE("two-event K surface matches the hand-computed pair sum") {
  const ObservationWindow w = ObservationWindow::rectangle(0, 0, 10, 10);
  std::vector<Event> ev = {{4, 5, 2}, {5, 5, 3}};
  const SpatioTemporalPointPattern pat(std::move(ev), w, 1, 4);
  const double c = 0.02;
  const auto lam = [&](const Point&, int) { return c; };
  const KSurface K = st_inhom_K(pat, lam, {0.5, 1.0, 2.0}, {0, 1, 2});

  // Both ordered pairs have spatial distance 1, lag 1, and unit edge weights;
  // the front factor is 1/(area * n_days) = 1/400.
  const double expect = 2.0 / (c * c) / (100.0 * 4.0);
  CHECK(K.values[0][0] == 0.0);
  CHECK(K.values[0][1] == 0.0);
  CHECK(K.values[0][2] == 0.0);
  CHECK(K.values[1][0] == 0.0);  // same-day pairs only at lag 0; there are none
  CHECK(K.values[1][1] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(K.values[1][2] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(K.values[2][1] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(K.values[2][2] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(K.baseline(2.0, 3) == doctest::Approx(2.0 * kPi * 4.0 * 3.0).epsilon(1e-15));
}

TEST_CASE("K estimator equals the brute-force pair sum on a 45-event pattern") {
  const ObservationWindow w = ObservationWindow::rectangle(0, 0, 1, 1);
  Rng rng(seed_stream(21, "k-oracle"));
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> ud(1, 6);
  std::vector<Event> ev;
  for (int i = 0; i < 45; ++i) ev.push_back({u(rng), u(rng), ud(rng)});
  const SpatioTemporalPointPattern pat(std::move(ev), w, 1, 6);
  const auto lam = [](const Point& s, int t) { return 0.5 + s.x + 0.3 * s.y + 0.05 * t; };
  const std::vector<double> r_grid = {0.05, 0.1, 0.2, 0.3, 0.45, 0.6};
  const std::vector<int> t_grid = {0, 1, 2, 3};

  const KSurface K = st_inhom_K(pat, lam, r_grid, t_grid);
  const auto oracle = brute_force_K(pat, lam, r_grid, t_grid);
  for (size_t ri = 0; ri < r_grid.size(); ++ri)
    for (size_t ti = 0; ti < t_grid.size(); ++ti) {
      CAPTURE(ri);
      CAPTURE(ti);
      CHECK(K.values[ri][ti] == doctest::Approx(oracle[ri][ti]).epsilon(1e-10));
    }

  // The chunk layout depends on the thread count, so summation order (and the
  // last few ulp) may differ; the values agree to rounding.
  const KSurface K2 = st_inhom_K(pat, lam, r_grid, t_grid, 2);
  for (size_t ri = 0; ri < r_grid.size(); ++ri)
    for (size_t ti = 0; ti < t_grid.size(); ++ti)
      CHECK(K2.values[ri][ti] == doctest::Approx(K.values[ri][ti]).epsilon(1e-12));

  // Monotone in both lags.
  for (size_t ri = 0; ri < r_grid.size(); ++ri)
    for (size_t ti = 1; ti < t_grid.size(); ++ti)
      CHECK(K.values[ri][ti] >= K.values[ri][ti - 1]);
  for (size_t ri = 1; ri < r_grid.size(); ++ri)
    for (size_t ti = 0; ti < t_grid.size(); ++ti)
      CHECK(K.values[ri][ti] >= K.values[ri - 1][ti]);
}

TEST_CASE("K vanishes at zero lags for a one-event-per-day pattern") {
  const ObservationWindow w = ObservationWindow::rectangle(0, 0, 1, 1);
  Rng rng(seed_stream(22, "k-zero"));
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Event> ev;
  for (int t = 1; t <= 40; ++t) ev.push_back({u(rng), u(rng), t});
  const SpatioTemporalPointPattern pat(std::move(ev), w, 1, 40);
  const auto lam = [](const Point&, int) { return 1.0; };
  const KSurface K = st_inhom_K(pat, lam, {0.0, 0.2, 0.5}, {0, 1, 5});
  for (size_t ti = 0; ti < 3; ++ti) CHECK(K.values[0][ti] == 0.0);  // r = 0
  for (size_t ri = 0; ri < 3; ++ri) CHECK(K.values[ri][0] == 0.0);  // t = 0, no same-day pairs
}

TEST_CASE("K rejects bad grids and non-positive intensities") {
  const ObservationWindow w = ObservationWindow::rectangle(0, 0, 1, 1);
  const SpatioTemporalPointPattern pat({{0.5, 0.5, 1}, {0.6, 0.5, 2}}, w, 1, 2);
  const auto lam = [](const Point&, int) { return 1.0; };
  CHECK_THROWS_AS(st_inhom_K(pat, lam, {}, {0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(st_inhom_K(pat, lam, {0.2, 0.1}, {0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(st_inhom_K(pat, lam, {0.1, 0.2}, {1, 0}), std::invalid_argument);
  const auto bad = [](const Point& s, int) { return s.x < 0.55 ? 0.0 : 1.0; };
  try {
    st_inhom_K(pat, bad, {0.1}, {0});
    FAIL("expected an intensity error");
  } catch (const std::runtime_error& ex) {
    CHECK(std::string(ex.what()).find("event 0") != std::string::npos);
  }
}

TEST_CASE("mean K over homogeneous Poisson runs matches the discrete-day expectation") {
  // With day stamps, ordered pairs at temporal lag <= t include the same-day
  // ones, so E K(r,t) = pi r^2 (2t+1); this approaches the continuous-time
  // 2 pi r^2 t baseline at larger lags (ratio 1 + 1/(2t)).
  const ObservationWindow w = ObservationWindow::rectangle(0, 0, 1, 1);
  const std::vector<double> r_grid = {0.05, 0.1, 0.15};
  const std::vector<int> t_grid = {0, 1, 2, 3};
  const int n_sim = 80, T = 8;
  const double rate = 30.0;
  const auto lam = [&](const Point&, int) { return rate; };

  std::vector<std::vector<double>> mean(r_grid.size(), std::vector<double>(t_grid.size(), 0.0));
  for (int s = 0; s < n_sim; ++s) {
    Rng rng(seed_stream(23, "k-poisson", s));
    const SpatioTemporalPointPattern pat = uniform_poisson(w, 1, T, rate, rng);
    const KSurface K = st_inhom_K(pat, lam, r_grid, t_grid);
    for (size_t ri = 0; ri < r_grid.size(); ++ri)
      for (size_t ti = 0; ti < t_grid.size(); ++ti) mean[ri][ti] += K.values[ri][ti] / n_sim;
  }
  for (size_t ri = 0; ri < r_grid.size(); ++ri)
    for (size_t ti = 0; ti < t_grid.size(); ++ti) {
      const double expect = kPi * r_grid[ri] * r_grid[ri] * (2.0 * t_grid[ti] + 1.0);
      CAPTURE(r_grid[ri]);
      CAPTURE(t_grid[ti]);
      CHECK(std::abs(mean[ri][ti] - expect) < 0.08 * expect);
    }
}

TEST_CASE("single-pair pair correlation matches the closed form") {
  const ObservationWindow w = ObservationWindow::rectangle(0, 0, 1, 1);
  const SpatialDensity dens = constant_density(w, 4, 4);
  CHECK(dens.value_at(0.3, 0.7) == doctest::Approx(1.0).epsilon(1e-12));

  const SpatioTemporalPointPattern pat({{0.45, 0.5, 1}, {0.55, 0.5, 1}}, w, 1, 1);
  const double l1 = 5.0, h_s = 0.05, d = 0.1;
  const std::vector<double> u_grid = {0.06, 0.08, 0.10, 0.12, 0.15};
  const PcfCurve g = time_averaged_pcf(pat, dens, {l1}, u_grid, h_s);
  REQUIRE(g.u_grid == u_grid);
  CHECK(g.h_s == h_s);
  for (size_t k = 0; k < u_grid.size(); ++k) {
    const double x = (u_grid[k] - d) / h_s;
    const double kern = std::abs(x) < 1.0 ? 0.75 * (1.0 - x * x) / h_s : 0.0;
    const double expect = 2.0 * kern / (l1 * l1 * 2.0 * kPi * u_grid[k]);
    CAPTURE(u_grid[k]);
    CHECK(g.values[k] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(g.values[k] >= 0.0);
  }
  CHECK(g.values[4] < 1e-12);  // kernel support edge, zero up to rounding
}

TEST_CASE("days with fewer than two events contribute nothing to the pair correlation") {
  const ObservationWindow w = ObservationWindow::rectangle(0, 0, 1, 1);
  const SpatialDensity dens = constant_density(w, 4, 4);
  const std::vector<double> u_grid = {0.08, 0.1, 0.12};
  const SpatioTemporalPointPattern a({{0.45, 0.5, 1}, {0.55, 0.5, 1}, {0.2, 0.2, 2}}, w, 1, 2);
  const SpatioTemporalPointPattern b({{0.45, 0.5, 1}, {0.55, 0.5, 1}, {0.8, 0.3, 2}}, w, 1, 2);
  // The lambda1 value on the singleton day is irrelevant too.
  const PcfCurve ga = time_averaged_pcf(a, dens, {5.0, 1.0}, u_grid, 0.05);
  const PcfCurve gb = time_averaged_pcf(b, dens, {5.0, 99.0}, u_grid, 0.05);
  for (size_t k = 0; k < u_grid.size(); ++k) CHECK(ga.values[k] == gb.values[k]);
}

TEST_CASE("pair correlation near 1 for homogeneous Poisson data") {
  const ObservationWindow w = ObservationWindow::rectangle(0, 0, 1, 1);
  const SpatialDensity dens = constant_density(w, 6, 6);
  const std::vector<double> u_grid = {0.10, 0.15, 0.20, 0.25};
  const int n_sim = 40, T = 5;
  const double rate = 40.0;
  std::vector<double> mean(u_grid.size(), 0.0);
  for (int s = 0; s < n_sim; ++s) {
    Rng rng(seed_stream(24, "pcf-poisson", s));
    const SpatioTemporalPointPattern pat = uniform_poisson(w, 1, T, rate, rng);
    const PcfCurve g =
        time_averaged_pcf(pat, dens, std::vector<double>(T, rate), u_grid, 0.05, 2);
    for (size_t k = 0; k < u_grid.size(); ++k) mean[k] += g.values[k] / n_sim;
  }
  for (size_t k = 0; k < u_grid.size(); ++k) {
    CAPTURE(u_grid[k]);
    CHECK(std::abs(mean[k] - 1.0) < 0.12);
  }
}

TEST_CASE("pair correlation input validation") {
  const ObservationWindow w = ObservationWindow::rectangle(0, 0, 1, 1);
  const SpatialDensity dens = constant_density(w, 4, 4);
  const SpatioTemporalPointPattern pat({{0.45, 0.5, 1}, {0.55, 0.5, 1}}, w, 1, 1);
  CHECK_THROWS_AS(time_averaged_pcf(pat, dens, {5.0}, {0.0, 0.1}, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(time_averaged_pcf(pat, dens, {5.0}, {-0.1}, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(time_averaged_pcf(pat, dens, {5.0}, {0.1}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(time_averaged_pcf(pat, dens, {5.0, 1.0}, {0.1}, 0.05), std::invalid_argument);
  try {
    time_averaged_pcf(pat, dens, {0.0}, {0.1}, 0.05);
    FAIL("expected a lambda1 error");
  } catch (const std::runtime_error& ex) {
    CHECK(std::string(ex.what()).find("day index 0") != std::string::npos);
  }
  // Density that does not cover the events evaluates to zero there.
  const SpatialDensity small =
      constant_density(ObservationWindow::rectangle(0, 0, 0.5, 0.5), 4, 4);
  CHECK_THROWS_AS(time_averaged_pcf(pat, small, {5.0}, {0.1}, 0.05), std::runtime_error);
}

TEST_CASE("bandwidth rule of thumb") {
  CHECK(stoyan_bandwidth(100.0) == doctest::Approx(0.015).epsilon(1e-15));
  CHECK(stoyan_bandwidth(400.0) == doctest::Approx(0.0075).epsilon(1e-15));
  CHECK(stoyan_bandwidth(100.0, 0.3) == doctest::Approx(0.03).epsilon(1e-15));
  CHECK_THROWS_AS(stoyan_bandwidth(0.0), std::invalid_argument);
  CHECK_THROWS_AS(stoyan_bandwidth(-5.0), std::invalid_argument);
}

TEST_CASE("autocovariance closed forms") {
  {
    const AutocovCurve c = empirical_autocov({{1, 3}, {2, 4}}, {3.0, 4.0}, 1);
    REQUIRE(c.v_grid == std::vector<int>{1});
    CHECK(c.values[0] == 0.0);  // 12 - 12
  }
  {
    // Counts equal to the fitted series cancel exactly at every lag.
    const AutocovCurve c =
        empirical_autocov({{1, 2}, {2, 5}, {3, 3}, {4, 7}}, {2.0, 5.0, 3.0, 7.0}, 3);
    for (double v : c.values) CHECK(v == 0.0);
  }
  {
    const AutocovCurve c =
        empirical_autocov({{1, 1}, {2, 2}, {3, 3}, {4, 4}}, {1.0, 1.0, 1.0, 1.0}, 3);
    CHECK(c.values[0] == doctest::Approx(17.0 / 3.0).epsilon(1e-15));  // (1+5+11)/3
    CHECK(c.values[1] == doctest::Approx(4.5).epsilon(1e-15));         // (2+7)/2
    CHECK(c.values[2] == doctest::Approx(3.0).epsilon(1e-15));         // 4-1
    CHECK(c.lambda1_product_mean(1) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(c.lambda1_product_mean(0), std::invalid_argument);
    CHECK_THROWS_AS(c.lambda1_product_mean(4), std::invalid_argument);
  }
  {
    AutocovCurve c;
    c.lambda1 = {1.0, 2.0, 3.0, 4.0};
    CHECK(c.lambda1_product_mean(1) == doctest::Approx(20.0 / 3.0).epsilon(1e-15));
  }
  CHECK_THROWS_AS(empirical_autocov({{1, 1}, {2, 2}}, {1.0, 1.0}, 2), std::invalid_argument);
  CHECK_THROWS_AS(empirical_autocov({{1, 1}, {2, 2}}, {1.0, 1.0}, 0), std::invalid_argument);
  CHECK_THROWS_AS(empirical_autocov({{1, 1}, {2, 2}}, {1.0}, 1), std::invalid_argument);
}

TEST_CASE("autocovariance of a latent chain decays like the generating model") {
  // Counts N_t ~ Poisson(l1 exp(Z_t)) with Z an AR(1) with exponential
  // correlation exp(-v/theta) and mean -sigma2/2, so
  // Cov(N_t, N_{t-v}) = l1^2 (exp(sigma2 exp(-v/theta)) - 1).
  const double l1 = 50.0, sigma2 = 0.8, theta = 4.0;
  const int T = 60000;
  const double w = std::exp(-1.0 / theta);
  Rng rng(seed_stream(25, "autocov-lgcp"));
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<std::pair<int, long long>> daily(T);
  double z = -sigma2 / 2.0 + std::sqrt(sigma2) * nd(rng);
  for (int t = 0; t < T; ++t) {
    if (t > 0) z = w * z + (1.0 - w) * (-sigma2 / 2.0) + std::sqrt(sigma2 * (1 - w * w)) * nd(rng);
    std::poisson_distribution<long long> pois(l1 * std::exp(z));
    daily[t] = {t + 1, pois(rng)};
  }
  const AutocovCurve c = empirical_autocov(daily, std::vector<double>(T, l1), 8);
  auto truth = [&](int v) {
    return l1 * l1 * (std::exp(sigma2 * std::exp(-v / theta)) - 1.0);
  };
  for (int v : {1, 2, 4, 8}) {
    CAPTURE(v);
    const double band = (v < 8 ? 0.25 : 0.35) * truth(v);
    CHECK(std::abs(c.values[v - 1] - truth(v)) < band);
  }
  CHECK(c.values[0] > c.values[3]);
  CHECK(c.values[3] > c.values[7]);
}

TEST_CASE("cross-K: three-point toy case and brute-force oracle") {
  const ObservationWindow w = ObservationWindow::rectangle(0, 0, 1, 1);
  {
    const std::vector<Point> p1 = {{0.4, 0.5}, {0.6, 0.5}};
    const std::vector<Point> p2 = {{0.5, 0.5}};
    const BivariateK bk = bivariate_K(p1, p2, w, {0.05, 0.1, 0.2});
    CHECK(bk.k12[0] == 0.0);
    CHECK(bk.k12[1] == doctest::Approx(1.0).epsilon(1e-12));  // area/(2*1) * 2 pairs
    CHECK(bk.k12[2] == doctest::Approx(1.0).epsilon(1e-12));
    for (size_t k = 0; k < 3; ++k) CHECK(bk.k21[k] == doctest::Approx(bk.k12[k]).epsilon(1e-12));
  }
  {
    Rng rng(seed_stream(26, "xk-oracle"));
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<Point> p1(30), p2(25);
    for (auto& s : p1) s = {u(rng), u(rng)};
    for (auto& s : p2) s = {u(rng), u(rng)};
    const std::vector<double> u_grid = {0.05, 0.1, 0.2, 0.35, 0.5};
    const BivariateK bk = bivariate_K(p1, p2, w, u_grid);
    for (size_t k = 0; k < u_grid.size(); ++k) {
      double s12 = 0.0, s21 = 0.0;
      for (const Point& a : p1)
        for (const Point& b : p2) {
          const double d = std::sqrt(sq_dist(a, b));
          if (d == 0.0 || d > u_grid[k]) continue;
          s12 += ripley_weight_spatial(a, b, w);
          s21 += ripley_weight_spatial(b, a, w);
        }
      const double norm = w.area() / (30.0 * 25.0);
      CAPTURE(u_grid[k]);
      CHECK(bk.k12[k] == doctest::Approx(s12 * norm).epsilon(1e-10));
      CHECK(bk.k21[k] == doctest::Approx(s21 * norm).epsilon(1e-10));
    }
  }
}

TEST_CASE("cross-K is zero when the patterns are far apart and near pi u^2 when independent") {
  {
    const ObservationWindow big = ObservationWindow::rectangle(0, 0, 200, 1);
    std::vector<Point> p1, p2;
    Rng rng(seed_stream(27, "xk-far"));
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 20; ++i) {
      const Point s{u(rng), u(rng)};
      p1.push_back(s);
      p2.push_back({s.x + 100.0, s.y});
    }
    const BivariateK bk = bivariate_K(p1, p2, big, {0.2, 0.5, 1.0});
    for (double v : bk.k12) CHECK(v == 0.0);
    for (double v : bk.k21) CHECK(v == 0.0);
  }
  {
    const ObservationWindow w = ObservationWindow::rectangle(0, 0, 1, 1);
    const std::vector<double> u_grid = {0.1, 0.2, 0.3};
    std::vector<double> mean(u_grid.size(), 0.0);
    const int n_sim = 60;
    for (int s = 0; s < n_sim; ++s) {
      Rng rng(seed_stream(28, "xk-poisson", s));
      std::uniform_real_distribution<double> u(0, 1);
      std::poisson_distribution<int> pois(60.0);
      std::vector<Point> p1(std::max(1, pois(rng))), p2(std::max(1, pois(rng)));
      for (auto& p : p1) p = {u(rng), u(rng)};
      for (auto& p : p2) p = {u(rng), u(rng)};
      const BivariateK bk = bivariate_K(p1, p2, w, u_grid);
      for (size_t k = 0; k < u_grid.size(); ++k) mean[k] += bk.k12[k] / n_sim;
    }
    for (size_t k = 0; k < u_grid.size(); ++k) {
      const double expect = kPi * u_grid[k] * u_grid[k];
      CAPTURE(u_grid[k]);
      CHECK(std::abs(mean[k] - expect) < 0.10 * expect);
    }
  }
  CHECK_THROWS_AS(bivariate_K({}, {{0.5, 0.5}}, ObservationWindow::rectangle(0, 0, 1, 1), {0.1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(bivariate_K({{0.5, 0.5}}, {}, ObservationWindow::rectangle(0, 0, 1, 1), {0.1}),
                  std::invalid_argument);
}

TEST_CASE("permutation test: degenerate cases and determinism") {
  const ObservationWindow w = ObservationWindow::rectangle(0, 0, 1, 1);
  const auto lam = [](const Point&, int) { return 20.0; };
  const std::vector<double> r_grid = {0.05, 0.1, 0.15};
  const std::vector<int> t_grid = {0, 1, 2};

  // All stamps identical: permutations cannot change the statistic.
  {
    Rng rng(seed_stream(31, "mc-same"));
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<Event> ev;
    for (int i = 0; i < 30; ++i) ev.push_back({u(rng), u(rng), 3});
    const SpatioTemporalPointPattern pat(std::move(ev), w, 1, 5);
    Rng mc(seed_stream(31, "mc-same-run"));
    const McTestResult res = spacetime_mc_test(pat, lam, 10, r_grid, t_grid, mc);
    REQUIRE(res.permuted_statistics.size() == 10);
    for (double s : res.permuted_statistics) CHECK(s == res.observed_statistic);
    CHECK(res.fraction_below == 0.0);
  }

  // A single permutation yields a fraction of exactly 0 or 1.
  {
    Rng gen(seed_stream(32, "mc-one"));
    const SpatioTemporalPointPattern pat = uniform_poisson(w, 1, 5, 20.0, gen);
    Rng mc(seed_stream(32, "mc-one-run"));
    const McTestResult res = spacetime_mc_test(pat, lam, 1, r_grid, t_grid, mc);
    CHECK((res.fraction_below == 0.0 || res.fraction_below == 1.0));
  }

  // Same seed, same answer.
  {
    Rng gen(seed_stream(33, "mc-det"));
    const SpatioTemporalPointPattern pat = uniform_poisson(w, 1, 5, 20.0, gen);
    Rng mc1(seed_stream(33, "mc-det-run"));
    Rng mc2(seed_stream(33, "mc-det-run"));
    const McTestResult a = spacetime_mc_test(pat, lam, 7, r_grid, t_grid, mc1);
    const McTestResult b = spacetime_mc_test(pat, lam, 7, r_grid, t_grid, mc2);
    CHECK(a.observed_statistic == b.observed_statistic);
    CHECK(a.fraction_below == b.fraction_below);
    for (size_t k = 0; k < a.permuted_statistics.size(); ++k)
      CHECK(a.permuted_statistics[k] == b.permuted_statistics[k]);
  }

  {
    Rng gen(seed_stream(34, "mc-arg"));
    const SpatioTemporalPointPattern pat = uniform_poisson(w, 1, 5, 20.0, gen);
    Rng mc(seed_stream(34, "mc-arg-run"));
    CHECK_THROWS_AS(spacetime_mc_test(pat, lam, 0, r_grid, t_grid, mc), std::invalid_argument);
  }
}

TEST_CASE("envelope bounds every replicate and reports simulator failures") {
  // Simulator k returns the point (k, -k); the statistic echoes it.
  {
    int counter = 0;
    const auto simulate = [&](Rng&) {
      const double k = counter++;
      return std::vector<Point>{{k, -k}};
    };
    const auto statistic = [](const std::vector<Point>& p) {
      return std::vector<double>{p[0].x, p[0].y};
    };
    Rng rng(seed_stream(41, "env"));
    const Envelope env = envelope(simulate, statistic, 6, rng);
    CHECK(env.lo == std::vector<double>{0.0, -5.0});
    CHECK(env.hi == std::vector<double>{5.0, 0.0});
  }
  // Constant statistic: lo == hi.
  {
    const auto simulate = [](Rng&) { return std::vector<Point>{}; };
    const auto statistic = [](const std::vector<Point>&) {
      return std::vector<double>{2.5, 2.5};
    };
    Rng rng(seed_stream(42, "env-const"));
    const Envelope env = envelope(simulate, statistic, 5, rng);
    CHECK(env.lo == env.hi);
    CHECK(env.lo == std::vector<double>{2.5, 2.5});
  }
  // Failure in replicate 3 is reported with its index.
  {
    int counter = 0;
    const auto simulate = [&](Rng&) -> std::vector<Point> {
      if (counter++ == 3) throw std::runtime_error("boom");
      return {};
    };
    const auto statistic = [](const std::vector<Point>&) { return std::vector<double>{1.0}; };
    Rng rng(seed_stream(43, "env-fail"));
    try {
      envelope(simulate, statistic, 8, rng);
      FAIL("expected a propagated failure");
    } catch (const std::runtime_error& ex) {
      const std::string msg = ex.what();
      CHECK(msg.find("simulation 3") != std::string::npos);
      CHECK(msg.find("boom") != std::string::npos);
    }
  }
  {
    const auto simulate = [](Rng&) { return std::vector<Point>{}; };
    const auto statistic = [](const std::vector<Point>&) { return std::vector<double>{1.0}; };
    Rng rng(seed_stream(44, "env-arg"));
    CHECK_THROWS_AS(envelope(simulate, statistic, 1, rng), std::invalid_argument);
  }
}
