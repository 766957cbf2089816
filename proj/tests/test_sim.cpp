#include <doctest.h>

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "lgcp/covariance.hpp"
#include "lgcp/rng.hpp"
#include "lgcp/sim.hpp"

using namespace lgcp;

namespace {

GridSpec make_grid(int m, int p, double dx, double dy) {
  GridSpec g;
  g.x_min = 0.0;
  g.y_min = 0.0;
  g.dx = dx;
  g.dy = dy;
  g.m = m;
  g.p = p;
  g.mask.assign(static_cast<size_t>(m) * p, 1);
  return g;
}

double poisson_pmf(int k, double mu) {
  return std::exp(-mu + k * std::log(mu) - std::lgamma(k + 1.0));
}

// Chi-square statistic of observed counts against Poisson(mu) with the last
// bin holding the upper tail; bins are {0, .., n_bins-2, >= n_bins-1}.
double chi_square_vs_poisson(const std::vector<int>& outcomes, double mu, int n_bins) {
  std::vector<double> observed(n_bins, 0.0);
  for (int v : outcomes) observed[std::min(v, n_bins - 1)] += 1.0;
  const double n = static_cast<double>(outcomes.size());
  double stat = 0.0, tail = 1.0;
  for (int b = 0; b < n_bins - 1; ++b) {
    const double e = n * poisson_pmf(b, mu);
    tail -= poisson_pmf(b, mu);
    stat += (observed[b] - e) * (observed[b] - e) / e;
  }
  const double e_tail = n * tail;
  stat += (observed[n_bins - 1] - e_tail) * (observed[n_bins - 1] - e_tail) / e_tail;
  return stat;
}

}  // namespace

TEST_CASE("zero and negative intensities are handled at the cell level") {
  auto g = make_grid(5, 4, 0.2, 0.25);
  Raster zero(g, 0.0, RasterUnits::IntensityPerArea);
  Rng rng = seed_stream(100, "sim-zero");
  for (int k = 0; k < 50; ++k) CHECK(simulate_poisson_from_raster(zero, rng).empty());

  Raster bad(g, 1.0, RasterUnits::IntensityPerArea);
  bad.at(1, 0) = -0.5;
  CHECK_THROWS_WITH_AS(simulate_poisson_from_raster(bad, rng),
                       "negative intensity in cell (1,0)", std::invalid_argument);

  // a masked-out negative cell is never touched
  auto gm = make_grid(2, 2, 0.5, 0.5);
  gm.mask[gm.idx(1, 1)] = 0;
  Raster masked(gm, 1.0, RasterUnits::IntensityPerArea);
  masked.values[gm.idx(1, 1)] = -3.0;
  CHECK_NOTHROW(simulate_poisson_from_raster(masked, rng));
}

TEST_CASE("total counts follow the raster's integrated mass") {
  // constant raster integrating to 100 over the unit square
  auto g = make_grid(10, 10, 0.1, 0.1);
  Raster r(g, 100.0, RasterUnits::IntensityPerArea);
  Rng rng = seed_stream(101, "sim-mass");
  const int n_sims = 1000;
  double acc = 0.0;
  for (int k = 0; k < n_sims; ++k) {
    const auto pts = simulate_poisson_from_raster(r, rng);
    acc += static_cast<double>(pts.size());
    for (const Point& s : pts) {
      CHECK(s.x >= 0.0);
      CHECK(s.x < 1.0);
      CHECK(s.y >= 0.0);
      CHECK(s.y < 1.0);
    }
  }
  CHECK(std::abs(acc / n_sims - 100.0) < 4.0 * std::sqrt(100.0 / n_sims));
}

TEST_CASE("per-cell counts match the exact Poisson law") {
  // four cells with distinct means mu = value * cell_area
  auto g = make_grid(2, 2, 0.5, 0.5);
  Raster r(g, 0.0, RasterUnits::IntensityPerArea);
  r.at(0, 0) = 1.2;   // mu 0.3
  r.at(0, 1) = 3.2;   // mu 0.8
  r.at(1, 0) = 6.0;   // mu 1.5
  r.at(1, 1) = 10.0;  // mu 2.5

  Rng rng = seed_stream(102, "sim-pmf");
  const int n_sims = 10000;
  std::vector<std::vector<int>> counts(4);
  std::vector<double> xoff;  // within-cell offsets of cell (1,1)
  for (int k = 0; k < n_sims; ++k) {
    std::vector<int> cell(4, 0);
    for (const Point& s : simulate_poisson_from_raster(r, rng)) {
      int i, j;
      g.cell_of(s.x, s.y, i, j);
      ++cell[g.idx(i, j)];
      if (i == 1 && j == 1) xoff.push_back((s.x - 0.5) / 0.5);
    }
    for (int c = 0; c < 4; ++c) counts[c].push_back(cell[c]);
  }

  // 99th-percentile chi-square critical values by degrees of freedom
  CHECK(chi_square_vs_poisson(counts[g.idx(0, 0)], 0.3, 3) < 9.2103);    // df 2
  CHECK(chi_square_vs_poisson(counts[g.idx(0, 1)], 0.8, 4) < 11.3449);   // df 3
  CHECK(chi_square_vs_poisson(counts[g.idx(1, 0)], 1.5, 5) < 13.2767);   // df 4
  CHECK(chi_square_vs_poisson(counts[g.idx(1, 1)], 2.5, 7) < 16.8119);   // df 6

  // placement is uniform inside the emitting cell
  REQUIRE(xoff.size() > 20000);
  double mean = 0.0;
  for (double v : xoff) mean += v;
  mean /= xoff.size();
  CHECK(std::abs(mean - 0.5) < 4.0 / std::sqrt(12.0 * xoff.size()));
  CHECK(*std::min_element(xoff.begin(), xoff.end()) >= 0.0);
  CHECK(*std::max_element(xoff.begin(), xoff.end()) < 1.0);
}

TEST_CASE("disjoint cells emit independent counts") {
  auto g = make_grid(2, 1, 1.0, 1.0);  // two unit cells side by side
  Raster r(g, 0.0, RasterUnits::IntensityPerArea);
  r.at(0, 0) = 2.0;
  r.at(1, 0) = 3.0;
  Rng rng = seed_stream(103, "sim-indep");
  const int n = 4000;
  std::vector<double> a(n), b(n);
  for (int k = 0; k < n; ++k) {
    int ca = 0, cb = 0;
    for (const Point& s : simulate_poisson_from_raster(r, rng)) (s.x < 1.0 ? ca : cb)++;
    a[k] = ca;
    b[k] = cb;
  }
  double ma = 0, mb = 0;
  for (int k = 0; k < n; ++k) {
    ma += a[k];
    mb += b[k];
  }
  ma /= n;
  mb /= n;
  double cov = 0;
  for (int k = 0; k < n; ++k) cov += (a[k] - ma) * (b[k] - mb);
  cov /= n - 1;
  CHECK(std::abs(cov) < 4.0 * std::sqrt(2.0 * 3.0 / n));
}

TEST_CASE("independent thinning of a scaled raster recovers the base law") {
  auto g = make_grid(3, 3, 1.0 / 3, 1.0 / 3);
  const double mass = 2.0, c = 4.0;
  Raster scaled(g, c * mass, RasterUnits::IntensityPerArea);  // integrates to c * mass
  Rng rng = seed_stream(104, "sim-thin");
  std::bernoulli_distribution keep(1.0 / c);
  const int n_sims = 10000;
  std::vector<int> totals(n_sims, 0);
  for (int k = 0; k < n_sims; ++k)
    for (const Point& s : simulate_poisson_from_raster(scaled, rng))
      if (keep(rng)) ++totals[k];
  // thinned totals are exactly Poisson(mass); df 5 critical value at 1%
  CHECK(chi_square_vs_poisson(totals, mass, 6) < 15.0863);
}

TEST_CASE("window rejection keeps boundary-cell points inside") {
  // triangular window: boundary cells along the hypotenuse are partly outside
  ObservationWindow tri({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
  GridSpec g = GridSpec::cover(tri, 4, 4);
  REQUIRE(g.masked_count() > 0);
  REQUIRE(g.masked_count() < 16);
  Raster r(g, 400.0, RasterUnits::IntensityPerArea);

  Rng rng = seed_stream(105, "sim-window");
  bool saw_outside = false;
  for (int k = 0; k < 50; ++k)
    for (const Point& s : simulate_poisson_from_raster(r, rng))
      if (!tri.contains(s)) saw_outside = true;
  CHECK(saw_outside);  // without the window the hypotenuse cells leak

  Rng rng2 = seed_stream(105, "sim-window", 1);
  for (int k = 0; k < 50; ++k)
    for (const Point& s : simulate_poisson_from_raster(r, rng2, &tri)) CHECK(tri.contains(s));
}

TEST_CASE("field series is a stationary chain with the exponential correlation") {
  auto g = make_grid(4, 4, 0.25, 0.25);
  auto ext = extend_grid(g);
  CovarianceParams cp;
  cp.sigma2 = 0.8;
  cp.phi = 0.2;
  cp.theta = 1.5;
  auto spec = circulant_eigenvalues(ext, cp);
  REQUIRE_FALSE(spec.negative_flagged);
  const double beta = std::exp(-1.0 / cp.theta);
  const double mu = -0.5 * cp.sigma2;

  Rng rng = seed_stream(106, "sim-series");
  const int n = 3000;
  std::vector<double> z0(n), z1(n), z2(n);
  double exp_acc = 0.0;
  for (int k = 0; k < n; ++k) {
    auto series = sample_field_series(spec, cp.theta, 3, rng);
    REQUIRE(series.size() == 3);
    z0[k] = series[0].base.at(1, 2);
    z1[k] = series[1].base.at(1, 2);
    z2[k] = series[2].base.at(1, 2);
    exp_acc += std::exp(series[2].base.at(3, 0));
    // the base raster is the corner restriction of the extended field
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        CHECK(series[1].base.at(i, j) ==
              series[1].extended[static_cast<size_t>(i) * ext.N + j]);
  }
  auto moments = [&](const std::vector<double>& v, double& m, double& var) {
    m = 0;
    for (double x : v) m += x;
    m /= v.size();
    var = 0;
    for (double x : v) var += (x - m) * (x - m);
    var /= v.size() - 1;
  };
  double m0, v0, m1, v1, m2, v2;
  moments(z0, m0, v0);
  moments(z1, m1, v1);
  moments(z2, m2, v2);
  const double mean_band = 4.0 * std::sqrt(cp.sigma2 / n);
  CHECK(std::abs(m0 - mu) < mean_band);
  CHECK(std::abs(m1 - mu) < mean_band);
  CHECK(std::abs(m2 - mu) < mean_band);
  // stationarity: every slice keeps the prior variance
  CHECK(std::abs(v0 - cp.sigma2) < 0.10 * cp.sigma2);
  CHECK(std::abs(v1 - cp.sigma2) < 0.10 * cp.sigma2);
  CHECK(std::abs(v2 - cp.sigma2) < 0.10 * cp.sigma2);
  // lag correlations decay as beta^lag
  double c01 = 0, c02 = 0;
  for (int k = 0; k < n; ++k) {
    c01 += (z0[k] - m0) * (z1[k] - m1);
    c02 += (z0[k] - m0) * (z2[k] - m2);
  }
  c01 /= (n - 1) * std::sqrt(v0 * v1);
  c02 /= (n - 1) * std::sqrt(v0 * v2);
  CHECK(std::abs(c01 - beta) < 0.06);
  CHECK(std::abs(c02 - beta * beta) < 0.06);
  // lognormal mean-one identity at the default mean offset
  CHECK(std::abs(exp_acc / n - 1.0) < 0.08);

  CHECK_THROWS_AS(sample_field_series(spec, cp.theta, 0, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_field_series(spec, 0.0, 3, rng), std::invalid_argument);
}

TEST_CASE("degenerate field reduces the dataset to an inhomogeneous Poisson process") {
  auto window = ObservationWindow::rectangle(0, 0, 1, 1);
  auto g = make_grid(8, 8, 0.125, 0.125);
  // density increasing in x, normalized to integrate to one
  Raster density(g, 0.0, RasterUnits::Density);
  double total = 0.0;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      density.at(i, j) = 1.0 + g.cx(i);
      total += density.at(i, j) * g.cell_area();
    }
  for (double& v : density.values) v /= total;
  REQUIRE(density.masked_integral() == doctest::Approx(1.0).epsilon(1e-12));

  CovarianceParams cp;
  cp.sigma2 = 0.0;
  cp.phi = 0.2;
  cp.theta = 1.5;
  const std::vector<double> lambda1 = {40.0, 60.0, 50.0, 45.0, 55.0};

  double p_left = 0.0;  // mass of the density on x < 1/2
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 8; ++j) p_left += density.at(i, j) * g.cell_area();

  Rng rng = seed_stream(107, "sim-flat-lgcp");
  const int n_sims = 400;
  std::vector<double> day_sum(5, 0.0);
  long long left = 0, grand = 0;
  for (int k = 0; k < n_sims; ++k) {
    auto pat = simulate_lgcp_dataset(cp, density, lambda1, window, 10, rng);
    CHECK(pat.t0() == 10);
    CHECK(pat.t1() == 14);
    for (const Event& e : pat.events()) {
      REQUIRE(e.t >= 10);
      REQUIRE(e.t <= 14);
      CHECK(window.contains({e.x, e.y}));
      day_sum[e.t - 10] += 1.0;
      ++grand;
      if (e.x < 0.5) ++left;
    }
  }
  for (int d = 0; d < 5; ++d)
    CHECK(std::abs(day_sum[d] / n_sims - lambda1[d]) < 4.0 * std::sqrt(lambda1[d] / n_sims));
  const double frac = static_cast<double>(left) / grand;
  CHECK(std::abs(frac - p_left) < 4.0 * std::sqrt(p_left * (1.0 - p_left) / grand));

  CHECK_THROWS_AS(simulate_lgcp_dataset(cp, density, {}, window, 0, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(simulate_lgcp_dataset(cp, density, {5.0, 0.0}, window, 0, rng),
                  std::invalid_argument);
  Raster not_density(g, 1.0, RasterUnits::IntensityPerArea);
  CHECK_THROWS_AS(simulate_lgcp_dataset(cp, not_density, lambda1, window, 0, rng),
                  std::invalid_argument);
  // an unusable embedding propagates up from the spectrum
  CovarianceParams wide = cp;
  wide.sigma2 = 1.0;
  wide.phi = 50.0;
  CHECK_THROWS_AS(simulate_lgcp_dataset(wide, density, lambda1, window, 0, rng),
                  std::runtime_error);
}

TEST_CASE("daily counts show the clustering variance of the latent field") {
  auto window = ObservationWindow::rectangle(0, 0, 1, 1);
  auto g = make_grid(6, 6, 1.0 / 6, 1.0 / 6);
  Raster density(g, 1.0, RasterUnits::Density);
  CovarianceParams cp;
  cp.sigma2 = 0.8;
  cp.phi = 0.3;
  cp.theta = 1.5;
  const double lambda1 = 120.0;

  // cell-level truth: Var N = lambda1 + lambda1^2 (S(1) - 1) with S the
  // pair-class sum over this raster (base-grid pairs never wrap on the torus)
  RasterPairStructure pairs(density, cp.sigma2, cp.phi);
  const double s1 = pairs.sum_exp(1.0);
  const double truth_var = lambda1 + lambda1 * lambda1 * (s1 - 1.0);
  REQUIRE(s1 > 1.0);

  Rng rng = seed_stream(108, "sim-cluster");
  const int n = 2000;
  std::vector<double> counts(n);
  double mean = 0.0;
  for (int k = 0; k < n; ++k) {
    auto pat = simulate_lgcp_dataset(cp, density, {lambda1}, window, 0, rng);
    counts[k] = static_cast<double>(pat.size());
    mean += counts[k];
  }
  mean /= n;
  double var = 0.0;
  for (double v : counts) var += (v - mean) * (v - mean);
  var /= n - 1;

  CHECK(std::abs(mean - lambda1) < 4.0 * std::sqrt(truth_var / n));
  CHECK(var > lambda1);  // categorically overdispersed relative to Poisson
  CHECK(std::abs(var - truth_var) < 0.25 * truth_var);
}

TEST_CASE("seeded dataset simulation is reproducible") {
  auto window = ObservationWindow::rectangle(0, 0, 2, 1);
  auto g = make_grid(6, 3, 1.0 / 3, 1.0 / 3);
  Raster density(g, 0.5, RasterUnits::Density);
  CovarianceParams cp;
  cp.sigma2 = 0.5;
  cp.phi = 0.25;
  cp.theta = 2.0;
  const std::vector<double> lambda1 = {30.0, 35.0, 25.0};

  Rng r1 = seed_stream(109, "sim-repro");
  Rng r2 = seed_stream(109, "sim-repro");
  auto p1 = simulate_lgcp_dataset(cp, density, lambda1, window, 5, r1);
  auto p2 = simulate_lgcp_dataset(cp, density, lambda1, window, 5, r2);
  REQUIRE(p1.size() == p2.size());
  for (size_t k = 0; k < p1.size(); ++k) {
    CHECK(p1.events()[k].x == p2.events()[k].x);
    CHECK(p1.events()[k].y == p2.events()[k].y);
    CHECK(p1.events()[k].t == p2.events()[k].t);
  }

  Rng r3 = seed_stream(109, "sim-repro", 1);
  auto p3 = simulate_lgcp_dataset(cp, density, lambda1, window, 5, r3);
  CHECK(p1.size() != p3.size());  // different stream, different realization
}
