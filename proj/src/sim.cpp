#include "lgcp/sim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lgcp {

std::vector<Point> simulate_poisson_from_raster(const Raster& raster, Rng& rng,
                                                const ObservationWindow* window) {
  const GridSpec& g = raster.grid;
  std::vector<Point> out;
  std::uniform_real_distribution<double> ux(0.0, 1.0);
  for (int i = 0; i < g.m; ++i) {
    for (int j = 0; j < g.p; ++j) {
      if (!g.mask[g.idx(i, j)]) continue;
      const double v = raster.at(i, j);
      if (v < 0.0)
        throw std::invalid_argument("negative intensity in cell (" + std::to_string(i) + "," +
                                    std::to_string(j) + ")");
      if (v == 0.0) continue;
      std::poisson_distribution<int> pois(v * g.cell_area());
      const int n = pois(rng);
      const double x0 = g.x_min + i * g.dx, y0 = g.y_min + j * g.dy;
      for (int k = 0; k < n; ++k) {
        Point s{x0 + ux(rng) * g.dx, y0 + ux(rng) * g.dy};
        if (window && !window->contains(s)) {
          bool placed = false;
          for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            s = {x0 + ux(rng) * g.dx, y0 + ux(rng) * g.dy};
            placed = window->contains(s);
          }
          if (!placed) s = {g.cx(i), g.cy(j)};  // masked-in, so the centroid is inside
        }
        out.push_back(s);
      }
    }
  }
  return out;
}

std::vector<GrfDraw> sample_field_series(const CirculantSpectrum& spectrum, double theta,
                                         int n_slices, Rng& rng) {
  if (n_slices < 1) throw std::invalid_argument("need at least one slice");
  if (!(theta > 0.0)) throw std::invalid_argument("theta must be positive");
  const CirculantOperator op(spectrum);
  const double mu = -0.5 * spectrum.params.sigma2;
  const double beta = std::exp(-1.0 / theta);
  const double innov_sd = std::sqrt(1.0 - beta * beta);

  std::vector<GrfDraw> series;
  series.reserve(n_slices);
  series.push_back(sample_grf(op, mu, rng));
  for (int t = 1; t < n_slices; ++t) {
    GrfDraw innov = sample_grf(op, 0.0, rng);
    GrfDraw next;
    next.extended.resize(innov.extended.size());
    const std::vector<double>& prev = series.back().extended;
    for (size_t k = 0; k < next.extended.size(); ++k)
      next.extended[k] = mu + beta * (prev[k] - mu) + innov_sd * innov.extended[k];
    const GridSpec& base = spectrum.ext.base;
    next.base = Raster(base, 0.0, RasterUnits::Field);
    for (int i = 0; i < base.m; ++i)
      for (int j = 0; j < base.p; ++j)
        next.base.at(i, j) = next.extended[static_cast<size_t>(i) * spectrum.ext.N + j];
    series.push_back(std::move(next));
  }
  return series;
}

SpatioTemporalPointPattern simulate_lgcp_dataset(const CovarianceParams& params,
                                                 const Raster& lambda0_density,
                                                 const std::vector<double>& lambda1_series,
                                                 const ObservationWindow& window, int t0,
                                                 Rng& rng) {
  if (lambda1_series.empty()) throw std::invalid_argument("empty lambda1 series");
  for (double l : lambda1_series)
    if (!(l > 0.0)) throw std::invalid_argument("lambda1 must be positive");
  if (lambda0_density.units != RasterUnits::Density)
    throw std::invalid_argument("lambda0 raster must hold a normalized density");

  const GridSpec& g = lambda0_density.grid;
  const ExtendedGrid ext = extend_grid(g);
  const CirculantSpectrum spectrum = circulant_eigenvalues(ext, params);
  const std::vector<GrfDraw> fields =
      sample_field_series(spectrum, params.theta, static_cast<int>(lambda1_series.size()), rng);

  std::vector<Event> events;
  for (size_t k = 0; k < lambda1_series.size(); ++k) {
    Raster intensity(g, 0.0, RasterUnits::IntensityPerArea);
    for (int i = 0; i < g.m; ++i)
      for (int j = 0; j < g.p; ++j)
        if (g.mask[g.idx(i, j)])
          intensity.at(i, j) =
              lambda0_density.at(i, j) * lambda1_series[k] * std::exp(fields[k].base.at(i, j));
    const std::vector<Point> pts = simulate_poisson_from_raster(intensity, rng, &window);
    for (const Point& s : pts) events.push_back({s.x, s.y, t0 + static_cast<int>(k)});
  }
  return SpatioTemporalPointPattern(std::move(events), window,
                                    t0, t0 + static_cast<int>(lambda1_series.size()) - 1);
}

}  // namespace lgcp
