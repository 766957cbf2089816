#include "lgcp/intensity.hpp"

#include <cmath>
#include <stdexcept>

#include "lgcp/parallel.hpp"

namespace lgcp {

double quartic_kernel(double u) {
  // (1 - u^2/2)^2 on |u| <= sqrt(2); the w <= 0 form makes the support edge
  // land exactly on zero (u*u may round above 2 at u = sqrt(2)).
  const double w = 1.0 - 0.5 * u * u;
  return w <= 0.0 ? 0.0 : w * w;
}

Raster kernel_intensity_raster(const SpatioTemporalPointPattern& pat, const GridSpec& grid,
                               double h, int n_threads) {
  if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  Raster out(grid, 0.0, RasterUnits::IntensityPerArea);
  // Masked-out cells still get values (cheap, keeps the brute-force oracle simple);
  // the mask only matters at normalization.
  for (double& v : out.values) v = 0.0;
  const double radius = std::sqrt(2.0) * h;
  const std::vector<Event>& ev = pat.events();

  // Accumulate per-event kernel mass over the cells its support touches.  Chunked
  // over events with per-chunk partial rasters so parallel order never changes sums.
  const int n_chunks_hint = std::max(1, n_threads);
  std::vector<std::vector<double>> partial(
      static_cast<size_t>(4 * n_chunks_hint) + 1,
      std::vector<double>());
  parallel_chunks(0, static_cast<long long>(ev.size()), n_threads,
                  [&](int chunk, long long lo, long long hi) {
    auto& acc = partial[chunk];
    if (acc.empty()) acc.assign(out.values.size(), 0.0);
    for (long long e = lo; e < hi; ++e) {
      const double ex = ev[e].x, ey = ev[e].y;
      int i0 = static_cast<int>(std::floor((ex - radius - grid.x_min) / grid.dx));
      int i1 = static_cast<int>(std::floor((ex + radius - grid.x_min) / grid.dx));
      int j0 = static_cast<int>(std::floor((ey - radius - grid.y_min) / grid.dy));
      int j1 = static_cast<int>(std::floor((ey + radius - grid.y_min) / grid.dy));
      i0 = std::max(i0, 0);
      j0 = std::max(j0, 0);
      i1 = std::min(i1, grid.m - 1);
      j1 = std::min(j1, grid.p - 1);
      for (int i = i0; i <= i1; ++i) {
        const double ddx = grid.cx(i) - ex;
        for (int j = j0; j <= j1; ++j) {
          const double ddy = grid.cy(j) - ey;
          const double u = std::hypot(ddx, ddy) / h;
          if (u <= std::sqrt(2.0)) acc[grid.idx(i, j)] += quartic_kernel(u);
        }
      }
    }
  });
  for (const auto& acc : partial) {
    if (acc.empty()) continue;
    for (size_t k = 0; k < acc.size(); ++k) out.values[k] += acc[k];
  }
  const double inv_h = 1.0 / h;
  for (double& v : out.values) v *= inv_h;
  return out;
}

SpatialDensity normalize_to_density(const Raster& raster, double bandwidth) {
  double mass = 0.0;
  for (size_t k = 0; k < raster.values.size(); ++k)
    if (raster.grid.mask[k]) mass += raster.values[k];
  mass *= raster.grid.cell_area();
  if (!(mass > 0.0)) throw std::runtime_error("raster has zero mass on the window");
  SpatialDensity d;
  d.raster = raster;
  d.raster.units = RasterUnits::Density;
  d.bandwidth = bandwidth;
  d.normalization = mass;
  for (size_t k = 0; k < d.raster.values.size(); ++k) {
    if (raster.grid.mask[k])
      d.raster.values[k] /= mass;
    else
      d.raster.values[k] = kNoData;
  }
  return d;
}

double SpatialDensity::value_at(double x, double y) const {
  const GridSpec& g = raster.grid;
  if (!g.in_bounds(x, y)) return 0.0;
  int i, j;
  g.cell_of(x, y, i, j);
  const double v = raster.at(i, j);
  return (v == kNoData) ? 0.0 : v;
}

double epanechnikov_temporal_intensity(const std::vector<int>& times, double h_t, double t) {
  if (!(h_t > 0.0)) throw std::invalid_argument("temporal bandwidth must be positive");
  double s = 0.0;
  for (int ti : times) {
    const double u = (t - ti) / h_t;
    const double w = 1.0 - u * u;
    if (w > 0.0) s += 0.75 * w;
  }
  return s / h_t;
}

}  // namespace lgcp
