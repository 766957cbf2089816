#pragma once

#include <vector>

#include "lgcp/grid.hpp"
#include "lgcp/point_pattern.hpp"

namespace lgcp {

// Quartic kernel (1 - u^2/2)^2 on |u| <= sqrt(2), else 0.
double quartic_kernel(double u);

// Raster value at each centroid s: (1/h) * sum_i quartic(||s - s_i|| / h).
// The scalar kernel is applied to the radial distance; the overall scale washes
// out in normalize_to_density.  No edge correction.
Raster kernel_intensity_raster(const SpatioTemporalPointPattern& pat, const GridSpec& grid,
                               double h, int n_threads = 1);

struct SpatialDensity {
  Raster raster;             // units Density; masked cells integrate to 1
  double bandwidth = 0.0;
  double normalization = 0.0;  // divisor applied to the raw raster

  // Density value at a location: value of the containing cell (0 outside mask).
  double value_at(double x, double y) const;
};

SpatialDensity normalize_to_density(const Raster& raster, double bandwidth);

// Epanechnikov temporal kernel intensity at time t:
// (1/h_t) * sum_i 0.75 * (1 - ((t - t_i)/h_t)^2)_+ .
double epanechnikov_temporal_intensity(const std::vector<int>& times, double h_t, double t);

}  // namespace lgcp
