#pragma once

#include <vector>

#include "lgcp/covariance.hpp"
#include "lgcp/grf.hpp"
#include "lgcp/intensity.hpp"
#include "lgcp/point_pattern.hpp"
#include "lgcp/rng.hpp"

namespace lgcp {

// Cell-wise Poisson thinning of an intensity raster: per masked-in cell a
// Poisson(value * cell_area) count, points placed uniformly inside the cell.
// Expected total equals the raster's masked Riemann integral.  If the window
// is given, points are rejection-resampled into it (centroid fallback), so
// boundary cells cannot emit points outside the window.
std::vector<Point> simulate_poisson_from_raster(const Raster& raster, Rng& rng,
                                                const ObservationWindow* window = nullptr);

// Full synthetic dataset: one spatial field per day chained by the unit-lag
// AR(1) (beta = exp(-1/theta)) on the extended grid, intensity
// lambda0(c) * lambda1(t) * exp(z_t(c)), cell-wise Poisson placement.
// lambda1_series[k] is the rate for day t0 + k.
SpatioTemporalPointPattern simulate_lgcp_dataset(const CovarianceParams& params,
                                                 const Raster& lambda0_density,
                                                 const std::vector<double>& lambda1_series,
                                                 const ObservationWindow& window, int t0,
                                                 Rng& rng);

// The day-by-day field series used by simulate_lgcp_dataset, exposed so tests
// can compare recovered fields against the generating truth.
std::vector<GrfDraw> sample_field_series(const CirculantSpectrum& spectrum, double theta,
                                         int n_slices, Rng& rng);

}  // namespace lgcp
