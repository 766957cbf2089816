#include "lgcp/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace lgcp {

GridSpec GridSpec::cover(const ObservationWindow& w, int m, int p) {
  if (m <= 0 || p <= 0) throw std::invalid_argument("grid dimensions must be positive");
  GridSpec g;
  double x0, y0, x1, y1;
  w.bounding_box(x0, y0, x1, y1);
  g.x_min = x0;
  g.y_min = y0;
  g.m = m;
  g.p = p;
  g.dx = (x1 - x0) / m;
  g.dy = (y1 - y0) / p;
  g.mask.assign(static_cast<size_t>(m) * p, 0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < p; ++j)
      g.mask[g.idx(i, j)] = w.contains({g.cx(i), g.cy(j)}) ? 1 : 0;
  return g;
}

bool GridSpec::in_bounds(double x, double y) const {
  return x >= x_min && x <= x_min + m * dx && y >= y_min && y <= y_min + p * dy;
}

void GridSpec::cell_of(double x, double y, int& i, int& j) const {
  i = static_cast<int>(std::floor((x - x_min) / dx));
  j = static_cast<int>(std::floor((y - y_min) / dy));
  if (i == m && x <= x_min + m * dx) i = m - 1;  // clamp outer max edge
  if (j == p && y <= y_min + p * dy) j = p - 1;
  if (i < 0 || i >= m || j < 0 || j >= p)
    throw std::runtime_error("point outside grid bounding box");
}

int GridSpec::masked_count() const {
  int c = 0;
  for (uint8_t f : mask) c += f;
  return c;
}

Raster::Raster(const GridSpec& g, double fill, RasterUnits u) : grid(g), units(u) {
  values.assign(static_cast<size_t>(g.m) * g.p, fill);
  for (size_t k = 0; k < values.size(); ++k)
    if (!grid.mask[k]) values[k] = kNoData;
}

double Raster::masked_integral() const {
  double s = 0.0;
  for (size_t k = 0; k < values.size(); ++k)
    if (grid.mask[k]) s += values[k];
  return s * grid.cell_area();
}

long long CellCountSeries::slice_total(int k) const {
  long long s = 0;
  for (int32_t c : slices[k]) s += c;
  return s;
}

}  // namespace lgcp
