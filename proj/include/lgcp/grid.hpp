#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lgcp/geometry.hpp"

namespace lgcp {

// Regular lattice over the window's bounding rectangle.  Cell (i,j) spans
// [x_min+i*dx, x_min+(i+1)*dx) x [y_min+j*dy, y_min+(j+1)*dy)  (half-open; points
// exactly on the outer max edge are clamped into the last cell so the grid
// partitions the closed bounding box).  Centroid (i,j) = (x_min+(i+0.5)dx, y_min+(j+0.5)dy).
struct GridSpec {
  double x_min = 0.0, y_min = 0.0;
  double dx = 0.0, dy = 0.0;
  int m = 0;  // cells along x
  int p = 0;  // cells along y
  std::vector<uint8_t> mask;  // m*p flags, 1 = centroid inside window

  static GridSpec cover(const ObservationWindow& w, int m, int p);

  int idx(int i, int j) const { return i * p + j; }
  double cx(int i) const { return x_min + (i + 0.5) * dx; }
  double cy(int j) const { return y_min + (j + 0.5) * dy; }
  double cell_area() const { return dx * dy; }
  bool in_bounds(double x, double y) const;
  // Cell containing (x,y) under the half-open rule with max-edge clamp.
  void cell_of(double x, double y, int& i, int& j) const;
  int masked_count() const;
};

enum class RasterUnits { IntensityPerArea, Field, Density };

constexpr double kNoData = -9999.0;

struct Raster {
  GridSpec grid;
  std::vector<double> values;  // m*p, row-major via grid.idx
  RasterUnits units = RasterUnits::Field;

  Raster() = default;
  Raster(const GridSpec& g, double fill, RasterUnits u);
  double& at(int i, int j) { return values[grid.idx(i, j)]; }
  double at(int i, int j) const { return values[grid.idx(i, j)]; }
  // Sum of value*cell_area over masked-in cells.
  double masked_integral() const;
};

// Per-day cell counts, slices indexed by day stamp.
struct CellCountSeries {
  GridSpec grid;
  int t0 = 0;                               // day of slices.front()
  std::vector<std::vector<int32_t>> slices; // each m*p
  int t1() const { return t0 + static_cast<int>(slices.size()) - 1; }
  long long slice_total(int k) const;
};

}  // namespace lgcp
