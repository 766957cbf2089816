#pragma once

#include <memory>
#include <vector>

#include "lgcp/covariance.hpp"
#include "lgcp/grid.hpp"
#include "lgcp/rng.hpp"

namespace lgcp {

// Base lattice wrapped onto a torus twice its size (next powers of two), so
// the wrapped covariance matrix is block circulant and diagonalized by the FFT.
struct ExtendedGrid {
  GridSpec base;
  int M = 0;  // extended cells along x, power of two >= 2m
  int N = 0;  // extended cells along y, power of two >= 2p
  double range_x() const { return M * base.dx; }
  double range_y() const { return N * base.dy; }
  size_t q() const { return static_cast<size_t>(M) * N; }
};

ExtendedGrid extend_grid(const GridSpec& base);

// Shortest separation on the torus between extended cells (u1,v1) and (u2,v2).
double torus_distance(int u1, int v1, int u2, int v2, const ExtendedGrid& ext);

struct CirculantSpectrum {
  ExtendedGrid ext;
  CovarianceParams params;          // theta unused by the spatial spectrum
  std::vector<double> base_row;     // M*N torus covariances vs cell (0,0), row-major u*N+v
  std::vector<double> eigenvalues;  // M*N, real, clipped per policy
  double min_eigenvalue = 0.0;      // before clipping
  bool negative_flagged = false;    // some eigenvalue < -1e-8 * max
  bool clipped = false;             // negatives zeroed (small-mass rule)
};

enum class NegativeEigPolicy {
  ClipSmall,  // zero negatives when their mass < 1e-6 of the trace, else throw
  Abort,      // throw whenever the negative flag is raised
};

// Torus covariance row + its 2-D DFT.  The base row is symmetric so the DFT is
// real; imaginary residue above 1e-8 * max|eigenvalue| is a hard error.
CirculantSpectrum circulant_eigenvalues(const ExtendedGrid& ext, const CovarianceParams& params,
                                        NegativeEigPolicy policy = NegativeEigPolicy::ClipSmall);

// Symmetric square root of the wrapped covariance applied through the FFT.
// apply_sqrt computes y = A x where A = F* diag(sqrt(eig)) F / (MN); the base
// row symmetry makes the output exactly real and A^T = A, which the gradient
// chain rule relies on.  Instances hold FFT buffers: one apply at a time.
class CirculantOperator {
 public:
  explicit CirculantOperator(const CirculantSpectrum& spectrum);
  ~CirculantOperator();
  CirculantOperator(const CirculantOperator&) = delete;
  CirculantOperator& operator=(const CirculantOperator&) = delete;

  size_t size() const { return q_; }
  const ExtendedGrid& ext() const { return ext_; }
  void apply_sqrt(const std::vector<double>& x, std::vector<double>& y) const;

 private:
  ExtendedGrid ext_;
  size_t q_;
  std::vector<double> sqrt_eig_;
  struct FftState;
  std::unique_ptr<FftState> fft_;
};

struct GrfDraw {
  std::vector<double> extended;  // M*N field values, row-major u*N+v
  Raster base;                   // restriction to the base lattice, units Field
};

// One unconditional draw: standard-normal matrix pushed through the circulant
// square root, plus the mean offset.  Default mean -sigma2/2 makes exp(field)
// mean one.  Throws on non-finite output values.
GrfDraw sample_grf(const CirculantSpectrum& spectrum, double mean_offset, Rng& rng);
GrfDraw sample_grf(const CirculantOperator& op, double mean_offset, Rng& rng);

}  // namespace lgcp
