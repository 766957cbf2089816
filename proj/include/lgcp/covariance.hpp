#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "lgcp/grid.hpp"
#include "lgcp/summaries.hpp"

namespace lgcp {

struct CovarianceParams {
  double sigma2 = 1.0;  // field variance
  double phi = 1.0;     // spatial correlation range
  double theta = 1.0;   // temporal correlation range
  void validate() const;
};

inline double spatial_correlation(double d, double phi) { return std::exp(-d / phi); }
inline double temporal_correlation(double v, double theta) { return std::exp(-v / theta); }

// g(u) = exp(sigma2 * exp(-u/phi)); same-day pair correlation of the model.
double theoretical_pcf(double u, double sigma2, double phi);

// K(a,b) = 2*pi * int_0^a u int_0^b exp(sigma2 * r_phi(u) r_theta(v)) dv du,
// by nested Gauss-Legendre quadrature with node doubling until the relative
// change is below rel_tol.  Throws (reporting the achieved tolerance) when the
// node budget is exhausted before convergence.
double theoretical_K(double a, double b, const CovarianceParams& params,
                     double rel_tol = 1e-9);

struct SpatialFitOptions {
  double exponent = 0.25;             // contrast transform ^c
  double sigma2_lo = 1e-4, sigma2_hi = 50.0;
  double phi_lo = 0.0, phi_hi = 0.0;  // 0,0 = derive from u_range
  std::vector<double> weights;        // per curve point; empty = all ones
  // Multistart grid; empty = 3x3 log-spaced product over the interior of the box.
  std::vector<std::pair<double, double>> starts;
  double simplex_tol = 1e-8;
};

struct SpatialFitResult {
  double sigma2 = 0.0;
  double phi = 0.0;
  double contrast = 0.0;  // achieved value of the minimized integral
  bool hit_boundary = false;
};

// Minimum contrast on the transformed pair correlation curve: trapezoid rule
// over the curve's u grid restricted to [u_min, u_max] of
// (g_hat(u)^c - g(u; sigma2, phi)^c)^2, minimized over the box.
SpatialFitResult fit_spatial_params(const PcfCurve& curve, double u_min, double u_max,
                                    const SpatialFitOptions& options = {});

// Distance-class decomposition of the cell-pair double sum over a normalized
// density raster:  S(x) = sum_{c1,c2} d(c1) d(c2) exp(sigma2 * r_phi(dist) * x) dA^2
// where x is the temporal correlation value.  Classes group ordered cell pairs
// (the diagonal included) by centroid offset, so each evaluation is O(#classes).
class RasterPairStructure {
 public:
  RasterPairStructure(const Raster& density, double sigma2, double phi, int n_threads = 1);

  double sum_exp(double temporal_corr) const;  // S(x)
  double sigma2() const { return sigma2_; }
  double phi() const { return phi_; }
  size_t n_classes() const { return coeff_.size(); }

 private:
  double sigma2_, phi_;
  std::vector<double> coeff_;   // sigma2 * r_phi(class distance)
  std::vector<double> weight_;  // density-product mass * dA^2 per class
};

// lambda1(t) * lambda1(t-v) * (S(r_theta(v)) - 1): Riemann form of the temporal
// covariance of daily counts implied by the fitted model.
double theoretical_temporal_cov(int v, const CovarianceParams& params,
                                const Raster& lambda0_density,
                                const std::function<double(int)>& lambda1_at, int t,
                                int n_threads = 1);

struct ThetaFitOptions {
  double theta_lo = 0.02, theta_hi = 50.0;
  double simplex_tol = 1e-8;
  // Subtracts the sampling variance of the constant-rate estimate from the
  // theoretical curve before matching; see ThetaFitResult::corrected.
  bool finite_sample_correction = false;
  int n_threads = 1;
};

struct ThetaFitResult {
  double theta = 0.0;
  double contrast = 0.0;
  bool hit_boundary = false;
  bool corrected = false;
};

// Conditional fit: sigma2 and phi fixed, theta minimizes
// sum_{v in v_range} (C_bar(v) - C(v; theta))^2 over a box (1-D search in log
// theta).  C(v; theta) uses the per-lag mean of lambda1(t) lambda1(t-v) carried
// by the curve.  With finite_sample_correction the matched curve is
//   C*(v) = P(v) (S(v)-1) - Var(N_bar; theta) S(v)
// where Var(N_bar; theta) is the model variance of the mean daily count over
// the observed span -- the plug-in rate estimate absorbs exactly that much of
// the empirical autocovariance at every lag.
ThetaFitResult fit_theta(const AutocovCurve& autocov, double sigma2, double phi,
                         const Raster& lambda0_density, const std::vector<int>& v_range,
                         const ThetaFitOptions& options = {});

}  // namespace lgcp
