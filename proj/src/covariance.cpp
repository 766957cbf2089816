#include "lgcp/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "lgcp/nelder_mead.hpp"
#include "lgcp/parallel.hpp"

namespace lgcp {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kPenalty = 1e30;

// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration on Legendre
// polynomials; cached per order.
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.resize(n);
  weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
    weights[n - 1 - i] = weights[i];
  }
}

double K_quadrature(double a, double b, const CovarianceParams& p, int n) {
  std::vector<double> xs, ws;
  gauss_legendre(n, xs, ws);
  // map [-1,1] -> [0,a] and [0,b]
  double outer = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = 0.5 * a * (xs[i] + 1.0);
    const double ru = p.sigma2 * std::exp(-u / p.phi);
    double inner = 0.0;
    for (int j = 0; j < n; ++j) {
      const double v = 0.5 * b * (xs[j] + 1.0);
      inner += ws[j] * std::exp(ru * std::exp(-v / p.theta));
    }
    outer += ws[i] * u * inner;
  }
  return 2.0 * kPi * outer * (0.5 * a) * (0.5 * b);
}

}  // namespace

void CovarianceParams::validate() const {
  if (!(sigma2 > 0.0) || !(phi > 0.0) || !(theta > 0.0))
    throw std::invalid_argument("covariance parameters must be strictly positive");
}

double theoretical_pcf(double u, double sigma2, double phi) {
  if (u < 0.0) throw std::invalid_argument("spatial lag must be non-negative");
  return std::exp(sigma2 * std::exp(-u / phi));
}

double theoretical_K(double a, double b, const CovarianceParams& params, double rel_tol) {
  if (a < 0.0 || b < 0.0) throw std::invalid_argument("lags must be non-negative");
  // sigma2 == 0 is the Poisson degenerate case and is allowed here.
  if (params.sigma2 < 0.0 || !(params.phi > 0.0) || !(params.theta > 0.0))
    throw std::invalid_argument("invalid covariance parameters");
  if (a == 0.0 || b == 0.0) return 0.0;
  double prev = K_quadrature(a, b, params, 16);
  for (int n = 32; n <= 512; n *= 2) {
    const double cur = K_quadrature(a, b, params, n);
    const double rel = std::abs(cur - prev) / std::max(1e-300, std::abs(cur));
    if (rel <= rel_tol) return cur;
    prev = cur;
  }
  const double cur = K_quadrature(a, b, params, 1024);
  const double rel = std::abs(cur - prev) / std::max(1e-300, std::abs(cur));
  if (rel <= rel_tol) return cur;
  throw std::runtime_error("quadrature did not converge; achieved relative tolerance " +
                           std::to_string(rel));
}

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, double step, double tol, int max_iter) {
  const int n = static_cast<int>(x0.size());
  std::vector<Eigen::VectorXd> xs(n + 1, x0);
  std::vector<double> fs(n + 1);
  for (int i = 1; i <= n; ++i) xs[i](i - 1) += step;
  for (int i = 0; i <= n; ++i) fs[i] = f(xs[i]);

  auto order = [&] {
    std::vector<int> idx(n + 1);
    for (int i = 0; i <= n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    std::vector<Eigen::VectorXd> xs2(n + 1);
    std::vector<double> fs2(n + 1);
    for (int i = 0; i <= n; ++i) {
      xs2[i] = xs[idx[i]];
      fs2[i] = fs[idx[i]];
    }
    xs.swap(xs2);
    fs.swap(fs2);
  };

  NelderMeadResult res;
  int it = 0;
  for (; it < max_iter; ++it) {
    order();
    double spread = 0.0;
    for (int i = 1; i <= n; ++i) spread = std::max(spread, (xs[i] - xs[0]).norm());
    if (spread <= tol) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += xs[i];
    centroid /= n;

    const Eigen::VectorXd xr = centroid + (centroid - xs[n]);
    const double fr = f(xr);
    if (fr < fs[0]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - xs[n]);
      const double fe = f(xe);
      if (fe < fr) {
        xs[n] = xe;
        fs[n] = fe;
      } else {
        xs[n] = xr;
        fs[n] = fr;
      }
    } else if (fr < fs[n - 1]) {
      xs[n] = xr;
      fs[n] = fr;
    } else {
      const bool outside = fr < fs[n];
      const Eigen::VectorXd xc =
          centroid + 0.5 * ((outside ? xr : xs[n]) - centroid);
      const double fc = f(xc);
      if (fc < (outside ? fr : fs[n])) {
        xs[n] = xc;
        fs[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          xs[i] = xs[0] + 0.5 * (xs[i] - xs[0]);
          fs[i] = f(xs[i]);
        }
      }
    }
  }
  order();
  res.x = xs[0];
  res.value = fs[0];
  res.iterations = it;
  return res;
}

NelderMeadResult nelder_mead_restarted(const std::function<double(const Eigen::VectorXd&)>& f,
                                       const Eigen::VectorXd& x0, double step, double tol,
                                       int max_iter) {
  NelderMeadResult first = nelder_mead(f, x0, step, tol, max_iter);
  Eigen::VectorXd xp = first.x;
  for (int i = 0; i < xp.size(); ++i) xp(i) += 0.5 * step;
  NelderMeadResult second = nelder_mead(f, xp, 0.5 * step, tol, max_iter);
  return second.value < first.value ? second : first;
}

SpatialFitResult fit_spatial_params(const PcfCurve& curve, double u_min, double u_max,
                                    const SpatialFitOptions& options) {
  if (!(u_min < u_max)) throw std::invalid_argument("u_min must be below u_max");
  if (!options.weights.empty() && options.weights.size() != curve.u_grid.size())
    throw std::invalid_argument("weight count != curve point count");

  std::vector<double> us, gs, wts;
  for (size_t k = 0; k < curve.u_grid.size(); ++k) {
    const double u = curve.u_grid[k];
    if (u < u_min || u > u_max) continue;
    if (!(curve.values[k] > 0.0))
      throw std::invalid_argument("pair correlation curve must be positive on the fit range");
    us.push_back(u);
    gs.push_back(std::pow(curve.values[k], options.exponent));
    wts.push_back(options.weights.empty() ? 1.0 : options.weights[k]);
  }
  if (us.size() < 3) throw std::invalid_argument("fewer than 3 curve points in the fit range");

  const double phi_lo = options.phi_lo > 0.0 ? options.phi_lo : u_min / 20.0;
  const double phi_hi = options.phi_hi > 0.0 ? options.phi_hi : u_max * 20.0;
  const double s_lo = options.sigma2_lo, s_hi = options.sigma2_hi;
  const double c = options.exponent;

  auto contrast_at = [&](double sigma2, double phi) {
    double acc = 0.0;
    std::vector<double> sq(us.size());
    for (size_t k = 0; k < us.size(); ++k) {
      const double diff = gs[k] - std::pow(theoretical_pcf(us[k], sigma2, phi), c);
      sq[k] = wts[k] * diff * diff;
    }
    for (size_t k = 1; k < us.size(); ++k)
      acc += 0.5 * (sq[k] + sq[k - 1]) * (us[k] - us[k - 1]);
    return acc;
  };

  auto objective = [&](const Eigen::VectorXd& x) {
    const double sigma2 = std::exp(x(0)), phi = std::exp(x(1));
    double pen = 0.0;
    if (sigma2 < s_lo) pen += 1.0 + (s_lo - sigma2);
    if (sigma2 > s_hi) pen += 1.0 + (sigma2 - s_hi);
    if (phi < phi_lo) pen += 1.0 + (phi_lo - phi);
    if (phi > phi_hi) pen += 1.0 + (phi - phi_hi);
    if (pen > 0.0) return kPenalty * pen;
    const double v = contrast_at(sigma2, phi);
    if (!std::isfinite(v)) throw std::runtime_error("non-finite contrast value");
    return v;
  };

  std::vector<std::pair<double, double>> starts = options.starts;
  if (starts.empty()) {
    for (double fs : {0.25, 0.5, 0.75})
      for (double fp : {0.25, 0.5, 0.75})
        starts.push_back({std::exp(std::log(s_lo) + fs * (std::log(s_hi) - std::log(s_lo))),
                          std::exp(std::log(phi_lo) + fp * (std::log(phi_hi) - std::log(phi_lo)))});
  }

  NelderMeadResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (const auto& [s0, p0] : starts) {
    Eigen::VectorXd x0(2);
    x0 << std::log(s0), std::log(p0);
    const NelderMeadResult r = nelder_mead_restarted(objective, x0, 0.5, options.simplex_tol);
    if (r.value < best.value) best = r;
  }
  if (!std::isfinite(best.value) || best.value >= kPenalty)
    throw std::runtime_error("spatial contrast minimization failed to find an interior point");

  SpatialFitResult out;
  out.sigma2 = std::exp(best.x(0));
  out.phi = std::exp(best.x(1));
  out.contrast = best.value;
  const double edge_tol = 1e-4;
  out.hit_boundary = out.sigma2 <= s_lo * (1 + edge_tol) || out.sigma2 >= s_hi * (1 - edge_tol) ||
                     out.phi <= phi_lo * (1 + edge_tol) || out.phi >= phi_hi * (1 - edge_tol);
  return out;
}

RasterPairStructure::RasterPairStructure(const Raster& density, double sigma2, double phi,
                                         int n_threads)
    : sigma2_(sigma2), phi_(phi) {
  if (density.units != RasterUnits::Density)
    throw std::invalid_argument("raster must hold a normalized density");
  if (std::abs(density.masked_integral() - 1.0) > 1e-6)
    throw std::invalid_argument("density raster does not integrate to 1");
  if (sigma2 < 0.0 || !(phi > 0.0))
    throw std::invalid_argument("sigma2 must be non-negative and phi positive");

  const GridSpec& g = density.grid;
  struct Cell {
    int i, j;
    double v;
  };
  std::vector<Cell> cells;
  for (int i = 0; i < g.m; ++i)
    for (int j = 0; j < g.p; ++j)
      if (g.mask[g.idx(i, j)]) cells.push_back({i, j, density.at(i, j)});
  if (cells.empty()) throw std::invalid_argument("density raster has no masked-in cells");

  const size_t n_off = static_cast<size_t>(g.m) * g.p;  // offset class (|di|, |dj|)
  const int max_chunks = 4 * std::max(1, n_threads);
  std::vector<std::vector<double>> partial(max_chunks);
  parallel_chunks(0, static_cast<long long>(cells.size()), n_threads,
                  [&](int chunk, long long lo, long long hi) {
    auto& w = partial[chunk];
    if (w.empty()) w.assign(n_off, 0.0);
    for (long long a = lo; a < hi; ++a) {
      const Cell& c1 = cells[a];
      for (const Cell& c2 : cells) {
        const int di = std::abs(c1.i - c2.i), dj = std::abs(c1.j - c2.j);
        w[static_cast<size_t>(di) * g.p + dj] += c1.v * c2.v;
      }
    }
  });

  const double dA2 = g.cell_area() * g.cell_area();
  std::vector<double> w_total(n_off, 0.0);
  for (const auto& w : partial) {
    if (w.empty()) continue;
    for (size_t k = 0; k < n_off; ++k) w_total[k] += w[k];
  }
  for (int di = 0; di < g.m; ++di) {
    for (int dj = 0; dj < g.p; ++dj) {
      const double w = w_total[static_cast<size_t>(di) * g.p + dj];
      if (w == 0.0) continue;
      const double dx = di * g.dx, dy = dj * g.dy;
      coeff_.push_back(sigma2 * std::exp(-std::hypot(dx, dy) / phi));
      weight_.push_back(w * dA2);
    }
  }
}

double RasterPairStructure::sum_exp(double temporal_corr) const {
  double s = 0.0;
  for (size_t k = 0; k < coeff_.size(); ++k) s += weight_[k] * std::exp(coeff_[k] * temporal_corr);
  return s;
}

double theoretical_temporal_cov(int v, const CovarianceParams& params,
                                const Raster& lambda0_density,
                                const std::function<double(int)>& lambda1_at, int t,
                                int n_threads) {
  if (v <= 0) throw std::invalid_argument("temporal lag must be positive");
  if (!(params.theta > 0.0)) throw std::invalid_argument("theta must be positive");
  const RasterPairStructure s(lambda0_density, params.sigma2, params.phi, n_threads);
  const double S = s.sum_exp(temporal_correlation(v, params.theta));
  return lambda1_at(t) * lambda1_at(t - v) * (S - 1.0);
}

ThetaFitResult fit_theta(const AutocovCurve& autocov, double sigma2, double phi,
                         const Raster& lambda0_density, const std::vector<int>& v_range,
                         const ThetaFitOptions& options) {
  if (v_range.empty()) throw std::invalid_argument("empty lag range");
  const int T = static_cast<int>(autocov.lambda1.size());
  for (int v : v_range) {
    if (v < 1 || v >= T) throw std::invalid_argument("lag outside (0, T)");
    if (std::find(autocov.v_grid.begin(), autocov.v_grid.end(), v) == autocov.v_grid.end())
      throw std::invalid_argument("lag " + std::to_string(v) + " not in the autocovariance curve");
  }
  const RasterPairStructure s(lambda0_density, sigma2, phi, options.n_threads);

  std::vector<double> c_bar(v_range.size()), prod_mean(v_range.size());
  for (size_t k = 0; k < v_range.size(); ++k) {
    const size_t pos =
        std::find(autocov.v_grid.begin(), autocov.v_grid.end(), v_range[k]) - autocov.v_grid.begin();
    c_bar[k] = autocov.values[pos];
    prod_mean[k] = autocov.lambda1_product_mean(v_range[k]);
  }
  double lam_bar = 0.0;
  for (double l : autocov.lambda1) lam_bar += l;
  lam_bar /= T;
  const double S0 = s.sum_exp(1.0);

  auto model_curve = [&](double theta, std::vector<double>& out) {
    double var_nbar = 0.0;
    if (options.finite_sample_correction) {
      // Model variance of the span-mean daily count: the constant plug-in rate
      // shifts the empirical autocovariance down by exactly this amount.
      double acc = T * (lam_bar + lam_bar * lam_bar * (S0 - 1.0));
      for (int u = 1; u < T; ++u)
        acc += 2.0 * (T - u) * lam_bar * lam_bar *
               (s.sum_exp(temporal_correlation(u, theta)) - 1.0);
      var_nbar = acc / (static_cast<double>(T) * T);
    }
    for (size_t k = 0; k < v_range.size(); ++k) {
      const double S = s.sum_exp(temporal_correlation(v_range[k], theta));
      out[k] = prod_mean[k] * (S - 1.0) - var_nbar * S;
    }
  };

  auto objective = [&](const Eigen::VectorXd& x) {
    const double theta = std::exp(x(0));
    double pen = 0.0;
    if (theta < options.theta_lo) pen += 1.0 + (options.theta_lo - theta);
    if (theta > options.theta_hi) pen += 1.0 + (theta - options.theta_hi);
    if (pen > 0.0) return kPenalty * pen;
    std::vector<double> model(v_range.size());
    model_curve(theta, model);
    double acc = 0.0;
    for (size_t k = 0; k < v_range.size(); ++k) {
      const double d = c_bar[k] - model[k];
      acc += d * d;
    }
    if (!std::isfinite(acc)) throw std::runtime_error("non-finite contrast value");
    return acc;
  };

  NelderMeadResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (double t0 : {0.25, 0.5, 0.75}) {
    Eigen::VectorXd x0(1);
    x0 << std::log(options.theta_lo) + t0 * (std::log(options.theta_hi) - std::log(options.theta_lo));
    const NelderMeadResult r = nelder_mead_restarted(objective, x0, 0.5, options.simplex_tol);
    if (r.value < best.value) best = r;
  }
  if (!std::isfinite(best.value) || best.value >= kPenalty)
    throw std::runtime_error("temporal contrast minimization failed to find an interior point");

  ThetaFitResult out;
  out.theta = std::exp(best.x(0));
  out.contrast = best.value;
  out.corrected = options.finite_sample_correction;
  const double edge_tol = 1e-4;
  out.hit_boundary = out.theta <= options.theta_lo * (1 + edge_tol) ||
                     out.theta >= options.theta_hi * (1 - edge_tol);
  return out;
}

}  // namespace lgcp
