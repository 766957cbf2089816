#include "lgcp/grf.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

namespace lgcp {

namespace {

// FFTW plan creation/destruction is not thread-safe; executions on distinct
// buffers are.
std::mutex& fftw_mutex() {
  static std::mutex mu;
  return mu;
}

int next_pow2(int n) {
  int p = 1;
  while (p < n) p *= 2;
  return p;
}

}  // namespace

ExtendedGrid extend_grid(const GridSpec& base) {
  if (base.m < 1 || base.p < 1) throw std::invalid_argument("grid must have cells");
  ExtendedGrid ext;
  ext.base = base;
  ext.M = next_pow2(2 * base.m);
  ext.N = next_pow2(2 * base.p);
  return ext;
}

double torus_distance(int u1, int v1, int u2, int v2, const ExtendedGrid& ext) {
  const int du_raw = std::abs(u1 - u2), dv_raw = std::abs(v1 - v2);
  const double du = std::min(du_raw, ext.M - du_raw) * ext.base.dx;
  const double dv = std::min(dv_raw, ext.N - dv_raw) * ext.base.dy;
  return std::hypot(du, dv);
}

CirculantSpectrum circulant_eigenvalues(const ExtendedGrid& ext, const CovarianceParams& params,
                                        NegativeEigPolicy policy) {
  if (params.sigma2 < 0.0 || !(params.phi > 0.0))
    throw std::invalid_argument("sigma2 must be non-negative and phi positive");
  CirculantSpectrum spec;
  spec.ext = ext;
  spec.params = params;
  const int M = ext.M, N = ext.N;
  const size_t q = ext.q();
  spec.base_row.resize(q);
  for (int u = 0; u < M; ++u)
    for (int v = 0; v < N; ++v)
      spec.base_row[static_cast<size_t>(u) * N + v] =
          params.sigma2 * std::exp(-torus_distance(0, 0, u, v, ext) / params.phi);

  fftw_complex* buf;
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> g(fftw_mutex());
    buf = fftw_alloc_complex(q);
    plan = fftw_plan_dft_2d(M, N, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  for (size_t k = 0; k < q; ++k) {
    buf[k][0] = spec.base_row[k];
    buf[k][1] = 0.0;
  }
  fftw_execute(plan);

  spec.eigenvalues.resize(q);
  double max_eig = 0.0, max_imag = 0.0;
  for (size_t k = 0; k < q; ++k) {
    spec.eigenvalues[k] = buf[k][0];
    max_eig = std::max(max_eig, std::abs(buf[k][0]));
    max_imag = std::max(max_imag, std::abs(buf[k][1]));
  }
  {
    std::lock_guard<std::mutex> g(fftw_mutex());
    fftw_destroy_plan(plan);
    fftw_free(buf);
  }
  if (max_imag > 1e-8 * std::max(1.0, max_eig))
    throw std::runtime_error("spectrum has non-negligible imaginary part");

  double trace = 0.0, neg_mass = 0.0;
  spec.min_eigenvalue = q ? spec.eigenvalues[0] : 0.0;
  for (double e : spec.eigenvalues) {
    spec.min_eigenvalue = std::min(spec.min_eigenvalue, e);
    trace += std::max(0.0, e);
    if (e < 0.0) neg_mass += -e;
  }
  spec.negative_flagged = spec.min_eigenvalue < -1e-8 * max_eig;
  if (spec.negative_flagged && policy == NegativeEigPolicy::Abort)
    throw std::runtime_error("embedding is not positive semidefinite");
  if (neg_mass > 0.0) {
    if (spec.negative_flagged && neg_mass >= 1e-6 * std::max(1e-300, trace))
      throw std::runtime_error("negative eigenvalue mass too large to clip");
    for (double& e : spec.eigenvalues) e = std::max(0.0, e);
    spec.clipped = true;
  }
  return spec;
}

struct CirculantOperator::FftState {
  fftw_complex* buf = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  mutable std::mutex apply_mu;
  ~FftState() {
    std::lock_guard<std::mutex> g(fftw_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
    if (buf) fftw_free(buf);
  }
};

CirculantOperator::CirculantOperator(const CirculantSpectrum& spectrum)
    : ext_(spectrum.ext), q_(spectrum.ext.q()) {
  sqrt_eig_.resize(q_);
  for (size_t k = 0; k < q_; ++k) {
    if (spectrum.eigenvalues[k] < 0.0)
      throw std::invalid_argument("spectrum has unhandled negative eigenvalues");
    sqrt_eig_[k] = std::sqrt(spectrum.eigenvalues[k]);
  }
  fft_ = std::make_unique<FftState>();
  std::lock_guard<std::mutex> g(fftw_mutex());
  fft_->buf = fftw_alloc_complex(q_);
  fft_->fwd = fftw_plan_dft_2d(ext_.M, ext_.N, fft_->buf, fft_->buf, FFTW_FORWARD, FFTW_ESTIMATE);
  fft_->bwd = fftw_plan_dft_2d(ext_.M, ext_.N, fft_->buf, fft_->buf, FFTW_BACKWARD, FFTW_ESTIMATE);
}

CirculantOperator::~CirculantOperator() = default;

void CirculantOperator::apply_sqrt(const std::vector<double>& x, std::vector<double>& y) const {
  if (x.size() != q_) throw std::invalid_argument("operator input has wrong length");
  std::lock_guard<std::mutex> g(fft_->apply_mu);
  fftw_complex* buf = fft_->buf;
  for (size_t k = 0; k < q_; ++k) {
    buf[k][0] = x[k];
    buf[k][1] = 0.0;
  }
  fftw_execute(fft_->fwd);
  for (size_t k = 0; k < q_; ++k) {
    buf[k][0] *= sqrt_eig_[k];
    buf[k][1] *= sqrt_eig_[k];
  }
  fftw_execute(fft_->bwd);
  const double scale = 1.0 / static_cast<double>(q_);
  y.resize(q_);
  double max_abs = 0.0, max_imag = 0.0;
  for (size_t k = 0; k < q_; ++k) {
    y[k] = buf[k][0] * scale;
    max_abs = std::max(max_abs, std::abs(y[k]));
    max_imag = std::max(max_imag, std::abs(buf[k][1]) * scale);
  }
  if (max_imag > 1e-10 * std::max(1.0, max_abs))
    throw std::runtime_error("square-root transform produced a complex field");
}

GrfDraw sample_grf(const CirculantOperator& op, double mean_offset, Rng& rng) {
  const size_t q = op.size();
  std::vector<double> u(q);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (size_t k = 0; k < q; ++k) u[k] = normal(rng);

  GrfDraw draw;
  op.apply_sqrt(u, draw.extended);
  for (double& z : draw.extended) z += mean_offset;
  for (double z : draw.extended)
    if (!std::isfinite(z)) throw std::runtime_error("field draw produced non-finite values");

  const GridSpec& base = op.ext().base;
  const int N = op.ext().N;
  draw.base = Raster(base, 0.0, RasterUnits::Field);
  for (int i = 0; i < base.m; ++i)
    for (int j = 0; j < base.p; ++j)
      draw.base.at(i, j) = draw.extended[static_cast<size_t>(i) * N + j];
  return draw;
}

GrfDraw sample_grf(const CirculantSpectrum& spectrum, double mean_offset, Rng& rng) {
  const CirculantOperator op(spectrum);
  return sample_grf(op, mean_offset, rng);
}

}  // namespace lgcp
