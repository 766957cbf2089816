#include "lgcp/mala.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lgcp {

LatentModel::LatentModel(const CirculantSpectrum& spectrum, const Raster& lambda0_density,
                         std::vector<double> lambda1_by_slice,
                         std::vector<std::vector<int32_t>> counts_by_slice)
    : params_(spectrum.params),
      op_(spectrum),
      grid_(lambda0_density.grid),
      lambda1_(std::move(lambda1_by_slice)),
      counts_(std::move(counts_by_slice)) {
  if (!(params_.theta > 0.0)) throw std::invalid_argument("theta must be positive");
  if (lambda0_density.units != RasterUnits::Density)
    throw std::invalid_argument("lambda0 raster must hold a normalized density");
  if (grid_.m != spectrum.ext.base.m || grid_.p != spectrum.ext.base.p ||
      grid_.dx != spectrum.ext.base.dx || grid_.dy != spectrum.ext.base.dy)
    throw std::invalid_argument("spectrum and density grids differ");
  if (lambda1_.empty()) throw std::invalid_argument("need at least one slice");
  if (counts_.size() != lambda1_.size())
    throw std::invalid_argument("count slices and lambda1 slices differ in number");
  const size_t n_cells = static_cast<size_t>(grid_.m) * grid_.p;
  for (size_t t = 0; t < counts_.size(); ++t) {
    if (counts_[t].size() != n_cells)
      throw std::invalid_argument("count slice " + std::to_string(t) + " has wrong cell count");
    if (!(lambda1_[t] > 0.0))
      throw std::invalid_argument("lambda1 must be positive on every slice");
  }

  mu_ = -0.5 * params_.sigma2;
  beta_ = std::exp(-1.0 / params_.theta);

  lambda0_area_.assign(n_cells, 0.0);
  for (int i = 0; i < grid_.m; ++i) {
    for (int j = 0; j < grid_.p; ++j) {
      const int c = grid_.idx(i, j);
      if (!grid_.mask[c]) continue;
      const double v = lambda0_density.at(i, j);
      if (v < 0.0) throw std::invalid_argument("negative density value");
      lambda0_area_[c] = v * grid_.cell_area();
    }
  }
  for (size_t t = 0; t < counts_.size(); ++t)
    for (size_t c = 0; c < n_cells; ++c)
      if (counts_[t][c] > 0 && lambda0_area_[c] == 0.0)
        throw std::invalid_argument(
            "cell with events has zero modeled intensity; check the mask or widen the bandwidth");
}

double LatentModel::slice_loglik(const std::vector<double>& z, int slice,
                                 std::vector<double>* score) const {
  const int N = op_.ext().N;
  const double l1 = lambda1_[slice];
  const auto& x = counts_[slice];
  double ll = 0.0;
  if (score) score->assign(q(), 0.0);
  for (int i = 0; i < grid_.m; ++i) {
    for (int j = 0; j < grid_.p; ++j) {
      const int c = grid_.idx(i, j);
      const double mu_c = lambda0_area_[c] * l1;
      if (mu_c == 0.0) continue;
      const size_t e = static_cast<size_t>(i) * N + j;
      const double mean = mu_c * std::exp(z[e]);
      ll += x[c] * z[e] - mean;
      if (score) (*score)[e] = x[c] - mean;
    }
  }
  return ll;
}

void LatentModel::evaluate(const Eigen::MatrixXd& gamma, double& log_target,
                           Eigen::MatrixXd& grad) const {
  const int zt = zeta();
  const size_t n = q();
  if (gamma.rows() != static_cast<Eigen::Index>(n) || gamma.cols() != zt)
    throw std::invalid_argument("state has wrong shape");

  log_target = 0.0;
  grad.setZero(gamma.rows(), gamma.cols());
  std::vector<double> g(n), z(n), score(n), back(n);

  for (int t = 0; t < zt; ++t) {
    for (size_t k = 0; k < n; ++k) g[k] = gamma(k, t);
    op_.apply_sqrt(g, z);
    for (double& v : z) v += mu_;
    log_target += slice_loglik(z, t, &score);
    op_.apply_sqrt(score, back);  // A symmetric: chain rule uses the same transform
    for (size_t k = 0; k < n; ++k) grad(k, t) += back[k];
  }

  // AR(1) prior: gamma_0 ~ N(0, I), gamma_t | gamma_{t-1} ~ N(beta g, (1-b^2) I).
  const double b = beta_, s2 = 1.0 - b * b;
  log_target -= 0.5 * gamma.col(0).squaredNorm();
  grad.col(0) -= gamma.col(0);
  for (int t = 1; t < zt; ++t) {
    const Eigen::VectorXd resid = gamma.col(t) - b * gamma.col(t - 1);
    log_target -= 0.5 * resid.squaredNorm() / s2;
    grad.col(t) -= resid / s2;
    grad.col(t - 1) += (b / s2) * resid;
  }
}

double LatentModel::log_target(const Eigen::MatrixXd& gamma) const {
  double lt;
  Eigen::MatrixXd grad;
  evaluate(gamma, lt, grad);
  return lt;
}

Eigen::MatrixXd LatentModel::grad_log_target(const Eigen::MatrixXd& gamma) const {
  double lt;
  Eigen::MatrixXd grad;
  evaluate(gamma, lt, grad);
  return grad;
}

std::vector<double> LatentModel::field_slice(const Eigen::MatrixXd& gamma, int slice) const {
  if (slice < 0 || slice >= zeta()) throw std::invalid_argument("slice out of range");
  const size_t n = q();
  std::vector<double> g(n), z(n);
  for (size_t k = 0; k < n; ++k) g[k] = gamma(k, slice);
  op_.apply_sqrt(g, z);
  for (double& v : z) v += mu_;
  return z;
}

bool mala_step(const LatentModel& model, Eigen::MatrixXd& gamma, double& log_target,
               Eigen::MatrixXd& grad, double xi2, Rng& rng, double& accept_prob,
               bool& auto_reject) {
  if (!(xi2 > 0.0)) throw std::invalid_argument("proposal scale must be positive");
  auto_reject = false;
  const double xi = std::sqrt(xi2);
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::MatrixXd prop(gamma.rows(), gamma.cols());
  for (Eigen::Index t = 0; t < gamma.cols(); ++t)
    for (Eigen::Index k = 0; k < gamma.rows(); ++k)
      prop(k, t) = gamma(k, t) + 0.5 * xi2 * grad(k, t) + xi * normal(rng);

  double lt_prop;
  Eigen::MatrixXd grad_prop;
  model.evaluate(prop, lt_prop, grad_prop);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);

  if (!std::isfinite(lt_prop)) {
    auto_reject = true;
    accept_prob = 0.0;
    return false;
  }
  // Hastings ratio with the asymmetric Langevin proposal density.
  const double fwd = (prop - gamma - 0.5 * xi2 * grad).squaredNorm();
  const double bwd = (gamma - prop - 0.5 * xi2 * grad_prop).squaredNorm();
  const double log_alpha = lt_prop - log_target + (fwd - bwd) / (2.0 * xi2);
  accept_prob = std::min(1.0, std::exp(log_alpha));

  if (u < accept_prob) {
    gamma.swap(prop);
    grad.swap(grad_prop);
    log_target = lt_prop;
    return true;
  }
  return false;
}

MalaRun run_mala(const LatentModel& model, const MalaOptions& options, Rng& rng) {
  const int n_iter = options.n_iter;
  const int burn_in = options.burn_in >= 0 ? options.burn_in : n_iter / 5;
  if (n_iter <= burn_in) throw std::invalid_argument("n_iter must exceed burn_in");
  if (options.thin < 1) throw std::invalid_argument("thin must be >= 1");

  MalaRun run;
  run.n_iter = n_iter;
  run.burn_in = burn_in;
  run.thin = options.thin;

  Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(model.q(), model.zeta());
  double lt;
  Eigen::MatrixXd grad;
  model.evaluate(gamma, lt, grad);

  double log_xi2 = std::log(options.xi2_init);
  int accept_post = 0, n_post = 0;
  run.diagnostics.reserve(n_iter);

  for (int k = 0; k < n_iter; ++k) {
    const double xi2 = std::exp(log_xi2);
    double accept_prob = 0.0;
    bool auto_rej = false;
    const bool accepted = mala_step(model, gamma, lt, grad, xi2, rng, accept_prob, auto_rej);
    if (auto_rej) ++run.auto_rejects;

    if (k < burn_in) {
      const double gain = options.adapt_t0 / std::pow(options.adapt_k0 + k + 1, options.adapt_kappa);
      log_xi2 += gain * (accept_prob - options.target_accept);
    } else {
      n_post++;
      if (accepted) accept_post++;
      if ((k - burn_in) % options.thin == 0) run.samples.push_back(gamma);
    }
    run.diagnostics.push_back({k, lt, accepted ? 1 : 0, accept_prob, xi2});
  }

  run.xi2 = std::exp(log_xi2);
  run.acceptance_rate = n_post ? static_cast<double>(accept_post) / n_post : 0.0;
  if (n_post >= 50 && accept_post == 0)
    throw std::runtime_error("no proposals accepted after adaptation; tuning failed");
  return run;
}

namespace {

Raster restrict_to_base(const std::vector<double>& ext_field, const ExtendedGrid& ext) {
  Raster out(ext.base, 0.0, RasterUnits::Field);
  for (int i = 0; i < ext.base.m; ++i)
    for (int j = 0; j < ext.base.p; ++j)
      out.at(i, j) = ext_field[static_cast<size_t>(i) * ext.N + j];
  return out;
}

std::vector<double> posterior_mean_ext(const LatentModel& model, const MalaRun& run, int slice) {
  if (run.samples.empty()) throw std::invalid_argument("chain has no retained samples");
  std::vector<double> mean(model.q(), 0.0);
  for (const Eigen::MatrixXd& g : run.samples) {
    const std::vector<double> z = model.field_slice(g, slice);
    for (size_t k = 0; k < mean.size(); ++k) mean[k] += z[k];
  }
  for (double& v : mean) v /= static_cast<double>(run.samples.size());
  return mean;
}

}  // namespace

Raster posterior_mean_field(const LatentModel& model, const MalaRun& run, int slice) {
  return restrict_to_base(posterior_mean_ext(model, run, slice), model.ext());
}

Raster forecast_mean(const LatentModel& model, const MalaRun& run, int delta) {
  if (delta < 0) throw std::invalid_argument("forecast horizon must be non-negative");
  std::vector<double> mean = posterior_mean_ext(model, run, model.zeta() - 1);
  const double w = std::exp(-static_cast<double>(delta) / model.theta());
  for (double& v : mean) v = w * v + (1.0 - w) * model.mu();
  return restrict_to_base(mean, model.ext());
}

Raster forecast_field_draw(const LatentModel& model, const MalaRun& run, int sample_index,
                           int delta, Rng& rng) {
  if (delta < 0) throw std::invalid_argument("forecast horizon must be non-negative");
  if (sample_index < 0 || sample_index >= static_cast<int>(run.samples.size()))
    throw std::invalid_argument("sample index out of range");
  std::vector<double> z = model.field_slice(run.samples[sample_index], model.zeta() - 1);

  const double w = std::exp(-static_cast<double>(delta) / model.theta());
  const double innov_sd = std::sqrt(std::max(0.0, 1.0 - w * w));
  const size_t n = model.q();
  std::vector<double> noise(n), innovation(n, 0.0);
  if (innov_sd > 0.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (size_t k = 0; k < n; ++k) noise[k] = normal(rng);
    model.op().apply_sqrt(noise, innovation);
  }
  for (size_t k = 0; k < n; ++k)
    z[k] = w * z[k] + (1.0 - w) * model.mu() + innov_sd * innovation[k];
  for (double v : z)
    if (!std::isfinite(v)) throw std::runtime_error("forecast draw produced non-finite values");
  return restrict_to_base(z, model.ext());
}

Raster forecast_intensity(const Raster& lambda0_density, double lambda1_pred,
                          const Raster& field) {
  if (!(lambda1_pred > 0.0)) throw std::invalid_argument("predicted lambda1 must be positive");
  if (lambda0_density.units != RasterUnits::Density)
    throw std::invalid_argument("lambda0 raster must hold a normalized density");
  const GridSpec& g = lambda0_density.grid;
  if (g.m != field.grid.m || g.p != field.grid.p)
    throw std::invalid_argument("density and field grids differ");
  Raster out(g, 0.0, RasterUnits::IntensityPerArea);
  for (int i = 0; i < g.m; ++i) {
    for (int j = 0; j < g.p; ++j) {
      if (!g.mask[g.idx(i, j)]) continue;
      out.at(i, j) = lambda0_density.at(i, j) * lambda1_pred * std::exp(field.at(i, j));
    }
  }
  return out;
}

}  // namespace lgcp
