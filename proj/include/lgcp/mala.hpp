#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "lgcp/grf.hpp"
#include "lgcp/grid.hpp"

namespace lgcp {

// Latent-field posterior for a block of consecutive day slices: cell counts are
// Poisson with intensity lambda0(c) * lambda1(t) * exp(z_t(c)) * cell_area, the
// field is parameterized by whitened coordinates gamma (one extended-grid
// vector per slice) through z_t = A gamma_t + mu with mu = -sigma2/2, and the
// slices are chained by the unit-lag AR(1) with beta = exp(-1/theta), the
// stationary Gauss-Markov match to the exponential temporal correlation.
// sigma2 and theta are read from the spectrum's parameter set.
class LatentModel {
 public:
  LatentModel(const CirculantSpectrum& spectrum, const Raster& lambda0_density,
              std::vector<double> lambda1_by_slice,
              std::vector<std::vector<int32_t>> counts_by_slice);

  int zeta() const { return static_cast<int>(lambda1_.size()); }
  size_t q() const { return op_.size(); }
  const ExtendedGrid& ext() const { return op_.ext(); }
  const CirculantOperator& op() const { return op_; }
  double mu() const { return mu_; }
  double beta() const { return beta_; }
  double sigma2() const { return params_.sigma2; }
  double theta() const { return params_.theta; }
  const GridSpec& base_grid() const { return grid_; }

  // Log posterior density of gamma (q x zeta) up to additive constants.
  double log_target(const Eigen::MatrixXd& gamma) const;
  Eigen::MatrixXd grad_log_target(const Eigen::MatrixXd& gamma) const;
  // One pass computing both (each costs two FFT applications per slice).
  void evaluate(const Eigen::MatrixXd& gamma, double& log_target, Eigen::MatrixXd& grad) const;

  // z^ext for one slice of the state.
  std::vector<double> field_slice(const Eigen::MatrixXd& gamma, int slice) const;

 private:
  double slice_loglik(const std::vector<double>& z, int slice,
                      std::vector<double>* score) const;

  CovarianceParams params_;
  CirculantOperator op_;
  GridSpec grid_;
  double mu_, beta_;
  std::vector<double> lambda1_;
  std::vector<std::vector<int32_t>> counts_;
  std::vector<double> lambda0_area_;  // lambda0(c) * cell_area on base cells, 0 off-mask
};

struct MalaOptions {
  int n_iter = 10000;
  int burn_in = -1;  // -1: 20% of n_iter
  int thin = 10;
  double target_accept = 0.574;
  double xi2_init = 0.01;
  // Robbins-Monro gain t0 / (k0 + k)^kappa on log xi^2, burn-in only.
  double adapt_t0 = 1.0;
  double adapt_k0 = 10.0;
  double adapt_kappa = 0.66;
};

struct MalaDiagRow {
  int iteration = 0;
  double log_target = 0.0;
  int accepted = 0;
  double accept_prob = 0.0;
  double xi2 = 0.0;
};

struct MalaRun {
  std::vector<Eigen::MatrixXd> samples;  // thinned post-burn-in gamma states
  double acceptance_rate = 0.0;          // post-burn-in accepted fraction
  double xi2 = 0.0;                      // frozen proposal scale
  int n_iter = 0, burn_in = 0, thin = 0;
  int auto_rejects = 0;  // proposals rejected for a non-finite target
  std::vector<MalaDiagRow> diagnostics;
};

// One proposal/accept step with scale xi2; gamma/log_target/grad are updated in
// place on acceptance.  accept_prob reports min(1, ratio); a non-finite target
// at the proposal auto-rejects and sets the flag.
bool mala_step(const LatentModel& model, Eigen::MatrixXd& gamma, double& log_target,
               Eigen::MatrixXd& grad, double xi2, Rng& rng, double& accept_prob,
               bool& auto_reject);

// Full chain from gamma = 0 with burn-in adaptation toward target_accept; the
// scale is frozen when sampling starts, keeping the retained chain ergodic.
// Throws if no proposal is accepted after adaptation.
MalaRun run_mala(const LatentModel& model, const MalaOptions& options, Rng& rng);

// Posterior mean of z for one slice over the retained samples, on the base grid.
Raster posterior_mean_field(const LatentModel& model, const MalaRun& run, int slice);

// exp(-delta/theta) * E[z_T | x] + (1 - exp(-delta/theta)) * mu per cell;
// delta = 0 returns the posterior mean itself.
Raster forecast_mean(const LatentModel& model, const MalaRun& run, int delta);

// One forecast field draw seeded from retained sample `sample_index`:
// mean-reverted sample plus a fresh innovation with variance
// (1 - exp(-2 delta/theta)) * (prior spatial covariance).
Raster forecast_field_draw(const LatentModel& model, const MalaRun& run, int sample_index,
                           int delta, Rng& rng);

// Per-cell lambda0(c) * lambda1_pred * exp(field(c)); kNoData off the mask.
Raster forecast_intensity(const Raster& lambda0_density, double lambda1_pred,
                          const Raster& field);

}  // namespace lgcp
