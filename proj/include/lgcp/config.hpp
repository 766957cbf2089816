#pragma once

#include <map>
#include <string>
#include <vector>

#include "lgcp/glm.hpp"

namespace lgcp {

// INI-style key=value file: `[section]` headers, `#`/`;` comments, keys exposed
// as "section.key".  Later duplicates win.  Unknown keys are rejected by
// PipelineConfig validation, not by the parser.
class ConfigFile {
 public:
  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_string(const std::string& text);

  bool has(const std::string& key) const;
  const std::map<std::string, std::string>& entries() const { return kv_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;

 private:
  std::map<std::string, std::string> kv_;
};

struct PipelineConfig {
  // paths
  std::string pattern_path;
  std::string window_path;
  std::string out_dir;
  // time range; INT_MIN/INT_MAX sentinels mean "from the data"
  int t0, t1;
  int holdout_days = 0;
  // grid
  int grid_m = 64, grid_p = 64;
  // bandwidth
  int bandwidth_K = 5;
  double bandwidth_epsilon = 1e-5;
  int bandwidth_max_iter = 500;
  double explicit_bandwidth = 0.0;  // > 0 bypasses the clustering rule
  // glm
  std::string glm_kind = "calendar";  // or "intercept"
  CalendarDate glm_origin{2014, 1, 1};
  double glm_tol = 1e-8;
  int glm_max_iter = 100;
  int forecast_horizon = 6;  // lambda1 is emitted through t1 + horizon
  // summaries
  double k_r_max = 0.0;  // 0: quarter of the shorter window side
  int k_n_r = 10;
  int k_t_max = 3;
  double temporal_bandwidth = 5.0;  // days; Epanechnikov plug-in for the K surface
  double pcf_u_min = 0.0;  // 0: the Stoyan bandwidth
  double pcf_u_max = 0.0;  // 0: quarter of the shorter window side
  int pcf_n_u = 25;
  double stoyan_c = 0.15;
  int autocov_v_max = 0;  // 0: min(10, T-1)
  int mctest_n_perm = 99;
  int envelope_n_sim = 200;
  // covariance fit
  double contrast_exponent = 0.25;
  double fit_u_min = 0.0, fit_u_max = 0.0;  // 0: pcf grid bounds
  double sigma2_lo = 1e-4, sigma2_hi = 50.0;
  double phi_lo = 0.0, phi_hi = 0.0;  // 0: derived from the u range
  double theta_lo = 0.02, theta_hi = 50.0;
  int fit_v_min = 1, fit_v_max = 6;
  bool finite_sample_correction = true;
  // mala
  int mala_n_iter = 4000;
  int mala_burn_in = -1;
  int mala_thin = 10;
  int mala_zeta = 7;
  double mala_target_accept = 0.574;
  double mala_xi2_init = 0.01;
  // forecast / simulate
  std::vector<int> forecast_deltas{1, 2, 3, 4, 5, 6};
  int forecast_n_draws = 200;
  int sim_n_realizations = 20;
  // run control
  unsigned long long seed = 20140101ULL;
  int threads = 1;

  // Throws std::invalid_argument naming the offending field.
  static PipelineConfig from_config(const ConfigFile& cfg);
  void validate() const;
};

}  // namespace lgcp
