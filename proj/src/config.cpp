#include "lgcp/config.hpp"

#include <charconv>
#include <climits>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lgcp {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_field(const std::string& key, const std::string& why) {
  throw std::invalid_argument("config field " + key + " " + why);
}

}  // namespace

ConfigFile ConfigFile::parse_string(const std::string& text) {
  ConfigFile cfg;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
    cfg.kv_[section.empty() ? key : section + "." + key] = trim(t.substr(eq + 1));
  }
  return cfg;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

bool ConfigFile::has(const std::string& key) const { return kv_.count(key) != 0; }

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

std::string ConfigFile::require_string(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end() || it->second.empty()) bad_field(key, "is required");
  return it->second;
}

long long ConfigFile::get_int(const std::string& key, long long fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  long long v = 0;
  const std::string& s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) bad_field(key, "is not an integer");
  return v;
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  double v = 0;
  const std::string& s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) bad_field(key, "is not a number");
  return v;
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  const std::string& s = it->second;
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad_field(key, "is not a boolean (true/false)");
}

std::vector<int> ConfigFile::get_int_list(const std::string& key,
                                          const std::vector<int>& fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  std::vector<int> out;
  std::istringstream in(it->second);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    const std::string t = trim(tok);
    int v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size())
      bad_field(key, "has a non-integer element \"" + t + "\"");
    out.push_back(v);
  }
  if (out.empty()) bad_field(key, "is an empty list");
  return out;
}

PipelineConfig PipelineConfig::from_config(const ConfigFile& cfg) {
  PipelineConfig c;
  c.pattern_path = cfg.require_string("paths.pattern");
  c.window_path = cfg.require_string("paths.window");
  c.out_dir = cfg.require_string("paths.out_dir");
  if (!std::filesystem::exists(c.pattern_path))
    bad_field("paths.pattern", "names a missing file \"" + c.pattern_path + "\"");
  if (!std::filesystem::exists(c.window_path))
    bad_field("paths.window", "names a missing file \"" + c.window_path + "\"");

  c.t0 = static_cast<int>(cfg.get_int("time.t0", INT_MIN));
  c.t1 = static_cast<int>(cfg.get_int("time.t1", INT_MAX));
  c.holdout_days = static_cast<int>(cfg.get_int("time.holdout_days", c.holdout_days));

  c.grid_m = static_cast<int>(cfg.get_int("grid.m", c.grid_m));
  c.grid_p = static_cast<int>(cfg.get_int("grid.p", c.grid_p));

  c.bandwidth_K = static_cast<int>(cfg.get_int("bandwidth.K", c.bandwidth_K));
  c.bandwidth_epsilon = cfg.get_double("bandwidth.epsilon", c.bandwidth_epsilon);
  c.bandwidth_max_iter = static_cast<int>(cfg.get_int("bandwidth.max_iter", c.bandwidth_max_iter));
  c.explicit_bandwidth = cfg.get_double("bandwidth.explicit_h", c.explicit_bandwidth);

  c.glm_kind = cfg.get_string("glm.kind", c.glm_kind);
  if (cfg.has("glm.origin")) {
    const std::string o = cfg.require_string("glm.origin");
    int y, m, d;
    if (std::sscanf(o.c_str(), "%d-%d-%d", &y, &m, &d) != 3)
      throw std::invalid_argument("config field glm.origin must be YYYY-MM-DD");
    c.glm_origin = {y, m, d};
  }
  c.glm_tol = cfg.get_double("glm.tol", c.glm_tol);
  c.glm_max_iter = static_cast<int>(cfg.get_int("glm.max_iter", c.glm_max_iter));
  c.forecast_horizon = static_cast<int>(cfg.get_int("forecast.horizon", c.forecast_horizon));

  c.k_r_max = cfg.get_double("summaries.r_max", c.k_r_max);
  c.k_n_r = static_cast<int>(cfg.get_int("summaries.n_r", c.k_n_r));
  c.k_t_max = static_cast<int>(cfg.get_int("summaries.t_max", c.k_t_max));
  c.temporal_bandwidth = cfg.get_double("summaries.temporal_bandwidth", c.temporal_bandwidth);
  c.pcf_u_min = cfg.get_double("summaries.u_min", c.pcf_u_min);
  c.pcf_u_max = cfg.get_double("summaries.u_max", c.pcf_u_max);
  c.pcf_n_u = static_cast<int>(cfg.get_int("summaries.n_u", c.pcf_n_u));
  c.stoyan_c = cfg.get_double("summaries.stoyan_c", c.stoyan_c);
  c.autocov_v_max = static_cast<int>(cfg.get_int("summaries.v_max", c.autocov_v_max));
  c.mctest_n_perm = static_cast<int>(cfg.get_int("summaries.n_perm", c.mctest_n_perm));
  c.envelope_n_sim = static_cast<int>(cfg.get_int("summaries.n_sim", c.envelope_n_sim));

  c.contrast_exponent = cfg.get_double("covfit.exponent", c.contrast_exponent);
  c.fit_u_min = cfg.get_double("covfit.u_min", c.fit_u_min);
  c.fit_u_max = cfg.get_double("covfit.u_max", c.fit_u_max);
  c.sigma2_lo = cfg.get_double("covfit.sigma2_lo", c.sigma2_lo);
  c.sigma2_hi = cfg.get_double("covfit.sigma2_hi", c.sigma2_hi);
  c.phi_lo = cfg.get_double("covfit.phi_lo", c.phi_lo);
  c.phi_hi = cfg.get_double("covfit.phi_hi", c.phi_hi);
  c.theta_lo = cfg.get_double("covfit.theta_lo", c.theta_lo);
  c.theta_hi = cfg.get_double("covfit.theta_hi", c.theta_hi);
  c.fit_v_min = static_cast<int>(cfg.get_int("covfit.v_min", c.fit_v_min));
  c.fit_v_max = static_cast<int>(cfg.get_int("covfit.v_max", c.fit_v_max));
  c.finite_sample_correction =
      cfg.get_bool("covfit.finite_sample_correction", c.finite_sample_correction);

  c.mala_n_iter = static_cast<int>(cfg.get_int("mala.n_iter", c.mala_n_iter));
  c.mala_burn_in = static_cast<int>(cfg.get_int("mala.burn_in", c.mala_burn_in));
  c.mala_thin = static_cast<int>(cfg.get_int("mala.thin", c.mala_thin));
  c.mala_zeta = static_cast<int>(cfg.get_int("mala.zeta", c.mala_zeta));
  c.mala_target_accept = cfg.get_double("mala.target_accept", c.mala_target_accept);
  c.mala_xi2_init = cfg.get_double("mala.xi2_init", c.mala_xi2_init);

  c.forecast_deltas = cfg.get_int_list("forecast.deltas", c.forecast_deltas);
  c.forecast_n_draws = static_cast<int>(cfg.get_int("forecast.n_draws", c.forecast_n_draws));
  c.sim_n_realizations = static_cast<int>(cfg.get_int("simulate.n_realizations", c.sim_n_realizations));

  c.seed = static_cast<unsigned long long>(cfg.get_int("run.seed", static_cast<long long>(c.seed)));
  c.threads = static_cast<int>(cfg.get_int("run.threads", c.threads));

  c.validate();
  return c;
}

void PipelineConfig::validate() const {
  auto check = [](bool ok, const std::string& field, const std::string& why) {
    if (!ok) bad_field(field, why);
  };
  check(t0 <= t1, "time.t0", "must not exceed time.t1");
  check(holdout_days >= 0, "time.holdout_days", "must be >= 0");
  check(grid_m >= 1 && grid_m <= 4096, "grid.m", "must be in [1, 4096]");
  check(grid_p >= 1 && grid_p <= 4096, "grid.p", "must be in [1, 4096]");
  check(bandwidth_K >= 1, "bandwidth.K", "must be >= 1");
  check(bandwidth_epsilon > 0, "bandwidth.epsilon", "must be > 0");
  check(bandwidth_max_iter >= 1, "bandwidth.max_iter", "must be >= 1");
  check(explicit_bandwidth >= 0, "bandwidth.explicit_h", "must be >= 0");
  check(glm_kind == "calendar" || glm_kind == "intercept", "glm.kind",
        "must be calendar or intercept");
  check(glm_tol > 0, "glm.tol", "must be > 0");
  check(glm_max_iter >= 1, "glm.max_iter", "must be >= 1");
  check(forecast_horizon >= 1, "forecast.horizon", "must be >= 1");
  check(k_r_max >= 0, "summaries.r_max", "must be >= 0");
  check(k_n_r >= 1, "summaries.n_r", "must be >= 1");
  check(k_t_max >= 0, "summaries.t_max", "must be >= 0");
  check(pcf_u_min >= 0, "summaries.u_min", "must be >= 0");
  check(pcf_u_max >= 0, "summaries.u_max", "must be >= 0");
  check(pcf_u_max == 0 || pcf_u_min < pcf_u_max, "summaries.u_min", "must be below summaries.u_max");
  check(pcf_n_u >= 2, "summaries.n_u", "must be >= 2");
  check(stoyan_c > 0, "summaries.stoyan_c", "must be > 0");
  check(temporal_bandwidth > 0, "summaries.temporal_bandwidth", "must be > 0");
  check(autocov_v_max >= 0, "summaries.v_max", "must be >= 0");
  check(mctest_n_perm >= 1, "summaries.n_perm", "must be >= 1");
  check(envelope_n_sim >= 2, "summaries.n_sim", "must be >= 2");
  check(contrast_exponent > 0 && contrast_exponent <= 1, "covfit.exponent", "must be in (0, 1]");
  check(sigma2_lo > 0 && sigma2_lo < sigma2_hi, "covfit.sigma2_lo",
        "must be positive and below covfit.sigma2_hi");
  check(phi_lo >= 0, "covfit.phi_lo", "must be >= 0");
  check(phi_hi == 0 || phi_lo < phi_hi, "covfit.phi_lo", "must be below covfit.phi_hi");
  check(theta_lo > 0 && theta_lo < theta_hi, "covfit.theta_lo",
        "must be positive and below covfit.theta_hi");
  check(fit_v_min >= 1, "covfit.v_min", "must be >= 1");
  check(fit_v_max >= fit_v_min, "covfit.v_max", "must be >= covfit.v_min");
  check(mala_n_iter >= 2, "mala.n_iter", "must be >= 2");
  check(mala_burn_in < mala_n_iter, "mala.burn_in", "must be below mala.n_iter");
  check(mala_thin >= 1, "mala.thin", "must be >= 1");
  check(mala_zeta >= 1, "mala.zeta", "must be >= 1");
  check(mala_target_accept > 0 && mala_target_accept < 1, "mala.target_accept",
        "must be in (0, 1)");
  check(mala_xi2_init > 0, "mala.xi2_init", "must be > 0");
  check(!forecast_deltas.empty(), "forecast.deltas", "must be non-empty");
  for (int d : forecast_deltas)
    check(d >= 1, "forecast.deltas", "must contain horizons >= 1");
  check(forecast_n_draws >= 1, "forecast.n_draws", "must be >= 1");
  check(sim_n_realizations >= 1, "simulate.n_realizations", "must be >= 1");
  check(threads >= 1, "run.threads", "must be >= 1");
}

}  // namespace lgcp
