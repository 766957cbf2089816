#include "lgcp/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lgcp/bandwidth.hpp"
#include "lgcp/grf.hpp"
#include "lgcp/intensity.hpp"
#include "lgcp/mala.hpp"
#include "lgcp/rng.hpp"
#include "lgcp/sim.hpp"

namespace fs = std::filesystem;

namespace lgcp {
namespace {

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string to_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool parse_d(const std::string& s, double& v) {
  const char* b = s.data();
  const char* e = b + s.size();
  const auto res = std::from_chars(b, e, v);
  return res.ec == std::errc() && res.ptr == e;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

const char* units_name(RasterUnits u) {
  switch (u) {
    case RasterUnits::IntensityPerArea: return "intensity";
    case RasterUnits::Field: return "field";
    case RasterUnits::Density: return "density";
  }
  return "field";
}

RasterUnits units_from(const std::string& s) {
  if (s == "intensity") return RasterUnits::IntensityPerArea;
  if (s == "field") return RasterUnits::Field;
  if (s == "density") return RasterUnits::Density;
  throw std::runtime_error("unknown raster units '" + s + "'");
}

size_t column(const TableCsv& t, const std::string& name, const std::string& path) {
  for (size_t i = 0; i < t.columns.size(); ++i)
    if (t.columns[i] == name) return i;
  throw std::runtime_error(path + ": missing column '" + name + "'");
}

double cell(const TableCsv& t, size_t row, const std::string& name, const std::string& path) {
  if (row >= t.rows.size()) throw std::runtime_error(path + ": too few rows");
  return t.rows[row][column(t, name, path)];
}

long long cell_i(const TableCsv& t, size_t row, const std::string& name,
                 const std::string& path) {
  return std::llround(cell(t, row, name, path));
}

std::vector<double> column_values(const TableCsv& t, const std::string& name,
                                  const std::string& path) {
  const size_t c = column(t, name, path);
  std::vector<double> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) out.push_back(r[c]);
  return out;
}

fs::path opath(const PipelineConfig& cfg, const std::string& name) {
  return fs::path(cfg.out_dir) / name;
}

// ESRI-ASCII-style grid: 6-line header then rows top-down; masked-out cells
// carry the NODATA marker.  cellsize reports dx (cells are square whenever the
// grid resolution matches the window aspect).
void write_esri_asc(const std::string& path, const Raster& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write grid file: " + path);
  const GridSpec& g = r.grid;
  out << "ncols " << g.m << '\n'
      << "nrows " << g.p << '\n'
      << "xllcorner " << fmt(g.x_min) << '\n'
      << "yllcorner " << fmt(g.y_min) << '\n'
      << "cellsize " << fmt(g.dx) << '\n'
      << "NODATA_value " << fmt(kNoData) << '\n';
  for (int j = g.p - 1; j >= 0; --j) {
    for (int i = 0; i < g.m; ++i) {
      if (i) out << ' ';
      out << fmt(g.mask[g.idx(i, j)] ? r.values[g.idx(i, j)] : kNoData);
    }
    out << '\n';
  }
}

// Retained terminal-field samples: one comma-joined extended-grid field per
// line under a `# zT,M,N,q,n_rows` descriptor.

void write_field_samples(const std::string& path, int M, int N,
                         const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# zT," << M << ',' << N << ',' << static_cast<long long>(M) * N << ',' << rows.size()
      << '\n';
  for (const auto& row : rows) {
    for (size_t k = 0; k < row.size(); ++k) {
      if (k) out << ',';
      out << fmt(row[k]);
    }
    out << '\n';
  }
}

std::vector<std::vector<double>> read_field_samples(const std::string& path, int& M, int& N) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  auto head = split_line(strip_cr(line));
  if (head.size() != 5 || head[0] != "# zT")
    throw std::runtime_error(path + ": malformed field-sample descriptor");
  M = std::stoi(head[1]);
  N = std::stoi(head[2]);
  const size_t q = static_cast<size_t>(M) * N;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != q)
      throw std::runtime_error(path + ": row has " + std::to_string(fields.size()) +
                               " values, expected " + std::to_string(q));
    std::vector<double> row(q);
    for (size_t k = 0; k < q; ++k)
      if (!parse_d(fields[k], row[k])) throw std::runtime_error(path + ": malformed field value");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

// ---------- CSV artifacts ----------

void write_raster_csv(const std::string& path, const Raster& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write raster file: " + path);
  const GridSpec& g = r.grid;
  out << "# raster," << g.m << ',' << g.p << ',' << fmt(g.x_min) << ',' << fmt(g.y_min) << ','
      << fmt(g.dx) << ',' << fmt(g.dy) << ',' << units_name(r.units) << '\n';
  out << "i,j,x,y,mask,value\n";
  for (int i = 0; i < g.m; ++i)
    for (int j = 0; j < g.p; ++j)
      out << i << ',' << j << ',' << fmt(g.cx(i)) << ',' << fmt(g.cy(j)) << ','
          << static_cast<int>(g.mask[g.idx(i, j)]) << ',' << fmt(r.values[g.idx(i, j)]) << '\n';
}

Raster read_raster_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open raster file: " + path);
  std::string line;
  GridSpec g;
  RasterUnits units = RasterUnits::Field;
  bool have_desc = false;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != 8 || fields[0] != "# raster")
      throw std::runtime_error(path + ": first line must be the `# raster,...` descriptor");
    g.m = std::stoi(fields[1]);
    g.p = std::stoi(fields[2]);
    if (!parse_d(fields[3], g.x_min) || !parse_d(fields[4], g.y_min) ||
        !parse_d(fields[5], g.dx) || !parse_d(fields[6], g.dy))
      throw std::runtime_error(path + ": malformed raster descriptor");
    units = units_from(fields[7]);
    have_desc = true;
    break;
  }
  if (!have_desc || g.m <= 0 || g.p <= 0)
    throw std::runtime_error(path + ": missing or invalid raster descriptor");
  if (!std::getline(in, line) || strip_cr(line) != "i,j,x,y,mask,value")
    throw std::runtime_error(path + ": expected header `i,j,x,y,mask,value`");

  const size_t n = static_cast<size_t>(g.m) * g.p;
  g.mask.assign(n, 0);
  Raster r;
  r.units = units;
  r.values.assign(n, kNoData);
  size_t seen = 0;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_line(line);
    if (f.size() != 6) throw std::runtime_error(path + ": expected 6 fields per raster row");
    const int i = std::stoi(f[0]), j = std::stoi(f[1]);
    if (i < 0 || i >= g.m || j < 0 || j >= g.p)
      throw std::runtime_error(path + ": raster cell index out of range");
    double v;
    if (!parse_d(f[5], v)) throw std::runtime_error(path + ": malformed raster value");
    const size_t idx = static_cast<size_t>(i) * g.p + j;
    g.mask[idx] = static_cast<uint8_t>(f[4] == "1");
    r.values[idx] = v;
    ++seen;
  }
  if (seen != n)
    throw std::runtime_error(path + ": raster has " + std::to_string(seen) + " rows, expected " +
                             std::to_string(n));
  r.grid = std::move(g);
  return r;
}

void write_table_csv(const std::string& path, const std::string& header,
                     const std::vector<std::vector<double>>& rows,
                     const std::vector<std::pair<std::string, std::string>>& meta) {
  const size_t n_cols = split_line(header).size();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write table file: " + path);
  for (const auto& [k, v] : meta) out << "# " << k << ',' << v << '\n';
  out << header << '\n';
  for (const auto& row : rows) {
    if (row.size() != n_cols)
      throw std::runtime_error(path + ": row width does not match the header");
    for (size_t k = 0; k < row.size(); ++k) {
      if (k) out << ',';
      out << fmt(row[k]);
    }
    out << '\n';
  }
}

double TableCsv::meta_double(const std::string& key) const {
  for (const auto& [k, v] : meta)
    if (k == key) {
      double d;
      if (!parse_d(v, d)) throw std::runtime_error("meta '" + key + "' is not numeric");
      return d;
    }
  throw std::runtime_error("missing meta '" + key + "'");
}

TableCsv read_table_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open table file: " + path);
  TableCsv t;
  std::string line;
  bool have_header = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      if (!body.empty() && body.front() == ' ') body.erase(0, 1);
      const size_t pos = body.find(',');
      if (pos == std::string::npos)
        t.meta.emplace_back(body, "");
      else
        t.meta.emplace_back(body.substr(0, pos), body.substr(pos + 1));
      continue;
    }
    if (!have_header) {
      t.columns = split_line(line);
      have_header = true;
      continue;
    }
    const auto fields = split_line(line);
    if (fields.size() != t.columns.size())
      throw std::runtime_error(path + ": wrong field count at line " + std::to_string(line_no));
    std::vector<double> row(fields.size());
    for (size_t k = 0; k < fields.size(); ++k)
      if (!parse_d(fields[k], row[k]))
        throw std::runtime_error(path + ": malformed number at line " + std::to_string(line_no));
    t.rows.push_back(std::move(row));
  }
  if (!have_header) throw std::runtime_error(path + ": missing header");
  return t;
}

// ---------- stage artifact loaders ----------

IngestMeta load_ingest_meta(const PipelineConfig& cfg) {
  const std::string p = opath(cfg, "ingest_meta.csv").string();
  const TableCsv t = read_table_csv(p);
  IngestMeta m;
  m.t0 = static_cast<int>(cell_i(t, 0, "t0", p));
  m.t1 = static_cast<int>(cell_i(t, 0, "t1", p));
  m.fit_t1 = static_cast<int>(cell_i(t, 0, "fit_t1", p));
  m.holdout = static_cast<int>(cell_i(t, 0, "holdout_days", p));
  m.n_total = cell_i(t, 0, "n_total", p);
  m.n_fit = cell_i(t, 0, "n_fit", p);
  m.n_holdout = cell_i(t, 0, "n_holdout", p);
  m.dropped = cell_i(t, 0, "dropped", p);
  return m;
}

ObservationWindow load_out_window(const PipelineConfig& cfg) {
  return load_window_file(opath(cfg, "window.csv").string());
}

SpatioTemporalPointPattern load_fit_pattern(const PipelineConfig& cfg,
                                            const ObservationWindow& win,
                                            const IngestMeta& meta) {
  return load_point_pattern_file(opath(cfg, "pattern_fit.csv").string(), win, meta.t0,
                                 meta.fit_t1)
      .pattern;
}

std::map<int, double> load_lambda1_map(const PipelineConfig& cfg) {
  const std::string p = opath(cfg, "lambda1.csv").string();
  const TableCsv t = read_table_csv(p);
  const size_t ct = column(t, "t", p), cl = column(t, "lambda1", p);
  std::map<int, double> out;
  for (const auto& r : t.rows) out[static_cast<int>(std::llround(r[ct]))] = r[cl];
  return out;
}

double lambda1_at(const std::map<int, double>& m, int t) {
  const auto it = m.find(t);
  if (it == m.end())
    throw std::runtime_error("temporal intensity not available for day " + std::to_string(t) +
                             "; raise forecast.horizon and rerun the glm-fit stage");
  return it->second;
}

std::vector<double> lambda1_series(const std::map<int, double>& m, int a, int b) {
  std::vector<double> out;
  out.reserve(static_cast<size_t>(b - a + 1));
  for (int t = a; t <= b; ++t) out.push_back(lambda1_at(m, t));
  return out;
}

SpatialDensity load_density(const PipelineConfig& cfg) {
  SpatialDensity d;
  d.raster = read_raster_csv(opath(cfg, "lambda0_density.csv").string());
  if (d.raster.units != RasterUnits::Density)
    throw std::runtime_error("lambda0_density.csv does not hold a density raster");
  const std::string p = opath(cfg, "intensity_meta.csv").string();
  const TableCsv t = read_table_csv(p);
  d.bandwidth = cell(t, 0, "bandwidth", p);
  d.normalization = cell(t, 0, "normalization", p);
  return d;
}

CovarianceParams load_covfit(const PipelineConfig& cfg) {
  const std::string p = opath(cfg, "covfit.csv").string();
  const TableCsv t = read_table_csv(p);
  CovarianceParams params;
  params.sigma2 = cell(t, 0, "sigma2", p);
  params.phi = cell(t, 0, "phi", p);
  params.theta = cell(t, 0, "theta", p);
  params.validate();
  return params;
}

// ---------- stage internals ----------

namespace {

double read_bandwidth(const PipelineConfig& cfg) {
  const std::string p = opath(cfg, "bandwidth.csv").string();
  return cell(read_table_csv(p), 0, "h", p);
}

int resolved_zeta(const PipelineConfig& cfg, const IngestMeta& meta) {
  return std::min(cfg.mala_zeta, meta.fit_t1 - meta.t0 + 1);
}

// Base-grid raster from an extended-grid field vector (row-major u*N+v).
Raster restrict_field(const std::vector<double>& z_ext, const GridSpec& grid, int N,
                      RasterUnits units) {
  Raster r(grid, 0.0, units);
  for (int i = 0; i < grid.m; ++i)
    for (int j = 0; j < grid.p; ++j)
      if (grid.mask[grid.idx(i, j)]) r.at(i, j) = z_ext[static_cast<size_t>(i) * N + j];
  return r;
}

double short_side(const ObservationWindow& win) {
  double bx0, by0, bx1, by1;
  win.bounding_box(bx0, by0, bx1, by1);
  return std::min(bx1 - bx0, by1 - by0);
}

std::vector<double> resolve_r_grid(const PipelineConfig& cfg, const ObservationWindow& win) {
  const double r_max = cfg.k_r_max > 0 ? cfg.k_r_max : 0.25 * short_side(win);
  std::vector<double> r_grid;
  for (int i = 1; i <= cfg.k_n_r; ++i) r_grid.push_back(r_max * i / cfg.k_n_r);
  return r_grid;
}

std::vector<int> resolve_t_grid(const PipelineConfig& cfg) {
  std::vector<int> t_grid;
  for (int t = 0; t <= cfg.k_t_max; ++t) t_grid.push_back(t);
  return t_grid;
}

std::vector<std::string> stage_ingest(const PipelineConfig& cfg) {
  if (cfg.pattern_path.empty())
    throw std::runtime_error("config field paths.pattern is required for the ingest stage");
  if (cfg.window_path.empty())
    throw std::runtime_error("config field paths.window is required for the ingest stage");
  const ObservationWindow win = load_window_file(cfg.window_path);
  const LoadResult lr = load_point_pattern_file(cfg.pattern_path, win, cfg.t0, cfg.t1);
  const auto& evs = lr.pattern.events();

  int t0r = cfg.t0, t1r = cfg.t1;
  if (t0r == std::numeric_limits<int>::min() || t1r == std::numeric_limits<int>::max()) {
    int lo = evs.front().t, hi = evs.front().t;
    for (const Event& e : evs) {
      lo = std::min(lo, e.t);
      hi = std::max(hi, e.t);
    }
    if (t0r == std::numeric_limits<int>::min()) t0r = lo;
    if (t1r == std::numeric_limits<int>::max()) t1r = hi;
  }
  const int H = cfg.holdout_days;
  const int fit_t1 = t1r - H;
  if (fit_t1 < t0r)
    throw std::runtime_error("config field time.holdout_days leaves no fitting days");

  std::vector<Event> fit_e, hold_e;
  for (const Event& e : evs) (e.t <= fit_t1 ? fit_e : hold_e).push_back(e);
  if (fit_e.empty()) throw std::runtime_error("no events in the fitting period");
  const long long n_fit = static_cast<long long>(fit_e.size());
  const long long n_hold = static_cast<long long>(hold_e.size());

  const SpatioTemporalPointPattern fit(std::move(fit_e), win, t0r, fit_t1);
  save_window_file(opath(cfg, "window.csv").string(), win);
  save_point_pattern_file(opath(cfg, "pattern_fit.csv").string(), fit);
  if (H > 0) {
    const SpatioTemporalPointPattern hold(std::move(hold_e), win, fit_t1 + 1, t1r);
    save_point_pattern_file(opath(cfg, "pattern_holdout.csv").string(), hold);
  } else {
    std::ofstream out(opath(cfg, "pattern_holdout.csv"));
    out << "x,y,t\n";
  }

  std::vector<std::vector<double>> rows;
  for (const auto& [t, n] : daily_counts(fit))
    rows.push_back({static_cast<double>(t), static_cast<double>(n)});
  write_table_csv(opath(cfg, "daily_counts.csv").string(), "t,count", rows);

  write_table_csv(opath(cfg, "ingest_meta.csv").string(),
                  "t0,t1,fit_t1,holdout_days,n_total,n_fit,n_holdout,dropped",
                  {{static_cast<double>(t0r), static_cast<double>(t1r),
                    static_cast<double>(fit_t1), static_cast<double>(H),
                    static_cast<double>(evs.size()), static_cast<double>(n_fit),
                    static_cast<double>(n_hold), static_cast<double>(lr.dropped)}});
  return {"window.csv", "pattern_fit.csv", "pattern_holdout.csv", "daily_counts.csv",
          "ingest_meta.csv"};
}

std::vector<std::string> stage_bandwidth(const PipelineConfig& cfg) {
  const IngestMeta meta = load_ingest_meta(cfg);
  const ObservationWindow win = load_out_window(cfg);
  const SpatioTemporalPointPattern pat = load_fit_pattern(cfg, win, meta);

  double h = cfg.explicit_bandwidth;
  int iters = 0, converged = 1, K = 0;
  double eps = 0.0;
  std::string method = "explicit";
  if (!(h > 0)) {
    std::vector<Point> pts;
    pts.reserve(pat.size());
    for (const Event& e : pat.events()) pts.push_back({e.x, e.y});
    Rng rng = seed_stream(cfg.seed, "bandwidth");
    const Clustering c =
        kmeans_cluster(pts, cfg.bandwidth_K, cfg.bandwidth_epsilon, cfg.bandwidth_max_iter, rng);
    h = bandwidth_from_clustering(c, pts);
    iters = c.iterations;
    converged = c.converged ? 1 : 0;
    K = cfg.bandwidth_K;
    eps = cfg.bandwidth_epsilon;
    method = "kmeans";
  }
  if (!(h > 0))
    throw std::runtime_error(
        "selected bandwidth is not positive; set bandwidth.explicit to override");
  write_table_csv(opath(cfg, "bandwidth.csv").string(), "h,K,epsilon,iterations,converged",
                  {{h, static_cast<double>(K), eps, static_cast<double>(iters),
                    static_cast<double>(converged)}},
                  {{"method", method}});
  return {"bandwidth.csv"};
}

std::vector<std::string> stage_intensity(const PipelineConfig& cfg) {
  const IngestMeta meta = load_ingest_meta(cfg);
  const ObservationWindow win = load_out_window(cfg);
  const SpatioTemporalPointPattern pat = load_fit_pattern(cfg, win, meta);
  const double h = read_bandwidth(cfg);

  const GridSpec grid = GridSpec::cover(win, cfg.grid_m, cfg.grid_p);
  const Raster raw = kernel_intensity_raster(pat, grid, h, cfg.threads);
  const SpatialDensity dens = normalize_to_density(raw, h);
  write_raster_csv(opath(cfg, "lambda0_density.csv").string(), dens.raster);
  write_esri_asc(opath(cfg, "lambda0_density.asc").string(), dens.raster);
  write_table_csv(opath(cfg, "intensity_meta.csv").string(),
                  "bandwidth,normalization,masked_integral",
                  {{dens.bandwidth, dens.normalization, dens.raster.masked_integral()}});
  return {"lambda0_density.csv", "lambda0_density.asc", "intensity_meta.csv"};
}

std::vector<std::string> stage_glm(const PipelineConfig& cfg) {
  const IngestMeta meta = load_ingest_meta(cfg);
  const std::string dp = opath(cfg, "daily_counts.csv").string();
  const TableCsv dt = read_table_csv(dp);
  const size_t cc = column(dt, "count", dp);
  std::vector<long long> y;
  y.reserve(dt.rows.size());
  for (const auto& r : dt.rows) y.push_back(std::llround(r[cc]));
  const int n_days = meta.fit_t1 - meta.t0 + 1;
  if (static_cast<int>(y.size()) != n_days)
    throw std::runtime_error(dp + ": expected one row per fitting day");

  const DesignMatrix dm = (cfg.glm_kind == "intercept")
                              ? build_intercept_only_design(meta.t0, meta.fit_t1)
                              : build_design(meta.t0, meta.fit_t1, cfg.glm_origin);
  const TemporalGlmFit fit = irls_fit(dm, y, cfg.glm_tol, cfg.glm_max_iter);

  {
    std::ofstream out(opath(cfg, "glm_coefficients.csv"));
    if (!out) throw std::runtime_error("cannot write glm_coefficients.csv");
    out << "term,estimate,std_error,z_value,p_value\n";
    for (int k = 0; k < fit.coefficients.size(); ++k)
      out << fit.labels[k] << ',' << fmt(fit.coefficients[k]) << ',' << fmt(fit.std_errors[k])
          << ',' << fmt(fit.z_values[k]) << ',' << fmt(fit.p_values[k]) << '\n';
  }
  write_table_csv(
      opath(cfg, "glm_stats.csv").string(),
      "null_deviance,null_df,residual_deviance,residual_df,aic,median_deviance_residual,"
      "iterations",
      {{fit.null_deviance, static_cast<double>(fit.null_df), fit.residual_deviance,
        static_cast<double>(fit.residual_df), fit.aic, fit.median_deviance_residual,
        static_cast<double>(fit.iterations)}},
      {{"kind", cfg.glm_kind}});

  int horizon = std::max(cfg.forecast_horizon, meta.holdout);
  for (int d : cfg.forecast_deltas) horizon = std::max(horizon, d);
  std::vector<std::vector<double>> rows;
  for (int t = meta.t0; t <= meta.fit_t1 + horizon; ++t)
    rows.push_back({static_cast<double>(t), predict_lambda1(fit, t)});
  write_table_csv(opath(cfg, "lambda1.csv").string(), "t,lambda1", rows);
  return {"glm_coefficients.csv", "glm_stats.csv", "lambda1.csv"};
}

std::vector<std::string> stage_summaries(const PipelineConfig& cfg) {
  std::vector<std::string> outputs = write_kst(cfg);
  for (auto& f : write_pcf(cfg)) outputs.push_back(std::move(f));
  for (auto& f : write_autocov(cfg)) outputs.push_back(std::move(f));
  return outputs;
}

std::vector<std::string> stage_fitcov(const PipelineConfig& cfg) {
  const IngestMeta meta = load_ingest_meta(cfg);
  const SpatialDensity dens = load_density(cfg);
  const auto l1map = load_lambda1_map(cfg);

  const std::string pp = opath(cfg, "pcf.csv").string();
  const TableCsv pt = read_table_csv(pp);
  PcfCurve curve;
  curve.u_grid = column_values(pt, "u", pp);
  curve.values = column_values(pt, "g", pp);
  curve.h_s = pt.meta_double("h_s");

  const double u_lo = cfg.fit_u_min > 0 ? cfg.fit_u_min : curve.u_grid.front();
  const double u_hi = cfg.fit_u_max > 0 ? cfg.fit_u_max : curve.u_grid.back();
  SpatialFitOptions so;
  so.exponent = cfg.contrast_exponent;
  so.sigma2_lo = cfg.sigma2_lo;
  so.sigma2_hi = cfg.sigma2_hi;
  so.phi_lo = cfg.phi_lo;
  so.phi_hi = cfg.phi_hi;
  const SpatialFitResult sp = fit_spatial_params(curve, u_lo, u_hi, so);

  const std::string ap = opath(cfg, "autocov.csv").string();
  const TableCsv at = read_table_csv(ap);
  AutocovCurve ac;
  for (double v : column_values(at, "v", ap))
    ac.v_grid.push_back(static_cast<int>(std::llround(v)));
  ac.values = column_values(at, "cbar", ap);
  ac.lambda1 = lambda1_series(l1map, meta.t0, meta.fit_t1);
  ac.t0 = meta.t0;

  const int v_hi = std::min(cfg.fit_v_max, ac.v_grid.back());
  std::vector<int> v_range;
  for (int v = cfg.fit_v_min; v <= v_hi; ++v) v_range.push_back(v);
  if (v_range.empty())
    throw std::runtime_error(
        "config field covfit.v_min exceeds the available autocovariance lags");
  ThetaFitOptions to;
  to.theta_lo = cfg.theta_lo;
  to.theta_hi = cfg.theta_hi;
  to.finite_sample_correction = cfg.finite_sample_correction;
  to.n_threads = cfg.threads;
  const ThetaFitResult th = fit_theta(ac, sp.sigma2, sp.phi, dens.raster, v_range, to);

  write_table_csv(opath(cfg, "covfit.csv").string(),
                  "sigma2,phi,theta,contrast_spatial,contrast_temporal",
                  {{sp.sigma2, sp.phi, th.theta, sp.contrast, th.contrast}});
  write_table_csv(opath(cfg, "covfit_details.csv").string(),
                  "spatial_boundary,temporal_boundary,corrected,exponent,u_min,u_max,v_min,v_max",
                  {{sp.hit_boundary ? 1.0 : 0.0, th.hit_boundary ? 1.0 : 0.0,
                    th.corrected ? 1.0 : 0.0, cfg.contrast_exponent, u_lo, u_hi,
                    static_cast<double>(v_range.front()), static_cast<double>(v_range.back())}});
  return {"covfit.csv", "covfit_details.csv"};
}

std::vector<std::string> stage_mala(const PipelineConfig& cfg) {
  const IngestMeta meta = load_ingest_meta(cfg);
  const ObservationWindow win = load_out_window(cfg);
  const SpatioTemporalPointPattern pat = load_fit_pattern(cfg, win, meta);
  const SpatialDensity dens = load_density(cfg);
  const auto l1map = load_lambda1_map(cfg);
  const CovarianceParams params = load_covfit(cfg);

  const GridSpec& grid = dens.raster.grid;
  const int zeta = resolved_zeta(cfg, meta);
  const int t_first = meta.fit_t1 - zeta + 1;
  const CellCountSeries counts = aggregate_counts(pat, grid);
  std::vector<std::vector<int32_t>> slices;
  std::vector<double> l1;
  for (int t = t_first; t <= meta.fit_t1; ++t) {
    slices.push_back(counts.slices[t - counts.t0]);
    l1.push_back(lambda1_at(l1map, t));
  }

  const CirculantSpectrum spectrum = circulant_eigenvalues(extend_grid(grid), params);
  const LatentModel model(spectrum, dens.raster, l1, slices);
  MalaOptions mo;
  mo.n_iter = cfg.mala_n_iter;
  mo.burn_in = cfg.mala_burn_in;
  mo.thin = cfg.mala_thin;
  mo.target_accept = cfg.mala_target_accept;
  mo.xi2_init = cfg.mala_xi2_init;
  Rng rng = seed_stream(cfg.seed, "mala");
  const MalaRun run = run_mala(model, mo, rng);

  {
    std::vector<std::vector<double>> rows;
    rows.reserve(run.diagnostics.size());
    for (const MalaDiagRow& d : run.diagnostics)
      rows.push_back({static_cast<double>(d.iteration), d.log_target,
                      static_cast<double>(d.accepted), d.accept_prob, d.xi2});
    write_table_csv(opath(cfg, "mala_diag.csv").string(),
                    "iteration,log_target,accepted,accept_prob,xi2", rows);
  }
  write_raster_csv(opath(cfg, "posterior_zT.csv").string(),
                   posterior_mean_field(model, run, zeta - 1));
  {
    std::vector<std::vector<double>> rows;
    rows.reserve(run.samples.size());
    for (const auto& g : run.samples) rows.push_back(model.field_slice(g, zeta - 1));
    write_field_samples(opath(cfg, "mala_zT.csv").string(), model.ext().M, model.ext().N, rows);
  }
  write_table_csv(
      opath(cfg, "mala_meta.csv").string(),
      "zeta,t_last,q,M,N,n_samples,acceptance_rate,xi2,auto_rejects,n_iter,burn_in,thin",
      {{static_cast<double>(zeta), static_cast<double>(meta.fit_t1),
        static_cast<double>(model.q()), static_cast<double>(model.ext().M),
        static_cast<double>(model.ext().N), static_cast<double>(run.samples.size()),
        run.acceptance_rate, run.xi2, static_cast<double>(run.auto_rejects),
        static_cast<double>(run.n_iter), static_cast<double>(run.burn_in),
        static_cast<double>(run.thin)}});
  return {"mala_diag.csv", "posterior_zT.csv", "mala_zT.csv", "mala_meta.csv"};
}

// Shared by the forecast/simulate stages and the envelope writer: retained
// terminal-field samples plus everything needed to push them forward in time.
struct ForecastState {
  SpatialDensity dens;
  CovarianceParams params;
  std::map<int, double> l1map;
  int t_last = 0;
  std::vector<std::vector<double>> z_samples;
  std::unique_ptr<CirculantOperator> op;
  int N = 0;
  size_t q = 0;
  double mu = 0.0;
};

ForecastState load_forecast_state(const PipelineConfig& cfg) {
  ForecastState st;
  st.dens = load_density(cfg);
  st.params = load_covfit(cfg);
  st.l1map = load_lambda1_map(cfg);
  const std::string mp = opath(cfg, "mala_meta.csv").string();
  const TableCsv mm = read_table_csv(mp);
  st.t_last = static_cast<int>(cell_i(mm, 0, "t_last", mp));

  int M = 0, N = 0;
  st.z_samples = read_field_samples(opath(cfg, "mala_zT.csv").string(), M, N);
  if (st.z_samples.empty())
    throw std::runtime_error("mala_zT.csv holds no retained samples; rerun the mala stage");
  const ExtendedGrid ext = extend_grid(st.dens.raster.grid);
  if (ext.M != M || ext.N != N)
    throw std::runtime_error(
        "stored field samples do not match the current grid; rerun the mala stage");
  const CirculantSpectrum spectrum = circulant_eigenvalues(ext, st.params);
  st.op = std::make_unique<CirculantOperator>(spectrum);
  st.N = N;
  st.q = ext.q();
  st.mu = -0.5 * st.params.sigma2;
  return st;
}

// One mean-reverted field draw delta days past the last fitted day, seeded
// from retained sample z0.
std::vector<double> forecast_draw(const ForecastState& st, const std::vector<double>& z0,
                                  int delta, Rng& rng, std::vector<double>& eps,
                                  std::vector<double>& innov) {
  const double w = std::exp(-static_cast<double>(delta) / st.params.theta);
  const double sd = std::sqrt(std::max(0.0, 1.0 - w * w));
  std::vector<double> z(st.q);
  if (sd > 0) {
    std::normal_distribution<double> nd;
    for (size_t k = 0; k < st.q; ++k) eps[k] = nd(rng);
    st.op->apply_sqrt(eps, innov);
    for (size_t k = 0; k < st.q; ++k) z[k] = w * z0[k] + (1.0 - w) * st.mu + sd * innov[k];
  } else {
    for (size_t k = 0; k < st.q; ++k) z[k] = w * z0[k] + (1.0 - w) * st.mu;
  }
  return z;
}

std::vector<int> sorted_deltas(const PipelineConfig& cfg) {
  std::vector<int> deltas = cfg.forecast_deltas;
  std::sort(deltas.begin(), deltas.end());
  deltas.erase(std::unique(deltas.begin(), deltas.end()), deltas.end());
  if (deltas.empty())
    throw std::runtime_error("config field forecast.deltas must not be empty");
  return deltas;
}

std::vector<std::string> stage_forecast(const PipelineConfig& cfg) {
  const ForecastState st = load_forecast_state(cfg);
  const GridSpec& grid = st.dens.raster.grid;
  const std::vector<int> deltas = sorted_deltas(cfg);

  std::vector<double> zbar(st.q, 0.0);
  for (const auto& z : st.z_samples)
    for (size_t k = 0; k < st.q; ++k) zbar[k] += z[k];
  for (double& v : zbar) v /= static_cast<double>(st.z_samples.size());

  std::vector<std::string> outputs;
  std::vector<std::vector<double>> summary;
  std::vector<double> eps(st.q), innov(st.q);
  for (int d : deltas) {
    const double lp = lambda1_at(st.l1map, st.t_last + d);
    const double w = std::exp(-static_cast<double>(d) / st.params.theta);
    std::vector<double> mean_ext(st.q);
    for (size_t k = 0; k < st.q; ++k) mean_ext[k] = w * zbar[k] + (1.0 - w) * st.mu;
    const std::string mean_name = "forecast_mean_" + std::to_string(d) + ".csv";
    write_raster_csv(opath(cfg, mean_name).string(),
                     restrict_field(mean_ext, grid, st.N, RasterUnits::Field));
    outputs.push_back(mean_name);

    const int n_draws =
        std::min<int>(cfg.forecast_n_draws, static_cast<int>(st.z_samples.size()));
    Rng rng = seed_stream(cfg.seed, "forecast", static_cast<uint64_t>(d));
    Raster sum(grid, 0.0, RasterUnits::IntensityPerArea);
    std::vector<double> integrals;
    integrals.reserve(n_draws);
    for (int i = 0; i < n_draws; ++i) {
      const std::vector<double> z = forecast_draw(st, st.z_samples[i], d, rng, eps, innov);
      const Raster field = restrict_field(z, grid, st.N, RasterUnits::Field);
      const Raster inten = forecast_intensity(st.dens.raster, lp, field);
      for (int a = 0; a < grid.m; ++a)
        for (int b = 0; b < grid.p; ++b)
          if (grid.mask[grid.idx(a, b)]) sum.at(a, b) += inten.at(a, b);
      integrals.push_back(inten.masked_integral());
    }
    for (int a = 0; a < grid.m; ++a)
      for (int b = 0; b < grid.p; ++b)
        if (grid.mask[grid.idx(a, b)]) sum.at(a, b) /= n_draws;
    const std::string int_name = "forecast_intensity_" + std::to_string(d) + ".csv";
    write_raster_csv(opath(cfg, int_name).string(), sum);
    outputs.push_back(int_name);

    double imean = 0.0;
    for (double v : integrals) imean += v;
    imean /= integrals.size();
    double isd = 0.0;
    if (integrals.size() > 1) {
      for (double v : integrals) isd += (v - imean) * (v - imean);
      isd = std::sqrt(isd / (integrals.size() - 1));
    }
    summary.push_back({static_cast<double>(d), lp, imean, isd});
  }
  write_table_csv(opath(cfg, "forecast_summary.csv").string(),
                  "delta,lambda1_pred,integrated_mean,integrated_sd", summary,
                  {{"n_draws", std::to_string(cfg.forecast_n_draws)}});
  outputs.push_back("forecast_summary.csv");
  return outputs;
}

std::vector<std::string> stage_simulate(const PipelineConfig& cfg) {
  const ForecastState st = load_forecast_state(cfg);
  const ObservationWindow win = load_out_window(cfg);
  const GridSpec& grid = st.dens.raster.grid;
  const std::vector<int> deltas = sorted_deltas(cfg);

  std::vector<std::string> outputs;
  std::vector<std::vector<double>> index_rows;
  std::vector<double> eps(st.q), innov(st.q);
  for (int d : deltas) {
    const double lp = lambda1_at(st.l1map, st.t_last + d);
    Rng rng = seed_stream(cfg.seed, "simulate", static_cast<uint64_t>(d));
    for (int k = 0; k < cfg.sim_n_realizations; ++k) {
      const auto& z0 = st.z_samples[k % st.z_samples.size()];
      const std::vector<double> z = forecast_draw(st, z0, d, rng, eps, innov);
      const Raster field = restrict_field(z, grid, st.N, RasterUnits::Field);
      const Raster inten = forecast_intensity(st.dens.raster, lp, field);
      const std::vector<Point> pts = simulate_poisson_from_raster(inten, rng, &win);
      std::vector<Event> evs;
      evs.reserve(pts.size());
      for (const Point& p : pts) evs.push_back({p.x, p.y, st.t_last + d});
      const SpatioTemporalPointPattern sim(std::move(evs), win, st.t_last + d, st.t_last + d);
      const std::string name = "sim_d" + std::to_string(d) + "_r" + std::to_string(k) + ".csv";
      save_point_pattern_file(opath(cfg, name).string(), sim);
      outputs.push_back(name);
      index_rows.push_back(
          {static_cast<double>(d), static_cast<double>(k), static_cast<double>(pts.size())});
    }
  }
  write_table_csv(opath(cfg, "sim_index.csv").string(), "delta,realization,n_events",
                  index_rows);
  outputs.push_back("sim_index.csv");
  return outputs;
}

// ---------- manifest ----------

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "absent";
  std::ostringstream ss;
  ss << in.rdbuf();
  return to_hex(fnv1a(ss.str()));
}

std::vector<std::string> stage_inputs(const PipelineConfig& cfg, const std::string& stage) {
  const auto o = [&](const char* n) { return opath(cfg, n).string(); };
  if (stage == "ingest") return {cfg.pattern_path, cfg.window_path};
  if (stage == "bandwidth") return {o("ingest_meta.csv"), o("window.csv"), o("pattern_fit.csv")};
  if (stage == "intensity")
    return {o("ingest_meta.csv"), o("window.csv"), o("pattern_fit.csv"), o("bandwidth.csv")};
  if (stage == "glm-fit") return {o("ingest_meta.csv"), o("daily_counts.csv")};
  if (stage == "summaries")
    return {o("ingest_meta.csv"), o("window.csv"), o("pattern_fit.csv"),
            o("lambda0_density.csv"), o("intensity_meta.csv"), o("lambda1.csv")};
  if (stage == "fit-cov")
    return {o("ingest_meta.csv"), o("pcf.csv"), o("autocov.csv"), o("lambda0_density.csv"),
            o("intensity_meta.csv"), o("lambda1.csv")};
  if (stage == "mala")
    return {o("ingest_meta.csv"), o("window.csv"), o("pattern_fit.csv"),
            o("lambda0_density.csv"), o("intensity_meta.csv"), o("lambda1.csv"),
            o("covfit.csv")};
  if (stage == "forecast")
    return {o("covfit.csv"), o("lambda0_density.csv"), o("intensity_meta.csv"),
            o("lambda1.csv"), o("mala_zT.csv"), o("mala_meta.csv")};
  if (stage == "simulate")
    return {o("covfit.csv"), o("lambda0_density.csv"), o("intensity_meta.csv"),
            o("lambda1.csv"), o("mala_zT.csv"), o("mala_meta.csv"), o("window.csv")};
  throw std::runtime_error("unknown pipeline stage '" + stage + "'");
}

std::string stage_params(const PipelineConfig& cfg, const std::string& stage) {
  std::ostringstream ss;
  if (stage == "ingest") {
    ss << "t0=" << cfg.t0 << ",t1=" << cfg.t1 << ",holdout=" << cfg.holdout_days;
  } else if (stage == "bandwidth") {
    ss << "K=" << cfg.bandwidth_K << ",eps=" << fmt(cfg.bandwidth_epsilon)
       << ",max_iter=" << cfg.bandwidth_max_iter << ",explicit=" << fmt(cfg.explicit_bandwidth)
       << ",seed=" << cfg.seed;
  } else if (stage == "intensity") {
    ss << "m=" << cfg.grid_m << ",p=" << cfg.grid_p;
  } else if (stage == "glm-fit") {
    ss << "kind=" << cfg.glm_kind << ",origin=" << cfg.glm_origin.year << '-'
       << cfg.glm_origin.month << '-' << cfg.glm_origin.day << ",tol=" << fmt(cfg.glm_tol)
       << ",max_iter=" << cfg.glm_max_iter << ",horizon=" << cfg.forecast_horizon;
    for (int d : cfg.forecast_deltas) ss << ",d=" << d;
  } else if (stage == "summaries") {
    ss << "r_max=" << fmt(cfg.k_r_max) << ",n_r=" << cfg.k_n_r << ",t_max=" << cfg.k_t_max
       << ",h_t=" << fmt(cfg.temporal_bandwidth) << ",u_min=" << fmt(cfg.pcf_u_min)
       << ",u_max=" << fmt(cfg.pcf_u_max) << ",n_u=" << cfg.pcf_n_u
       << ",c=" << fmt(cfg.stoyan_c) << ",v_max=" << cfg.autocov_v_max;
  } else if (stage == "fit-cov") {
    ss << "exponent=" << fmt(cfg.contrast_exponent) << ",u_min=" << fmt(cfg.fit_u_min)
       << ",u_max=" << fmt(cfg.fit_u_max) << ",s2=" << fmt(cfg.sigma2_lo) << ':'
       << fmt(cfg.sigma2_hi) << ",phi=" << fmt(cfg.phi_lo) << ':' << fmt(cfg.phi_hi)
       << ",theta=" << fmt(cfg.theta_lo) << ':' << fmt(cfg.theta_hi) << ",v=" << cfg.fit_v_min
       << ':' << cfg.fit_v_max << ",fsc=" << (cfg.finite_sample_correction ? 1 : 0);
  } else if (stage == "mala") {
    ss << "n_iter=" << cfg.mala_n_iter << ",burn_in=" << cfg.mala_burn_in
       << ",thin=" << cfg.mala_thin << ",zeta=" << cfg.mala_zeta
       << ",target=" << fmt(cfg.mala_target_accept) << ",xi2=" << fmt(cfg.mala_xi2_init)
       << ",seed=" << cfg.seed;
  } else if (stage == "forecast") {
    ss << "n_draws=" << cfg.forecast_n_draws << ",seed=" << cfg.seed;
    for (int d : cfg.forecast_deltas) ss << ",d=" << d;
  } else if (stage == "simulate") {
    ss << "n_real=" << cfg.sim_n_realizations << ",seed=" << cfg.seed;
    for (int d : cfg.forecast_deltas) ss << ",d=" << d;
  }
  return ss.str();
}

std::string inputs_hash(const PipelineConfig& cfg, const std::string& stage) {
  std::string acc = stage_params(cfg, stage);
  for (const std::string& f : stage_inputs(cfg, stage)) {
    acc += '|';
    acc += fs::path(f).filename().string();
    acc += ':';
    acc += file_hash_hex(f);
  }
  return to_hex(fnv1a(acc));
}

struct ManifestEntry {
  std::string hash;
  std::vector<std::string> outputs;
};

std::map<std::string, ManifestEntry> load_manifest(const fs::path& path) {
  std::map<std::string, ManifestEntry> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("stage") || !j.contains("inputs_hash") ||
        !j.contains("outputs"))
      continue;
    ManifestEntry e;
    e.hash = j["inputs_hash"].get<std::string>();
    for (const auto& o : j["outputs"]) e.outputs.push_back(o.get<std::string>());
    out[j["stage"].get<std::string>()] = std::move(e);
  }
  return out;
}

void append_manifest(const fs::path& path, const std::string& stage, const std::string& hash,
                     const std::vector<std::string>& outputs, long long wall_ms, uint64_t seed) {
  nlohmann::json j;
  j["stage"] = stage;
  j["inputs_hash"] = hash;
  j["outputs"] = outputs;
  j["wall_ms"] = wall_ms;
  j["seed"] = seed;
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path.string());
  out << j.dump() << '\n';
}

}  // namespace

// ---------- single-artifact writers ----------

std::vector<std::string> write_kst(const PipelineConfig& cfg) {
  const IngestMeta meta = load_ingest_meta(cfg);
  const ObservationWindow win = load_out_window(cfg);
  const SpatioTemporalPointPattern pat = load_fit_pattern(cfg, win, meta);
  const SpatialDensity dens = load_density(cfg);

  std::vector<int> times;
  times.reserve(pat.size());
  for (const Event& e : pat.events()) times.push_back(e.t);
  const double h_t = cfg.temporal_bandwidth;
  const auto plug_in = [&](const Point& s, int t) {
    return dens.value_at(s.x, s.y) *
           epanechnikov_temporal_intensity(times, h_t, static_cast<double>(t));
  };
  const std::vector<double> r_grid = resolve_r_grid(cfg, win);
  const std::vector<int> t_grid = resolve_t_grid(cfg);
  const KSurface K = st_inhom_K(pat, plug_in, r_grid, t_grid, cfg.threads);

  std::vector<std::vector<double>> rows;
  for (size_t ri = 0; ri < K.r_grid.size(); ++ri)
    for (size_t ti = 0; ti < K.t_grid.size(); ++ti)
      rows.push_back({K.r_grid[ri], static_cast<double>(K.t_grid[ti]), K.values[ri][ti],
                      K.baseline(K.r_grid[ri], K.t_grid[ti])});
  write_table_csv(opath(cfg, "khat.csv").string(), "r,t,khat,baseline", rows,
                  {{"temporal_bandwidth", fmt(h_t)}});
  return {"khat.csv"};
}

std::vector<std::string> write_pcf(const PipelineConfig& cfg) {
  const IngestMeta meta = load_ingest_meta(cfg);
  const ObservationWindow win = load_out_window(cfg);
  const SpatioTemporalPointPattern pat = load_fit_pattern(cfg, win, meta);
  const SpatialDensity dens = load_density(cfg);
  const auto l1map = load_lambda1_map(cfg);
  const int T = meta.fit_t1 - meta.t0 + 1;

  const double mean_int = static_cast<double>(pat.size()) / (win.area() * T);
  const double h_s = stoyan_bandwidth(mean_int, cfg.stoyan_c);
  const double u_min = cfg.pcf_u_min > 0 ? cfg.pcf_u_min : h_s;
  const double u_max = cfg.pcf_u_max > 0 ? cfg.pcf_u_max : 0.25 * short_side(win);
  if (!(u_min < u_max))
    throw std::runtime_error("config field summaries.u_min resolves to " + fmt(u_min) +
                             " which is not below u_max " + fmt(u_max));
  if (cfg.pcf_n_u < 2)
    throw std::runtime_error("config field summaries.n_u must be at least 2");
  std::vector<double> u_grid;
  for (int i = 0; i < cfg.pcf_n_u; ++i)
    u_grid.push_back(u_min + (u_max - u_min) * i / (cfg.pcf_n_u - 1));
  const std::vector<double> l1 = lambda1_series(l1map, meta.t0, meta.fit_t1);
  const PcfCurve pcf = time_averaged_pcf(pat, dens, l1, u_grid, h_s, cfg.threads);

  std::vector<std::vector<double>> rows;
  for (size_t i = 0; i < pcf.u_grid.size(); ++i) rows.push_back({pcf.u_grid[i], pcf.values[i]});
  write_table_csv(opath(cfg, "pcf.csv").string(), "u,g", rows,
                  {{"h_s", fmt(pcf.h_s)}, {"stoyan_c", fmt(cfg.stoyan_c)}});
  return {"pcf.csv"};
}

std::vector<std::string> write_autocov(const PipelineConfig& cfg) {
  const IngestMeta meta = load_ingest_meta(cfg);
  const ObservationWindow win = load_out_window(cfg);
  const SpatioTemporalPointPattern pat = load_fit_pattern(cfg, win, meta);
  const auto l1map = load_lambda1_map(cfg);
  const int T = meta.fit_t1 - meta.t0 + 1;
  if (T < 2) throw std::runtime_error("autocovariance needs at least two fitting days");

  const int v_max =
      cfg.autocov_v_max > 0 ? std::min(cfg.autocov_v_max, T - 1) : std::min(10, T - 1);
  const std::vector<double> l1 = lambda1_series(l1map, meta.t0, meta.fit_t1);
  const AutocovCurve ac = empirical_autocov(daily_counts(pat), l1, v_max);

  std::vector<std::vector<double>> rows;
  for (size_t i = 0; i < ac.v_grid.size(); ++i)
    rows.push_back({static_cast<double>(ac.v_grid[i]), ac.values[i]});
  write_table_csv(opath(cfg, "autocov.csv").string(), "v,cbar", rows);
  return {"autocov.csv"};
}

std::vector<std::string> write_mctest(const PipelineConfig& cfg) {
  const IngestMeta meta = load_ingest_meta(cfg);
  const ObservationWindow win = load_out_window(cfg);
  const SpatioTemporalPointPattern pat = load_fit_pattern(cfg, win, meta);
  const SpatialDensity dens = load_density(cfg);

  std::vector<int> times;
  times.reserve(pat.size());
  for (const Event& e : pat.events()) times.push_back(e.t);
  const double h_t = cfg.temporal_bandwidth;
  const auto plug_in = [&](const Point& s, int t) {
    return dens.value_at(s.x, s.y) *
           epanechnikov_temporal_intensity(times, h_t, static_cast<double>(t));
  };
  const std::vector<double> r_grid = resolve_r_grid(cfg, win);
  const std::vector<int> t_grid = resolve_t_grid(cfg);
  Rng rng = seed_stream(cfg.seed, "mctest");
  const McTestResult res =
      spacetime_mc_test(pat, plug_in, cfg.mctest_n_perm, r_grid, t_grid, rng, cfg.threads);

  std::vector<std::vector<double>> rows;
  for (size_t k = 0; k < res.permuted_statistics.size(); ++k)
    rows.push_back({static_cast<double>(k + 1), res.permuted_statistics[k]});
  write_table_csv(opath(cfg, "mctest.csv").string(), "perm,statistic", rows,
                  {{"observed", fmt(res.observed_statistic)},
                   {"fraction_below", fmt(res.fraction_below)},
                   {"n_perm", std::to_string(cfg.mctest_n_perm)}});
  return {"mctest.csv"};
}

std::vector<std::string> write_envelope(const PipelineConfig& cfg) {
  const IngestMeta meta = load_ingest_meta(cfg);
  if (meta.holdout < 1)
    throw std::runtime_error(
        "the envelope comparison requires a holdout period (set time.holdout_days >= 1)");
  const ObservationWindow win = load_out_window(cfg);
  const ForecastState st = load_forecast_state(cfg);
  if (st.t_last != meta.fit_t1)
    throw std::runtime_error("mala outputs predate the current ingest; rerun the mala stage");
  const GridSpec& grid = st.dens.raster.grid;
  const std::vector<double> r_grid = resolve_r_grid(cfg, win);

  std::vector<Event> hold;
  if (meta.n_holdout > 0)
    hold = load_point_pattern_file(opath(cfg, "pattern_holdout.csv").string(), win,
                                   meta.fit_t1 + 1, meta.t1)
               .pattern.events();

  std::vector<std::string> outputs;
  std::vector<double> eps(st.q), innov(st.q);
  for (int d = 1; d <= meta.holdout; ++d) {
    const int day = st.t_last + d;
    const double lp = lambda1_at(st.l1map, day);

    // Plug-in: mean forecast intensity over a subset of retained samples,
    // shared by the observed and simulated curves.
    const size_t n_plug = std::min<size_t>(st.z_samples.size(), 50);
    Rng prng = seed_stream(cfg.seed, "envelope-plugin", static_cast<uint64_t>(d));
    Raster plug(grid, 0.0, RasterUnits::IntensityPerArea);
    for (size_t i = 0; i < n_plug; ++i) {
      const std::vector<double> z = forecast_draw(st, st.z_samples[i], d, prng, eps, innov);
      const Raster inten =
          forecast_intensity(st.dens.raster, lp, restrict_field(z, grid, st.N, RasterUnits::Field));
      for (int a = 0; a < grid.m; ++a)
        for (int b = 0; b < grid.p; ++b)
          if (grid.mask[grid.idx(a, b)]) plug.at(a, b) += inten.at(a, b);
    }
    for (int a = 0; a < grid.m; ++a)
      for (int b = 0; b < grid.p; ++b)
        if (grid.mask[grid.idx(a, b)]) plug.at(a, b) /= static_cast<double>(n_plug);
    const auto plug_at = [&](const Point& s, int) {
      if (!grid.in_bounds(s.x, s.y)) return 0.0;
      int i, j;
      grid.cell_of(s.x, s.y, i, j);
      return std::max(plug.at(i, j), 0.0);
    };

    const auto statistic = [&](const std::vector<Point>& pts) {
      std::vector<Event> evs;
      evs.reserve(pts.size());
      for (const Point& p : pts) evs.push_back({p.x, p.y, day});
      const SpatioTemporalPointPattern day_pat(std::move(evs), win, day, day);
      const KSurface K = st_inhom_K(day_pat, plug_at, r_grid, {0}, cfg.threads);
      std::vector<double> curve(K.r_grid.size());
      for (size_t ri = 0; ri < K.r_grid.size(); ++ri) curve[ri] = K.values[ri][0];
      return curve;
    };
    size_t cycle = 0;
    const auto simulate = [&](Rng& rng) {
      const auto& z0 = st.z_samples[cycle++ % st.z_samples.size()];
      const std::vector<double> z = forecast_draw(st, z0, d, rng, eps, innov);
      const Raster inten =
          forecast_intensity(st.dens.raster, lp, restrict_field(z, grid, st.N, RasterUnits::Field));
      return simulate_poisson_from_raster(inten, rng, &win);
    };
    Rng rng = seed_stream(cfg.seed, "envelope", static_cast<uint64_t>(d));
    const Envelope env = envelope(simulate, statistic, cfg.envelope_n_sim, rng);

    std::vector<Point> obs;
    for (const Event& e : hold)
      if (e.t == day) obs.push_back({e.x, e.y});
    const std::vector<double> observed = statistic(obs);

    std::vector<std::vector<double>> rows;
    for (size_t ri = 0; ri < r_grid.size(); ++ri)
      rows.push_back({r_grid[ri], env.lo[ri], env.hi[ri], observed[ri]});
    const std::string name = "envelope_d" + std::to_string(d) + ".csv";
    write_table_csv(opath(cfg, name).string(), "r,lo,hi,observed", rows,
                    {{"day", std::to_string(day)},
                     {"lambda1_pred", fmt(lp)},
                     {"n_sim", std::to_string(cfg.envelope_n_sim)},
                     {"n_observed", std::to_string(obs.size())}});
    outputs.push_back(name);
  }
  return outputs;
}

// ---------- pipeline ----------

const std::vector<std::string> kPipelineStages = {"ingest",    "bandwidth", "intensity",
                                                  "glm-fit",   "summaries", "fit-cov",
                                                  "mala",      "forecast",  "simulate"};

std::vector<std::string> run_stage(const PipelineConfig& cfg, const std::string& stage) {
  fs::create_directories(cfg.out_dir);
  if (stage == "ingest") return stage_ingest(cfg);
  if (stage == "bandwidth") return stage_bandwidth(cfg);
  if (stage == "intensity") return stage_intensity(cfg);
  if (stage == "glm-fit") return stage_glm(cfg);
  if (stage == "summaries") return stage_summaries(cfg);
  if (stage == "fit-cov") return stage_fitcov(cfg);
  if (stage == "mala") return stage_mala(cfg);
  if (stage == "forecast") return stage_forecast(cfg);
  if (stage == "simulate") return stage_simulate(cfg);
  throw std::runtime_error("unknown pipeline stage '" + stage + "'");
}

PipelineResult run_pipeline(const PipelineConfig& cfg, bool force, std::ostream* log) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const fs::path manifest_path = fs::path(cfg.out_dir) / "manifest.jsonl";
  auto manifest = load_manifest(manifest_path);

  PipelineResult result;
  for (const std::string& stage : kPipelineStages) {
    const std::string hash = inputs_hash(cfg, stage);
    bool skip = false;
    if (!force) {
      const auto it = manifest.find(stage);
      if (it != manifest.end() && it->second.hash == hash) {
        skip = true;
        for (const std::string& o : it->second.outputs)
          if (!fs::exists(fs::path(cfg.out_dir) / o)) {
            skip = false;
            break;
          }
      }
    }
    StageReport rep;
    rep.stage = stage;
    rep.skipped = skip;
    if (!skip) {
      const auto start = std::chrono::steady_clock::now();
      std::vector<std::string> outputs;
      try {
        outputs = run_stage(cfg, stage);
      } catch (const std::exception& ex) {
        // Partial outputs stay on disk; the stage reruns next time because no
        // manifest entry is recorded for it.
        throw std::runtime_error("stage '" + stage + "' failed: " + ex.what());
      }
      rep.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - start)
                        .count();
      append_manifest(manifest_path, stage, hash, outputs, rep.wall_ms, cfg.seed);
      manifest[stage] = {hash, outputs};
    }
    if (log)
      *log << (skip ? "[skip] " : "[done] ") << stage
           << (skip ? "" : " (" + std::to_string(rep.wall_ms) + " ms)") << '\n';
    result.stages.push_back(rep);
  }
  return result;
}

}  // namespace lgcp
