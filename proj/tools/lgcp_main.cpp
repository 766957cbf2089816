#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "lgcp/config.hpp"
#include "lgcp/covariance.hpp"
#include "lgcp/grf.hpp"
#include "lgcp/pipeline.hpp"
#include "lgcp/point_pattern.hpp"
#include "lgcp/rng.hpp"
#include "lgcp/summaries.hpp"

namespace fs = std::filesystem;
using namespace lgcp;

namespace {

struct Common {
  std::string config_path;
  std::string out_dir;
  std::string seed;
  int threads = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "configuration file")->required();
  cmd->add_option("--out", c.out_dir, "output directory (overrides paths.out_dir)");
  cmd->add_option("--seed", c.seed, "root RNG seed (overrides run.seed)");
  cmd->add_option("--threads", c.threads, "worker threads (overrides run.threads)");
}

PipelineConfig make_config(const Common& c) {
  PipelineConfig cfg = PipelineConfig::from_config(ConfigFile::parse_file(c.config_path));
  if (!c.out_dir.empty()) cfg.out_dir = c.out_dir;
  if (!c.seed.empty()) cfg.seed = std::stoull(c.seed);
  if (c.threads > 0) cfg.threads = c.threads;
  cfg.validate();
  return cfg;
}

void emit(const PipelineConfig& cfg, const std::vector<std::string>& files) {
  for (const std::string& f : files) std::cout << (fs::path(cfg.out_dir) / f).string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"separable spatio-temporal log-Gaussian Cox process toolkit"};
  app.require_subcommand(1);

  Common copt;
  std::string ing_pattern, ing_window;
  std::string xk_a, xk_b;
  double grf_sigma2 = 1.0, grf_phi = 0.1;
  int grf_n = 1;
  bool force = false;

  const auto add_stage = [&](const std::string& name, const std::string& desc) {
    CLI::App* cmd = app.add_subcommand(name, desc);
    add_common(cmd, copt);
    cmd->callback([&copt, name] {
      const PipelineConfig cfg = make_config(copt);
      emit(cfg, run_stage(cfg, name));
    });
    return cmd;
  };
  const auto add_writer = [&](const std::string& name, const std::string& desc,
                              std::vector<std::string> (*writer)(const PipelineConfig&)) {
    CLI::App* cmd = app.add_subcommand(name, desc);
    add_common(cmd, copt);
    cmd->callback([&copt, writer] {
      const PipelineConfig cfg = make_config(copt);
      fs::create_directories(cfg.out_dir);
      emit(cfg, writer(cfg));
    });
    return cmd;
  };

  CLI::App* ing = app.add_subcommand(
      "ingest", "split the event pattern into fitting/holdout periods and tabulate daily counts");
  add_common(ing, copt);
  ing->add_option("--pattern", ing_pattern, "event CSV (overrides paths.pattern)");
  ing->add_option("--window", ing_window, "window CSV (overrides paths.window)");
  ing->callback([&] {
    PipelineConfig cfg = make_config(copt);
    if (!ing_pattern.empty()) cfg.pattern_path = ing_pattern;
    if (!ing_window.empty()) cfg.window_path = ing_window;
    emit(cfg, run_stage(cfg, "ingest"));
  });

  add_stage("bandwidth", "select the kernel bandwidth by K-means clustering");
  add_stage("intensity", "kernel spatial intensity raster, normalized to a density");
  add_stage("glm-fit", "Poisson regression for the daily event rate");
  add_writer("kst", "inhomogeneous space-time K surface", &write_kst);
  add_writer("pcf", "time-averaged pair correlation curve", &write_pcf);
  add_writer("autocov", "empirical temporal autocovariance of daily counts", &write_autocov);
  add_writer("mctest", "Monte-Carlo space-time interaction test", &write_mctest);
  add_writer("envelope", "forecast K-curve envelopes against held-out days", &write_envelope);
  add_stage("fit-cov", "minimum-contrast covariance parameter fit");
  add_stage("mala", "posterior field sampling over the last fitted days");
  add_stage("forecast", "mean forecast fields and intensity rasters");
  add_stage("simulate", "Poisson pattern realizations from forecast intensities");

  CLI::App* xk = app.add_subcommand("xk", "stationary cross-K between two event sets");
  add_common(xk, copt);
  xk->add_option("--a", xk_a, "first pattern CSV")->required();
  xk->add_option("--b", xk_b, "second pattern CSV")->required();
  xk->callback([&] {
    const PipelineConfig cfg = make_config(copt);
    const ObservationWindow win = load_window_file(cfg.window_path);
    const SpatioTemporalPointPattern pa =
        load_point_pattern_file(xk_a, win, cfg.t0, cfg.t1).pattern;
    const SpatioTemporalPointPattern pb =
        load_point_pattern_file(xk_b, win, cfg.t0, cfg.t1).pattern;
    std::vector<Point> a, b;
    a.reserve(pa.size());
    b.reserve(pb.size());
    for (const Event& e : pa.events()) a.push_back({e.x, e.y});
    for (const Event& e : pb.events()) b.push_back({e.x, e.y});

    double bx0, by0, bx1, by1;
    win.bounding_box(bx0, by0, bx1, by1);
    const double u_max = cfg.k_r_max > 0 ? cfg.k_r_max : 0.25 * std::min(bx1 - bx0, by1 - by0);
    std::vector<double> u_grid;
    for (int i = 1; i <= cfg.k_n_r; ++i) u_grid.push_back(u_max * i / cfg.k_n_r);
    const BivariateK bk = bivariate_K(a, b, win, u_grid);

    const double pi = 3.14159265358979323846;
    std::vector<std::vector<double>> rows;
    for (size_t i = 0; i < u_grid.size(); ++i)
      rows.push_back({u_grid[i], bk.k12[i], bk.k21[i], pi * u_grid[i] * u_grid[i]});
    fs::create_directories(cfg.out_dir);
    const std::string path = (fs::path(cfg.out_dir) / "xk.csv").string();
    write_table_csv(path, "u,k12,k21,baseline", rows);
    std::cout << path << '\n';
  });

  CLI::App* grf =
      app.add_subcommand("grf-sample", "unconditional Gaussian field draws on the model grid");
  add_common(grf, copt);
  grf->add_option("--sigma2", grf_sigma2, "field variance")->required();
  grf->add_option("--phi", grf_phi, "spatial correlation range")->required();
  grf->add_option("--n", grf_n, "number of draws");
  grf->callback([&] {
    const PipelineConfig cfg = make_config(copt);
    const ObservationWindow win = load_window_file(cfg.window_path);
    const GridSpec grid = GridSpec::cover(win, cfg.grid_m, cfg.grid_p);
    CovarianceParams params;
    params.sigma2 = grf_sigma2;
    params.phi = grf_phi;
    params.theta = 1.0;  // unused by the spatial spectrum
    params.validate();
    const CirculantSpectrum spectrum = circulant_eigenvalues(extend_grid(grid), params);
    fs::create_directories(cfg.out_dir);
    for (int k = 0; k < grf_n; ++k) {
      Rng rng = seed_stream(cfg.seed, "grf", static_cast<uint64_t>(k));
      const GrfDraw draw = sample_grf(spectrum, -0.5 * grf_sigma2, rng);
      const std::string path =
          (fs::path(cfg.out_dir) / ("grf_" + std::to_string(k) + ".csv")).string();
      write_raster_csv(path, draw.base);
      std::cout << path << '\n';
    }
  });

  CLI::App* pipe = app.add_subcommand("pipeline", "run all stages in dependency order");
  add_common(pipe, copt);
  pipe->add_flag("--force", force, "rerun every stage even when inputs are unchanged");
  pipe->callback([&] {
    const PipelineConfig cfg = make_config(copt);
    run_pipeline(cfg, force, &std::cout);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
