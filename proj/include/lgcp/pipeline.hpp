#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "lgcp/config.hpp"
#include "lgcp/covariance.hpp"
#include "lgcp/glm.hpp"
#include "lgcp/grid.hpp"
#include "lgcp/intensity.hpp"
#include "lgcp/point_pattern.hpp"
#include "lgcp/summaries.hpp"

namespace lgcp {

// ---------- CSV artifacts ----------
// Rasters carry their grid in a `# raster,...` comment line so they round-trip.
void write_raster_csv(const std::string& path, const Raster& r);
Raster read_raster_csv(const std::string& path);

// Plain numeric table with one `# key,value` comment block allowed at the top.
void write_table_csv(const std::string& path, const std::string& header,
                     const std::vector<std::vector<double>>& rows,
                     const std::vector<std::pair<std::string, std::string>>& meta = {});
struct TableCsv {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  double meta_double(const std::string& key) const;  // throws if absent
};
TableCsv read_table_csv(const std::string& path);

// ---------- stage artifact loaders ----------
// Read back artifacts earlier stages wrote into cfg.out_dir.

struct IngestMeta {
  int t0 = 0, t1 = 0, fit_t1 = 0, holdout = 0;
  long long n_total = 0, n_fit = 0, n_holdout = 0, dropped = 0;
};
IngestMeta load_ingest_meta(const PipelineConfig& cfg);
ObservationWindow load_out_window(const PipelineConfig& cfg);
SpatioTemporalPointPattern load_fit_pattern(const PipelineConfig& cfg,
                                            const ObservationWindow& win,
                                            const IngestMeta& meta);
std::map<int, double> load_lambda1_map(const PipelineConfig& cfg);
// Throws past the emitted range, naming forecast.horizon as the fix.
double lambda1_at(const std::map<int, double>& m, int t);
std::vector<double> lambda1_series(const std::map<int, double>& m, int a, int b);
SpatialDensity load_density(const PipelineConfig& cfg);
CovarianceParams load_covfit(const PipelineConfig& cfg);

// ---------- single-artifact writers ----------
// Each computes one second-order artifact from prior outputs (the summaries
// stage runs the first three).  Returned names are relative to cfg.out_dir.
std::vector<std::string> write_kst(const PipelineConfig& cfg);
std::vector<std::string> write_pcf(const PipelineConfig& cfg);
std::vector<std::string> write_autocov(const PipelineConfig& cfg);
// Permutation test of space-time interaction (statistic summed over the K grid).
std::vector<std::string> write_mctest(const PipelineConfig& cfg);
// Per-holdout-day K curves against min/max bands over forecast simulations.
std::vector<std::string> write_envelope(const PipelineConfig& cfg);

// ---------- pipeline ----------
struct StageReport {
  std::string stage;
  bool skipped = false;
  long long wall_ms = 0;
};

struct PipelineResult {
  std::vector<StageReport> stages;
};

extern const std::vector<std::string> kPipelineStages;  // the 9 stages in order

// Runs one named stage unconditionally, reading its inputs from cfg.out_dir
// (except ingest, which reads the configured data paths) and writing its
// outputs there.  Returns the list of files written.
std::vector<std::string> run_stage(const PipelineConfig& cfg, const std::string& stage);

// Runs all stages in order, appending one JSON-lines manifest entry per stage
// to <out_dir>/manifest.jsonl (stage, inputs hash, outputs, wall time, seed).
// A stage is skipped when a manifest entry with the same inputs hash exists and
// all its outputs are still present; `force` disables skipping.
PipelineResult run_pipeline(const PipelineConfig& cfg, bool force = false,
                            std::ostream* log = nullptr);

}  // namespace lgcp
