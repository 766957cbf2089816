#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lgcp/geometry.hpp"
#include "lgcp/grid.hpp"

namespace lgcp {

struct Event {
  double x = 0.0;
  double y = 0.0;
  int t = 0;  // integer day stamp
};

struct ParseError : std::runtime_error {
  int line;
  ParseError(const std::string& msg, int line_no)
      : std::runtime_error(msg + " at line " + std::to_string(line_no)), line(line_no) {}
};

struct EmptyPatternError : std::runtime_error {
  EmptyPatternError() : std::runtime_error("no events inside window and time range") {}
};

class SpatioTemporalPointPattern {
 public:
  SpatioTemporalPointPattern(std::vector<Event> events, ObservationWindow window, int t0, int t1);

  const std::vector<Event>& events() const { return events_; }
  const ObservationWindow& window() const { return window_; }
  int t0() const { return t0_; }
  int t1() const { return t1_; }
  int n_days() const { return t1_ - t0_ + 1; }
  size_t size() const { return events_.size(); }

 private:
  std::vector<Event> events_;
  ObservationWindow window_;
  int t0_, t1_;
};

struct LoadResult {
  SpatioTemporalPointPattern pattern;
  int dropped = 0;  // rows outside the window or time range
};

// CSV with header `x,y,t`; rows outside window/t_range are dropped and counted.
// Throws ParseError (with line number) on malformed rows, EmptyPatternError when
// nothing survives the filters.
LoadResult load_point_pattern(std::istream& in, const ObservationWindow& window, int t0, int t1);
LoadResult load_point_pattern_file(const std::string& path, const ObservationWindow& window,
                                   int t0, int t1);

// Writes header + rows with round-trip-exact decimal formatting.
void save_point_pattern(std::ostream& out, const SpatioTemporalPointPattern& pat);
void save_point_pattern_file(const std::string& path, const SpatioTemporalPointPattern& pat);

// Window polygon CSV: header `x,y`, vertices in order, implicitly closed.
ObservationWindow load_window_file(const std::string& path);
void save_window_file(const std::string& path, const ObservationWindow& w);

// counts[t][cell]: events per day per cell; half-open cell rule via GridSpec::cell_of.
CellCountSeries aggregate_counts(const SpatioTemporalPointPattern& pat, const GridSpec& grid);

// N_t(R) for every day in the pattern's range, zero-filled.
std::vector<std::pair<int, long long>> daily_counts(const SpatioTemporalPointPattern& pat);

}  // namespace lgcp
