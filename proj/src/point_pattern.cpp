#include "lgcp/point_pattern.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

namespace lgcp {

namespace {

// Strict double parse of a whole field (rejects trailing junk).
bool parse_double(std::string_view f, double& out) {
  while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.remove_suffix(1);
  while (!f.empty() && f.front() == ' ') f.remove_prefix(1);
  if (f.empty()) return false;
  const char* end = f.data() + f.size();
  auto [p, ec] = std::from_chars(f.data(), end, out);
  return ec == std::errc() && p == end && std::isfinite(out);
}

bool parse_int(std::string_view f, int& out) {
  double d;
  if (!parse_double(f, d)) return false;
  if (d != std::floor(d) || std::abs(d) > 2e9) return false;  // integer days only
  out = static_cast<int>(d);
  return true;
}

std::vector<std::string_view> split_csv(const std::string& line) {
  std::vector<std::string_view> out;
  size_t start = 0;
  for (size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.emplace_back(line.data() + start, i - start);
      start = i + 1;
    }
  }
  return out;
}

void write_full_precision(std::ostream& out, double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v,
                               std::chars_format::general,
                               std::numeric_limits<double>::max_digits10);
  out.write(buf, p - buf);
}

}  // namespace

SpatioTemporalPointPattern::SpatioTemporalPointPattern(std::vector<Event> events,
                                                       ObservationWindow window, int t0, int t1)
    : events_(std::move(events)), window_(std::move(window)), t0_(t0), t1_(t1) {
  if (t1_ < t0_) throw std::invalid_argument("time range upper bound below lower bound");
  for (const Event& e : events_) {
    if (e.t < t0_ || e.t > t1_) throw std::invalid_argument("event stamp outside time range");
    if (!window_.contains({e.x, e.y})) throw std::invalid_argument("event outside window");
  }
  std::sort(events_.begin(), events_.end(), [](const Event& a, const Event& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.x != b.x) return a.x < b.x;
    return a.y < b.y;
  });
}

LoadResult load_point_pattern(std::istream& in, const ObservationWindow& window, int t0, int t1) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  std::vector<Event> events;
  int dropped = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv(line);
    if (fields.size() != 3) throw ParseError("expected 3 fields `x,y,t`", line_no);
    Event e;
    if (!parse_double(fields[0], e.x) || !parse_double(fields[1], e.y))
      throw ParseError("malformed coordinate", line_no);
    if (!parse_int(fields[2], e.t)) throw ParseError("malformed integer day stamp", line_no);
    if (e.t < t0 || e.t > t1 || !window.contains({e.x, e.y})) {
      ++dropped;
      continue;
    }
    events.push_back(e);
  }
  if (events.empty()) throw EmptyPatternError();
  return {SpatioTemporalPointPattern(std::move(events), window, t0, t1), dropped};
}

LoadResult load_point_pattern_file(const std::string& path, const ObservationWindow& window,
                                   int t0, int t1) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pattern file: " + path);
  return load_point_pattern(in, window, t0, t1);
}

void save_point_pattern(std::ostream& out, const SpatioTemporalPointPattern& pat) {
  out << "x,y,t\n";
  for (const Event& e : pat.events()) {
    write_full_precision(out, e.x);
    out << ',';
    write_full_precision(out, e.y);
    out << ',' << e.t << '\n';
  }
}

void save_point_pattern_file(const std::string& path, const SpatioTemporalPointPattern& pat) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write pattern file: " + path);
  save_point_pattern(out, pat);
}

ObservationWindow load_window_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open window file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  std::vector<Point> verts;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv(line);
    if (fields.size() != 2) throw ParseError("expected 2 fields `x,y`", line_no);
    Point p;
    if (!parse_double(fields[0], p.x) || !parse_double(fields[1], p.y))
      throw ParseError("malformed vertex coordinate", line_no);
    verts.push_back(p);
  }
  return ObservationWindow(std::move(verts));
}

void save_window_file(const std::string& path, const ObservationWindow& w) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write window file: " + path);
  out << "x,y\n";
  for (const Point& p : w.vertices()) {
    write_full_precision(out, p.x);
    out << ',';
    write_full_precision(out, p.y);
    out << '\n';
  }
}

CellCountSeries aggregate_counts(const SpatioTemporalPointPattern& pat, const GridSpec& grid) {
  CellCountSeries s;
  s.grid = grid;
  s.t0 = pat.t0();
  s.slices.assign(pat.n_days(), std::vector<int32_t>(static_cast<size_t>(grid.m) * grid.p, 0));
  for (const Event& e : pat.events()) {
    int i, j;
    grid.cell_of(e.x, e.y, i, j);  // throws if outside the bounding box
    ++s.slices[e.t - pat.t0()][grid.idx(i, j)];
  }
  return s;
}

std::vector<std::pair<int, long long>> daily_counts(const SpatioTemporalPointPattern& pat) {
  std::vector<std::pair<int, long long>> out;
  out.reserve(pat.n_days());
  for (int t = pat.t0(); t <= pat.t1(); ++t) out.emplace_back(t, 0LL);
  for (const Event& e : pat.events()) ++out[e.t - pat.t0()].second;
  return out;
}

}  // namespace lgcp
