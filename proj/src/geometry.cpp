#include "lgcp/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace lgcp {

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

double shoelace(const std::vector<Point>& v) {
  double s = 0.0;
  const size_t n = v.size();
  for (size_t i = 0; i < n; ++i) {
    const Point& a = v[i];
    const Point& b = v[(i + 1) % n];
    s += a.x * b.y - b.x * a.y;
  }
  return 0.5 * s;
}

// Distance from point to segment, for the boundary-inclusion test.
double point_segment_dist(const Point& s, const Point& a, const Point& b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double wx = s.x - a.x, wy = s.y - a.y;
  const double c1 = vx * wx + vy * wy;
  const double c2 = vx * vx + vy * vy;
  double t = (c2 > 0.0) ? c1 / c2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = s.x - (a.x + t * vx), dy = s.y - (a.y + t * vy);
  return std::hypot(dx, dy);
}

}  // namespace

ObservationWindow::ObservationWindow(std::vector<Point> vertices) : verts_(std::move(vertices)) {
  if (verts_.size() < 3) throw std::invalid_argument("window polygon needs at least 3 vertices");
  double a = shoelace(verts_);
  if (a < 0.0) {  // normalize to counter-clockwise orientation
    std::reverse(verts_.begin(), verts_.end());
    a = -a;
  }
  if (!(a > 0.0)) throw std::invalid_argument("window polygon has zero area");
  area_ = a;
  bx0_ = bx1_ = verts_[0].x;
  by0_ = by1_ = verts_[0].y;
  for (const Point& p : verts_) {
    bx0_ = std::min(bx0_, p.x);
    bx1_ = std::max(bx1_, p.x);
    by0_ = std::min(by0_, p.y);
    by1_ = std::max(by1_, p.y);
  }
  if (verts_.size() == 4) {
    is_rect_ = true;
    for (const Point& p : verts_) {
      const bool on_x = (p.x == bx0_ || p.x == bx1_);
      const bool on_y = (p.y == by0_ || p.y == by1_);
      if (!(on_x && on_y)) is_rect_ = false;
    }
  }
}

ObservationWindow ObservationWindow::rectangle(double x0, double y0, double x1, double y1) {
  if (!(x1 > x0 && y1 > y0)) throw std::invalid_argument("degenerate rectangle");
  return ObservationWindow({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
}

void ObservationWindow::bounding_box(double& x0, double& y0, double& x1, double& y1) const {
  x0 = bx0_;
  y0 = by0_;
  x1 = bx1_;
  y1 = by1_;
}

bool ObservationWindow::contains(const Point& s) const {
  if (s.x < bx0_ || s.x > bx1_ || s.y < by0_ || s.y > by1_) return false;
  if (is_rect_) return true;  // bbox test is exact for axis-aligned rectangles
  // Crossing-number test with an explicit boundary check so edge points count as inside.
  const size_t n = verts_.size();
  for (size_t i = 0; i < n; ++i) {
    if (point_segment_dist(s, verts_[i], verts_[(i + 1) % n]) < 1e-12) return true;
  }
  bool in = false;
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = verts_[i];
    const Point& b = verts_[j];
    if ((a.y > s.y) != (b.y > s.y)) {
      const double xc = (b.x - a.x) * (s.y - a.y) / (b.y - a.y) + a.x;
      if (s.x < xc) in = !in;
    }
  }
  return in;
}

double circle_inside_fraction(const Point& c, double r, const ObservationWindow& w) {
  if (r <= 0.0) return 1.0;
  // Collect angles where the circle crosses a polygon edge.
  std::vector<double> cuts;
  const std::vector<Point>& v = w.vertices();
  const size_t n = v.size();
  for (size_t i = 0; i < n; ++i) {
    const Point& a = v[i];
    const Point& b = v[(i + 1) % n];
    // Solve |a + t(b-a) - c| = r for t in [0,1].
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double fx = a.x - c.x, fy = a.y - c.y;
    const double A = dx * dx + dy * dy;
    const double B = 2.0 * (fx * dx + fy * dy);
    const double C = fx * fx + fy * fy - r * r;
    const double disc = B * B - 4.0 * A * C;
    if (disc <= 0.0 || A == 0.0) continue;
    const double sd = std::sqrt(disc);
    for (const double t : {(-B - sd) / (2.0 * A), (-B + sd) / (2.0 * A)}) {
      if (t < 0.0 || t > 1.0) continue;
      const double px = a.x + t * dx - c.x;
      const double py = a.y + t * dy - c.y;
      double ang = std::atan2(py, px);
      if (ang < 0.0) ang += kTau;
      cuts.push_back(ang);
    }
  }
  if (cuts.empty()) {
    // No crossings: the circle is wholly inside or wholly outside the window.
    return w.contains({c.x + r, c.y}) ? 1.0 : 0.0;
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.push_back(cuts.front() + kTau);
  double inside = 0.0;
  for (size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double span = cuts[i + 1] - cuts[i];
    if (span <= 0.0) continue;
    const double mid = cuts[i] + 0.5 * span;
    const Point probe{c.x + r * std::cos(mid), c.y + r * std::sin(mid)};
    if (w.contains(probe)) inside += span;
  }
  return inside / kTau;
}

}  // namespace lgcp
