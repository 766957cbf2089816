#pragma once

#include <stdexcept>
#include <vector>

namespace lgcp {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double sq_dist(const Point& a, const Point& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Closed simple polygon; vertices in order, implicitly closed.  Boundary points
// count as inside (closed window), matching how events on the window edge are kept.
class ObservationWindow {
 public:
  explicit ObservationWindow(std::vector<Point> vertices);
  static ObservationWindow rectangle(double x0, double y0, double x1, double y1);

  const std::vector<Point>& vertices() const { return verts_; }
  double area() const { return area_; }
  bool contains(const Point& s) const;
  bool is_rectangle() const { return is_rect_; }

  void bounding_box(double& x0, double& y0, double& x1, double& y1) const;

 private:
  std::vector<Point> verts_;
  double area_ = 0.0;
  bool is_rect_ = false;
  double bx0_ = 0, by0_ = 0, bx1_ = 0, by1_ = 0;
};

// Fraction of the circle centred at c with radius r that lies inside the window,
// and the Ripley weight = 1/fraction.  Exact arc arithmetic: intersect the circle
// with every polygon edge, split [0,2pi) at the crossing angles and test each arc
// midpoint for containment.
double circle_inside_fraction(const Point& c, double r, const ObservationWindow& w);

}  // namespace lgcp
