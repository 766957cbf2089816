#pragma once

#include <Eigen/Dense>
#include <functional>

namespace lgcp {

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Standard simplex search (reflection 1, expansion 2, contraction 0.5, shrink
// 0.5).  Converges when every vertex is within `tol` of the best one.  Callers
// impose box constraints by returning large penalties outside the box.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, double step, double tol = 1e-8,
                             int max_iter = 5000);

// One run from x0 plus one restart from the perturbed optimum; best of the two.
NelderMeadResult nelder_mead_restarted(const std::function<double(const Eigen::VectorXd&)>& f,
                                       const Eigen::VectorXd& x0, double step, double tol = 1e-8,
                                       int max_iter = 5000);

}  // namespace lgcp
