#pragma once

#include <Eigen/Dense>
#include <set>
#include <string>
#include <vector>

namespace lgcp {

// Seasons by calendar month: Spring 3-5, Summer 6-8, Fall 9-10, Winter 11-12 and 1-2.
enum class Season { Spring, Summer, Fall, Winter };
Season season_of_month(int month);
std::string season_name(Season s);

// Proleptic Gregorian day arithmetic; origin maps t=1 to that date.
struct CalendarDate {
  int year = 2014, month = 1, day = 1;
};
// Weekday Monday=1..Sunday=7 of (origin + (t-1) days); also month lookup.
int weekday_of(const CalendarDate& origin, int t);
int month_of(const CalendarDate& origin, int t);

struct DesignMatrix {
  enum class Kind { Calendar, InterceptOnly };
  Kind kind = Kind::Calendar;
  Eigen::MatrixXd X;                    // rows = days, cols = covariates
  std::vector<std::string> labels;      // per column
  std::vector<int> t_values;            // day stamp per row
  CalendarDate origin;
  std::set<Season> reference_seasons;   // dropped season levels
};

// Columns: mon..sun indicators (all 7, no intercept), one indicator per
// non-reference season, sin/cos(tau t), sin/cos(2 tau t) with tau = 2 pi / 365,
// and the linear trend t.
DesignMatrix build_design(int t0, int t1, const CalendarDate& origin,
                          const std::set<Season>& reference_seasons = {Season::Spring,
                                                                       Season::Winter});
// Constant-rate model: a single all-ones column.  The right temporal model for
// data with no calendar structure (synthetic tests, stationary series).
DesignMatrix build_intercept_only_design(int t0, int t1);

// Design row for a single (possibly out-of-range) day, for forecasting.
Eigen::RowVectorXd design_row(const DesignMatrix& dm, int t);

struct TemporalGlmFit {
  std::vector<std::string> labels;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd std_errors;
  Eigen::VectorXd z_values;
  Eigen::VectorXd p_values;
  double null_deviance = 0.0;   // no-intercept convention: null model mu = 1
  int null_df = 0;              // = n
  double residual_deviance = 0.0;
  int residual_df = 0;          // = n - k
  double aic = 0.0;
  double median_deviance_residual = 0.0;
  int iterations = 0;
  DesignMatrix design;          // retained for prediction
};

// Log-link Poisson IRLS.  Converges when max |coef change| < tol or the score
// norm drops below tol; throws on non-convergence or rank deficiency.
TemporalGlmFit irls_fit(const DesignMatrix& X, const std::vector<long long>& y,
                        double tol = 1e-8, int max_iter = 100);

double predict_lambda1(const TemporalGlmFit& fit, int t);

}  // namespace lgcp
