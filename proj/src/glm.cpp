#include "lgcp/glm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lgcp {

namespace {

constexpr double kTau365 = 2.0 * 3.14159265358979323846 / 365.0;

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static const int d[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return (m == 2 && is_leap(y)) ? 29 : d[m - 1];
}

// Days since 0000-03-01 (civil-from-days style), enough for weekday/month math.
long long days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const long long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2u) / 5u + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097LL + doe - 719468LL;  // epoch 1970-01-01
}

void civil_from_days(long long z, int& y, int& m, int& d) {
  z += 719468;
  const long long era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long long yy = static_cast<long long>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yy + (m <= 2));
}

double poisson_deviance(const std::vector<long long>& y, const Eigen::VectorXd& mu) {
  double dev = 0.0;
  for (int i = 0; i < mu.size(); ++i) {
    const double yi = static_cast<double>(y[i]);
    const double term = (yi > 0.0) ? yi * std::log(yi / mu[i]) : 0.0;
    dev += 2.0 * (term - (yi - mu[i]));
  }
  return dev;
}

// Standard normal upper tail via erfc.
double normal_two_sided_p(double z) {
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

}  // namespace

Season season_of_month(int month) {
  if (month >= 3 && month <= 5) return Season::Spring;
  if (month >= 6 && month <= 8) return Season::Summer;
  if (month >= 9 && month <= 10) return Season::Fall;
  return Season::Winter;  // 11, 12, 1, 2
}

std::string season_name(Season s) {
  switch (s) {
    case Season::Spring: return "spring";
    case Season::Summer: return "summer";
    case Season::Fall: return "fall";
    case Season::Winter: return "winter";
  }
  return "?";
}

int weekday_of(const CalendarDate& origin, int t) {
  const long long z = days_from_civil(origin.year, origin.month, origin.day) + (t - 1);
  // 1970-01-01 was a Thursday (weekday 4 with Monday=1).
  long long w = (z + 3) % 7;
  if (w < 0) w += 7;
  return static_cast<int>(w) + 1;
}

int month_of(const CalendarDate& origin, int t) {
  const long long z = days_from_civil(origin.year, origin.month, origin.day) + (t - 1);
  int y, m, d;
  civil_from_days(z, y, m, d);
  return m;
}

DesignMatrix build_design(int t0, int t1, const CalendarDate& origin,
                          const std::set<Season>& reference_seasons) {
  if (t1 < t0) throw std::invalid_argument("empty time range");
  if (origin.month < 1 || origin.month > 12 || origin.day < 1 ||
      origin.day > days_in_month(origin.year, origin.month))
    throw std::invalid_argument("invalid calendar origin");
  DesignMatrix dm;
  dm.origin = origin;
  dm.reference_seasons = reference_seasons;
  for (int wd = 1; wd <= 7; ++wd) {
    static const char* names[] = {"mon", "tue", "wed", "thu", "fri", "sat", "sun"};
    dm.labels.push_back(names[wd - 1]);
  }
  std::vector<Season> season_cols;
  for (Season s : {Season::Spring, Season::Summer, Season::Fall, Season::Winter}) {
    if (!reference_seasons.count(s)) {
      season_cols.push_back(s);
      dm.labels.push_back(season_name(s));
    }
  }
  dm.labels.insert(dm.labels.end(), {"sin1", "cos1", "sin2", "cos2", "trend"});

  const int n = t1 - t0 + 1;
  const int k = static_cast<int>(dm.labels.size());
  dm.X.setZero(n, k);
  dm.t_values.resize(n);
  for (int r = 0; r < n; ++r) {
    const int t = t0 + r;
    dm.t_values[r] = t;
    dm.X(r, weekday_of(origin, t) - 1) = 1.0;
    const Season s = season_of_month(month_of(origin, t));
    for (size_t c = 0; c < season_cols.size(); ++c)
      if (season_cols[c] == s) dm.X(r, 7 + static_cast<int>(c)) = 1.0;
    const int base = 7 + static_cast<int>(season_cols.size());
    dm.X(r, base + 0) = std::sin(kTau365 * t);
    dm.X(r, base + 1) = std::cos(kTau365 * t);
    dm.X(r, base + 2) = std::sin(2.0 * kTau365 * t);
    dm.X(r, base + 3) = std::cos(2.0 * kTau365 * t);
    dm.X(r, base + 4) = t;
  }

  // Rank check with column attribution so misconfiguration is reported by name.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(dm.X);
  if (qr.rank() < k) {
    std::string bad;
    const auto perm = qr.colsPermutation().indices();
    for (int c = qr.rank(); c < k; ++c) {
      if (!bad.empty()) bad += ", ";
      bad += dm.labels[perm[c]];
    }
    throw std::runtime_error("design matrix is rank deficient; offending columns: " + bad);
  }
  return dm;
}

DesignMatrix build_intercept_only_design(int t0, int t1) {
  if (t1 < t0) throw std::invalid_argument("empty time range");
  DesignMatrix dm;
  dm.kind = DesignMatrix::Kind::InterceptOnly;
  dm.labels = {"intercept"};
  const int n = t1 - t0 + 1;
  dm.X = Eigen::MatrixXd::Ones(n, 1);
  dm.t_values.resize(n);
  for (int r = 0; r < n; ++r) dm.t_values[r] = t0 + r;
  return dm;
}

Eigen::RowVectorXd design_row(const DesignMatrix& dm, int t) {
  if (dm.kind == DesignMatrix::Kind::InterceptOnly) return Eigen::RowVectorXd::Ones(1);
  const int k = static_cast<int>(dm.labels.size());
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(k);
  row(weekday_of(dm.origin, t) - 1) = 1.0;
  std::vector<Season> season_cols;
  for (Season s : {Season::Spring, Season::Summer, Season::Fall, Season::Winter})
    if (!dm.reference_seasons.count(s)) season_cols.push_back(s);
  const Season s = season_of_month(month_of(dm.origin, t));
  for (size_t c = 0; c < season_cols.size(); ++c)
    if (season_cols[c] == s) row(7 + static_cast<int>(c)) = 1.0;
  const int base = 7 + static_cast<int>(season_cols.size());
  row(base + 0) = std::sin(kTau365 * t);
  row(base + 1) = std::cos(kTau365 * t);
  row(base + 2) = std::sin(2.0 * kTau365 * t);
  row(base + 3) = std::cos(2.0 * kTau365 * t);
  row(base + 4) = t;
  return row;
}

TemporalGlmFit irls_fit(const DesignMatrix& dm, const std::vector<long long>& y, double tol,
                        int max_iter) {
  const int n = static_cast<int>(dm.X.rows());
  const int k = static_cast<int>(dm.X.cols());
  if (static_cast<int>(y.size()) != n) throw std::invalid_argument("length of y != design rows");
  for (long long v : y)
    if (v < 0) throw std::invalid_argument("counts must be non-negative");

  // Start from the standard GLM initializer mu = y + 0.5.
  Eigen::VectorXd eta(n);
  for (int i = 0; i < n; ++i) eta[i] = std::log(y[i] + 0.5);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd mu = eta.array().exp();

  int it = 0;
  bool converged = false;
  for (it = 1; it <= max_iter; ++it) {
    // Working response z = eta + (y - mu)/mu, weights W = mu.
    Eigen::VectorXd z(n), w(n);
    for (int i = 0; i < n; ++i) {
      w[i] = mu[i];
      z[i] = eta[i] + (y[i] - mu[i]) / mu[i];
    }
    const Eigen::MatrixXd Xw = dm.X.array().colwise() * w.array();
    const Eigen::MatrixXd XtWX = dm.X.transpose() * Xw;
    const Eigen::VectorXd XtWz = Xw.transpose() * z;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(XtWX);
    if (ldlt.info() != Eigen::Success)
      throw std::runtime_error("IRLS normal equations are singular (rank deficiency)");
    const Eigen::VectorXd next = ldlt.solve(XtWz);
    const double step = (next - beta).cwiseAbs().maxCoeff();
    beta = next;
    eta = dm.X * beta;
    mu = eta.array().exp();
    if (!mu.allFinite()) throw std::runtime_error("IRLS diverged: non-finite fitted means");
    Eigen::VectorXd resid(n);
    for (int i = 0; i < n; ++i) resid[i] = y[i] - mu[i];
    const Eigen::VectorXd score = dm.X.transpose() * resid;
    if (step < tol || score.norm() < tol) {
      converged = true;
      break;
    }
  }
  if (!converged) throw std::runtime_error("IRLS did not converge in the iteration budget");

  TemporalGlmFit fit;
  fit.design = dm;
  fit.labels = dm.labels;
  fit.coefficients = beta;
  fit.iterations = it;

  // Fisher information at the optimum; std errors from its inverse diagonal.
  Eigen::MatrixXd XtWX = dm.X.transpose() * (dm.X.array().colwise() * mu.array()).matrix();
  const Eigen::MatrixXd cov = XtWX.inverse();
  fit.std_errors = cov.diagonal().array().sqrt();
  fit.z_values = beta.array() / fit.std_errors.array();
  fit.p_values.resize(k);
  for (int c = 0; c < k; ++c) fit.p_values[c] = normal_two_sided_p(fit.z_values[c]);

  fit.residual_deviance = poisson_deviance(y, mu);
  fit.residual_df = n - k;
  // No-intercept convention: the null model is the link-zero fit mu = 1 on n df.
  fit.null_deviance = poisson_deviance(y, Eigen::VectorXd::Ones(n));
  fit.null_df = n;

  double loglik = 0.0;
  for (int i = 0; i < n; ++i)
    loglik += y[i] * std::log(mu[i]) - mu[i] - std::lgamma(static_cast<double>(y[i]) + 1.0);
  fit.aic = 2.0 * k - 2.0 * loglik;

  std::vector<double> dres(n);
  for (int i = 0; i < n; ++i) {
    const double yi = static_cast<double>(y[i]);
    const double term = (yi > 0.0) ? yi * std::log(yi / mu[i]) : 0.0;
    const double d2 = 2.0 * (term - (yi - mu[i]));
    dres[i] = std::copysign(std::sqrt(std::max(d2, 0.0)), yi - mu[i]);
  }
  std::sort(dres.begin(), dres.end());
  fit.median_deviance_residual =
      (n % 2 == 1) ? dres[n / 2] : 0.5 * (dres[n / 2 - 1] + dres[n / 2]);
  return fit;
}

double predict_lambda1(const TemporalGlmFit& fit, int t) {
  return std::exp(design_row(fit.design, t).dot(fit.coefficients));
}

}  // namespace lgcp
