#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace dpf::contflow {

/// Heat-kernel smoothing of equal-weight point masses: p(x, t) is the mean of
/// N(x; center_k, t I).
class GaussianMixtureSnapshot {
 public:
  GaussianMixtureSnapshot(Eigen::MatrixXd centers, double time);  // one center per column

  /// Centers placed at origin + offsets[k] * direction.
  static GaussianMixtureSnapshot collinear(const Eigen::VectorXd& origin, const Eigen::VectorXd& direction,
                                           std::span<const double> offsets, double time);

  int dim() const { return static_cast<int>(centers_.rows()); }
  double time() const { return time_; }
  const Eigen::MatrixXd& centers() const { return centers_; }
  GaussianMixtureSnapshot at(double time) const { return {centers_, time}; }

  double log_density(const Eigen::VectorXd& x) const;
  /// Gradient of log_density, log-sum-exp stabilized.
  Eigen::VectorXd score(const Eigen::VectorXd& x) const;

 private:
  Eigen::MatrixXd centers_;
  double time_;
};

Eigen::VectorXd mixture_score(const GaussianMixtureSnapshot& snapshot, const Eigen::VectorXd& x);

/// Solves dx/dt = -1/2 score(x, t) from (t0, x0) to t1 >= t0 at tolerance
/// 1e-10 / 1e-8.
Eigen::VectorXd integrate_probability_flow(const GaussianMixtureSnapshot& snapshot, const Eigen::VectorXd& x0,
                                           double t1);

/// Closed form for a single center: c + (x0 - c) sqrt(t1 / t0).
Eigen::VectorXd single_center_flow(const Eigen::VectorXd& center, const Eigen::VectorXd& x0, double t0, double t1);

struct MonotoneReport {
  bool monotone = false;
  double min_slope = 0.0;  // smallest (y_{k+1} - y_k) / (x_{k+1} - x_k)
  std::vector<double> mapped;
};

/// Pushes a strictly increasing grid of 1-D starts through the flow from t0
/// to t1 and checks the outputs are nondecreasing.
MonotoneReport check_monotone_map_1d(std::span<const double> centers, double t0, double t1,
                                     std::span<const double> starts);

/// Hessian of log p at x by central differences of the score (step 1e-4).
Eigen::MatrixXd log_density_hessian(const GaussianMixtureSnapshot& snapshot, const Eigen::VectorXd& x,
                                    double step = 1e-4);

/// Frobenius norm of H_t H_s - H_s H_t for the Hessians of log p at times t, s.
double hessian_commutator_norm(const Eigen::MatrixXd& centers, double t, double s, const Eigen::VectorXd& x);

/// OU coefficients theta(t) >= 0, sigma(t) > 0 and the derived time change
/// phi(t) = exp(int_0^t theta), beta(t) = int_0^t (sigma phi)^2.
class OuSchedule {
 public:
  using Coefficient = std::function<double(double)>;
  OuSchedule(Coefficient theta, Coefficient sigma);

  static OuSchedule constant(double theta, double sigma);

  double theta(double t) const { return theta_(t); }
  double sigma(double t) const { return sigma_(t); }
  double phi(double t) const;
  double beta(double t) const;

 private:
  Coefficient theta_, sigma_;
};

/// Probability-flow ODE of the OU process started from the mixture law at
/// time 0 (atoms smoothed to variance beta(t0) at t0) compared with
/// phi(t)^-1 times the Brownian flow at time beta(t). Returns the largest
/// pointwise gap over `times`.
double ou_time_change_check(const OuSchedule& schedule, const Eigen::MatrixXd& centers, const Eigen::VectorXd& x0,
                            double t0, std::span<const double> times);

/// Flow of the OU-driven mixture integrated directly from (t0, x0).
std::vector<Eigen::VectorXd> integrate_ou_flow(const OuSchedule& schedule, const Eigen::MatrixXd& centers,
                                               const Eigen::VectorXd& x0, double t0, std::span<const double> times);

/// The shipped verification configurations and their measured outcomes.
struct SuiteReport {
  double min_monotone_slope = 0.0;     // over every collinear 1-D config
  double commutator_collinear = 0.0;   // largest over collinear probes
  double commutator_control = 0.0;     // smallest over non-collinear probes
  double ou_deviation = 0.0;           // largest over constant schedules
  double closed_form_error = 0.0;      // single center, max abs error
};

SuiteReport run_continuous_suite();

}  // namespace dpf::contflow
