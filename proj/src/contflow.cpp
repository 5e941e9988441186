#include "dpf/contflow.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "dpf/errors.hpp"
#include "dpf/ode.hpp"

namespace dpf::contflow {
namespace {

// Posterior weights of the centers at x for isotropic variance `var`, plus the
// log normalizer sum_k exp(-|x - m_k|^2 / (2 var)).
Eigen::VectorXd posterior_weights(const Eigen::MatrixXd& means, double var, const Eigen::VectorXd& x,
                                  double* log_norm = nullptr) {
  const Eigen::VectorXd logits = -(means.colwise() - x).colwise().squaredNorm().transpose() / (2.0 * var);
  const double top = logits.maxCoeff();
  Eigen::VectorXd w = (logits.array() - top).exp();
  const double total = w.sum();
  if (log_norm) *log_norm = top + std::log(total);
  return w / total;
}

Eigen::VectorXd gaussian_mixture_score(const Eigen::MatrixXd& means, double var, const Eigen::VectorXd& x) {
  const Eigen::VectorXd w = posterior_weights(means, var, x);
  return (means * w - x) / var;
}

double integrate_kronrod(const std::function<double(double)>& f, double a, double b) {
  if (b == a) return 0.0;
  // Nested calls see round-off in the inner result, so the requested relative
  // tolerance stays well above machine precision and the depth is capped.
  double err = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 8, 1e-12, &err);
  if (!std::isfinite(value) || err > 1e-10 * std::max(1.0, std::abs(value))) {
    throw IntegrationFailure(b, "time-change quadrature did not converge");
  }
  return value;
}

}  // namespace

GaussianMixtureSnapshot::GaussianMixtureSnapshot(Eigen::MatrixXd centers, double time)
    : centers_(std::move(centers)), time_(time) {
  if (centers_.cols() < 1 || centers_.rows() < 1) throw InvalidArgument("mixture needs at least one center");
  if (!(time_ > 0.0) || !std::isfinite(time_)) throw InvalidArgument("mixture time must be positive");
}

GaussianMixtureSnapshot GaussianMixtureSnapshot::collinear(const Eigen::VectorXd& origin,
                                                           const Eigen::VectorXd& direction,
                                                           std::span<const double> offsets, double time) {
  if (origin.size() != direction.size()) throw InvalidArgument("collinear: origin and direction differ in size");
  Eigen::MatrixXd c(origin.size(), static_cast<Eigen::Index>(offsets.size()));
  for (std::size_t k = 0; k < offsets.size(); ++k) c.col(static_cast<Eigen::Index>(k)) = origin + offsets[k] * direction;
  return {std::move(c), time};
}

double GaussianMixtureSnapshot::log_density(const Eigen::VectorXd& x) const {
  double log_norm = 0.0;
  posterior_weights(centers_, time_, x, &log_norm);
  return log_norm - std::log(double(centers_.cols())) - 0.5 * dim() * std::log(2.0 * std::numbers::pi * time_);
}

Eigen::VectorXd GaussianMixtureSnapshot::score(const Eigen::VectorXd& x) const {
  if (x.size() != centers_.rows()) throw InvalidArgument("score: point has the wrong dimension");
  return gaussian_mixture_score(centers_, time_, x);
}

Eigen::VectorXd mixture_score(const GaussianMixtureSnapshot& snapshot, const Eigen::VectorXd& x) {
  return snapshot.score(x);
}

Eigen::VectorXd integrate_probability_flow(const GaussianMixtureSnapshot& snapshot, const Eigen::VectorXd& x0,
                                           double t1) {
  const double t0 = snapshot.time();
  if (!(t1 >= t0)) throw InvalidArgument("integrate_probability_flow: need t1 >= t0");
  const Eigen::MatrixXd& centers = snapshot.centers();
  const ode::Rhs rhs = [&](double t, const Eigen::VectorXd& x, Eigen::VectorXd& dx) {
    dx = -0.5 * gaussian_mixture_score(centers, t, x);
  };
  return ode::integrate_to(rhs, x0, t0, t1);
}

Eigen::VectorXd single_center_flow(const Eigen::VectorXd& center, const Eigen::VectorXd& x0, double t0, double t1) {
  return center + (x0 - center) * std::sqrt(t1 / t0);
}

MonotoneReport check_monotone_map_1d(std::span<const double> centers, double t0, double t1,
                                     std::span<const double> starts) {
  if (starts.size() < 2) throw InvalidArgument("check_monotone_map_1d: need at least two starts");
  for (std::size_t k = 1; k < starts.size(); ++k) {
    if (!(starts[k] > starts[k - 1])) throw InvalidArgument("check_monotone_map_1d: starts must be strictly increasing");
  }
  const GaussianMixtureSnapshot snap(Eigen::Map<const Eigen::RowVectorXd>(centers.data(),
                                                                          static_cast<Eigen::Index>(centers.size())),
                                     t0);
  MonotoneReport report;
  for (double s : starts) report.mapped.push_back(integrate_probability_flow(snap, Eigen::VectorXd::Constant(1, s), t1)[0]);
  report.min_slope = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < starts.size(); ++k) {
    const double slope = (report.mapped[k] - report.mapped[k - 1]) / (starts[k] - starts[k - 1]);
    report.min_slope = std::min(report.min_slope, slope);
  }
  report.monotone = report.min_slope >= 0.0;
  return report;
}

Eigen::MatrixXd log_density_hessian(const GaussianMixtureSnapshot& snapshot, const Eigen::VectorXd& x, double step) {
  const int n = snapshot.dim();
  Eigen::MatrixXd h(n, n);
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd plus = x, minus = x;
    plus[j] += step;
    minus[j] -= step;
    h.col(j) = (snapshot.score(plus) - snapshot.score(minus)) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

double hessian_commutator_norm(const Eigen::MatrixXd& centers, double t, double s, const Eigen::VectorXd& x) {
  const Eigen::MatrixXd ht = log_density_hessian(GaussianMixtureSnapshot(centers, t), x);
  const Eigen::MatrixXd hs = log_density_hessian(GaussianMixtureSnapshot(centers, s), x);
  return (ht * hs - hs * ht).norm();
}

OuSchedule::OuSchedule(Coefficient theta, Coefficient sigma) : theta_(std::move(theta)), sigma_(std::move(sigma)) {
  if (!theta_ || !sigma_) throw InvalidArgument("OuSchedule: missing coefficient");
}

OuSchedule OuSchedule::constant(double theta, double sigma) {
  if (theta < 0.0 || !(sigma > 0.0)) throw InvalidArgument("OuSchedule: need theta >= 0 and sigma > 0");
  return OuSchedule([theta](double) { return theta; }, [sigma](double) { return sigma; });
}

double OuSchedule::phi(double t) const { return std::exp(integrate_kronrod(theta_, 0.0, t)); }

double OuSchedule::beta(double t) const {
  return integrate_kronrod(
      [this](double tau) {
        const double v = sigma_(tau) * phi(tau);
        return v * v;
      },
      0.0, t);
}

std::vector<Eigen::VectorXd> integrate_ou_flow(const OuSchedule& schedule, const Eigen::MatrixXd& centers,
                                               const Eigen::VectorXd& x0, double t0, std::span<const double> times) {
  if (!(t0 > 0.0)) throw InvalidArgument("integrate_ou_flow: t0 must be positive");
  // Law at t: mixture of N(c / phi, beta / phi^2 I); flow dx/dt = -theta x - sigma^2 / 2 score.
  const ode::Rhs rhs = [&](double t, const Eigen::VectorXd& x, Eigen::VectorXd& dx) {
    const double phi = schedule.phi(t);
    const double var = schedule.beta(t) / (phi * phi);
    const double sigma = schedule.sigma(t);
    dx = -schedule.theta(t) * x - 0.5 * sigma * sigma * gaussian_mixture_score(centers / phi, var, x);
  };
  std::vector<double> grid{t0};
  grid.insert(grid.end(), times.begin(), times.end());
  auto out = ode::integrate(rhs, x0, grid);
  out.erase(out.begin());
  return out;
}

double ou_time_change_check(const OuSchedule& schedule, const Eigen::MatrixXd& centers, const Eigen::VectorXd& x0,
                            double t0, std::span<const double> times) {
  if (!(schedule.beta(t0) > 0.0)) throw InvalidArgument("ou_time_change_check: beta(t0) must be positive");
  const auto direct = integrate_ou_flow(schedule, centers, x0, t0, times);

  // Brownian side: y(beta(t0)) = phi(t0) x0, then y(beta(t)) / phi(t).
  std::vector<double> bm_times{schedule.beta(t0)};
  for (double t : times) bm_times.push_back(schedule.beta(t));
  const Eigen::VectorXd y0 = schedule.phi(t0) * x0;
  const ode::Rhs bm_rhs = [&](double b, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    dy = -0.5 * gaussian_mixture_score(centers, b, y);
  };
  const auto bm = ode::integrate(bm_rhs, y0, bm_times);

  double worst = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const Eigen::VectorXd mapped = bm[k + 1] / schedule.phi(times[k]);
    worst = std::max(worst, (mapped - direct[k]).cwiseAbs().maxCoeff());
  }
  return worst;
}

SuiteReport run_continuous_suite() {
  SuiteReport rep;

  // Start times keep every gap between atoms populated; where the density is
  // ~1e-25 the map's slope drops below the integrator's resolution.
  const std::vector<std::vector<double>> atom_sets{{-1.0, 1.0}, {-2.0, 0.0, 0.5, 3.0}, {0.0, 0.3, 2.5}};
  std::vector<double> starts;
  for (int k = 0; k <= 200; ++k) starts.push_back(-5.0 + 0.05 * k);
  rep.min_monotone_slope = std::numeric_limits<double>::infinity();
  for (const auto& atoms : atom_sets) {
    for (const auto& [t0, t1] : {std::pair{0.25, 1.0}, std::pair{0.5, 3.0}}) {
      rep.min_monotone_slope = std::min(rep.min_monotone_slope, check_monotone_map_1d(atoms, t0, t1, starts).min_slope);
    }
  }

  // The control triangle is symmetric about x = y, where its Hessians commute,
  // so its probes stay off that line.
  const std::vector<Eigen::Vector2d> probes{{0.7, 0.5}, {-0.4, 1.1}, {1.3, -0.6}};
  const Eigen::Vector2d direction = Eigen::Vector2d(1.0, 2.0).normalized();
  const std::vector<double> offsets{-1.5, 0.0, 0.7, 2.0};
  const Eigen::MatrixXd line =
      GaussianMixtureSnapshot::collinear(Eigen::Vector2d(0.3, -0.2), direction, offsets, 1.0).centers();
  Eigen::MatrixXd triangle(2, 3);
  triangle << 0.0, 2.0, 0.0, 0.0, 0.0, 2.0;
  rep.commutator_control = std::numeric_limits<double>::infinity();
  for (const auto& x : probes) {
    rep.commutator_collinear = std::max(rep.commutator_collinear, hessian_commutator_norm(line, 0.3, 0.8, x));
    rep.commutator_control = std::min(rep.commutator_control, hessian_commutator_norm(triangle, 0.3, 0.8, x));
  }

  Eigen::MatrixXd atoms(2, 3);
  atoms << -1.0, 1.0, 0.5, 0.0, 1.0, -1.0;
  const std::vector<double> times{0.3, 0.6, 1.0};
  for (const auto& [theta, sigma] : {std::pair{0.5, 1.0}, std::pair{1.0, 0.7}, std::pair{0.0, 1.0}}) {
    rep.ou_deviation = std::max(rep.ou_deviation, ou_time_change_check(OuSchedule::constant(theta, sigma), atoms,
                                                                       Eigen::Vector2d(0.2, 0.1), 0.1, times));
  }

  const Eigen::Vector2d center(0.5, -0.3), x0(1.2, 0.4);
  const Eigen::VectorXd numeric = integrate_probability_flow(GaussianMixtureSnapshot(center, 0.2), x0, 1.5);
  rep.closed_form_error = (numeric - single_center_flow(center, x0, 0.2, 1.5)).cwiseAbs().maxCoeff();
  return rep;
}

}  // namespace dpf::contflow
