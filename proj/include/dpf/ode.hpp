#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

namespace dpf::ode {

using Rhs = std::function<void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dydt)>;

struct Tolerance {
  double abs = 1e-10;
  double rel = 1e-8;
};

struct Stats {
  long accepted = 0;
  long rejected = 0;
};

/// Adaptive Dormand-Prince 5(4) integration. Returns the solution at each
/// entry of `times` (which must be nondecreasing); the first entry is the
/// initial time and the first output is `y0`. Throws IntegrationFailure when
/// the step size underflows.
std::vector<Eigen::VectorXd> integrate(const Rhs& rhs, const Eigen::VectorXd& y0, std::span<const double> times,
                                       Tolerance tol = {}, Stats* stats = nullptr);

/// Convenience wrapper for a single end point.
Eigen::VectorXd integrate_to(const Rhs& rhs, const Eigen::VectorXd& y0, double t0, double t1, Tolerance tol = {});

}  // namespace dpf::ode
