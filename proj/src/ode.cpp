#include "dpf/ode.hpp"

#include <algorithm>
#include <cmath>

#include "dpf/errors.hpp"

namespace dpf::ode {
namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

class Stepper {
 public:
  Stepper(const Rhs& rhs, Eigen::Index n, Tolerance tol) : rhs_(rhs), tol_(tol) {
    for (auto* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &tmp_, &ynew_, &err_}) v->resize(n);
  }

  // Advances y from t to t_end, adapting the step size h in place.
  void advance(double& t, Eigen::VectorXd& y, double t_end, double& h, Stats& stats) {
    if (t_end <= t) return;
    rhs_(t, y, k1_);
    while (t < t_end) {
      const double remaining = t_end - t;
      bool last = false;
      double h_try = h;
      if (h_try >= remaining) {
        h_try = remaining;
        last = true;
      }
      const double h_min = 1e-14 * std::max(1.0, std::abs(t));
      if (h_try < h_min && !last) throw IntegrationFailure(t, "step size underflow");

      tmp_ = y + h_try * a21 * k1_;
      rhs_(t + c2 * h_try, tmp_, k2_);
      tmp_ = y + h_try * (a31 * k1_ + a32 * k2_);
      rhs_(t + c3 * h_try, tmp_, k3_);
      tmp_ = y + h_try * (a41 * k1_ + a42 * k2_ + a43 * k3_);
      rhs_(t + c4 * h_try, tmp_, k4_);
      tmp_ = y + h_try * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
      rhs_(t + c5 * h_try, tmp_, k5_);
      tmp_ = y + h_try * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
      rhs_(t + h_try, tmp_, k6_);
      ynew_ = y + h_try * (b1 * k1_ + b3 * k3_ + b4 * k4_ + b5 * k5_ + b6 * k6_);
      rhs_(t + h_try, ynew_, k7_);
      err_ = h_try * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);

      double err_norm = 0.0;
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double scale = tol_.abs + tol_.rel * std::max(std::abs(y[i]), std::abs(ynew_[i]));
        err_norm = std::max(err_norm, std::abs(err_[i]) / scale);
      }
      if (!std::isfinite(err_norm)) {
        ++stats.rejected;
        h = h_try * 0.1;
        if (h < h_min) throw IntegrationFailure(t, "non-finite derivative");
        continue;
      }
      if (err_norm <= 1.0) {
        ++stats.accepted;
        t = last ? t_end : t + h_try;
        y.swap(ynew_);
        k1_.swap(k7_);
        const double factor = err_norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 5.0);
        // A step clipped to land on t_end says nothing about the natural step.
        if (!last) h = h_try * factor;
      } else {
        ++stats.rejected;
        h = h_try * std::max(0.2, 0.9 * std::pow(err_norm, -0.25));
        if (h < h_min) throw IntegrationFailure(t, "step size underflow");
      }
    }
  }

 private:
  const Rhs& rhs_;
  Tolerance tol_;
  Eigen::VectorXd k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, ynew_, err_;
};

}  // namespace

std::vector<Eigen::VectorXd> integrate(const Rhs& rhs, const Eigen::VectorXd& y0, std::span<const double> times,
                                       Tolerance tol, Stats* stats) {
  std::vector<Eigen::VectorXd> out;
  if (times.empty()) return out;
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (times[i] < times[i - 1]) throw InvalidArgument("ode::integrate: times must be nondecreasing");
  }
  out.reserve(times.size());
  out.push_back(y0);

  Stats local;
  Stepper stepper(rhs, y0.size(), tol);
  Eigen::VectorXd y = y0;
  double t = times.front();
  const double span = times.back() - times.front();
  double h = span > 0 ? std::min(1e-3, span / 16) : 1e-3;
  h = std::max(h, 1e-12);
  for (std::size_t i = 1; i < times.size(); ++i) {
    stepper.advance(t, y, times[i], h, local);
    if (!y.allFinite()) throw IntegrationFailure(t, "non-finite state");
    out.push_back(y);
  }
  if (stats) *stats = local;
  return out;
}

Eigen::VectorXd integrate_to(const Rhs& rhs, const Eigen::VectorXd& y0, double t0, double t1, Tolerance tol) {
  const double times[2] = {t0, t1};
  return integrate(rhs, y0, times, tol).back();
}

}  // namespace dpf::ode
