#include <cmath>
#include <string>

#include "dpf/errors.hpp"
#include "dpf/lattice.hpp"
#include "dpf/ode.hpp"

namespace dpf::lattice {

std::vector<DenseDistribution> solve_forward_dense(const DenseDistribution& p0, const Generator& gen,
                                                   std::span<const double> t_grid, std::size_t cap) {
  const ProblemShape& sh = p0.shape;
  if (!(gen.shape() == sh)) throw InvalidArgument("solve_forward_dense: generator and law have different shapes");
  const std::size_t n = sh.dense_size(cap);
  if (t_grid.empty() || t_grid.front() != 0.0) throw InvalidArgument("solve_forward_dense: t_grid must start at 0");
  for (std::size_t k = 1; k < t_grid.size(); ++k) {
    if (!(t_grid[k] > t_grid[k - 1])) throw InvalidArgument("solve_forward_dense: t_grid must be increasing");
  }

  std::vector<Eigen::Index> stride(static_cast<std::size_t>(sh.dims()));
  for (int l = 0; l < sh.dims(); ++l) stride[l] = static_cast<Eigen::Index>(sh.stride(l));

  Eigen::MatrixXd fixed_table;
  if (gen.time_homogeneous()) fixed_table = gen.neighbor_rate_table(0.0, cap);

  // dP_j/dt = sum_i P_i Q_ij, accumulated edge by edge so row sums stay zero.
  const ode::Rhs rhs = [&](double t, const Eigen::VectorXd& p, Eigen::VectorXd& dp) {
    const Eigen::MatrixXd table_t = gen.time_homogeneous() ? Eigen::MatrixXd() : gen.neighbor_rate_table(t, cap);
    const Eigen::MatrixXd& table = gen.time_homogeneous() ? fixed_table : table_t;
    dp.setZero();
    for (Eigen::Index idx = 0; idx < static_cast<Eigen::Index>(n); ++idx) {
      const double mass = p[idx];
      if (mass == 0.0) continue;
      for (int l = 0; l < sh.dims(); ++l) {
        const double down = table(idx, neighbor_slot(l, -1));
        const double up = table(idx, neighbor_slot(l, +1));
        if (down != 0.0) {
          dp[idx] -= mass * down;
          dp[idx - stride[l]] += mass * down;
        }
        if (up != 0.0) {
          dp[idx] -= mass * up;
          dp[idx + stride[l]] += mass * up;
        }
      }
    }
  };

  const auto solution = ode::integrate(rhs, p0.probs, t_grid);
  std::vector<DenseDistribution> out;
  out.reserve(solution.size());
  for (std::size_t k = 0; k < solution.size(); ++k) {
    // Tiny negative round-off in vanishing entries is not a data error.
    Eigen::VectorXd p = solution[k].cwiseMax(0.0);
    const double total = p.sum();
    if (std::abs(total - 1.0) > 1e-9) {
      throw IntegrationFailure(t_grid[k], "forward solve lost normalization (sum " + std::to_string(total) + ")");
    }
    out.emplace_back(sh, std::move(p));
  }
  return out;
}

Trajectory simulate_forward(const Generator& gen, const LatticeState& start, double horizon, std::uint64_t seed) {
  if (!gen.time_homogeneous()) {
    throw UnsupportedMode("simulate_forward: exact-event simulation needs a time-constant generator");
  }
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidArgument("simulate_forward: horizon must be positive");
  const ProblemShape& sh = gen.shape();
  validate_state(sh, start);

  Trajectory traj;
  traj.direction = Trajectory::Direction::kForward;
  traj.seed = seed;
  traj.times.push_back(0.0);
  traj.steps.push_back(0);
  traj.states.push_back(start);

  Rng rng(seed);
  LatticeState cur = start;
  double t = 0.0;
  long events = 0;
  std::vector<double> rates(static_cast<std::size_t>(2 * sh.dims()));
  while (true) {
    double total = 0.0;
    for (int l = 0; l < sh.dims(); ++l) {
      for (int dir : {-1, +1}) {
        const int to = int(cur[l]) + dir;
        const double r = (to >= 0 && to < sh.states()) ? gen.neighbor_rate(cur, l, dir, t) : 0.0;
        rates[neighbor_slot(l, dir)] = r;
        total += r;
      }
    }
    if (total <= 0.0) break;
    const double wait = -std::log1p(-uniform01(rng)) / total;
    if (t + wait >= horizon) break;
    t += wait;
    double pick = uniform01(rng) * total;
    std::size_t slot = rates.size();
    for (std::size_t k = 0; k < rates.size(); ++k) {
      if (rates[k] == 0.0) continue;
      slot = k;  // round-off fallback: the last positive slot
      if (pick < rates[k]) break;
      pick -= rates[k];
    }
    const int dim = static_cast<int>(slot / 2);
    cur[dim] = static_cast<LatticeState::Digit>(int(cur[dim]) + (slot % 2 ? 1 : -1));
    traj.times.push_back(t);
    traj.steps.push_back(++events);
    traj.states.push_back(cur);
  }
  traj.times.push_back(horizon);
  traj.steps.push_back(events);
  traj.states.push_back(cur);
  return traj;
}

}  // namespace dpf::lattice
