#pragma once

#include <cstdint>
#include <string>
#include <span>
#include <vector>

#include "dpf/lattice.hpp"

namespace dpf::reverse {

using lattice::ConditionalSource;
using lattice::LatticeState;
using lattice::MarginalOracle;
using lattice::Trajectory;

enum class Mode { kBaseline, kDpf };

const char* mode_name(Mode mode);
Mode parse_mode(const std::string& name);

/// Rectified reverse rate for moving digit l by `dir`:
/// ReLU(cond[l][i_l + dir] / cond[l][i_l] - 1). Out-of-range targets get 0.
double reverse_rate_dpf(const Eigen::MatrixXd& conditionals, const LatticeState& i, int dim, int dir);

/// Time-reversal rate of the unit-rate lattice walk: cond[l][i_l + dir] / cond[l][i_l].
double reverse_rate_baseline(const Eigen::MatrixXd& conditionals, const LatticeState& i, int dim, int dir);

double reverse_rate(Mode mode, const Eigen::MatrixXd& conditionals, const LatticeState& i, int dim, int dir);

/// Per-dimension Euler step probabilities.
struct EulerRow {
  double sub = 0.0;
  double stay = 1.0;
  double add = 0.0;
};

/// P(move) = eps * rate, P(stay) = 1 - eps * (sum). A negative stay is clamped
/// to 0 and the row renormalized; `clamp_counter` is incremented when given.
EulerRow euler_transition_row(double rate_sub, double rate_add, double eps, long* clamp_counter = nullptr);

/// Exact draws from q_T: a uniform data point, then each digit from its
/// per-dimension kernel row.
std::vector<LatticeState> sample_prior(const MarginalOracle& oracle, double horizon, std::uint64_t seed,
                                       std::size_t count);

/// Tally of recorded digit changes and of those that did not move to a digit
/// of strictly higher conditional probability.
struct TransitionAudit {
  long transitions = 0;
  long violations = 0;
  TransitionAudit& operator+=(const TransitionAudit& o) {
    transitions += o.transitions;
    violations += o.violations;
    return *this;
  }
};

struct ReverseConfig {
  Mode mode = Mode::kDpf;
  double horizon = 1.0;
  double eps = 1e-3;
  std::uint64_t seed = 0;
  int workers = 1;
  bool audit = false;
};

struct ReverseRun {
  std::vector<Trajectory> trajectories;
  long clamp_count = 0;
  TransitionAudit audit;
};

/// Number of Euler steps; throws InvalidArgument unless horizon / eps is a
/// positive integer (relative slack 1e-9).
long step_count(double horizon, double eps);

/// Runs one chain per start state. Step k evaluates the conditionals at
/// t = horizon - k eps and records the state reached at t - eps, so the last
/// evaluation is at t = eps and the end state is stamped 0. Trajectories keep
/// the start, every change point and the end. Chain c draws from its own
/// stream, so results do not depend on the worker count.
ReverseRun run_reverse_from(const ConditionalSource& source, const ReverseConfig& config,
                            std::span<const LatticeState> starts);

/// Draws `count` starts from the exact prior and runs them.
ReverseRun run_reverse(const ConditionalSource& source, const MarginalOracle& prior, const ReverseConfig& config,
                       std::size_t count);

/// CSV with columns chain,step,t,digit_1..digit_K.
std::string trajectories_csv(std::span<const Trajectory> trajectories);

/// Inverse of trajectories_csv; chains must appear in increasing order.
/// Throws DataIntegrityError on malformed input.
std::vector<Trajectory> parse_trajectories_csv(const std::string& text);

}  // namespace dpf::reverse
