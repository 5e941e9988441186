#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpf/lattice.hpp"
#include "dpf/toydata.hpp"

namespace dpf::metrics {

using lattice::LatticeState;
using lattice::Trajectory;

inline constexpr double kDefaultBandwidth = 0.1;

/// Rows are points.
Eigen::MatrixXd points_matrix(std::span<const toydata::Point2> points);
Eigen::MatrixXd states_matrix(std::span<const LatticeState> states);

/// Unbiased MMD^2 with k(u, v) = exp(-|u - v|_2 / bandwidth), diagonal terms
/// excluded. Can be negative. Needs at least two rows on each side.
double mmd_laplace(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double bandwidth = kDefaultBandwidth);
double mmd_laplace(std::span<const toydata::Point2> x, std::span<const toydata::Point2> y,
                   double bandwidth = kDefaultBandwidth);

struct PermutationNull {
  std::vector<double> statistics;  // one per permutation, in draw order
  double threshold = 0.0;          // interpolated quantile of `statistics`
  double quantile = 0.99;
};

/// Null distribution of mmd_laplace under random relabelling of the pooled
/// sample, keeping the two sizes. All permutations share one pass over the
/// pooled kernel matrix.
PermutationNull mmd_permutation_null(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int permutations,
                                     std::uint64_t seed, double quantile = 0.99,
                                     double bandwidth = kDefaultBandwidth);

/// Linear interpolation between order statistics (the "type 7" rule).
double empirical_quantile(std::vector<double> values, double q);

/// Samples generated from one initial point; each row of `samples` is one
/// sample's coordinates.
struct SampleGroup {
  LatticeState initial;
  Eigen::MatrixXd samples;
};

struct CsdResult {
  double value = 0.0;               // mean of per_group
  std::vector<double> per_group;    // sum over coordinates of the sample std
};

/// Throws InvalidArgument when a group has fewer than two samples.
CsdResult csd(std::span<const SampleGroup> groups);

/// Groups reverse trajectories by start state; coordinates are the end digits.
/// Groups appear in order of first occurrence.
std::vector<SampleGroup> group_by_start(std::span<const Trajectory> trajectories);

struct TrajectoryStats {
  double l1_distance = 0.0;
  double length = 0.0;
  double efficiency = 1.0;  // l1 / length, 1 for a trajectory that never moves
};

TrajectoryStats trajectory_stats(const Trajectory& trajectory);

struct TrajectorySummary {
  std::size_t count = 0;
  double mean_l1 = 0.0;
  double mean_length = 0.0;
  double mean_efficiency = 0.0;
};

TrajectorySummary summarize(std::span<const Trajectory> trajectories);

/// One metric value with its configuration echo and optional breakdown.
struct MetricsReport {
  std::string metric;
  double value = 0.0;
  std::map<std::string, std::string> config;
  std::vector<double> groups;

  std::string to_json() const;
};

}  // namespace dpf::metrics
