#include "dpf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "dpf/errors.hpp"
#include "dpf/rng.hpp"

namespace dpf::metrics {
namespace {

constexpr Eigen::Index kBlockRows = 256;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Kernel rows [lo, lo + rows) of a against all of b, diagonal left in.
RowMatrix kernel_block(const Eigen::MatrixXd& a, Eigen::Index lo, Eigen::Index rows, const Eigen::MatrixXd& b,
                       double bandwidth) {
  RowMatrix k(rows, b.rows());
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::RowVectorXd u = a.row(lo + i);
    for (Eigen::Index j = 0; j < b.rows(); ++j) k(i, j) = std::exp(-(b.row(j) - u).norm() / bandwidth);
  }
  return k;
}

// Sum of k(a_i, b_j) over all pairs, minus the diagonal when a and b are the
// same sample. Row blocks are reduced in a fixed order.
double kernel_sum(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double bandwidth, bool same) {
  double total = 0.0;
  for (Eigen::Index lo = 0; lo < a.rows(); lo += kBlockRows) {
    const Eigen::Index rows = std::min(kBlockRows, a.rows() - lo);
    const RowMatrix k = kernel_block(a, lo, rows, b, bandwidth);
    double block = k.sum();
    if (same) block -= double(rows);  // exp(0) on the diagonal
    total += block;
  }
  return total;
}

void check_sizes(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double bandwidth) {
  if (x.rows() < 2 || y.rows() < 2) throw InvalidArgument("mmd_laplace: each sample needs at least two points");
  if (x.cols() != y.cols()) throw InvalidArgument("mmd_laplace: samples differ in dimension");
  if (!(bandwidth > 0.0)) throw InvalidArgument("mmd_laplace: bandwidth must be positive");
}

double combine(double sxx, double syy, double sxy, double nx, double ny) {
  return sxx / (nx * (nx - 1.0)) + syy / (ny * (ny - 1.0)) - 2.0 * sxy / (nx * ny);
}

}  // namespace

Eigen::MatrixXd points_matrix(std::span<const toydata::Point2> points) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(points.size()), 2);
  for (std::size_t k = 0; k < points.size(); ++k) {
    m(static_cast<Eigen::Index>(k), 0) = points[k].x;
    m(static_cast<Eigen::Index>(k), 1) = points[k].y;
  }
  return m;
}

Eigen::MatrixXd states_matrix(std::span<const LatticeState> states) {
  const Eigen::Index dims = states.empty() ? 0 : static_cast<Eigen::Index>(states.front().size());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(states.size()), dims);
  for (std::size_t k = 0; k < states.size(); ++k) {
    if (static_cast<Eigen::Index>(states[k].size()) != dims) throw InvalidArgument("states differ in dimension");
    for (Eigen::Index l = 0; l < dims; ++l) m(static_cast<Eigen::Index>(k), l) = states[k][l];
  }
  return m;
}

double mmd_laplace(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double bandwidth) {
  check_sizes(x, y, bandwidth);
  return combine(kernel_sum(x, x, bandwidth, true), kernel_sum(y, y, bandwidth, true),
                 kernel_sum(x, y, bandwidth, false), double(x.rows()), double(y.rows()));
}

double mmd_laplace(std::span<const toydata::Point2> x, std::span<const toydata::Point2> y, double bandwidth) {
  return mmd_laplace(points_matrix(x), points_matrix(y), bandwidth);
}

PermutationNull mmd_permutation_null(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int permutations,
                                     std::uint64_t seed, double quantile, double bandwidth) {
  check_sizes(x, y, bandwidth);
  if (permutations < 1) throw InvalidArgument("mmd_permutation_null: need at least one permutation");
  if (!(quantile > 0.0 && quantile < 1.0)) throw InvalidArgument("mmd_permutation_null: quantile must lie in (0, 1)");

  Eigen::MatrixXd pooled(x.rows() + y.rows(), x.cols());
  pooled << x, y;
  const Eigen::Index n = pooled.rows();

  // Column p indicates which pooled points land in the first sample.
  Rng rng(derive_seed(seed, SeedPurpose::kPermutation));
  Eigen::MatrixXd labels = Eigen::MatrixXd::Zero(n, permutations);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (int p = 0; p < permutations; ++p) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    for (std::size_t k = order.size() - 1; k > 0; --k) std::swap(order[k], order[uniform_index(rng, k + 1)]);
    for (Eigen::Index k = 0; k < x.rows(); ++k) labels(order[static_cast<std::size_t>(k)], p) = 1.0;
  }

  // With a the indicator and K the zero-diagonal pooled kernel:
  // Sxx = a'Ka, Sxy = a'K1 - Sxx, Syy = 1'K1 - 2 a'K1 + Sxx.
  Eigen::VectorXd sxx = Eigen::VectorXd::Zero(permutations);
  Eigen::VectorXd a_row = Eigen::VectorXd::Zero(permutations);
  double total = 0.0;
  for (Eigen::Index lo = 0; lo < n; lo += kBlockRows) {
    const Eigen::Index rows = std::min(kBlockRows, n - lo);
    RowMatrix k = kernel_block(pooled, lo, rows, pooled, bandwidth);
    for (Eigen::Index i = 0; i < rows; ++i) k(i, lo + i) = 0.0;
    const Eigen::VectorXd row_sums = k.rowwise().sum();
    total += row_sums.sum();
    const Eigen::MatrixXd ka = k * labels;
    const auto block_labels = labels.middleRows(lo, rows);
    sxx += (block_labels.array() * ka.array()).colwise().sum().matrix().transpose();
    a_row += block_labels.transpose() * row_sums;
  }

  PermutationNull null;
  null.quantile = quantile;
  const double nx = double(x.rows()), ny = double(y.rows());
  for (int p = 0; p < permutations; ++p) {
    const double sxy = a_row[p] - sxx[p];
    const double syy = total - 2.0 * a_row[p] + sxx[p];
    null.statistics.push_back(combine(sxx[p], syy, sxy, nx, ny));
  }
  null.threshold = empirical_quantile(null.statistics, quantile);
  return null;
}

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("empirical_quantile: no values");
  std::sort(values.begin(), values.end());
  const double pos = q * double(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - double(lo)) * (values[hi] - values[lo]);
}

CsdResult csd(std::span<const SampleGroup> groups) {
  if (groups.empty()) throw InvalidArgument("csd: no groups");
  CsdResult res;
  for (const auto& g : groups) {
    const Eigen::Index m = g.samples.rows();
    if (m < 2) throw InvalidArgument("csd: every group needs at least two samples");
    const Eigen::RowVectorXd mean = g.samples.colwise().mean();
    const Eigen::RowVectorXd var = (g.samples.rowwise() - mean).colwise().squaredNorm() / double(m - 1);
    res.per_group.push_back(var.cwiseSqrt().sum());
  }
  res.value = std::accumulate(res.per_group.begin(), res.per_group.end(), 0.0) / double(res.per_group.size());
  return res;
}

std::vector<SampleGroup> group_by_start(std::span<const Trajectory> trajectories) {
  std::unordered_map<LatticeState, std::size_t, lattice::LatticeStateHash> index;
  std::vector<std::vector<const LatticeState*>> ends;
  std::vector<SampleGroup> groups;
  for (const auto& tr : trajectories) {
    if (tr.states.empty()) throw InvalidArgument("group_by_start: empty trajectory");
    const auto [it, fresh] = index.try_emplace(tr.start(), groups.size());
    if (fresh) {
      groups.push_back({tr.start(), {}});
      ends.emplace_back();
    }
    ends[it->second].push_back(&tr.end());
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const Eigen::Index dims = static_cast<Eigen::Index>(groups[g].initial.size());
    groups[g].samples.resize(static_cast<Eigen::Index>(ends[g].size()), dims);
    for (std::size_t r = 0; r < ends[g].size(); ++r) {
      for (Eigen::Index l = 0; l < dims; ++l) groups[g].samples(static_cast<Eigen::Index>(r), l) = (*ends[g][r])[l];
    }
  }
  return groups;
}

TrajectoryStats trajectory_stats(const Trajectory& trajectory) {
  if (trajectory.states.empty()) throw InvalidArgument("trajectory_stats: empty trajectory");
  TrajectoryStats st;
  st.l1_distance = lattice::hamming_l1_distance(trajectory.start(), trajectory.end());
  for (std::size_t k = 1; k < trajectory.states.size(); ++k) {
    st.length += lattice::hamming_l1_distance(trajectory.states[k - 1], trajectory.states[k]);
  }
  st.efficiency = st.length == 0.0 ? 1.0 : st.l1_distance / st.length;
  return st;
}

TrajectorySummary summarize(std::span<const Trajectory> trajectories) {
  TrajectorySummary s;
  s.count = trajectories.size();
  if (trajectories.empty()) return s;
  for (const auto& tr : trajectories) {
    const TrajectoryStats st = trajectory_stats(tr);
    s.mean_l1 += st.l1_distance;
    s.mean_length += st.length;
    s.mean_efficiency += st.efficiency;
  }
  const double n = double(s.count);
  s.mean_l1 /= n;
  s.mean_length /= n;
  s.mean_efficiency /= n;
  return s;
}

std::string MetricsReport::to_json() const {
  if (!std::isfinite(value)) throw NumericDegeneracy("metric '" + metric + "' is not finite");
  nlohmann::ordered_json j;
  j["metric"] = metric;
  j["value"] = value;
  j["config"] = config;
  if (!groups.empty()) j["groups"] = groups;
  return j.dump(2) + "\n";
}

}  // namespace dpf::metrics
