#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dpf/errors.hpp"
#include "dpf/transport.hpp"

namespace dpf::transport {
namespace {

constexpr double kSupportFloor = 1e-14;
constexpr double kReducedCostTol = 1e-10;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Min-cost flow on  source -> supply_i -> demand_j -> sink  with uncapacitated
// middle arcs of cost d(i, j). Node order: 0 source, 1..n supplies,
// n+1..n+m demands, n+m+1 sink.
class SuccessiveShortestPaths {
 public:
  SuccessiveShortestPaths(std::vector<double> supply, std::vector<double> demand, Eigen::MatrixXd cost)
      : supply_(std::move(supply)),
        demand_(std::move(demand)),
        cost_(std::move(cost)),
        flow_(Eigen::MatrixXd::Zero(cost_.rows(), cost_.cols())),
        n_(static_cast<int>(supply_.size())),
        m_(static_cast<int>(demand_.size())),
        potential_(static_cast<std::size_t>(n_ + m_ + 2), 0.0) {}

  void run() {
    double remaining = 0.0;
    for (double s : supply_) remaining += s;
    while (remaining > kSupportFloor) {
      if (!shortest_paths()) break;
      const double pushed = augment();
      if (!(pushed > 0.0)) break;
      remaining -= pushed;
    }
    double left_demand = 0.0;
    for (double d : demand_) left_demand += d;
    if (remaining > 1e-9 || left_demand > 1e-9) throw InternalError("Kantorovich solver: flow is infeasible");
  }

  const Eigen::MatrixXd& flow() const { return flow_; }

 private:
  int sink() const { return n_ + m_ + 1; }

  // Dense Dijkstra over reduced costs; fills dist_ and parent_.
  bool shortest_paths() {
    const int nodes = n_ + m_ + 2;
    dist_.assign(static_cast<std::size_t>(nodes), kInf);
    parent_.assign(static_cast<std::size_t>(nodes), -1);
    std::vector<char> done(static_cast<std::size_t>(nodes), 0);
    dist_[0] = 0.0;
    auto relax = [&](int from, int to, double arc_cost) {
      double reduced = arc_cost + potential_[from] - potential_[to];
      if (reduced < -kReducedCostTol) throw InternalError("Kantorovich solver: negative reduced cost");
      reduced = std::max(0.0, reduced);
      if (dist_[from] + reduced < dist_[to]) {
        dist_[to] = dist_[from] + reduced;
        parent_[to] = from;
      }
    };
    for (int iter = 0; iter < nodes; ++iter) {
      int u = -1;
      for (int v = 0; v < nodes; ++v) {
        if (!done[v] && dist_[v] < kInf && (u < 0 || dist_[v] < dist_[u])) u = v;
      }
      if (u < 0) break;
      done[u] = 1;
      if (u == 0) {
        for (int i = 0; i < n_; ++i) {
          if (supply_[i] > kSupportFloor) relax(0, 1 + i, 0.0);
        }
      } else if (u <= n_) {
        const int i = u - 1;
        for (int j = 0; j < m_; ++j) relax(u, 1 + n_ + j, cost_(i, j));
      } else if (u <= n_ + m_) {
        const int j = u - 1 - n_;
        for (int i = 0; i < n_; ++i) {
          if (flow_(i, j) > kSupportFloor) relax(u, 1 + i, -cost_(i, j));
        }
        if (demand_[j] > kSupportFloor) relax(u, sink(), 0.0);
      }
    }
    if (dist_[sink()] == kInf) return false;
    // Capping at the sink distance keeps every residual reduced cost >= 0.
    for (int v = 0; v < nodes; ++v) potential_[v] += std::min(dist_[v], dist_[sink()]);
    return true;
  }

  double augment() {
    double bottleneck = kInf;
    for (int v = sink(); v != 0; v = parent_[v]) {
      const int u = parent_[v];
      if (u == 0) bottleneck = std::min(bottleneck, supply_[v - 1]);
      else if (v == sink()) bottleneck = std::min(bottleneck, demand_[u - 1 - n_]);
      else if (u > n_) bottleneck = std::min(bottleneck, flow_(v - 1, u - 1 - n_));
    }
    for (int v = sink(); v != 0; v = parent_[v]) {
      const int u = parent_[v];
      if (u == 0) {
        supply_[v - 1] -= bottleneck;
      } else if (v == sink()) {
        demand_[u - 1 - n_] -= bottleneck;
      } else if (u <= n_) {
        flow_(u - 1, v - 1 - n_) += bottleneck;
      } else {
        double& f = flow_(v - 1, u - 1 - n_);
        f -= bottleneck;
        if (f < kSupportFloor * 1e-3) f = 0.0;
      }
    }
    return bottleneck;
  }

  std::vector<double> supply_, demand_;
  Eigen::MatrixXd cost_;
  Eigen::MatrixXd flow_;
  int n_, m_;
  std::vector<double> potential_, dist_;
  std::vector<int> parent_;
};

}  // namespace

KantorovichSolution solve_kantorovich(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const ProblemShape& shape) {
  const auto size = static_cast<Eigen::Index>(shape.dense_size());
  if (a.size() != size || b.size() != size) throw InvalidArgument("solve_kantorovich: marginals do not match the shape");
  for (const auto* v : {&a, &b}) {
    if (!v->allFinite() || v->minCoeff() < 0.0) throw InvalidArgument("solve_kantorovich: negative or non-finite mass");
  }
  if (std::abs(a.sum() - 1.0) > 1e-9 || std::abs(b.sum() - 1.0) > 1e-9 || std::abs(a.sum() - b.sum()) > 1e-9) {
    throw InvalidArgument("solve_kantorovich: marginals are not balanced probability vectors");
  }

  std::vector<std::size_t> rows, cols;
  std::vector<double> supply, demand;
  for (Eigen::Index k = 0; k < size; ++k) {
    if (a[k] > kSupportFloor) {
      rows.push_back(static_cast<std::size_t>(k));
      supply.push_back(a[k]);
    }
    if (b[k] > kSupportFloor) {
      cols.push_back(static_cast<std::size_t>(k));
      demand.push_back(b[k]);
    }
  }
  // Round-off imbalance goes to the larger side's biggest entry.
  double sa = 0.0, sb = 0.0;
  for (double s : supply) sa += s;
  for (double d : demand) sb += d;
  if (sa > sb) *std::max_element(supply.begin(), supply.end()) -= sa - sb;
  else *std::max_element(demand.begin(), demand.end()) -= sb - sa;

  Eigen::MatrixXd cost(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto si = lattice::decode_index(shape, rows[r]);
    for (std::size_t c = 0; c < cols.size(); ++c) {
      cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          lattice::hamming_l1_distance(si, lattice::decode_index(shape, cols[c]));
    }
  }

  SuccessiveShortestPaths solver(std::move(supply), std::move(demand), cost);
  solver.run();
  const Eigen::MatrixXd& flow = solver.flow();

  KantorovichSolution sol{0.0, TransportPlan{shape, {}, a, b}};
  for (Eigen::Index r = 0; r < flow.rows(); ++r) {
    for (Eigen::Index c = 0; c < flow.cols(); ++c) {
      const double f = flow(r, c);
      if (f <= 0.0) continue;
      sol.plan.entries[{rows[static_cast<std::size_t>(r)], cols[static_cast<std::size_t>(c)]}] = f;
      sol.optimum += f * cost(r, c);
    }
  }
  return sol;
}

KantorovichSolution solve_kantorovich(const DenseDistribution& a, const DenseDistribution& b) {
  if (!(a.shape == b.shape)) throw InvalidArgument("solve_kantorovich: marginals have different shapes");
  return solve_kantorovich(a.probs, b.probs, a.shape);
}

}  // namespace dpf::transport
