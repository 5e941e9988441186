#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <utility>

#include "dpf/lattice.hpp"

namespace dpf::transport {

using lattice::DenseDistribution;
using lattice::Generator;
using lattice::MarginalSource;
using lattice::ProblemShape;

/// Sparse coupling over dense state indices. `entries` holds every nonzero
/// mass, diagonal included.
struct TransportPlan {
  ProblemShape shape;
  std::map<std::pair<std::size_t, std::size_t>, double> entries;
  Eigen::VectorXd source;  // prescribed row marginal a
  Eigen::VectorXd target;  // prescribed column marginal b

  Eigen::VectorXd row_sums() const;
  Eigen::VectorXd column_sums() const;
  double total_mass() const;
  /// sum of mass * d_D over all entries.
  double cost() const;
  double mass(std::size_t from, std::size_t to) const;
  /// Largest per-state deviation of row and column sums from a and b.
  double marginal_defect() const;
};

struct SignReport {
  bool constant = true;
  // First pair whose difference changes sign, and the grid time where the
  // opposite sign is first seen.
  std::optional<std::pair<std::size_t, std::size_t>> pair;
  double time = 0.0;
};

/// Zero tolerance of the sign scan: |P_i - P_j| at or below it counts as a tie.
inline constexpr double kSignTolerance = 1e-13;

/// Scans P_i - P_j on every lattice edge over `points` equally spaced times in
/// [t, t + eps]. Identically tied pairs count as constant.
SignReport check_sign_constancy(const MarginalSource& marginals, double t, double eps, int points = 65);

/// First-order plan over [t, t + eps]: off-diagonal mass is the composite
/// Simpson integral of P_i(tau) rate(i, j, tau); the diagonal keeps a_i minus
/// the outflow. Target marginal is P(t + eps). Throws StepTooLarge on negative
/// diagonal mass.
TransportPlan extract_flow_plan(const Generator& gen, const MarginalSource& marginals, double t, double eps,
                                int subintervals = 64);

/// Same plan for the generator frozen at its time-t rates, with the marginal
/// path evolved under that frozen generator from P(t).
TransportPlan extract_frozen_flow_plan(const Generator& gen, const MarginalSource& marginals, double t, double eps,
                                       int subintervals = 64);

struct KantorovichSolution {
  double optimum = 0.0;
  TransportPlan plan;
};

/// Exact optimal transport under cost d_D by successive shortest paths on the
/// bipartite support graph (entries above 1e-14), Dijkstra with potentials.
KantorovichSolution solve_kantorovich(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const ProblemShape& shape);
KantorovichSolution solve_kantorovich(const DenseDistribution& a, const DenseDistribution& b);

/// Wasserstein-1 distance between two laws on {0..S-1} via their CDFs.
double w1_1d(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Removes mutual flow: both Pi_ij and Pi_ji drop by their minimum, which is
/// kept at i and j instead. Marginals are unchanged.
TransportPlan cancel_mutual_flow(const TransportPlan& plan);

struct OtCertificate {
  double plan_cost = 0.0;
  double lp_optimum = 0.0;
  double relative_gap = 0.0;
  bool sign_constant = false;
  bool applicable = false;  // false when the sign scan fails
  double marginal_defect = 0.0;
  double t = 0.0;
  double eps = 0.0;
  bool frozen = false;
};

struct CertifyOptions {
  int subintervals = 64;
  int sign_points = 65;
  bool frozen = false;
};

/// Sign scan, flow plan, then the LP between P(t) and the plan's column sums.
/// relative_gap = (plan cost - LP optimum) / max(LP optimum, 1e-12).
OtCertificate certify_flow_optimality(const Generator& gen, const MarginalSource& marginals, double t, double eps,
                                      CertifyOptions options = {});

}  // namespace dpf::transport
