#include "dpf/transport.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dpf/errors.hpp"

namespace dpf::transport {
namespace {

int distance_between(const ProblemShape& sh, std::size_t i, std::size_t j) {
  int d = 0;
  for (int l = 0; l < sh.dims(); ++l) {
    d += std::abs(int(i % sh.states()) - int(j % sh.states()));
    i /= sh.states();
    j /= sh.states();
  }
  return d;
}

std::vector<double> simpson_nodes(double t, double eps, int subintervals, std::vector<double>& weights) {
  if (subintervals < 2 || subintervals % 2) throw InvalidArgument("Simpson quadrature needs an even subinterval count");
  const double h = eps / subintervals;
  std::vector<double> nodes(static_cast<std::size_t>(subintervals) + 1);
  weights.assign(nodes.size(), 0.0);
  for (int k = 0; k <= subintervals; ++k) {
    nodes[k] = t + k * h;
    weights[k] = (k == 0 || k == subintervals) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    weights[k] *= h / 3.0;
  }
  nodes.back() = t + eps;
  return nodes;
}

// Integrates the neighbour flux P_i(tau) rate(i, j, tau) over the nodes.
TransportPlan plan_from_nodes(const ProblemShape& sh, const std::vector<Eigen::VectorXd>& laws,
                              const std::vector<Eigen::MatrixXd>& tables, const std::vector<double>& weights,
                              const Eigen::VectorXd& source, const Eigen::VectorXd& target) {
  const auto n = source.size();
  Eigen::MatrixXd flux = Eigen::MatrixXd::Zero(n, 2 * sh.dims());
  for (std::size_t k = 0; k < laws.size(); ++k) {
    flux += weights[k] * (tables[k].array().colwise() * laws[k].array()).matrix();
  }

  TransportPlan plan{sh, {}, source, target};
  for (Eigen::Index idx = 0; idx < n; ++idx) {
    double outflow = 0.0;
    for (int l = 0; l < sh.dims(); ++l) {
      for (int dir : {-1, +1}) {
        const double m = flux(idx, lattice::neighbor_slot(l, dir));
        if (m == 0.0) continue;
        if (m < 0.0) throw InternalError("negative flux in flow plan");
        const auto to = static_cast<std::size_t>(idx + dir * static_cast<Eigen::Index>(sh.stride(l)));
        plan.entries[{static_cast<std::size_t>(idx), to}] = m;
        outflow += m;
      }
    }
    const double stay = source[idx] - outflow;
    if (stay < -1e-15) {
      throw StepTooLarge("flow plan: outflow from state " + std::to_string(idx) +
                         " exceeds its mass; use a smaller eps");
    }
    if (stay > 0.0) plan.entries[{static_cast<std::size_t>(idx), static_cast<std::size_t>(idx)}] = stay;
  }
  return plan;
}

Eigen::VectorXd normalized(const Eigen::VectorXd& p) {
  const double total = p.sum();
  if (!(total > 0.0)) throw DataIntegrityError("marginal source returned zero total mass");
  return p / total;
}

}  // namespace

Eigen::VectorXd TransportPlan::row_sums() const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(source.size());
  for (const auto& [key, m] : entries) out[static_cast<Eigen::Index>(key.first)] += m;
  return out;
}

Eigen::VectorXd TransportPlan::column_sums() const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(source.size());
  for (const auto& [key, m] : entries) out[static_cast<Eigen::Index>(key.second)] += m;
  return out;
}

double TransportPlan::total_mass() const {
  double total = 0.0;
  for (const auto& [key, m] : entries) total += m;
  return total;
}

double TransportPlan::cost() const {
  double total = 0.0;
  for (const auto& [key, m] : entries) total += m * distance_between(shape, key.first, key.second);
  return total;
}

double TransportPlan::mass(std::size_t from, std::size_t to) const {
  const auto it = entries.find({from, to});
  return it == entries.end() ? 0.0 : it->second;
}

double TransportPlan::marginal_defect() const {
  const double rows = (row_sums() - source).cwiseAbs().maxCoeff();
  const double cols = (column_sums() - target).cwiseAbs().maxCoeff();
  return std::max(rows, cols);
}

SignReport check_sign_constancy(const MarginalSource& marginals, double t, double eps, int points) {
  if (!(t >= 0.0) || !(eps > 0.0)) throw InvalidArgument("check_sign_constancy: need t >= 0 and eps > 0");
  if (points < 2) throw InvalidArgument("check_sign_constancy: need at least 2 grid points");
  const ProblemShape& sh = marginals.shape();
  const auto n = static_cast<Eigen::Index>(sh.dense_size());

  // Per edge (idx, idx + stride): the sign seen so far, 0 while tied.
  std::vector<int> seen(static_cast<std::size_t>(n * sh.dims()), 0);
  SignReport report;
  for (int k = 0; k < points; ++k) {
    const double tau = k + 1 == points ? t + eps : t + eps * k / (points - 1);
    const Eigen::VectorXd p = marginals.dense(tau);
    for (Eigen::Index idx = 0; idx < n; ++idx) {
      for (int l = 0; l < sh.dims(); ++l) {
        const auto digit = (static_cast<std::size_t>(idx) / sh.stride(l)) % sh.states();
        if (digit + 1 >= static_cast<std::size_t>(sh.states())) continue;
        const auto other = idx + static_cast<Eigen::Index>(sh.stride(l));
        const double diff = p[idx] - p[other];
        const int sign = diff > kSignTolerance ? 1 : (diff < -kSignTolerance ? -1 : 0);
        int& prev = seen[static_cast<std::size_t>(idx * sh.dims() + l)];
        if (sign == 0) continue;
        if (prev == 0) {
          prev = sign;
        } else if (prev != sign) {
          report.constant = false;
          report.pair = {static_cast<std::size_t>(idx), static_cast<std::size_t>(other)};
          report.time = tau;
          return report;
        }
      }
    }
  }
  return report;
}

TransportPlan extract_flow_plan(const Generator& gen, const MarginalSource& marginals, double t, double eps,
                                int subintervals) {
  if (!(t > 0.0) || !(eps > 0.0)) throw InvalidArgument("extract_flow_plan: need t > 0 and eps > 0");
  const ProblemShape& sh = marginals.shape();
  if (!(gen.shape() == sh)) throw InvalidArgument("extract_flow_plan: generator and marginals disagree on shape");
  std::vector<double> weights;
  const auto nodes = simpson_nodes(t, eps, subintervals, weights);
  std::vector<Eigen::VectorXd> laws;
  std::vector<Eigen::MatrixXd> tables;
  for (double tau : nodes) {
    laws.push_back(normalized(marginals.dense(tau)));
    tables.push_back(gen.neighbor_rate_table(tau));
  }
  return plan_from_nodes(sh, laws, tables, weights, laws.front(), laws.back());
}

TransportPlan extract_frozen_flow_plan(const Generator& gen, const MarginalSource& marginals, double t, double eps,
                                       int subintervals) {
  if (!(t > 0.0) || !(eps > 0.0)) throw InvalidArgument("extract_frozen_flow_plan: need t > 0 and eps > 0");
  const ProblemShape& sh = marginals.shape();
  std::vector<double> weights;
  const auto nodes = simpson_nodes(t, eps, subintervals, weights);
  const Eigen::MatrixXd table = gen.neighbor_rate_table(t);

  // Evolve P(t) under the frozen rates; the grid is relative to t.
  struct FrozenTable final : Generator {
    FrozenTable(const ProblemShape& s, const Eigen::MatrixXd& tab) : sh(s), tab(tab) {}
    const ProblemShape& shape() const override { return sh; }
    bool time_homogeneous() const override { return true; }
    double neighbor_rate(const lattice::LatticeState& from, int dim, int dir, double) const override {
      return tab(static_cast<Eigen::Index>(lattice::encode_index(sh, from)), lattice::neighbor_slot(dim, dir));
    }
    Eigen::MatrixXd neighbor_rate_table(double, std::size_t) const override { return tab; }
    const ProblemShape& sh;
    const Eigen::MatrixXd& tab;
  } frozen(sh, table);

  std::vector<double> rel(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) rel[k] = k == 0 ? 0.0 : (nodes[k] - t);
  const DenseDistribution start(sh, normalized(marginals.dense(t)));
  const auto path = lattice::solve_forward_dense(start, frozen, rel);
  std::vector<Eigen::VectorXd> laws;
  for (const auto& d : path) laws.push_back(d.probs);
  const std::vector<Eigen::MatrixXd> tables(nodes.size(), table);
  return plan_from_nodes(sh, laws, tables, weights, laws.front(), laws.back());
}

double w1_1d(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() < 1) throw InvalidArgument("w1_1d: laws must have equal nonzero length");
  for (const auto* v : {&a, &b}) {
    if (!v->allFinite() || v->minCoeff() < 0.0 || std::abs(v->sum() - 1.0) > 1e-9) {
      throw InvalidArgument("w1_1d: inputs must be probability vectors");
    }
  }
  double cdf_gap = 0.0, total = 0.0;
  for (Eigen::Index k = 0; k + 1 < a.size(); ++k) {
    cdf_gap += a[k] - b[k];
    total += std::abs(cdf_gap);
  }
  return total;
}

TransportPlan cancel_mutual_flow(const TransportPlan& plan) {
  TransportPlan out = plan;
  for (const auto& [key, m] : plan.entries) {
    const auto [i, j] = key;
    if (i >= j) continue;
    const double back = plan.mass(j, i);
    const double common = std::min(m, back);
    if (common <= 0.0) continue;
    auto reduce = [&](std::size_t from, std::size_t to) {
      auto it = out.entries.find({from, to});
      it->second -= common;
      if (it->second <= 0.0) out.entries.erase(it);
      out.entries[{from, from}] += common;
    };
    reduce(i, j);
    reduce(j, i);
  }
  return out;
}

OtCertificate certify_flow_optimality(const Generator& gen, const MarginalSource& marginals, double t, double eps,
                                      CertifyOptions options) {
  OtCertificate cert;
  cert.t = t;
  cert.eps = eps;
  cert.frozen = options.frozen;
  const SignReport sign = check_sign_constancy(marginals, t, eps, options.sign_points);
  cert.sign_constant = sign.constant;
  cert.applicable = sign.constant;

  const TransportPlan plan = options.frozen ? extract_frozen_flow_plan(gen, marginals, t, eps, options.subintervals)
                                            : extract_flow_plan(gen, marginals, t, eps, options.subintervals);
  cert.marginal_defect = (plan.column_sums() - plan.target).cwiseAbs().maxCoeff();
  cert.plan_cost = plan.cost();

  // The plan's own column sums are the LP target; P(t) and those sums are
  // balanced up to round-off.
  Eigen::VectorXd target = plan.column_sums();
  target /= target.sum();
  cert.lp_optimum = solve_kantorovich(plan.source, target, marginals.shape()).optimum;
  cert.relative_gap = (cert.plan_cost - cert.lp_optimum) / std::max(cert.lp_optimum, 1e-12);
  return cert;
}

}  // namespace dpf::transport
