#include "dpf/transform.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dpf/errors.hpp"

namespace dpf::transform {
namespace {

double rectified(double base_rate, double p_from, double p_to) {
  if (p_from < 0.0 || p_to < 0.0 || !std::isfinite(p_from) || !std::isfinite(p_to)) {
    throw DataIntegrityError("rectified generator: marginal source returned a negative or non-finite mass");
  }
  if (base_rate == 0.0 || p_from < kSingularMass || p_from <= p_to) return 0.0;
  return base_rate * (p_from - p_to) / p_from;
}

std::string describe(const LatticeState& s) {
  std::string out = "(";
  for (std::size_t l = 0; l < s.size(); ++l) out += (l ? "," : "") + std::to_string(int(s[l]));
  return out + ")";
}

}  // namespace

DpfGenerator::DpfGenerator(std::shared_ptr<const Generator> base, std::shared_ptr<const MarginalSource> marginals)
    : base_(std::move(base)), marginals_(std::move(marginals)) {
  if (!base_ || !marginals_) throw InvalidArgument("DpfGenerator: null base or marginal source");
  if (!(base_->shape() == marginals_->shape())) throw InvalidArgument("DpfGenerator: base and marginals disagree on shape");
}

double DpfGenerator::neighbor_rate(const LatticeState& from, int dim, int dir, double t) const {
  const int to_digit = int(from[dim]) + dir;
  if (to_digit < 0 || to_digit >= shape().states()) return 0.0;
  const double base_rate = base_->neighbor_rate(from, dim, dir, t);
  if (base_rate == 0.0) return 0.0;
  LatticeState to = from;
  to[dim] = static_cast<LatticeState::Digit>(to_digit);
  return rectified(base_rate, marginals_->probability(from, t), marginals_->probability(to, t));
}

Eigen::MatrixXd DpfGenerator::neighbor_rate_table(double t, std::size_t cap) const {
  const auto& sh = shape();
  Eigen::MatrixXd table = base_->neighbor_rate_table(t, cap);
  const Eigen::VectorXd p = marginals_->dense(t);
  if (p.size() != table.rows()) throw InternalError("DpfGenerator: marginal vector has the wrong size");
  for (Eigen::Index idx = 0; idx < table.rows(); ++idx) {
    for (int l = 0; l < sh.dims(); ++l) {
      const auto digit = (static_cast<std::size_t>(idx) / sh.stride(l)) % sh.states();
      const auto step = static_cast<Eigen::Index>(sh.stride(l));
      auto& down = table(idx, lattice::neighbor_slot(l, -1));
      auto& up = table(idx, lattice::neighbor_slot(l, +1));
      down = digit > 0 ? rectified(down, p[idx], p[idx - step]) : 0.0;
      up = digit + 1 < static_cast<std::size_t>(sh.states()) ? rectified(up, p[idx], p[idx + step]) : 0.0;
    }
  }
  return table;
}

DpfGenerator build_dpf_generator(const ProblemShape& shape, std::shared_ptr<const MarginalSource> marginals) {
  return DpfGenerator(std::make_shared<lattice::BaseGenerator>(shape), std::move(marginals));
}

DpfGenerator build_dpf_general(std::shared_ptr<const Generator> base, std::shared_ptr<const MarginalSource> marginals,
                               std::span<const double> check_times) {
  if (!base) throw InvalidArgument("build_dpf_general: null base generator");
  const auto& sh = base->shape();
  static constexpr double kDefaultTimes[] = {0.1, 0.5, 1.0};
  std::span<const double> times = check_times.empty() ? std::span<const double>(kDefaultTimes) : check_times;
  if (base->time_homogeneous()) times = times.first(1);

  auto check_edge = [&](const LatticeState& from, int l, double t) {
    LatticeState to = from;
    to[l] = static_cast<LatticeState::Digit>(from[l] + 1);
    const double forward = base->neighbor_rate(from, l, +1, t);
    const double backward = base->neighbor_rate(to, l, -1, t);
    if (std::abs(forward - backward) > 1e-12) {
      throw InvalidArgument("build_dpf_general: base rates are not symmetric between " + describe(from) + " and " +
                            describe(to) + " at t = " + std::to_string(t));
    }
  };

  const std::uint64_t card = sh.cardinality();
  for (double t : times) {
    if (card != 0 && card <= lattice::kDefaultDenseCap) {
      for (std::size_t idx = 0; idx < card; ++idx) {
        const LatticeState s = lattice::decode_index(sh, idx);
        for (int l = 0; l < sh.dims(); ++l) {
          if (s[l] + 1 < sh.states()) check_edge(s, l, t);
        }
      }
    } else {
      Rng rng(0x5EEDu);
      for (int k = 0; k < 512; ++k) {
        LatticeState s(static_cast<std::size_t>(sh.dims()));
        for (int l = 0; l < sh.dims(); ++l) s[l] = static_cast<LatticeState::Digit>(uniform_index(rng, sh.states() - 1));
        check_edge(s, static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(sh.dims()))), t);
      }
    }
  }
  return DpfGenerator(std::move(base), std::move(marginals));
}

EquivalenceReport verify_marginal_equivalence(const lattice::DenseDistribution& initial, std::span<const double> t_grid,
                                              double tol) {
  std::vector<double> grid(t_grid.begin(), t_grid.end());
  if (grid.empty() || grid.front() != 0.0) grid.insert(grid.begin(), 0.0);

  auto exact = std::make_shared<lattice::ForwardMarginals>(initial);
  const lattice::BaseGenerator base(initial.shape);
  const DpfGenerator rectified_gen = build_dpf_generator(initial.shape, exact);

  const auto under_base = lattice::solve_forward_dense(initial, base, grid);
  const auto under_dpf = lattice::solve_forward_dense(initial, rectified_gen, grid);

  EquivalenceReport report;
  report.tolerance = tol;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double gap = (under_base[k].probs - under_dpf[k].probs).lpNorm<1>();
    report.times.push_back(grid[k]);
    report.l1_gaps.push_back(gap);
    report.max_l1_gap = std::max(report.max_l1_gap, gap);
  }
  report.pass = report.max_l1_gap < tol;
  return report;
}

}  // namespace dpf::transform
