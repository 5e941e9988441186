#include <doctest.h>

#include <algorithm>
#include <memory>

#include "dpf/errors.hpp"
#include "dpf/transform.hpp"
#include "support.hpp"

using namespace dpf;
using namespace dpf::lattice;
using namespace dpf::transform;

TEST_SUITE("transform") {
  TEST_CASE("rectified rates from the definition") {
    const ProblemShape shape(2, 3);
    auto marginals = std::make_shared<ForwardMarginals>(DenseDistribution::random(shape, 17));
    const auto dpf = build_dpf_generator(shape, marginals);
    for (double t : {0.05, 0.3, 1.2}) {
      const Eigen::VectorXd p = marginals->dense(t);
      const Eigen::MatrixXd q = dense_generator_matrix(dpf, t);
      const Eigen::MatrixXd base = testing::brute_base_generator(shape);
      for (Eigen::Index i = 0; i < q.rows(); ++i) {
        for (Eigen::Index j = 0; j < q.cols(); ++j) {
          if (i == j) continue;
          const double want = base(i, j) * std::max(p[i] - p[j], 0.0) / p[i];
          CHECK(std::abs(q(i, j) - want) < 1e-12);
        }
        CHECK(std::abs(q.row(i).sum()) < 1e-12);
      }
      // Net probability flux across every edge is that of the base process,
      // and it only flows one way.
      for (Eigen::Index i = 0; i < q.rows(); ++i) {
        for (Eigen::Index j = 0; j < q.cols(); ++j) {
          if (i == j || base(i, j) == 0.0) continue;
          CHECK(std::abs((p[i] * q(i, j) - p[j] * q(j, i)) - (p[i] - p[j])) < 1e-12);
          CHECK(std::min(q(i, j), q(j, i)) == 0.0);
        }
      }
    }
  }

  TEST_CASE("two-state example") {
    // P = (0.8, 0.2): rate 0 -> 1 is (0.8 - 0.2) / 0.8, the reverse is 0.
    const ProblemShape shape(1, 2);
    struct Fixed final : MarginalSource {
      ProblemShape sh{1, 2};
      const ProblemShape& shape() const override { return sh; }
      double probability(const LatticeState& i, double) const override { return i[0] == 0 ? 0.8 : 0.2; }
      Eigen::VectorXd dense(double) const override { return Eigen::Vector2d(0.8, 0.2); }
    };
    const auto dpf = build_dpf_generator(shape, std::make_shared<Fixed>());
    CHECK(dpf.neighbor_rate({0}, 0, +1, 0.5) == doctest::Approx(0.75));
    CHECK(dpf.neighbor_rate({1}, 0, -1, 0.5) == 0.0);
    CHECK(dpf.neighbor_rate({0}, 0, -1, 0.5) == 0.0);
  }

  TEST_CASE("uniform marginals give zero rates") {
    const ProblemShape shape(3, 3);
    const auto dpf = build_dpf_generator(shape, std::make_shared<ForwardMarginals>(DenseDistribution::uniform(shape)));
    CHECK(dpf.neighbor_rate_table(0.4).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("neighbour table agrees with pointwise rates") {
    const ProblemShape shape(2, 4);
    const auto dpf = build_dpf_generator(shape, std::make_shared<ForwardMarginals>(DenseDistribution::random(shape, 2)));
    const Eigen::MatrixXd table = dpf.neighbor_rate_table(0.6);
    for (std::size_t idx = 0; idx < shape.dense_size(); ++idx) {
      const auto s = decode_index(shape, idx);
      for (int l = 0; l < 2; ++l) {
        for (int dir : {-1, 1}) {
          CHECK(std::abs(table(Eigen::Index(idx), neighbor_slot(l, dir)) - dpf.neighbor_rate(s, l, dir, 0.6)) < 1e-14);
        }
      }
    }
  }

  TEST_CASE("marginal equivalence across shapes and seeds") {
    const std::vector<double> grid{0.1, 0.25, 0.5, 1.0};
    for (const auto& [k, s] : std::vector<std::pair<int, int>>{{1, 2}, {1, 3}, {1, 5}, {2, 3}, {2, 5}, {3, 2}}) {
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto report = verify_marginal_equivalence(DenseDistribution::random(ProblemShape(k, s), seed), grid);
        CHECK(report.pass);
        CHECK(report.max_l1_gap < 1e-6);
        CHECK(report.times.front() == 0.0);
      }
    }
    // A point mass starts with zero probability on most states.
    CHECK(verify_marginal_equivalence(DenseDistribution::point_mass(ProblemShape(2, 3), {1, 1}), grid).pass);
  }

  TEST_CASE("general symmetric base") {
    const ProblemShape shape(1, 4);
    auto edge = [](const LatticeState& a, const LatticeState& b, double) { return 1.0 + 0.5 * std::min(a[0], b[0]); };
    auto base = std::make_shared<EdgeRateGenerator>(shape, edge, true);
    auto marginals = std::make_shared<ForwardMarginals>(DenseDistribution::random(shape, 4));
    const std::vector<double> checks{0.1, 0.5};
    const auto dpf = build_dpf_general(base, marginals, checks);
    const Eigen::VectorXd p = marginals->dense(0.3);
    CHECK(dpf.neighbor_rate({1}, 0, +1, 0.3) ==
          doctest::Approx(1.5 * std::max(p[1] - p[2], 0.0) / p[1]).epsilon(1e-12));

    auto lopsided = std::make_shared<EdgeRateGenerator>(
        shape, [](const LatticeState& a, const LatticeState& b, double) { return a[0] < b[0] ? 2.0 : 1.0; }, true);
    CHECK_THROWS_AS(build_dpf_general(lopsided, marginals, checks), InvalidArgument);
    CHECK_THROWS_AS(build_dpf_general(nullptr, marginals), InvalidArgument);
    CHECK_THROWS_AS(build_dpf_generator(ProblemShape(2, 4), marginals), InvalidArgument);
  }

  TEST_CASE("frozen generator") {
    const ProblemShape shape(1, 3);
    auto inner = std::make_shared<DpfGenerator>(
        build_dpf_generator(shape, std::make_shared<ForwardMarginals>(DenseDistribution::random(shape, 9))));
    const FrozenGenerator frozen(inner, 0.2);
    CHECK(frozen.time_homogeneous());
    CHECK(frozen.neighbor_rate({0}, 0, +1, 5.0) == inner->neighbor_rate({0}, 0, +1, 0.2));
    CHECK((dense_generator_matrix(frozen, 3.0) - dense_generator_matrix(*inner, 0.2)).cwiseAbs().maxCoeff() == 0.0);
  }
}
