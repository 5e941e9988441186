#include <doctest.h>

#include <memory>

#include "dpf/errors.hpp"
#include "dpf/transform.hpp"
#include "dpf/transport.hpp"
#include "support.hpp"

using namespace dpf;
using namespace dpf::lattice;
using namespace dpf::transport;

namespace {

// Wasserstein-1 on a path from the definition: cumulative mass crossing each edge.
double w1_oracle(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double crossing = 0.0, total = 0.0;
  for (Eigen::Index s = 0; s + 1 < a.size(); ++s) {
    crossing += a[s] - b[s];
    total += std::abs(crossing);
  }
  return total;
}

Eigen::VectorXd random_law(int n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (int k = 0; k < n; ++k) v[k] = uniform01(rng) < 0.3 ? 0.0 : -std::log1p(-uniform01(rng));
  if (v.sum() == 0.0) v[0] = 1.0;
  return v / v.sum();
}

}  // namespace

TEST_SUITE("transport") {
  TEST_CASE("w1 examples") {
    CHECK(w1_1d(Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 0, 1)) == doctest::Approx(2.0));
    CHECK(w1_1d(Eigen::Vector3d(0.5, 0.5, 0), Eigen::Vector3d(0, 0.5, 0.5)) == doctest::Approx(1.0));
    CHECK_THROWS_AS(w1_1d(Eigen::Vector2d(1, 0), Eigen::Vector3d(1, 0, 0)), InvalidArgument);
  }

  TEST_CASE("LP optimum equals the one-dimensional closed form") {
    Rng rng(101);
    for (int s : {3, 5, 10}) {
      for (int trial = 0; trial < 34; ++trial) {
        const Eigen::VectorXd a = random_law(s, rng), b = random_law(s, rng);
        const auto sol = solve_kantorovich(a, b, ProblemShape(1, s));
        CHECK(std::abs(sol.optimum - w1_oracle(a, b)) < 1e-10);
        CHECK(std::abs(w1_1d(a, b) - w1_oracle(a, b)) < 1e-12);
        CHECK(sol.plan.marginal_defect() < 1e-12);
        CHECK(std::abs(sol.plan.cost() - sol.optimum) < 1e-12);
      }
    }
  }

  TEST_CASE("LP on product laws and point masses") {
    Rng rng(5);
    const ProblemShape shape(2, 4);
    for (int trial = 0; trial < 10; ++trial) {
      // a x c against b x c costs exactly W1(a, b).
      const Eigen::VectorXd a = random_law(4, rng), b = random_law(4, rng), c = random_law(4, rng);
      Eigen::VectorXd ac(16), bc(16);
      for (int x = 0; x < 4; ++x) {
        for (int y = 0; y < 4; ++y) {
          ac[4 * x + y] = a[x] * c[y];
          bc[4 * x + y] = b[x] * c[y];
        }
      }
      CHECK(std::abs(solve_kantorovich(ac, bc, shape).optimum - w1_oracle(a, b)) < 1e-10);
    }
    const auto d = solve_kantorovich(DenseDistribution::point_mass(shape, {0, 3}), DenseDistribution::point_mass(shape, {2, 1}));
    CHECK(d.optimum == doctest::Approx(4.0));
    CHECK_THROWS_AS(solve_kantorovich(Eigen::Vector3d(0.5, 0.5, 0.1), Eigen::Vector3d(0.5, 0.5, 0), ProblemShape(1, 3)),
                    InvalidArgument);
  }

  TEST_CASE("mutual flow cancellation keeps marginals and never raises cost") {
    TransportPlan plan{ProblemShape(1, 3), {}, Eigen::Vector3d(0.5, 0.3, 0.2), Eigen::Vector3d(0.4, 0.4, 0.2)};
    plan.entries = {{{0, 0}, 0.3}, {{0, 1}, 0.2}, {{1, 0}, 0.1}, {{1, 1}, 0.2}, {{2, 2}, 0.2}};
    CHECK(plan.marginal_defect() < 1e-15);
    const auto clean = cancel_mutual_flow(plan);
    CHECK(clean.marginal_defect() < 1e-15);
    CHECK(clean.mass(1, 0) == 0.0);
    CHECK(clean.mass(0, 1) == doctest::Approx(0.1));
    CHECK(clean.cost() == doctest::Approx(0.1));
    CHECK(clean.cost() <= plan.cost());
  }

  TEST_CASE("flow plan certificate on a sign-constant window") {
    for (const ProblemShape shape : {ProblemShape(1, 3), ProblemShape(1, 5), ProblemShape(1, 8)}) {
      for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto marginals = std::make_shared<ForwardMarginals>(DenseDistribution::random(shape, seed));
        const auto dpf = transform::build_dpf_generator(shape, marginals);
        const auto cert = certify_flow_optimality(dpf, *marginals, 0.3, 1e-3);
        REQUIRE(cert.applicable);
        CHECK(cert.relative_gap < 1e-6);
        CHECK(cert.marginal_defect < 5e-6);
        const auto plan = extract_flow_plan(dpf, *marginals, 0.3, 1e-3);
        CHECK((plan.row_sums() - plan.source).cwiseAbs().maxCoeff() < 1e-14);
        CHECK(plan.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
        // The rectified flow never moves mass both ways across an edge.
        for (const auto& [edge, mass] : plan.entries) {
          if (edge.first != edge.second) CHECK(plan.mass(edge.second, edge.first) == 0.0);
        }
      }
    }
  }

  TEST_CASE("product laws keep the certificate in two dimensions") {
    // Flux along each axis follows that axis' own factor, so the flow is a
    // gradient of one potential and the plan is optimal.
    const ProblemShape shape(2, 4);
    const Eigen::Vector4d u(0.1, 0.4, 0.2, 0.3), v(0.5, 0.1, 0.1, 0.3);
    Eigen::VectorXd p(16);
    for (int x = 0; x < 4; ++x) {
      for (int y = 0; y < 4; ++y) p[4 * x + y] = u[x] * v[y];
    }
    auto marginals = std::make_shared<ForwardMarginals>(DenseDistribution(shape, p));
    const auto dpf = transform::build_dpf_generator(shape, marginals);
    const auto cert = certify_flow_optimality(dpf, *marginals, 0.3, 1e-3);
    REQUIRE(cert.applicable);
    CHECK(cert.relative_gap < 1e-6);
  }

  TEST_CASE("flux circulating around a square is not optimal") {
    // States (0,0) < (0,1) < (1,1) < (1,0) in probability: mass from (1,0)
    // reaches (0,0) both directly and the long way round. Rerouting the long
    // way through the direct edge keeps both marginals and saves two units
    // per unit of mass, so the flow plan cannot be optimal.
    const ProblemShape shape(2, 2);
    auto marginals = std::make_shared<ForwardMarginals>(DenseDistribution(shape, Eigen::Vector4d(0.1, 0.2, 0.4, 0.3)));
    const auto dpf = transform::build_dpf_generator(shape, marginals);
    const auto plan = extract_flow_plan(dpf, *marginals, 0.3, 1e-3);
    const std::size_t a = 0, b = 1, d = 2, c = 3;  // dense index 2 x + y
    const double around = std::min({plan.mass(d, c), plan.mass(c, b), plan.mass(b, a)});
    REQUIRE(around > 0.0);
    REQUIRE(plan.mass(d, a) > 0.0);
    TransportPlan rerouted = plan;
    rerouted.entries[{d, c}] -= around;
    rerouted.entries[{c, b}] -= around;
    rerouted.entries[{b, a}] -= around;
    rerouted.entries[{d, a}] += around;
    rerouted.entries[{c, c}] += around;
    rerouted.entries[{b, b}] += around;
    CHECK((rerouted.row_sums() - plan.row_sums()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((rerouted.column_sums() - plan.column_sums()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(rerouted.cost() == doctest::Approx(plan.cost() - 2.0 * around).epsilon(1e-12));
    const auto cert = certify_flow_optimality(dpf, *marginals, 0.3, 1e-3);
    CHECK(cert.sign_constant);
    CHECK(cert.lp_optimum <= rerouted.cost() + 1e-15);
    CHECK(cert.relative_gap > 0.1);
  }

  TEST_CASE("frozen plan") {
    const ProblemShape shape(1, 4);
    auto marginals = std::make_shared<ForwardMarginals>(DenseDistribution::random(shape, 8));
    const auto dpf = transform::build_dpf_generator(shape, marginals);
    CertifyOptions options;
    options.frozen = true;
    const auto cert = certify_flow_optimality(dpf, *marginals, 0.3, 1e-3, options);
    CHECK(cert.frozen);
    if (cert.applicable) CHECK(cert.relative_gap < 1e-6);
  }

  TEST_CASE("oversized step is rejected") {
    const ProblemShape shape(1, 3);
    auto marginals = std::make_shared<ForwardMarginals>(DenseDistribution(shape, Eigen::Vector3d(0.98, 0.01, 0.01)));
    const auto dpf = transform::build_dpf_generator(shape, marginals);
    CHECK_THROWS_AS(extract_flow_plan(dpf, *marginals, 1e-4, 50.0), StepTooLarge);
    CHECK_THROWS_AS(extract_flow_plan(dpf, *marginals, 0.0, 1e-3), InvalidArgument);
  }

  TEST_CASE("sign scan flags the three-state counterexample") {
    const ProblemShape shape(1, 3);
    const ForwardMarginals marginals(DenseDistribution(shape, Eigen::Vector3d(0.1, 0.0, 0.9)));
    const auto flagged = check_sign_constancy(marginals, 1e-3, 0.2 - 1e-3, 257);
    CHECK_FALSE(flagged.constant);
    REQUIRE(flagged.pair.has_value());
    CHECK(flagged.pair->first == 0);
    CHECK(flagged.pair->second == 1);
    CHECK(flagged.time > 0.11);
    CHECK(flagged.time < 0.113);
    // Away from the crossing the same law is sign constant.
    CHECK(check_sign_constancy(marginals, 0.3, 1e-3).constant);
    CHECK(check_sign_constancy(ForwardMarginals(DenseDistribution::uniform(shape)), 0.3, 1e-3).constant);
  }
}
