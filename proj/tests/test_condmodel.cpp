#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "dpf/condmodel.hpp"
#include "dpf/errors.hpp"
#include "support.hpp"

using namespace dpf;
using namespace dpf::condmodel;
using lattice::LatticeState;
using lattice::ProblemShape;

namespace {

// Random parameters everywhere, including the zero-initialized output layer.
MlpParams scrambled(const ProblemShape& shape, int width, std::uint64_t seed) {
  MlpParams p = MlpParams::init(shape, seed, width);
  Rng rng(seed + 1);
  for (std::size_t k = 0; k < p.parameter_count(); ++k) p.parameter(k) = 0.6 * (uniform01(rng) - 0.5);
  return p;
}

}  // namespace

TEST_SUITE("condmodel") {
  TEST_CASE("fresh model is uniform and sized as declared") {
    const ProblemShape shape(3, 4);
    const auto p = MlpParams::init(shape, 1, 16);
    CHECK(p.input_size() == 12 + kTimeFeatures);
    CHECK(p.parameter_count() == std::size_t(16 * 44 + 16 + 16 * 16 + 16 + 12 * 16 + 12));
    const auto c = model_conditionals(p, {0, 1, 3}, 0.5);
    CHECK((c.array() - 0.25).abs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(model_conditionals(p, {0, 1, 3}, 0.0), InvalidArgument);
    CHECK_THROWS_AS(model_conditionals(p, {0, 1, 3}, 1.5), InvalidArgument);
    CHECK_THROWS_AS(p.parameter(p.parameter_count()), InvalidArgument);
    CHECK_THROWS_AS(MlpParams::init(shape, 1, 0), InvalidArgument);
  }

  TEST_CASE("time features") {
    const auto a = time_features(0.1), b = time_features(0.2);
    CHECK(a.size() == kTimeFeatures);
    CHECK((a - b).norm() > 0.1);
    CHECK(a.cwiseAbs().maxCoeff() <= 1.0);
  }

  TEST_CASE("each head ignores its own digit") {
    const ProblemShape shape(4, 3);
    const auto p = scrambled(shape, 12, 4);
    const LatticeState base{0, 1, 2, 1};
    const Eigen::MatrixXd c0 = model_conditionals(p, base, 0.3);
    CHECK((c0.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    for (int l = 0; l < 4; ++l) {
      for (int s = 0; s < 3; ++s) {
        LatticeState j = base;
        j[l] = static_cast<LatticeState::Digit>(s);
        const Eigen::MatrixXd c = model_conditionals(p, j, 0.3);
        CHECK((c.row(l) - c0.row(l)).cwiseAbs().maxCoeff() < 1e-14);
      }
    }
    // Other heads do see the change.
    LatticeState moved = base;
    moved[0] = 2;
    CHECK((model_conditionals(p, moved, 0.3).row(1) - c0.row(1)).cwiseAbs().maxCoeff() > 1e-6);
  }

  TEST_CASE("gradient matches central differences") {
    const ProblemShape shape(3, 3);
    const auto p = scrambled(shape, 10, 7);
    Rng rng(3);
    std::vector<Example> batch;
    for (int b = 0; b < 6; ++b) {
      batch.push_back({testing::random_states(shape, 1, 50 + b).front(), 0.05 + 0.9 * uniform01(rng), b % 2 ? -1 : b % 3});
    }
    const Gradient g = loss_and_grad(p, batch);
    const double h = 1e-6;
    double worst = 0.0;
    for (int probe = 0; probe < 20; ++probe) {
      const std::size_t k = uniform_index(rng, p.parameter_count());
      MlpParams plus = p, minus = p;
      plus.parameter(k) += h;
      minus.parameter(k) -= h;
      const double fd = (loss_and_grad(plus, batch).loss - loss_and_grad(minus, batch).loss) / (2 * h);
      const double an = g.grad.parameter(k);
      worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6}));
    }
    CHECK(worst < 1e-4);
  }

  TEST_CASE("loss of the uniform model is log S") {
    const ProblemShape shape(2, 5);
    const auto p = MlpParams::init(shape, 2, 8);
    const std::vector<Example> batch{{{0, 4}, 0.5, -1}, {{3, 3}, 0.1, 1}};
    CHECK(loss_and_grad(p, batch).loss == doctest::Approx(std::log(5.0)).epsilon(1e-12));
    const std::vector<Example> bad{{{0, 4}, 0.5, 2}};
    CHECK_THROWS_AS(loss_and_grad(p, bad), InvalidArgument);
    CHECK_THROWS_AS(loss_and_grad(p, std::vector<Example>{}), InvalidArgument);
  }

  TEST_CASE("batches respect the time window") {
    const ProblemShape shape(4, 2);
    const std::vector<LatticeState> data{{0, 1, 1, 0}};
    TrainConfig cfg;
    cfg.t_min = 0.2;
    cfg.t_max = 0.3;
    cfg.batch_size = 500;
    Rng rng(1);
    const auto batch = sample_batch(data, shape, cfg, rng);
    std::size_t flips = 0;
    for (const auto& ex : batch) {
      CHECK(ex.t > 0.2);
      CHECK(ex.t <= 0.3);
      CHECK(ex.dim >= 0);
      CHECK(ex.dim < 4);
      flips += std::size_t(hamming_l1_distance(ex.noisy, data[0]));
    }
    // Each digit flips with probability (1 - exp(-2t)) / 2, about 0.2 here.
    const double rate = double(flips) / (4.0 * 500.0);
    CHECK(rate > 0.16);
    CHECK(rate < 0.24);
  }

  TEST_CASE("training is deterministic and fits one point at small t") {
    const ProblemShape shape(4, 2);
    const std::vector<LatticeState> data{{1, 0, 1, 1}};
    TrainConfig cfg;
    cfg.iterations = 2000;
    cfg.batch_size = 64;
    cfg.width = 32;
    cfg.learning_rate = 3e-3;
    cfg.t_max = 0.005;
    cfg.seed = 9;
    const auto a = train(shape, data, cfg);
    const auto b = train(shape, data, cfg);
    CHECK(a.loss_curve == b.loss_curve);
    CHECK(a.loss_curve.size() == 2000);
    const double tail = std::accumulate(a.loss_curve.end() - 100, a.loss_curve.end(), 0.0) / 100.0;
    CHECK(tail < 0.1 * std::log(2.0));
    const auto c = model_conditionals(a.params, {1, 0, 1, 1}, 0.003);
    for (int l = 0; l < 4; ++l) CHECK(c(l, data[0][l]) > 0.9);

    cfg.t_min = 0.5;
    cfg.t_max = 0.4;
    CHECK_THROWS_AS(train(shape, data, cfg), InvalidArgument);
    CHECK_THROWS_AS(train(shape, std::vector<LatticeState>{}, TrainConfig{}), InvalidArgument);
  }

  TEST_CASE("runaway learning rate is reported") {
    const ProblemShape shape(3, 2);
    TrainConfig cfg;
    cfg.iterations = 400;
    cfg.batch_size = 16;
    cfg.width = 16;
    cfg.learning_rate = 50.0;
    cfg.warmup = 5;
    CHECK_THROWS_AS(train(shape, testing::random_states(shape, 8, 1), cfg), TrainingDiverged);
  }

  TEST_CASE("conditional TV") {
    const ProblemShape shape(3, 2);
    const lattice::MarginalOracle oracle(shape, std::vector<LatticeState>{{0, 0, 0}});
    const ModelConditionals uniform(MlpParams::init(shape, 1, 8));
    const std::vector<Probe> probes{{{0, 0, 0}, 0.1}, {{1, 1, 0}, 0.7}};
    CHECK(mean_conditional_tv(oracle, oracle, probes) == 0.0);
    // Oracle at (0,0,0), t=0.1: digit stays 0 with probability (1 + e^-0.2) / 2.
    const double stay = 0.5 * (1.0 + std::exp(-0.2));
    const double tv_first = stay - 0.5;
    const double tv = mean_conditional_tv(oracle, uniform, probes);
    CHECK(tv > 0.0);
    CHECK(tv < 0.5);
    CHECK(mean_conditional_tv(oracle, uniform, std::span(probes).first(1)) == doctest::Approx(tv_first).epsilon(1e-9));
    CHECK_THROWS_AS(mean_conditional_tv(oracle, uniform, std::span<const Probe>{}), InvalidArgument);
  }

  TEST_CASE("checkpoint round trip and corruption") {
    const ProblemShape shape(2, 3);
    const auto p = scrambled(shape, 6, 12);
    const std::string text = checkpoint_json(p);
    const auto back = parse_checkpoint(text);
    CHECK(back.dims == 2);
    CHECK(back.states == 3);
    CHECK(back.width == 6);
    for (std::size_t k = 0; k < p.parameter_count(); ++k) CHECK(back.parameter(k) == p.parameter(k));
    CHECK(checkpoint_json(back) == text);

    const auto dir = std::filesystem::temp_directory_path() / "dpf_ckpt_test";
    save_checkpoint(dir / "c.json", p);
    CHECK(checkpoint_json(load_checkpoint(dir / "c.json")) == text);
    std::filesystem::remove_all(dir);

    CHECK_THROWS_AS(parse_checkpoint("{"), DataIntegrityError);
    CHECK_THROWS_AS(parse_checkpoint("{\"format\": \"other\"}"), DataIntegrityError);
    std::string truncated = text;
    truncated.replace(truncated.find("\"rows\""), 6, "\"rowz\"");
    CHECK_THROWS_AS(parse_checkpoint(truncated), DataIntegrityError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.json"), DataIntegrityError);
  }

  TEST_CASE("loss curve CSV") {
    const std::vector<double> curve{1.5, 0.25};
    CHECK(loss_curve_csv(curve) == "iteration,loss\n1,1.5\n2,0.25\n");
  }
}
