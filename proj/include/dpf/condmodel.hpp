#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dpf/lattice.hpp"
#include "dpf/rng.hpp"

namespace dpf::condmodel {

using lattice::LatticeState;
using lattice::ProblemShape;

inline constexpr int kDefaultWidth = 256;
inline constexpr int kTimeFeatures = 32;

/// Three affine layers with SiLU between them. Input: one-hot digits (K*S)
/// followed by sinusoidal time features; output: K*S logits, one softmax head
/// of S per dimension. Head l is always evaluated with digit l's one-hot block
/// zeroed, so it sees only the other digits.
struct MlpParams {
  int dims = 0;
  int states = 0;
  int width = kDefaultWidth;
  Eigen::MatrixXd w1, w2, w3;  // out x in
  Eigen::VectorXd b1, b2, b3;

  /// Hidden layers get uniform(+-sqrt(3/fan_in)) weights; the output layer and
  /// every bias start at zero, so a fresh model is uniform.
  static MlpParams init(const ProblemShape& shape, std::uint64_t seed, int width = kDefaultWidth);

  ProblemShape shape() const { return {dims, states}; }
  int input_size() const { return dims * states + kTimeFeatures; }
  std::size_t parameter_count() const;
  /// Flat view over w1, b1, w2, b2, w3, b3 in that order (column-major within
  /// each matrix).
  double& parameter(std::size_t flat);
  double parameter(std::size_t flat) const;
  bool all_finite() const;
};

Eigen::VectorXd time_features(double t);

/// K x S matrix of per-dimension conditionals at state i and time t.
Eigen::MatrixXd model_conditionals(const MlpParams& params, const LatticeState& i, double t);

struct Example {
  LatticeState noisy;  // x_t
  double t = 0.0;
  int dim = -1;        // head to score; -1 scores every head
};

struct Gradient {
  double loss = 0.0;
  MlpParams grad;  // same shapes as the parameters
};

/// Mean over scored (example, head) pairs of -log P(x_t^l | x_t without l, t)
/// and its gradient by backpropagation.
Gradient loss_and_grad(const MlpParams& params, std::span<const Example> batch);

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 128;
  long iterations = 20000;
  std::uint64_t seed = 0;
  double t_min = 0.0;  // t ~ Uniform(t_min, t_max], exclusive below
  double t_max = 1.0;
  int width = kDefaultWidth;
  long warmup = 200;   // iterations before the divergence guard arms
};

struct TrainResult {
  MlpParams params;
  std::vector<double> loss_curve;  // one entry per iteration
};

/// Adam (0.9, 0.999, 1e-8). Each example draws a data point, t, x_t from the
/// per-dimension forward kernel and one head uniformly; the expected loss is
/// the mean over heads. Throws TrainingDiverged if the loss exceeds 10 log S
/// after warmup or turns non-finite.
TrainResult train(const ProblemShape& shape, std::span<const LatticeState> dataset, const TrainConfig& config);

/// Draws one training batch exactly as `train` does.
std::vector<Example> sample_batch(std::span<const LatticeState> dataset, const ProblemShape& shape,
                                  const TrainConfig& config, Rng& rng);

/// Learned conditionals behind the common conditional-source interface.
class ModelConditionals final : public lattice::ConditionalSource {
 public:
  explicit ModelConditionals(MlpParams params) : params_(std::move(params)), shape_(params_.shape()) {}
  const ProblemShape& shape() const override { return shape_; }
  Eigen::MatrixXd conditionals(const LatticeState& i, double t) const override;
  const MlpParams& params() const { return params_; }

 private:
  MlpParams params_;
  ProblemShape shape_;
};

struct Probe {
  LatticeState state;
  double t = 0.0;
};

/// Mean over probes and dimensions of the total-variation distance between
/// two sets of conditionals.
double mean_conditional_tv(const lattice::ConditionalSource& a, const lattice::ConditionalSource& b,
                           std::span<const Probe> probes);

std::string checkpoint_json(const MlpParams& params);
MlpParams parse_checkpoint(const std::string& text);
void save_checkpoint(const std::filesystem::path& path, const MlpParams& params);
MlpParams load_checkpoint(const std::filesystem::path& path);

std::string loss_curve_csv(std::span<const double> curve);

}  // namespace dpf::condmodel
