#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "dpf/rng.hpp"

namespace dpf::lattice {

inline constexpr std::size_t kDefaultDenseCap = 4096;

/// K dimensions with S states each.
class ProblemShape {
 public:
  ProblemShape(int dims, int states);

  int dims() const noexcept { return dims_; }
  int states() const noexcept { return states_; }

  /// S^K, or 0 when it overflows 64 bits.
  std::uint64_t cardinality() const noexcept;

  /// S^K when it does not exceed `cap`; throws CapacityError otherwise.
  std::size_t dense_size(std::size_t cap = kDefaultDenseCap) const;

  /// Mixed-radix stride of dimension l (digit 0 is the most significant).
  std::size_t stride(int dim) const;

  friend bool operator==(const ProblemShape&, const ProblemShape&) = default;

 private:
  int dims_;
  int states_;
};

/// A point of {0..S-1}^K. Digits are 0-based.
class LatticeState {
 public:
  using Digit = std::uint8_t;

  LatticeState() = default;
  explicit LatticeState(std::size_t dims, Digit fill = 0) : digits_(dims, fill) {}
  LatticeState(std::initializer_list<int> digits);
  explicit LatticeState(std::vector<Digit> digits) : digits_(std::move(digits)) {}

  std::size_t size() const noexcept { return digits_.size(); }
  Digit operator[](std::size_t l) const { return digits_[l]; }
  Digit& operator[](std::size_t l) { return digits_[l]; }
  std::span<const Digit> digits() const noexcept { return digits_; }

  friend bool operator==(const LatticeState&, const LatticeState&) = default;
  friend auto operator<=>(const LatticeState&, const LatticeState&) = default;

 private:
  std::vector<Digit> digits_;
};

struct LatticeStateHash {
  std::size_t operator()(const LatticeState& s) const noexcept;
};

/// Throws InvalidArgument unless `state` has K digits, each in [0, S-1].
void validate_state(const ProblemShape& shape, const LatticeState& state);

/// d_D(i, j) = sum_l |i_l - j_l|.
int hamming_l1_distance(const LatticeState& i, const LatticeState& j);

std::size_t encode_index(const ProblemShape& shape, const LatticeState& state);
LatticeState decode_index(const ProblemShape& shape, std::size_t index);

/// Neighbour slots: slot 2l moves digit l down by one, slot 2l+1 moves it up.
inline constexpr int neighbor_slot(int dim, int dir) { return 2 * dim + (dir > 0 ? 1 : 0); }

/// Calls fn(dim, dir) for every lattice neighbour of `state` (no wraparound).
template <class Fn>
void for_each_neighbor(const ProblemShape& shape, const LatticeState& state, Fn&& fn) {
  for (int l = 0; l < shape.dims(); ++l) {
    if (state[l] > 0) fn(l, -1);
    if (state[l] + 1 < shape.states()) fn(l, +1);
  }
}

// ---------------------------------------------------------------------------
// Generators

/// A time-indexed rate matrix supported on lattice neighbours (d_D <= 1).
/// Only off-diagonal neighbour rates are stored; the diagonal balances them.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual const ProblemShape& shape() const = 0;
  virtual bool time_homogeneous() const = 0;

  /// Rate from `from` to the neighbour that moves digit `dim` by `dir`.
  /// Returns 0 for an out-of-range neighbour.
  virtual double neighbor_rate(const LatticeState& from, int dim, int dir, double t) const = 0;

  /// Rows indexed by dense state index, columns by neighbour slot.
  virtual Eigen::MatrixXd neighbor_rate_table(double t, std::size_t cap = kDefaultDenseCap) const;
};

/// Full generator entry Q(i, j, t): neighbour rate, balancing diagonal, or 0.
double rate(const Generator& gen, const LatticeState& i, const LatticeState& j, double t);

/// Dense S^K x S^K matrix of the generator at time t (tests and small shapes).
Eigen::MatrixXd dense_generator_matrix(const Generator& gen, double t, std::size_t cap = kDefaultDenseCap);

/// Q_D: unit rate to every lattice neighbour.
class BaseGenerator final : public Generator {
 public:
  explicit BaseGenerator(ProblemShape shape) : shape_(shape) {}
  const ProblemShape& shape() const override { return shape_; }
  bool time_homogeneous() const override { return true; }
  double neighbor_rate(const LatticeState& from, int dim, int dir, double t) const override;
  Eigen::MatrixXd neighbor_rate_table(double t, std::size_t cap = kDefaultDenseCap) const override;

 private:
  ProblemShape shape_;
};

BaseGenerator build_base_generator(const ProblemShape& shape);

/// Neighbour rates given by a user function (used for symmetric base rates
/// other than Q_D).
class EdgeRateGenerator final : public Generator {
 public:
  using RateFn = std::function<double(const LatticeState& from, const LatticeState& to, double t)>;
  EdgeRateGenerator(ProblemShape shape, RateFn fn, bool time_homogeneous)
      : shape_(shape), fn_(std::move(fn)), homogeneous_(time_homogeneous) {}
  const ProblemShape& shape() const override { return shape_; }
  bool time_homogeneous() const override { return homogeneous_; }
  double neighbor_rate(const LatticeState& from, int dim, int dir, double t) const override;

 private:
  ProblemShape shape_;
  RateFn fn_;
  bool homogeneous_;
};

// ---------------------------------------------------------------------------
// One-dimensional path kernel

/// Generator of the K = 1 lattice (path graph on S vertices).
Eigen::MatrixXd path_generator(int states);

/// Eigenvalues of path_generator(S) in decreasing order, by a symmetric
/// eigensolver.
Eigen::VectorXd path_spectrum(int states);

/// exp(Q_path * t) by uniformization: exp(-2t) * exp((Q_path + 2I) t) with a
/// nonnegative scaled Taylor series and squaring. Every entry keeps full
/// relative precision, including the tiny far-off-diagonal ones.
Eigen::MatrixXd per_dim_kernel(int states, double t);

/// exp(Q_path * t) through the eigendecomposition of the symmetric
/// tridiagonal Q_path. Accurate to ~1e-16 absolute.
Eigen::MatrixXd per_dim_kernel_spectral(int states, double t);

/// Applies the same S x S kernel along every axis of a dense law:
/// result = p * (kernel ⊗ ... ⊗ kernel).
Eigen::VectorXd apply_product_kernel(const ProblemShape& shape, const Eigen::VectorXd& p,
                                     const Eigen::MatrixXd& kernel);

// ---------------------------------------------------------------------------
// Distributions and marginal sources

struct DenseDistribution {
  ProblemShape shape;
  Eigen::VectorXd probs;

  DenseDistribution(ProblemShape shape, Eigen::VectorXd probs);
  static DenseDistribution uniform(const ProblemShape& shape, std::size_t cap = kDefaultDenseCap);
  static DenseDistribution point_mass(const ProblemShape& shape, const LatticeState& at,
                                      std::size_t cap = kDefaultDenseCap);
  /// Random law with i.i.d. Exp(1) weights, normalized.
  static DenseDistribution random(const ProblemShape& shape, std::uint64_t seed, std::size_t cap = kDefaultDenseCap);
  static DenseDistribution empirical(const ProblemShape& shape, std::span<const LatticeState> data,
                                     std::size_t cap = kDefaultDenseCap);
};

/// Exact single-time marginals P_D(t) of the Q_D process.
class MarginalSource {
 public:
  virtual ~MarginalSource() = default;
  virtual const ProblemShape& shape() const = 0;
  virtual double probability(const LatticeState& i, double t) const = 0;
  virtual Eigen::VectorXd dense(double t) const = 0;
};

/// Per-time kernel tables shared by the oracles.
struct KernelTables {
  double time = 0.0;
  Eigen::MatrixXd kernel;      // S x S, row a: law of the digit at t given a at 0
  Eigen::MatrixXd log_kernel;  // elementwise log (-inf where the entry is 0)
};

/// Memoizes per_dim_kernel by time; safe for concurrent use.
class KernelCache {
 public:
  explicit KernelCache(int states, std::size_t max_entries = 8192) : states_(states), max_entries_(max_entries) {}
  std::shared_ptr<const KernelTables> at(double t) const;

 private:
  int states_;
  std::size_t max_entries_;
  mutable std::mutex mu_;
  mutable std::unordered_map<double, std::shared_ptr<const KernelTables>> entries_;
};

/// Marginals of Q_D started from an arbitrary dense law.
class ForwardMarginals final : public MarginalSource {
 public:
  explicit ForwardMarginals(DenseDistribution initial);
  const ProblemShape& shape() const override { return initial_.shape; }
  double probability(const LatticeState& i, double t) const override;
  Eigen::VectorXd dense(double t) const override;
  const DenseDistribution& initial() const { return initial_; }

 private:
  DenseDistribution initial_;
  KernelCache cache_;
};

class ConditionalCursor;

/// Single-digit conditionals P(i_l = s | i \ i_l, t) of a lattice law.
class ConditionalSource {
 public:
  virtual ~ConditionalSource() = default;
  virtual const ProblemShape& shape() const = 0;
  /// K x S matrix; row l is the conditional law of digit l.
  virtual Eigen::MatrixXd conditionals(const LatticeState& i, double t) const = 0;
  /// Per-chain evaluator that may cache work between calls. The default
  /// forwards to conditionals().
  virtual std::unique_ptr<ConditionalCursor> open_cursor() const;
};

class ConditionalCursor {
 public:
  virtual ~ConditionalCursor() = default;
  virtual const Eigen::MatrixXd& evaluate(const LatticeState& i, double t) = 0;
};

/// Exact forward marginals and conditionals for an empirical initial law:
/// q_t(i) = (1/N) sum_n prod_l kernel_t[x_n^l, i_l].
class MarginalOracle final : public MarginalSource, public ConditionalSource {
 public:
  MarginalOracle(ProblemShape shape, std::vector<LatticeState> dataset);

  const ProblemShape& shape() const override { return shape_; }
  double probability(const LatticeState& i, double t) const override;
  double log_probability(const LatticeState& i, double t) const;
  Eigen::VectorXd dense(double t) const override;
  Eigen::MatrixXd conditionals(const LatticeState& i, double t) const override;
  std::unique_ptr<ConditionalCursor> open_cursor() const override;

  std::span<const LatticeState> dataset() const { return dataset_; }
  std::shared_ptr<const KernelTables> kernel(double t) const { return cache_.at(t); }

 private:
  ProblemShape shape_;
  std::vector<LatticeState> dataset_;
  std::vector<std::uint64_t> packed_;  // bit-packed digits when S == 2 and K <= 64
  KernelCache cache_;

  friend class BinaryOracleCursor;
};

// ---------------------------------------------------------------------------
// Forward evolution

/// Solves dP/dt = P Q(t) with adaptive Dormand-Prince at abs/rel tolerance
/// 1e-10 / 1e-8. `t_grid` must start at 0 and be increasing.
std::vector<DenseDistribution> solve_forward_dense(const DenseDistribution& p0, const Generator& gen,
                                                   std::span<const double> t_grid,
                                                   std::size_t cap = kDefaultDenseCap);

/// Time-stamped state path.
struct Trajectory {
  enum class Direction { kForward, kReverse };
  std::vector<double> times;
  std::vector<long> steps;  // Euler step index of each record (event count for forward paths)
  std::vector<LatticeState> states;
  Direction direction = Direction::kForward;
  std::uint64_t seed = 0;

  const LatticeState& start() const { return states.front(); }
  const LatticeState& end() const { return states.back(); }
};

/// Exact-event (Gillespie) simulation of a time-homogeneous generator on
/// [0, horizon].
Trajectory simulate_forward(const Generator& gen, const LatticeState& start, double horizon, std::uint64_t seed);

}  // namespace dpf::lattice
