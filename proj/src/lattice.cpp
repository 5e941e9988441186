#include "dpf/lattice.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "dpf/errors.hpp"

namespace dpf::lattice {

ProblemShape::ProblemShape(int dims, int states) : dims_(dims), states_(states) {
  if (dims < 1) throw InvalidArgument("ProblemShape: K must be positive, got " + std::to_string(dims));
  if (states < 2 || states > 255) throw InvalidArgument("ProblemShape: S must be in [2, 255], got " + std::to_string(states));
}

std::uint64_t ProblemShape::cardinality() const noexcept {
  std::uint64_t n = 1;
  for (int l = 0; l < dims_; ++l) {
    if (n > std::numeric_limits<std::uint64_t>::max() / static_cast<std::uint64_t>(states_)) return 0;
    n *= static_cast<std::uint64_t>(states_);
  }
  return n;
}

std::size_t ProblemShape::dense_size(std::size_t cap) const {
  const std::uint64_t n = cardinality();
  if (n == 0 || n > cap) {
    throw CapacityError("shape K=" + std::to_string(dims_) + ", S=" + std::to_string(states_) +
                        " exceeds the dense cap of " + std::to_string(cap) + " states");
  }
  return static_cast<std::size_t>(n);
}

std::size_t ProblemShape::stride(int dim) const {
  std::size_t s = 1;
  for (int l = dims_ - 1; l > dim; --l) s *= static_cast<std::size_t>(states_);
  return s;
}

LatticeState::LatticeState(std::initializer_list<int> digits) {
  digits_.reserve(digits.size());
  for (int d : digits) {
    if (d < 0 || d > 255) throw InvalidArgument("LatticeState: digit out of range");
    digits_.push_back(static_cast<Digit>(d));
  }
}

std::size_t LatticeStateHash::operator()(const LatticeState& s) const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto d : s.digits()) h = (h ^ d) * 0x100000001b3ULL;
  return static_cast<std::size_t>(h);
}

void validate_state(const ProblemShape& shape, const LatticeState& state) {
  if (state.size() != static_cast<std::size_t>(shape.dims())) {
    throw InvalidArgument("state has " + std::to_string(state.size()) + " digits, expected " +
                          std::to_string(shape.dims()));
  }
  for (std::size_t l = 0; l < state.size(); ++l) {
    if (state[l] >= shape.states()) {
      throw InvalidArgument("digit " + std::to_string(l) + " = " + std::to_string(state[l]) + " outside [0, " +
                            std::to_string(shape.states() - 1) + "]");
    }
  }
}

int hamming_l1_distance(const LatticeState& i, const LatticeState& j) {
  if (i.size() != j.size()) throw InvalidArgument("hamming_l1_distance: states of different length");
  int d = 0;
  for (std::size_t l = 0; l < i.size(); ++l) d += std::abs(int(i[l]) - int(j[l]));
  return d;
}

std::size_t encode_index(const ProblemShape& shape, const LatticeState& state) {
  validate_state(shape, state);
  std::size_t idx = 0;
  for (std::size_t l = 0; l < state.size(); ++l) idx = idx * shape.states() + state[l];
  return idx;
}

LatticeState decode_index(const ProblemShape& shape, std::size_t index) {
  LatticeState s(static_cast<std::size_t>(shape.dims()));
  for (int l = shape.dims() - 1; l >= 0; --l) {
    s[l] = static_cast<LatticeState::Digit>(index % shape.states());
    index /= shape.states();
  }
  if (index != 0) throw InvalidArgument("decode_index: index out of range");
  return s;
}

// Generators -----------------------------------------------------------------

Eigen::MatrixXd Generator::neighbor_rate_table(double t, std::size_t cap) const {
  const auto& sh = shape();
  const std::size_t n = sh.dense_size(cap);
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 2 * sh.dims());
  for (std::size_t idx = 0; idx < n; ++idx) {
    const LatticeState s = decode_index(sh, idx);
    for_each_neighbor(sh, s, [&](int l, int dir) {
      table(static_cast<Eigen::Index>(idx), neighbor_slot(l, dir)) = neighbor_rate(s, l, dir, t);
    });
  }
  return table;
}

double rate(const Generator& gen, const LatticeState& i, const LatticeState& j, double t) {
  const auto& sh = gen.shape();
  validate_state(sh, i);
  validate_state(sh, j);
  const int d = hamming_l1_distance(i, j);
  if (d > 1) return 0.0;
  if (d == 1) {
    for (int l = 0; l < sh.dims(); ++l) {
      if (i[l] != j[l]) return gen.neighbor_rate(i, l, int(j[l]) - int(i[l]), t);
    }
  }
  double out = 0.0;
  for_each_neighbor(sh, i, [&](int l, int dir) { out += gen.neighbor_rate(i, l, dir, t); });
  return -out;
}

Eigen::MatrixXd dense_generator_matrix(const Generator& gen, double t, std::size_t cap) {
  const auto& sh = gen.shape();
  const Eigen::MatrixXd table = gen.neighbor_rate_table(t, cap);
  const auto n = table.rows();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index idx = 0; idx < n; ++idx) {
    const LatticeState s = decode_index(sh, static_cast<std::size_t>(idx));
    for_each_neighbor(sh, s, [&](int l, int dir) {
      const auto to = idx + dir * static_cast<Eigen::Index>(sh.stride(l));
      q(idx, to) = table(idx, neighbor_slot(l, dir));
    });
    q(idx, idx) = -q.row(idx).sum();
  }
  return q;
}

double BaseGenerator::neighbor_rate(const LatticeState& from, int dim, int dir, double) const {
  const int to = int(from[dim]) + dir;
  return (to >= 0 && to < shape_.states()) ? 1.0 : 0.0;
}

Eigen::MatrixXd BaseGenerator::neighbor_rate_table(double, std::size_t cap) const {
  const std::size_t n = shape_.dense_size(cap);
  Eigen::MatrixXd table(static_cast<Eigen::Index>(n), 2 * shape_.dims());
  for (std::size_t idx = 0; idx < n; ++idx) {
    for (int l = 0; l < shape_.dims(); ++l) {
      const auto digit = (idx / shape_.stride(l)) % shape_.states();
      table(static_cast<Eigen::Index>(idx), neighbor_slot(l, -1)) = digit > 0 ? 1.0 : 0.0;
      table(static_cast<Eigen::Index>(idx), neighbor_slot(l, +1)) =
          digit + 1 < static_cast<std::size_t>(shape_.states()) ? 1.0 : 0.0;
    }
  }
  return table;
}

BaseGenerator build_base_generator(const ProblemShape& shape) { return BaseGenerator(shape); }

double EdgeRateGenerator::neighbor_rate(const LatticeState& from, int dim, int dir, double t) const {
  const int to_digit = int(from[dim]) + dir;
  if (to_digit < 0 || to_digit >= shape_.states()) return 0.0;
  LatticeState to = from;
  to[dim] = static_cast<LatticeState::Digit>(to_digit);
  const double r = fn_(from, to, t);
  if (!(r >= 0.0) || !std::isfinite(r)) throw DataIntegrityError("edge rate must be finite and nonnegative");
  return r;
}

// Path kernel ----------------------------------------------------------------

Eigen::MatrixXd path_generator(int states) {
  if (states < 2) throw InvalidArgument("path_generator: S must be at least 2");
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(states, states);
  for (int a = 0; a + 1 < states; ++a) {
    q(a, a + 1) = 1.0;
    q(a + 1, a) = 1.0;
  }
  for (int a = 0; a < states; ++a) q(a, a) = -q.row(a).sum();
  return q;
}

Eigen::VectorXd path_spectrum(int states) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(path_generator(states), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().reverse();
}

Eigen::MatrixXd per_dim_kernel(int states, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidArgument("per_dim_kernel: t must be finite and >= 0");
  const Eigen::MatrixXd shifted = path_generator(states) + 2.0 * Eigen::MatrixXd::Identity(states, states);
  if (t == 0.0) return Eigen::MatrixXd::Identity(states, states);

  // ||shifted||_inf <= 2; pick tau with 2 tau <= 1/2.
  int squarings = 0;
  double tau = t;
  while (2.0 * tau > 0.5) {
    tau *= 0.5;
    ++squarings;
  }
  // Far entries first appear at power S-1; keep enough terms past that.
  const int terms = states + 30;
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(states, states);
  Eigen::MatrixXd sum = term;
  const Eigen::MatrixXd step = shifted * tau;
  for (int k = 1; k <= terms; ++k) {
    term = (term * step) / double(k);
    sum += term;
  }
  Eigen::MatrixXd m = sum * std::exp(-2.0 * tau);
  for (int s = 0; s < squarings; ++s) m = (m * m).eval();
  for (int a = 0; a < states; ++a) m.row(a) /= m.row(a).sum();
  return m;
}

Eigen::MatrixXd per_dim_kernel_spectral(int states, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidArgument("per_dim_kernel_spectral: t must be finite and >= 0");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(path_generator(states));
  const Eigen::MatrixXd& v = eig.eigenvectors();
  const Eigen::VectorXd decay = (eig.eigenvalues() * t).array().exp();
  return v * decay.asDiagonal() * v.transpose();
}

Eigen::VectorXd apply_product_kernel(const ProblemShape& shape, const Eigen::VectorXd& p,
                                     const Eigen::MatrixXd& kernel) {
  const auto n = static_cast<std::size_t>(p.size());
  const auto s = static_cast<std::size_t>(shape.states());
  if (n != shape.cardinality()) throw InvalidArgument("apply_product_kernel: size mismatch");
  if (kernel.rows() != shape.states() || kernel.cols() != shape.states()) {
    throw InvalidArgument("apply_product_kernel: kernel must be S x S");
  }
  Eigen::VectorXd cur = p;
  Eigen::VectorXd next(p.size());
  for (int l = 0; l < shape.dims(); ++l) {
    const std::size_t inner = shape.stride(l);
    const std::size_t outer = n / (inner * s);
    next.setZero();
    for (std::size_t o = 0; o < outer; ++o) {
      const std::size_t base = o * s * inner;
      for (std::size_t a = 0; a < s; ++a) {
        for (std::size_t b = 0; b < s; ++b) {
          const double k = kernel(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
          if (k == 0.0) continue;
          for (std::size_t in = 0; in < inner; ++in) next[base + b * inner + in] += k * cur[base + a * inner + in];
        }
      }
    }
    cur.swap(next);
  }
  return cur;
}

// Distributions --------------------------------------------------------------

DenseDistribution::DenseDistribution(ProblemShape shape_in, Eigen::VectorXd probs_in)
    : shape(shape_in), probs(std::move(probs_in)) {
  const std::uint64_t n = shape.cardinality();
  if (n == 0 || static_cast<std::uint64_t>(probs.size()) != n) {
    throw InvalidArgument("DenseDistribution: expected " + std::to_string(n) + " entries, got " +
                          std::to_string(probs.size()));
  }
  if (!probs.allFinite() || probs.minCoeff() < 0.0) throw DataIntegrityError("DenseDistribution: negative or non-finite entry");
  if (std::abs(probs.sum() - 1.0) > 1e-9) {
    throw DataIntegrityError("DenseDistribution: entries sum to " + std::to_string(probs.sum()));
  }
}

DenseDistribution DenseDistribution::uniform(const ProblemShape& shape, std::size_t cap) {
  const auto n = static_cast<Eigen::Index>(shape.dense_size(cap));
  return DenseDistribution(shape, Eigen::VectorXd::Constant(n, 1.0 / double(n)));
}

DenseDistribution DenseDistribution::point_mass(const ProblemShape& shape, const LatticeState& at, std::size_t cap) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape.dense_size(cap)));
  p[static_cast<Eigen::Index>(encode_index(shape, at))] = 1.0;
  return DenseDistribution(shape, std::move(p));
}

DenseDistribution DenseDistribution::random(const ProblemShape& shape, std::uint64_t seed, std::size_t cap) {
  const auto n = static_cast<Eigen::Index>(shape.dense_size(cap));
  Rng rng(seed);
  Eigen::VectorXd p(n);
  for (Eigen::Index k = 0; k < n; ++k) p[k] = -std::log1p(-uniform01(rng));
  p /= p.sum();
  return DenseDistribution(shape, std::move(p));
}

DenseDistribution DenseDistribution::empirical(const ProblemShape& shape, std::span<const LatticeState> data,
                                               std::size_t cap) {
  if (data.empty()) throw InvalidArgument("empirical law of an empty dataset");
  Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape.dense_size(cap)));
  for (const auto& s : data) p[static_cast<Eigen::Index>(encode_index(shape, s))] += 1.0;
  p /= double(data.size());
  return DenseDistribution(shape, std::move(p));
}

std::shared_ptr<const KernelTables> KernelCache::at(double t) const {
  {
    std::lock_guard lock(mu_);
    if (auto it = entries_.find(t); it != entries_.end()) return it->second;
  }
  auto tables = std::make_shared<KernelTables>();
  tables->time = t;
  tables->kernel = per_dim_kernel(states_, t);
  tables->log_kernel = tables->kernel.array().log();
  std::lock_guard lock(mu_);
  if (entries_.size() >= max_entries_) entries_.clear();
  return entries_.emplace(t, std::move(tables)).first->second;
}

ForwardMarginals::ForwardMarginals(DenseDistribution initial)
    : initial_(std::move(initial)), cache_(initial_.shape.states()) {}

Eigen::VectorXd ForwardMarginals::dense(double t) const {
  return apply_product_kernel(initial_.shape, initial_.probs, cache_.at(t)->kernel);
}

double ForwardMarginals::probability(const LatticeState& i, double t) const {
  const auto& sh = initial_.shape;
  const std::size_t target = encode_index(sh, i);
  const auto tables = cache_.at(t);
  double total = 0.0;
  for (Eigen::Index idx = 0; idx < initial_.probs.size(); ++idx) {
    const double w = initial_.probs[idx];
    if (w == 0.0) continue;
    double prod = w;
    std::size_t a = static_cast<std::size_t>(idx), b = target;
    for (int l = 0; l < sh.dims() && prod != 0.0; ++l) {
      prod *= tables->kernel(static_cast<Eigen::Index>(a % sh.states()), static_cast<Eigen::Index>(b % sh.states()));
      a /= sh.states();
      b /= sh.states();
    }
    total += prod;
  }
  return total;
}

namespace {

class ForwardingCursor final : public ConditionalCursor {
 public:
  explicit ForwardingCursor(const ConditionalSource& source) : source_(source) {}
  const Eigen::MatrixXd& evaluate(const LatticeState& i, double t) override {
    last_ = source_.conditionals(i, t);
    return last_;
  }

 private:
  const ConditionalSource& source_;
  Eigen::MatrixXd last_;
};

}  // namespace

std::unique_ptr<ConditionalCursor> ConditionalSource::open_cursor() const {
  return std::make_unique<ForwardingCursor>(*this);
}

}  // namespace dpf::lattice
