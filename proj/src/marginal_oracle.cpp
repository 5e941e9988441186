#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "dpf/errors.hpp"
#include "dpf/lattice.hpp"

namespace dpf::lattice {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::uint64_t pack_binary(const LatticeState& s) {
  std::uint64_t bits = 0;
  for (std::size_t l = 0; l < s.size(); ++l) bits |= std::uint64_t(s[l] & 1u) << l;
  return bits;
}

}  // namespace

MarginalOracle::MarginalOracle(ProblemShape shape, std::vector<LatticeState> dataset)
    : shape_(shape), dataset_(std::move(dataset)), cache_(shape.states()) {
  if (dataset_.empty()) throw InvalidArgument("MarginalOracle: dataset is empty");
  for (const auto& s : dataset_) validate_state(shape_, s);
  if (shape_.states() == 2 && shape_.dims() <= 64) {
    packed_.reserve(dataset_.size());
    for (const auto& s : dataset_) packed_.push_back(pack_binary(s));
  }
}

double MarginalOracle::log_probability(const LatticeState& i, double t) const {
  validate_state(shape_, i);
  const auto tables = cache_.at(t);
  const Eigen::MatrixXd& lk = tables->log_kernel;
  double best = kNegInf;
  std::vector<double> logw(dataset_.size());
  for (std::size_t n = 0; n < dataset_.size(); ++n) {
    double acc = 0.0;
    for (int l = 0; l < shape_.dims(); ++l) acc += lk(dataset_[n][l], i[l]);
    logw[n] = acc;
    best = std::max(best, acc);
  }
  if (best == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double v : logw) sum += std::exp(v - best);
  return best + std::log(sum) - std::log(double(dataset_.size()));
}

double MarginalOracle::probability(const LatticeState& i, double t) const { return std::exp(log_probability(i, t)); }

Eigen::VectorXd MarginalOracle::dense(double t) const {
  const DenseDistribution empirical = DenseDistribution::empirical(shape_, dataset_);
  return apply_product_kernel(shape_, empirical.probs, cache_.at(t)->kernel);
}

// q(i with digit l set to s) / q(i) = sum_a B_l[a] K[a][s] / K[a][i_l] up to a
// common factor, where B_l[a] sums the (shifted) weights of the data points
// whose digit l equals a.
Eigen::MatrixXd MarginalOracle::conditionals(const LatticeState& i, double t) const {
  validate_state(shape_, i);
  if (!(t > 0.0)) throw InvalidArgument("MarginalOracle::conditionals: t must be positive");
  const int dims = shape_.dims();
  const int states = shape_.states();
  const auto tables = cache_.at(t);
  const Eigen::MatrixXd& kern = tables->kernel;
  const Eigen::MatrixXd& lk = tables->log_kernel;

  std::vector<double> logw(dataset_.size());
  double best = kNegInf;
  for (std::size_t n = 0; n < dataset_.size(); ++n) {
    double acc = 0.0;
    for (int l = 0; l < dims; ++l) acc += lk(dataset_[n][l], i[l]);
    logw[n] = acc;
    best = std::max(best, acc);
  }
  if (best == kNegInf) throw NumericDegeneracy("MarginalOracle: query state has zero probability");

  Eigen::MatrixXd bucket = Eigen::MatrixXd::Zero(dims, states);
  for (std::size_t n = 0; n < dataset_.size(); ++n) {
    const double u = std::exp(logw[n] - best);
    if (u == 0.0) continue;
    for (int l = 0; l < dims; ++l) bucket(l, dataset_[n][l]) += u;
  }

  Eigen::MatrixXd out(dims, states);
  for (int l = 0; l < dims; ++l) {
    const int cur = i[l];
    for (int s = 0; s < states; ++s) {
      double acc = 0.0;
      for (int a = 0; a < states; ++a) {
        if (bucket(l, a) == 0.0) continue;
        acc += bucket(l, a) * (kern(a, s) / kern(a, cur));
      }
      out(l, s) = acc;
    }
    const double norm = out.row(l).sum();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw NumericDegeneracy("MarginalOracle: conditional normalizer vanished for digit " + std::to_string(l));
    }
    out.row(l) /= norm;
  }
  return out;
}

/// S = 2 evaluator. With h_n the Hamming distance from data point n to the
/// query, q_t(i) is proportional to sum_n W(h_n), W(h) = ks^(K-h) kd^h. Flipping
/// digit l moves h_n up by one where point n agrees on l and down otherwise,
/// so per-state histograms over h give every conditional in O(K^2).
class BinaryOracleCursor final : public ConditionalCursor {
 public:
  explicit BinaryOracleCursor(const MarginalOracle& oracle)
      : oracle_(oracle),
        dims_(oracle.shape_.dims()),
        count_(dims_ + 1),
        differ_(static_cast<std::size_t>((dims_ + 1) * dims_)),
        weight_(dims_ + 2),
        out_(dims_, 2) {}

  const Eigen::MatrixXd& evaluate(const LatticeState& i, double t) override {
    if (!(t > 0.0)) throw InvalidArgument("MarginalOracle::conditionals: t must be positive");
    if (!valid_ || i != state_) rebuild(i);

    const double ks = 0.5 * (1.0 + std::exp(-2.0 * t));
    const double kd = -0.5 * std::expm1(-2.0 * t);
    if (!(kd > 0.0)) throw NumericDegeneracy("MarginalOracle: kernel flip probability underflows");
    const double log_ks = std::log(ks), log_kd = std::log(kd);
    const double ref = (dims_ - h_min_) * log_ks + h_min_ * log_kd;
    const int h_lo = std::max(0, h_min_ - 1);
    for (int h = h_lo; h <= dims_; ++h) weight_[h] = std::exp((dims_ - h) * log_ks + h * log_kd - ref);

    double q_cur = 0.0;
    for (int h = h_min_; h <= h_max_; ++h) q_cur += count_[h] * weight_[h];
    for (int l = 0; l < dims_; ++l) {
      double q_flip = 0.0;
      for (int h = h_min_; h <= h_max_; ++h) {
        const auto c = count_[h];
        if (c == 0) continue;
        const auto d = differ_[static_cast<std::size_t>(h * dims_ + l)];
        if (c != d) q_flip += double(c - d) * weight_[h + 1];
        if (d != 0) q_flip += double(d) * weight_[h - 1];
      }
      const double norm = q_cur + q_flip;
      if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw NumericDegeneracy("MarginalOracle: conditional normalizer vanished for digit " + std::to_string(l));
      }
      const double p_cur = q_cur / norm, p_flip = q_flip / norm;
      if (state_[l] == 0) {
        out_(l, 0) = p_cur;
        out_(l, 1) = p_flip;
      } else {
        out_(l, 0) = p_flip;
        out_(l, 1) = p_cur;
      }
    }
    return out_;
  }

 private:
  void rebuild(const LatticeState& i) {
    validate_state(oracle_.shape_, i);
    state_ = i;
    valid_ = true;
    const std::uint64_t query = pack_binary(i);
    std::fill(count_.begin(), count_.end(), 0);
    std::fill(differ_.begin(), differ_.end(), 0);
    for (const std::uint64_t x : oracle_.packed_) {
      const std::uint64_t y = x ^ query;
      const int h = std::popcount(y);
      ++count_[h];
      std::int32_t* row = &differ_[static_cast<std::size_t>(h * dims_)];
      for (int l = 0; l < dims_; ++l) row[l] += static_cast<std::int32_t>((y >> l) & 1u);
    }
    h_min_ = 0;
    while (count_[h_min_] == 0) ++h_min_;
    h_max_ = dims_;
    while (count_[h_max_] == 0) --h_max_;
  }

  const MarginalOracle& oracle_;
  int dims_;
  std::vector<std::int32_t> count_;   // data points at Hamming distance h
  std::vector<std::int32_t> differ_;  // [h][l]: of those, points whose digit l differs
  std::vector<double> weight_;
  Eigen::MatrixXd out_;
  LatticeState state_;
  bool valid_ = false;
  int h_min_ = 0, h_max_ = 0;
};

std::unique_ptr<ConditionalCursor> MarginalOracle::open_cursor() const {
  if (!packed_.empty()) return std::make_unique<BinaryOracleCursor>(*this);
  return ConditionalSource::open_cursor();
}

}  // namespace dpf::lattice
