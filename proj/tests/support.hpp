#pragma once

// Independent oracles shared by the unit tests.

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>
#include <vector>

#include "dpf/lattice.hpp"

namespace dpf::testing {

/// exp(Q t) by Eigen's Pade scaling-and-squaring, unrelated to the library's
/// uniformization and eigendecomposition paths.
inline Eigen::MatrixXd expm(const Eigen::MatrixXd& q, double t) { return (q * t).exp(); }

/// The full S^K generator of the unit-rate lattice walk built from the
/// definition: rate 1 between states at distance one.
inline Eigen::MatrixXd brute_base_generator(const lattice::ProblemShape& shape) {
  const auto n = static_cast<Eigen::Index>(shape.dense_size());
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const auto i = lattice::decode_index(shape, static_cast<std::size_t>(a));
    for (Eigen::Index b = 0; b < n; ++b) {
      if (a != b && lattice::hamming_l1_distance(i, lattice::decode_index(shape, static_cast<std::size_t>(b))) == 1) {
        q(a, b) = 1.0;
      }
    }
    q(a, a) = -q.row(a).sum();
  }
  return q;
}

/// Entry (a, b) of exp(Q_path t) from the Taylor series of exp(-2t) exp((Q_path + 2I) t)
/// in 50-digit arithmetic; every summand is nonnegative, so there is no cancellation.
inline double kernel_entry_50_digits(int states, double t, int a, int b) {
  using Big = boost::multiprecision::cpp_bin_float_50;
  std::vector<Big> row(static_cast<std::size_t>(states), Big(0)), sum;
  row[static_cast<std::size_t>(a)] = 1;
  sum = row;
  const Big tb(t);
  for (int n = 1; n < 200; ++n) {
    std::vector<Big> next(row.size(), Big(0));
    for (int s = 0; s < states; ++s) {
      const auto us = static_cast<std::size_t>(s);
      // Row vector times (Q_path + 2I): diagonal 2 - degree, unit off-diagonals.
      const int degree = (s > 0) + (s + 1 < states);
      next[us] += row[us] * (2 - degree);
      if (s > 0) next[us - 1] += row[us];
      if (s + 1 < states) next[us + 1] += row[us];
    }
    for (auto& v : next) v *= tb / n;
    row = std::move(next);
    for (std::size_t s = 0; s < row.size(); ++s) sum[s] += row[s];
  }
  return static_cast<double>(sum[static_cast<std::size_t>(b)] * boost::multiprecision::exp(Big(-2) * tb));
}

inline std::vector<lattice::LatticeState> random_states(const lattice::ProblemShape& shape, std::size_t count,
                                                        std::uint64_t seed) {
  Rng rng(seed);
  std::vector<lattice::LatticeState> out;
  for (std::size_t n = 0; n < count; ++n) {
    lattice::LatticeState s(static_cast<std::size_t>(shape.dims()));
    for (int l = 0; l < shape.dims(); ++l) {
      s[l] = static_cast<lattice::LatticeState::Digit>(uniform_index(rng, static_cast<std::uint64_t>(shape.states())));
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// |observed - expected| within `sigmas` binomial standard deviations.
inline bool within_binomial(double observed_fraction, double p, std::size_t n, double sigmas = 3.0) {
  return std::abs(observed_fraction - p) <= sigmas * std::sqrt(p * (1.0 - p) / double(n)) + 1e-12;
}

}  // namespace dpf::testing
