#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dpf/lattice.hpp"

namespace dpf::toydata {

using lattice::LatticeState;
using lattice::ProblemShape;

/// Point in the unit square.
struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Every dataset is generated in raw coordinates, clipped to this box and
/// mapped affinely onto [0, 1]^2.
inline constexpr double kRawLow = -4.0;
inline constexpr double kRawHigh = 4.0;

const std::vector<std::string>& dataset_names();

/// Seeded draw of `count` points from a named dataset; throws InvalidArgument
/// for an unknown name or count < 1.
std::vector<Point2> sample_toy(const std::string& name, std::size_t count, std::uint64_t seed);

enum class Scheme { kGray2, kBase5, kBase10 };

/// Each axis is quantized to states^digits_per_axis levels and written as
/// digits_per_axis digits, most significant first; x comes before y.
struct EncodingSpec {
  Scheme scheme = Scheme::kGray2;
  int digits_per_axis = 16;

  static EncodingSpec parse(const std::string& name);  // "gray2", "base5", "base10"
  static EncodingSpec with_digits(Scheme scheme, int digits_per_axis);

  std::string name() const;
  int states() const;
  std::uint64_t levels() const;
  ProblemShape shape() const { return {2 * digits_per_axis, states()}; }
};

std::uint64_t gray_encode(std::uint64_t level);
std::uint64_t gray_decode(std::uint64_t code);

/// Level index of a coordinate in [0, 1]: floor(v * levels), with 1 mapped to
/// the top level.
std::uint64_t quantize(double v, std::uint64_t levels);

LatticeState encode(const Point2& p, const EncodingSpec& spec);
/// Midpoint of the cell the state encodes.
Point2 decode(const LatticeState& s, const EncodingSpec& spec);

std::vector<LatticeState> encode_all(std::span<const Point2> points, const EncodingSpec& spec);
std::vector<Point2> decode_all(std::span<const LatticeState> states, const EncodingSpec& spec);

/// Dataset name, seed, encoding and normalization bounds as JSON text.
std::string sidecar_json(const std::string& name, std::uint64_t seed, std::size_t count, const EncodingSpec& spec);

}  // namespace dpf::toydata
