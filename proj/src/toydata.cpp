#include "dpf/toydata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <json.hpp>

#include "dpf/errors.hpp"
#include "dpf/rng.hpp"

namespace dpf::toydata {
namespace {

using std::numbers::pi;

struct RawPoint {
  double x, y;
};

class Source {
 public:
  explicit Source(std::uint64_t seed) : rng_(seed) {}
  double uniform() { return uniform01(rng_); }
  double normal() { return normal_(rng_); }
  std::uint64_t index(std::uint64_t n) { return uniform_index(rng_, n); }

 private:
  Rng rng_;
  std::normal_distribution<double> normal_;
};

RawPoint swissroll(Source& src) {
  const double t = 1.5 * pi * (1.0 + 2.0 * src.uniform());
  return {(t * std::cos(t) + src.normal()) / 5.0, (t * std::sin(t) + src.normal()) / 5.0};
}

RawPoint circles(Source& src) {
  const double angle = 2.0 * pi * src.uniform();
  const double radius = src.index(2) == 0 ? 1.0 : 0.5;
  return {3.0 * (radius * std::cos(angle) + 0.08 * src.normal()), 3.0 * (radius * std::sin(angle) + 0.08 * src.normal())};
}

RawPoint moons(Source& src) {
  const double angle = pi * src.uniform();
  double x, y;
  if (src.index(2) == 0) {
    x = std::cos(angle);
    y = std::sin(angle);
  } else {
    x = 1.0 - std::cos(angle);
    y = 0.5 - std::sin(angle);
  }
  x += 0.1 * src.normal();
  y += 0.1 * src.normal();
  return {2.0 * x - 1.0, 2.0 * y - 0.2};
}

RawPoint eight_gaussians(Source& src) {
  // Centers on a circle of radius 4 / sqrt(2), spread 0.5 / sqrt(2).
  const double angle = 2.0 * pi * double(src.index(8)) / 8.0;
  const double gx = 4.0 * std::cos(angle) + 0.5 * src.normal();
  const double gy = 4.0 * std::sin(angle) + 0.5 * src.normal();
  return {gx / std::numbers::sqrt2, gy / std::numbers::sqrt2};
}

RawPoint pinwheel(Source& src) {
  constexpr int arms = 5;
  constexpr double radial_std = 0.3, tangential_std = 0.1, rate = 0.25;
  const double arm_angle = 2.0 * pi * double(src.index(arms)) / arms;
  const double r = 1.0 + radial_std * src.normal();
  const double tangential = tangential_std * src.normal();
  const double angle = arm_angle + rate * std::exp(r);
  const double c = std::cos(angle), s = std::sin(angle);
  return {2.0 * (c * r - s * tangential), 2.0 * (s * r + c * tangential)};
}

RawPoint two_spirals(Source& src) {
  const double n = std::sqrt(src.uniform()) * 3.0 * pi;
  double x = -std::cos(n) * n + 0.5 * src.uniform();
  double y = std::sin(n) * n + 0.5 * src.uniform();
  if (src.index(2) == 1) {
    x = -x;
    y = -y;
  }
  return {x / 3.0 + 0.1 * src.normal(), y / 3.0 + 0.1 * src.normal()};
}

RawPoint checkerboard(Source& src) {
  const double x = 4.0 * src.uniform() - 2.0;
  const double base = src.uniform() - 2.0 * double(src.index(2));
  const double shift = double(static_cast<long>(std::floor(x)) & 1);
  return {2.0 * x, 2.0 * (base + shift)};
}

using Generator = RawPoint (*)(Source&);

struct Entry {
  const char* name;
  Generator gen;
};

constexpr std::array<Entry, 7> kDatasets{{
    {"2spirals", two_spirals},
    {"8gaussians", eight_gaussians},
    {"checkerboard", checkerboard},
    {"circles", circles},
    {"moons", moons},
    {"pinwheel", pinwheel},
    {"swissroll", swissroll},
}};

double normalize(double raw) {
  return (std::clamp(raw, kRawLow, kRawHigh) - kRawLow) / (kRawHigh - kRawLow);
}

std::uint64_t ipow(std::uint64_t base, int exp) {
  std::uint64_t r = 1;
  for (int k = 0; k < exp; ++k) r *= base;
  return r;
}

void write_axis(std::uint64_t code, const EncodingSpec& spec, LatticeState& out, int offset) {
  const auto s = static_cast<std::uint64_t>(spec.states());
  for (int d = spec.digits_per_axis - 1; d >= 0; --d) {
    out[offset + d] = static_cast<LatticeState::Digit>(code % s);
    code /= s;
  }
}

std::uint64_t read_axis(const LatticeState& in, const EncodingSpec& spec, int offset) {
  const auto s = static_cast<std::uint64_t>(spec.states());
  std::uint64_t code = 0;
  for (int d = 0; d < spec.digits_per_axis; ++d) code = code * s + in[offset + d];
  return code;
}

}  // namespace

const std::vector<std::string>& dataset_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& e : kDatasets) v.emplace_back(e.name);
    return v;
  }();
  return names;
}

std::vector<Point2> sample_toy(const std::string& name, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw InvalidArgument("sample_toy: count must be at least 1");
  const auto it = std::find_if(kDatasets.begin(), kDatasets.end(), [&](const Entry& e) { return name == e.name; });
  if (it == kDatasets.end()) throw InvalidArgument("unknown dataset '" + name + "'");
  Source src(derive_seed(seed, SeedPurpose::kData));
  std::vector<Point2> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const RawPoint r = it->gen(src);
    out.push_back({normalize(r.x), normalize(r.y)});
  }
  return out;
}

EncodingSpec EncodingSpec::parse(const std::string& name) {
  if (name == "gray2") return {Scheme::kGray2, 16};
  if (name == "base5") return {Scheme::kBase5, 8};
  if (name == "base10") return {Scheme::kBase10, 6};
  throw InvalidArgument("unknown encoding '" + name + "' (expected gray2, base5 or base10)");
}

EncodingSpec EncodingSpec::with_digits(Scheme scheme, int digits_per_axis) {
  EncodingSpec spec{scheme, digits_per_axis};
  // Level indices must fit in 64 bits.
  const double bits = digits_per_axis * std::log2(double(spec.states()));
  if (digits_per_axis < 1 || bits > 62.0) throw InvalidArgument("encoding digits per axis out of range");
  return spec;
}

std::string EncodingSpec::name() const {
  switch (scheme) {
    case Scheme::kGray2: return "gray2";
    case Scheme::kBase5: return "base5";
    case Scheme::kBase10: return "base10";
  }
  return "gray2";
}

int EncodingSpec::states() const {
  switch (scheme) {
    case Scheme::kGray2: return 2;
    case Scheme::kBase5: return 5;
    case Scheme::kBase10: return 10;
  }
  return 2;
}

std::uint64_t EncodingSpec::levels() const { return ipow(static_cast<std::uint64_t>(states()), digits_per_axis); }

std::uint64_t gray_encode(std::uint64_t level) { return level ^ (level >> 1); }

std::uint64_t gray_decode(std::uint64_t code) {
  for (std::uint64_t shift = code >> 1; shift != 0; shift >>= 1) code ^= shift;
  return code;
}

std::uint64_t quantize(double v, std::uint64_t levels) {
  if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("quantize: coordinate outside [0, 1]");
  const auto level = static_cast<std::uint64_t>(std::floor(v * double(levels)));
  return std::min(level, levels - 1);
}

LatticeState encode(const Point2& p, const EncodingSpec& spec) {
  const std::uint64_t levels = spec.levels();
  LatticeState out(static_cast<std::size_t>(2 * spec.digits_per_axis));
  int offset = 0;
  for (double v : {p.x, p.y}) {
    std::uint64_t code = quantize(v, levels);
    if (spec.scheme == Scheme::kGray2) code = gray_encode(code);
    write_axis(code, spec, out, offset);
    offset += spec.digits_per_axis;
  }
  return out;
}

Point2 decode(const LatticeState& s, const EncodingSpec& spec) {
  lattice::validate_state(spec.shape(), s);
  const double levels = double(spec.levels());
  std::array<double, 2> xy{};
  for (int axis = 0; axis < 2; ++axis) {
    std::uint64_t code = read_axis(s, spec, axis * spec.digits_per_axis);
    if (spec.scheme == Scheme::kGray2) code = gray_decode(code);
    xy[axis] = (double(code) + 0.5) / levels;
  }
  return {xy[0], xy[1]};
}

std::vector<LatticeState> encode_all(std::span<const Point2> points, const EncodingSpec& spec) {
  std::vector<LatticeState> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(encode(p, spec));
  return out;
}

std::vector<Point2> decode_all(std::span<const LatticeState> states, const EncodingSpec& spec) {
  std::vector<Point2> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(decode(s, spec));
  return out;
}

std::string sidecar_json(const std::string& name, std::uint64_t seed, std::size_t count, const EncodingSpec& spec) {
  nlohmann::ordered_json j;
  j["dataset"] = name;
  j["seed"] = seed;
  j["count"] = count;
  j["encoding"] = {{"scheme", spec.name()}, {"digits_per_axis", spec.digits_per_axis},
                   {"K", spec.shape().dims()}, {"S", spec.states()}, {"axis_order", "x,y"}};
  j["normalization"] = {{"raw_low", kRawLow}, {"raw_high", kRawHigh}, {"clip", true}};
  return j.dump(2) + "\n";
}

}  // namespace dpf::toydata
