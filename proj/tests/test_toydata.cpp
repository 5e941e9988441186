#include <doctest.h>

#include <cmath>
#include <numbers>

#include <json.hpp>

#include "dpf/errors.hpp"
#include "dpf/toydata.hpp"

using namespace dpf;
using namespace dpf::toydata;

TEST_SUITE("toydata") {
  TEST_CASE("encoding specs") {
    const auto gray = EncodingSpec::parse("gray2");
    CHECK(gray.shape() == lattice::ProblemShape(32, 2));
    CHECK(gray.levels() == 65536);
    const auto b5 = EncodingSpec::parse("base5");
    CHECK(b5.shape() == lattice::ProblemShape(16, 5));
    CHECK(b5.levels() == 390625);
    const auto b10 = EncodingSpec::parse("base10");
    CHECK(b10.shape() == lattice::ProblemShape(12, 10));
    CHECK(b10.levels() == 1000000);
    CHECK(b10.name() == "base10");
    CHECK_THROWS_AS(EncodingSpec::parse("gray3"), InvalidArgument);
    CHECK(EncodingSpec::with_digits(Scheme::kGray2, 4).shape() == lattice::ProblemShape(8, 2));
    CHECK_THROWS_AS(EncodingSpec::with_digits(Scheme::kBase10, 19), InvalidArgument);
    CHECK_THROWS_AS(EncodingSpec::with_digits(Scheme::kGray2, 0), InvalidArgument);
  }

  TEST_CASE("Gray code is a bijection with unit steps over 16 bits") {
    for (std::uint64_t k = 0; k < 65536; ++k) {
      const std::uint64_t g = gray_encode(k);
      CHECK_FALSE(g >= 65536);
      if (gray_decode(g) != k) FAIL("gray_decode does not invert gray_encode at " << k);
      if (k + 1 < 65536 && std::popcount(g ^ gray_encode(k + 1)) != 1) FAIL("non-adjacent codes at " << k);
    }
  }

  TEST_CASE("adjacent cells are lattice neighbours under gray2") {
    const auto spec = EncodingSpec::with_digits(Scheme::kGray2, 8);
    const double cell = 1.0 / double(spec.levels());
    for (std::uint64_t k = 0; k + 1 < spec.levels(); ++k) {
      const Point2 a{(double(k) + 0.5) * cell, 0.5}, b{(double(k) + 1.5) * cell, 0.5};
      CHECK(lattice::hamming_l1_distance(encode(a, spec), encode(b, spec)) == 1);
    }
  }

  TEST_CASE("quantization and round trip") {
    CHECK(quantize(0.0, 4) == 0);
    CHECK(quantize(0.2499, 4) == 0);
    CHECK(quantize(0.25, 4) == 1);
    CHECK(quantize(1.0, 4) == 3);
    CHECK_THROWS_AS(quantize(-0.01, 4), InvalidArgument);
    CHECK_THROWS_AS(quantize(std::nan(""), 4), InvalidArgument);

    // base5, 1 digit: 0.5 lands in cell 2 of 5, digits (2, 0) for (0.5, 0.1).
    const auto one = EncodingSpec::with_digits(Scheme::kBase5, 1);
    CHECK(encode({0.5, 0.1}, one) == lattice::LatticeState{2, 0});
    const auto mid = decode({2, 0}, one);
    CHECK(mid.x == doctest::Approx(0.5));
    CHECK(mid.y == doctest::Approx(0.1));

    for (const char* name : {"gray2", "base5", "base10"}) {
      const auto spec = EncodingSpec::parse(name);
      const double half = 0.5 / double(spec.levels());
      for (const auto& p : sample_toy("moons", 300, 4)) {
        const auto s = encode(p, spec);
        lattice::validate_state(spec.shape(), s);
        const auto q = decode(s, spec);
        CHECK(std::abs(q.x - p.x) <= half + 1e-15);
        CHECK(std::abs(q.y - p.y) <= half + 1e-15);
        CHECK(encode(q, spec) == s);
      }
    }
    CHECK_THROWS_AS(decode({0, 1}, EncodingSpec::parse("gray2")), InvalidArgument);
  }

  TEST_CASE("datasets are seeded and inside the unit square") {
    CHECK(dataset_names().size() == 7);
    for (const auto& name : dataset_names()) {
      const auto a = sample_toy(name, 2000, 5), b = sample_toy(name, 2000, 5), c = sample_toy(name, 2000, 6);
      bool same = true, differs = false;
      std::size_t on_edge = 0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        same &= a[k].x == b[k].x && a[k].y == b[k].y;
        differs |= a[k].x != c[k].x;
        CHECK(a[k].x >= 0.0);
        CHECK(a[k].x <= 1.0);
        CHECK(a[k].y >= 0.0);
        CHECK(a[k].y <= 1.0);
        on_edge += a[k].x == 0.0 || a[k].x == 1.0 || a[k].y == 0.0 || a[k].y == 1.0;
      }
      CHECK(same);
      CHECK(differs);
      CHECK(on_edge < 20);  // clipping is rare
    }
    CHECK_THROWS_AS(sample_toy("spiral", 10, 0), InvalidArgument);
    CHECK_THROWS_AS(sample_toy("moons", 0, 0), InvalidArgument);
  }

  TEST_CASE("8gaussians has eight balanced modes") {
    const std::size_t n = 40000;
    const auto pts = sample_toy("8gaussians", n, 1);
    std::array<std::size_t, 8> counts{};
    for (const auto& p : pts) {
      // Back to raw coordinates; modes sit at angles k pi / 4.
      const double x = p.x * 8.0 - 4.0, y = p.y * 8.0 - 4.0;
      const double r = std::hypot(x, y);
      CHECK(r > 0.5);
      CHECK(r < 5.0);
      const double angle = std::atan2(y, x);
      const long sector = std::lround(angle / (std::numbers::pi / 4.0));
      counts[static_cast<std::size_t>((sector + 8) % 8)] += 1;
    }
    for (auto c : counts) {
      CHECK(double(c) / n > 0.08);
      CHECK(double(c) / n < 0.17);
    }
  }

  TEST_CASE("circles has two radii") {
    const auto pts = sample_toy("circles", 4000, 2);
    std::size_t inner = 0, outer = 0;
    for (const auto& p : pts) {
      const double r = std::hypot(p.x * 8.0 - 4.0, p.y * 8.0 - 4.0);
      inner += std::abs(r - 1.5) < 0.75;
      outer += std::abs(r - 3.0) < 0.75;
    }
    CHECK(inner + outer > 3900);
    CHECK(inner > 1700);
    CHECK(outer > 1700);
  }

  TEST_CASE("sidecar") {
    const auto j = nlohmann::json::parse(sidecar_json("moons", 3, 10, EncodingSpec::parse("base5")));
    CHECK(j["dataset"] == "moons");
    CHECK(j["seed"] == 3);
    CHECK(j["count"] == 10);
    CHECK(j["encoding"]["K"] == 16);
    CHECK(j["encoding"]["S"] == 5);
    CHECK(j["normalization"]["raw_low"] == -4.0);
  }
}
