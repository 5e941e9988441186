#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "dpf/errors.hpp"
#include "dpf/io.hpp"
#include "support.hpp"

using namespace dpf;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) { fs::remove_all(path); }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("dataset round trip") {
    TempDir dir("dpf_io_test");
    const lattice::ProblemShape shape(3, 5);
    const io::Dataset data{shape, testing::random_states(shape, 25, 1)};
    io::write_dataset(dir.path / "nested" / "d.txt", data);
    const auto back = io::read_dataset(dir.path / "nested" / "d.txt");
    CHECK(back.shape == shape);
    CHECK(back.states == data.states);
    CHECK(io::read_text(dir.path / "nested" / "d.txt").rfind("3 5 25\n", 0) == 0);
  }

  TEST_CASE("malformed datasets") {
    TempDir dir("dpf_io_bad");
    auto check_bad = [&](const std::string& text) {
      io::write_text(dir.path / "bad.txt", text);
      CHECK_THROWS_AS(io::read_dataset(dir.path / "bad.txt"), DataIntegrityError);
    };
    check_bad("");
    check_bad("2 3\n");
    check_bad("2 3 2\n0 1\n2\n");
    check_bad("2 3 1\n0 3\n");
    check_bad("2 3 1\n0 1\n1 1\n");
    check_bad("2 1 1\n0 0\n");
    CHECK_THROWS_AS(io::read_dataset(dir.path / "missing.txt"), DataIntegrityError);
  }

  TEST_CASE("number formatting round-trips") {
    CHECK(io::format_double(0.1) == "0.1");
    CHECK(io::format_double(1.0) == "1");
    CHECK(io::format_double(1e-300) == "1e-300");
    Rng rng(4);
    for (int k = 0; k < 1000; ++k) {
      const double v = std::ldexp(uniform01(rng) - 0.5, int(uniform_index(rng, 200)) - 100);
      CHECK(std::stod(io::format_double(v)) == v);
    }
  }

  TEST_CASE("distribution CSV") {
    TempDir dir("dpf_io_csv");
    io::write_distribution_csv(dir.path / "p.csv",
                               lattice::DenseDistribution(lattice::ProblemShape(1, 2), Eigen::Vector2d(0.25, 0.75)));
    CHECK(io::read_text(dir.path / "p.csv") == "index,probability\n0,0.25\n1,0.75\n");
  }
}
