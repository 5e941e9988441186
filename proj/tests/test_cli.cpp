#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "dpf/cli.hpp"
#include "dpf/io.hpp"

using namespace dpf;
namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) { fs::remove_all(path); }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

std::vector<std::string> sample_args(const std::string& mode, const std::string& out) {
  return {"sample", "--mode", mode, "--dataset", "2spirals", "--spec", "gray2", "--data-count", "300",
          "--chains", "4", "--group", "3", "--eps", "0.01", "--seed", "5", "--out", out};
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors") {
    CHECK(run({}).code == cli::kExitUsage);
    CHECK(run({"frobnicate"}).code == cli::kExitUsage);
    const auto bad_flag = run({"verify-ot", "--bogus", "1"});
    CHECK(bad_flag.code == cli::kExitUsage);
    CHECK(bad_flag.err.find("verify-ot") != std::string::npos);
    CHECK(run({"report"}).code == cli::kExitUsage);
    CHECK(run({"--help"}).code == cli::kExitOk);
    CHECK(run({"sample", "--mode", "ddpm", "--dataset", "moons", "--out", "/tmp/x"}).code == cli::kExitUsage);
  }

  TEST_CASE("error kinds map to distinct exit codes") {
    CHECK(cli::exit_code_for(ErrorKind::kInvalidArgument) == cli::kExitUsage);
    CHECK(cli::exit_code_for(ErrorKind::kDataIntegrity) == cli::kExitData);
    CHECK(cli::exit_code_for(ErrorKind::kNumericDegeneracy) == cli::kExitNumeric);
    CHECK(cli::exit_code_for(ErrorKind::kCapacity) == cli::kExitCapacity);
    CHECK(run({"verify-marginals", "--K", "13", "--S", "2"}).code == cli::kExitCapacity);
    CHECK(run({"metrics", "--kind", "csd", "--runs", "/nonexistent/a.csv"}).code == cli::kExitData);
    CHECK(run({"train", "--data", "/nonexistent/d.txt", "--out", "/tmp/dpf_never"}).code == cli::kExitData);
  }

  TEST_CASE("worker count") {
    ::setenv("DPF_WORKERS", "3", 1);
    CHECK(cli::worker_count() == 3);
    ::unsetenv("DPF_WORKERS");
    CHECK(cli::worker_count() >= 1);
  }

  TEST_CASE("verification subcommands") {
    const auto ot = run({"verify-ot", "--K", "1", "--S", "3", "--t", "0.3", "--eps", "1e-3", "--seed", "7"});
    CHECK(ot.code == cli::kExitOk);
    const auto cert = Json::parse(ot.out);
    CHECK(cert["relative_gap"].get<double>() < 1e-6);
    CHECK(cert["applicable"] == true);

    // The three-state law whose P_0 - P_1 flips near t = 0.111.
    const auto flagged = run({"verify-ot", "--K", "1", "--S", "3", "--p0", "0.1,0,0.9", "--t", "0.11", "--eps", "0.003"});
    CHECK(flagged.code == cli::kExitOk);
    const auto cert_flagged = Json::parse(flagged.out);
    CHECK(cert_flagged["sign_constant"] == false);
    CHECK(cert_flagged["applicable"] == false);
    CHECK(run({"verify-ot", "--K", "1", "--S", "3", "--p0", "0.1,0,0.9", "--t", "0.001", "--eps", "0.199"}).code ==
          cli::kExitNumeric);
    CHECK(run({"verify-ot", "--K", "1", "--S", "3", "--p0", "0.5,0.6,0.1"}).code == cli::kExitData);

    const auto marg = run({"verify-marginals", "--K", "2", "--S", "3", "--seed", "1"});
    CHECK(marg.code == cli::kExitOk);
    CHECK(Json::parse(marg.out)["max_l1_gap"].get<double>() < 1e-6);
  }

  TEST_CASE("sample, metrics, report and manifest replay") {
    TempDir dir("dpf_cli_test");
    REQUIRE(run(sample_args("dpf", dir / "dpf")).code == cli::kExitOk);
    REQUIRE(run(sample_args("baseline", dir / "base")).code == cli::kExitOk);
    for (const char* leaf : {"trajectories.csv", "samples.csv", "summary.json", "manifest.json"}) {
      CHECK(fs::exists(dir.path / "dpf" / leaf));
    }
    const auto summary = Json::parse(io::read_text(dir / "dpf/summary.json"));
    CHECK(summary["audit_violations"] == 0);
    CHECK(summary["mode"] == "dpf");
    const auto samples = io::read_text(dir / "dpf/samples.csv");
    CHECK(std::count(samples.begin(), samples.end(), '\n') == 13);

    // Replaying the manifest argv into a new directory reproduces every artifact.
    const auto manifest = Json::parse(io::read_text(dir / "dpf/manifest.json"));
    auto argv = manifest["argv"].get<std::vector<std::string>>();
    CHECK(std::find(argv.begin(), argv.end(), "--out") == argv.end());
    argv.push_back("--out");
    argv.push_back(dir / "replay");
    REQUIRE(run(argv).code == cli::kExitOk);
    for (const char* leaf : {"trajectories.csv", "samples.csv", "summary.json", "manifest.json"}) {
      CHECK(io::read_text(dir.path / "dpf" / leaf) == io::read_text(dir.path / "replay" / leaf));
    }

    const auto csd = run({"metrics", "--kind", "csd", "--runs", dir / "dpf/trajectories.csv", "--out", dir / "m"});
    CHECK(csd.code == cli::kExitOk);
    CHECK(Json::parse(csd.out)["value"].get<double>() == doctest::Approx(summary["csd"].get<double>()));
    const auto mmd = run({"metrics", "--kind", "mmd", "--runs", dir / "dpf/trajectories.csv", "--dataset", "2spirals",
                          "--count", "200"});
    CHECK(mmd.code == cli::kExitOk);
    CHECK(run({"metrics", "--kind", "mmd", "--runs", dir / "dpf/trajectories.csv"}).code == cli::kExitUsage);
    CHECK(run({"metrics", "--kind", "entropy", "--runs", dir / "dpf/trajectories.csv"}).code == cli::kExitUsage);

    const auto rep = run({"report", "--manifests", dir / "dpf/manifest.json", dir / "base/manifest.json", "--out", dir / "r"});
    CHECK(rep.code == cli::kExitOk);
    CHECK(rep.out.rfind("dataset,method,csd,mean_l1,mean_length,mean_efficiency,trends\n", 0) == 0);
    CHECK(rep.out.find("2spirals,baseline,") != std::string::npos);
    CHECK(fs::exists(dir.path / "r" / "tables.json"));

    // Same dataset and mode twice, and a mismatched config.
    CHECK(run({"report", "--manifests", dir / "dpf/manifest.json", dir / "replay/manifest.json"}).code == cli::kExitUsage);
    auto other = sample_args("baseline", dir / "base_eps");
    other[14] = "0.02";
    REQUIRE(run(other).code == cli::kExitOk);
    const auto mismatch = run({"report", "--manifests", dir / "dpf/manifest.json", dir / "base_eps/manifest.json"});
    CHECK(mismatch.code == cli::kExitUsage);
    CHECK(mismatch.err.find("eps") != std::string::npos);
  }

  TEST_CASE("degenerate groups give zero CSD") {
    TempDir dir("dpf_cli_csd");
    io::write_text(dir / "a.csv", "chain,step,t,digit_1,digit_2\n0,0,1,1,0\n0,10,0,0,0\n1,0,1,1,0\n1,10,0,0,0\n");
    io::write_text(dir / "b.csv", "chain,step,t,digit_1,digit_2\n0,0,1,2,2\n0,10,0,2,2\n1,0,1,2,2\n1,10,0,2,2\n");
    const auto res = run({"metrics", "--kind", "csd", "--runs", dir / "a.csv", dir / "b.csv"});
    CHECK(res.code == cli::kExitOk);
    CHECK(Json::parse(res.out)["value"].get<double>() == 0.0);
  }

  TEST_CASE("data generation and a short training run") {
    TempDir dir("dpf_cli_train");
    REQUIRE(run({"gen-data", "--dataset", "moons", "--spec", "base10", "--count", "50", "--seed", "2", "--out", dir / "d"}).code ==
            cli::kExitOk);
    const auto head = io::read_text(dir / "d/data.txt").substr(0, 9);
    CHECK(head == "12 10 50\n");
    REQUIRE(run({"train", "--data", dir / "d/data.txt", "--iterations", "5", "--batch", "8", "--width", "8", "--out",
                 dir / "m"}).code == cli::kExitOk);
    CHECK(fs::exists(dir.path / "m" / "checkpoint.json"));
    const auto sampled = run({"sample", "--mode", "dpf", "--dataset", "moons", "--spec", "base10", "--data-count", "50",
                              "--source", "model:" + (dir / "m/checkpoint.json"), "--chains", "2", "--group", "2",
                              "--eps", "0.05", "--out", dir / "s"});
    CHECK(sampled.code == cli::kExitOk);
    CHECK(run({"sample", "--mode", "dpf", "--dataset", "moons", "--spec", "gray2", "--source",
               "model:" + (dir / "m/checkpoint.json"), "--out", dir / "s2"}).code == cli::kExitUsage);
  }
}
