#include "dpf/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <optional>
#include <thread>

#include "dpf/condmodel.hpp"
#include "dpf/contflow.hpp"
#include "dpf/io.hpp"
#include "dpf/metrics.hpp"
#include "dpf/reverse.hpp"
#include "dpf/toydata.hpp"
#include "dpf/transform.hpp"
#include "dpf/transport.hpp"

namespace dpf::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using lattice::LatticeState;
using lattice::ProblemShape;

// Pinned pass thresholds of the verification subcommands.
constexpr double kOtGapTolerance = 1e-6;
constexpr double kCommutatorCollinearMax = 1e-4;
constexpr double kCommutatorControlMin = 1e-2;
constexpr double kOuDeviationMax = 1e-6;
constexpr double kClosedFormMax = 1e-7;

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// Everything but --out, so the manifest is independent of where it was written.
std::vector<std::string> replay_args(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--out") {
      ++k;
      continue;
    }
    if (args[k].rfind("--out=", 0) == 0) continue;
    out.push_back(args[k]);
  }
  return out;
}

void write_manifest(const fs::path& dir, const std::vector<std::string>& args, Json config,
                    const std::vector<std::string>& artifacts) {
  Json m;
  m["command"] = args.empty() ? "" : args.front();
  m["argv"] = replay_args(args);
  m["config"] = std::move(config);
  m["artifacts"] = artifacts;
  io::write_text(dir / "manifest.json", dump(m));
}

std::string points_csv(std::span<const toydata::Point2> points) {
  std::string out = "x,y\n";
  for (const auto& p : points) out += io::format_double(p.x) + ',' + io::format_double(p.y) + '\n';
  return out;
}

std::vector<LatticeState> toy_states(const std::string& dataset, const toydata::EncodingSpec& spec,
                                     std::size_t count, std::uint64_t seed) {
  const auto points = toydata::sample_toy(dataset, count, seed);
  return toydata::encode_all(points, spec);
}

std::vector<LatticeState> random_states(const ProblemShape& shape, std::size_t count, std::uint64_t seed) {
  Rng rng(derive_seed(seed, SeedPurpose::kData));
  std::vector<LatticeState> out;
  for (std::size_t n = 0; n < count; ++n) {
    LatticeState s(static_cast<std::size_t>(shape.dims()));
    for (int l = 0; l < shape.dims(); ++l) {
      s[l] = static_cast<LatticeState::Digit>(uniform_index(rng, static_cast<std::uint64_t>(shape.states())));
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------

struct GenDataOptions {
  std::string dataset, spec = "gray2", out;
  std::size_t count = 4000;
  std::uint64_t seed = 0;
};

int run_gen_data(const GenDataOptions& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto spec = toydata::EncodingSpec::parse(o.spec);
  const auto points = toydata::sample_toy(o.dataset, o.count, o.seed);
  const fs::path dir(o.out);
  io::write_dataset(dir / "data.txt", {spec.shape(), toydata::encode_all(points, spec)});
  io::write_text(dir / "data.json", toydata::sidecar_json(o.dataset, o.seed, o.count, spec));
  io::write_text(dir / "points.csv", points_csv(points));
  write_manifest(dir, args, {{"dataset", o.dataset}, {"spec", o.spec}, {"count", o.count}, {"seed", o.seed}},
                 {"data.txt", "data.json", "points.csv"});
  out << "wrote " << o.count << " points of " << o.dataset << " to " << dir.string() << "\n";
  return kExitOk;
}

struct TrainOptions {
  std::string data, out;
  condmodel::TrainConfig config;
};

int run_train(const TrainOptions& o, const std::vector<std::string>& args, std::ostream& out) {
  const io::Dataset data = io::read_dataset(o.data);
  const auto result = condmodel::train(data.shape, data.states, o.config);
  const fs::path dir(o.out);
  condmodel::save_checkpoint(dir / "checkpoint.json", result.params);
  io::write_text(dir / "loss.csv", condmodel::loss_curve_csv(result.loss_curve));
  const auto& c = o.config;
  write_manifest(dir, args,
                 {{"data", o.data}, {"K", data.shape.dims()}, {"S", data.shape.states()},
                  {"iterations", c.iterations}, {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
                  {"width", c.width}, {"t_min", c.t_min}, {"t_max", c.t_max}, {"seed", c.seed}},
                 {"checkpoint.json", "loss.csv"});
  out << "final loss " << io::format_double(result.loss_curve.back()) << "\n";
  return kExitOk;
}

struct SampleOptions {
  std::string mode, dataset, spec = "gray2", source = "exact", out;
  std::size_t data_count = 4000;
  std::size_t chains = 40;
  std::size_t group = 10;
  double horizon = 1.0, eps = 1e-3;
  std::uint64_t seed = 0;
};

int run_sample(const SampleOptions& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto mode = reverse::parse_mode(o.mode);
  const auto spec = toydata::EncodingSpec::parse(o.spec);
  if (o.chains < 1 || o.group < 1) throw InvalidArgument("--chains and --group must be positive");
  const lattice::MarginalOracle oracle(spec.shape(), toy_states(o.dataset, spec, o.data_count, o.seed));

  std::unique_ptr<lattice::ConditionalSource> model;
  const lattice::ConditionalSource* source = &oracle;
  const bool exact = o.source == "exact";
  if (!exact) {
    if (o.source.rfind("model:", 0) != 0) throw InvalidArgument("--source must be exact or model:<checkpoint>");
    auto params = condmodel::load_checkpoint(o.source.substr(6));
    if (params.shape() != spec.shape()) throw InvalidArgument("checkpoint shape does not match --spec");
    model = std::make_unique<condmodel::ModelConditionals>(std::move(params));
    source = model.get();
  }

  reverse::ReverseConfig config{mode, o.horizon, o.eps, o.seed, worker_count(), mode == reverse::Mode::kDpf && exact};
  const auto initial = reverse::sample_prior(oracle, o.horizon, derive_seed(o.seed, SeedPurpose::kPrior), o.chains);
  std::vector<LatticeState> starts;
  starts.reserve(o.chains * o.group);
  for (const auto& s : initial) starts.insert(starts.end(), o.group, s);
  const auto run = reverse::run_reverse_from(*source, config, starts);

  const fs::path dir(o.out);
  io::write_text(dir / "trajectories.csv", reverse::trajectories_csv(run.trajectories));
  std::string samples = "chain,x,y\n";
  for (std::size_t c = 0; c < run.trajectories.size(); ++c) {
    const auto p = toydata::decode(run.trajectories[c].end(), spec);
    samples += std::to_string(c) + ',' + io::format_double(p.x) + ',' + io::format_double(p.y) + '\n';
  }
  io::write_text(dir / "samples.csv", samples);

  const auto stats = metrics::summarize(run.trajectories);
  Json summary;
  summary["dataset"] = o.dataset;
  summary["mode"] = reverse::mode_name(mode);
  if (o.group >= 2) {
    const auto groups = metrics::group_by_start(run.trajectories);
    summary["csd"] = metrics::csd(groups).value;
  }
  summary["mean_l1"] = stats.mean_l1;
  summary["mean_length"] = stats.mean_length;
  summary["mean_efficiency"] = stats.mean_efficiency;
  summary["clamp_count"] = run.clamp_count;
  if (config.audit) {
    summary["audited_transitions"] = run.audit.transitions;
    summary["audit_violations"] = run.audit.violations;
  }
  io::write_text(dir / "summary.json", dump(summary));

  write_manifest(dir, args,
                 {{"mode", o.mode}, {"dataset", o.dataset}, {"spec", o.spec}, {"source", o.source},
                  {"data_count", o.data_count}, {"chains", o.chains}, {"group", o.group}, {"T", o.horizon},
                  {"eps", o.eps}, {"seed", o.seed}},
                 {"trajectories.csv", "samples.csv", "summary.json"});
  out << dump(summary);
  return kExitOk;
}

struct VerifyOtOptions {
  int dims = 1, states = 3;
  double t = 0.3, eps = 1e-3;
  std::uint64_t seed = 0;
  std::size_t points = 16;
  std::vector<double> p0;
  bool frozen = false;
  std::string out;
};

int run_verify_ot(const VerifyOtOptions& o, const std::vector<std::string>& args, std::ostream& out) {
  const ProblemShape shape(o.dims, o.states);
  std::shared_ptr<const lattice::MarginalSource> marginals;
  if (!o.p0.empty()) {
    marginals = std::make_shared<lattice::ForwardMarginals>(lattice::DenseDistribution(
        shape, Eigen::Map<const Eigen::VectorXd>(o.p0.data(), static_cast<Eigen::Index>(o.p0.size()))));
  } else {
    marginals = std::make_shared<lattice::MarginalOracle>(shape, random_states(shape, o.points, o.seed));
  }
  const auto gen = transform::build_dpf_generator(shape, marginals);
  transport::CertifyOptions opts;
  opts.frozen = o.frozen;
  const auto cert = transport::certify_flow_optimality(gen, *marginals, o.t, o.eps, opts);

  Json j;
  j["K"] = o.dims;
  j["S"] = o.states;
  j["t"] = cert.t;
  j["eps"] = cert.eps;
  j["frozen"] = cert.frozen;
  j["sign_constant"] = cert.sign_constant;
  j["applicable"] = cert.applicable;
  j["plan_cost"] = cert.plan_cost;
  j["lp_optimum"] = cert.lp_optimum;
  j["relative_gap"] = cert.relative_gap;
  j["marginal_defect"] = cert.marginal_defect;
  const bool pass = !cert.applicable || cert.relative_gap < kOtGapTolerance;
  j["pass"] = pass;
  const std::string text = dump(j);
  if (!o.out.empty()) {
    io::write_text(fs::path(o.out) / "certificate.json", text);
    write_manifest(o.out, args, {{"K", o.dims}, {"S", o.states}, {"t", o.t}, {"eps", o.eps}, {"seed", o.seed}},
                   {"certificate.json"});
  }
  out << text;
  return pass ? kExitOk : kExitCheckFailed;
}

struct VerifyMarginalsOptions {
  int dims = 1, states = 3;
  std::uint64_t seed = 0;
  std::vector<double> times{0.1, 0.25, 0.5, 1.0};
  double tol = 1e-6;
  std::string out;
};

int run_verify_marginals(const VerifyMarginalsOptions& o, const std::vector<std::string>& args, std::ostream& out) {
  const ProblemShape shape(o.dims, o.states);
  const auto initial = lattice::DenseDistribution::random(shape, derive_seed(o.seed, SeedPurpose::kData));
  const auto rep = transform::verify_marginal_equivalence(initial, o.times, o.tol);
  Json j;
  j["K"] = o.dims;
  j["S"] = o.states;
  j["times"] = rep.times;
  j["l1_gaps"] = rep.l1_gaps;
  j["max_l1_gap"] = rep.max_l1_gap;
  j["tolerance"] = rep.tolerance;
  j["pass"] = rep.pass;
  const std::string text = dump(j);
  if (!o.out.empty()) {
    io::write_text(fs::path(o.out) / "equivalence.json", text);
    write_manifest(o.out, args, {{"K", o.dims}, {"S", o.states}, {"seed", o.seed}, {"tol", o.tol}},
                   {"equivalence.json"});
  }
  out << text;
  return rep.pass ? kExitOk : kExitCheckFailed;
}

int run_verify_continuous(const std::string& out_dir, const std::vector<std::string>& args, std::ostream& out) {
  const auto rep = contflow::run_continuous_suite();
  Json j;
  j["min_monotone_slope"] = rep.min_monotone_slope;
  j["commutator_collinear"] = rep.commutator_collinear;
  j["commutator_control"] = rep.commutator_control;
  j["ou_deviation"] = rep.ou_deviation;
  j["closed_form_error"] = rep.closed_form_error;
  const bool pass = rep.min_monotone_slope > 0.0 && rep.commutator_collinear < kCommutatorCollinearMax &&
                    rep.commutator_control > kCommutatorControlMin && rep.ou_deviation < kOuDeviationMax &&
                    rep.closed_form_error < kClosedFormMax;
  j["pass"] = pass;
  const std::string text = dump(j);
  if (!out_dir.empty()) {
    io::write_text(fs::path(out_dir) / "continuous.json", text);
    write_manifest(out_dir, args, Json::object(), {"continuous.json"});
  }
  out << text;
  return pass ? kExitOk : kExitCheckFailed;
}

struct MetricsOptions {
  std::string kind, spec = "gray2", dataset, out;
  std::vector<std::string> runs;
  std::size_t count = 4000;
  std::uint64_t seed = 0;
  double bandwidth = metrics::kDefaultBandwidth;
};

int run_metrics(const MetricsOptions& o, const std::vector<std::string>& args, std::ostream& out) {
  std::vector<lattice::Trajectory> trajectories;
  for (const auto& path : o.runs) {
    auto part = reverse::parse_trajectories_csv(io::read_text(path));
    for (auto& tr : part) trajectories.push_back(std::move(tr));
  }
  if (trajectories.empty()) throw DataIntegrityError("no trajectories in the given runs");

  metrics::MetricsReport rep;
  rep.metric = o.kind;
  rep.config["runs"] = std::to_string(o.runs.size());
  rep.config["trajectories"] = std::to_string(trajectories.size());
  if (o.kind == "csd") {
    const auto res = metrics::csd(metrics::group_by_start(trajectories));
    rep.value = res.value;
    rep.groups = res.per_group;
  } else if (o.kind == "l1" || o.kind == "length" || o.kind == "efficiency") {
    const auto s = metrics::summarize(trajectories);
    rep.value = o.kind == "l1" ? s.mean_l1 : o.kind == "length" ? s.mean_length : s.mean_efficiency;
  } else if (o.kind == "mmd") {
    if (o.dataset.empty()) throw InvalidArgument("--kind mmd needs --dataset for the reference draw");
    const auto spec = toydata::EncodingSpec::parse(o.spec);
    std::vector<LatticeState> ends;
    for (const auto& tr : trajectories) ends.push_back(tr.end());
    const auto generated = toydata::decode_all(ends, spec);
    const auto reference = toydata::sample_toy(o.dataset, o.count, o.seed);
    rep.value = metrics::mmd_laplace(generated, reference, o.bandwidth);
    rep.config["dataset"] = o.dataset;
    rep.config["spec"] = o.spec;
    rep.config["reference_count"] = std::to_string(o.count);
    rep.config["reference_seed"] = std::to_string(o.seed);
    rep.config["bandwidth"] = io::format_double(o.bandwidth);
  } else {
    throw InvalidArgument("unknown metric kind '" + o.kind + "' (expected csd, l1, length, efficiency or mmd)");
  }
  const std::string text = rep.to_json();
  if (!o.out.empty()) {
    io::write_text(fs::path(o.out) / "metrics.json", text);
    write_manifest(o.out, args, {{"kind", o.kind}, {"runs", o.runs}}, {"metrics.json"});
  }
  out << text;
  return kExitOk;
}

struct ReportRow {
  std::string dataset, mode;
  Json config, summary;
};

int run_report(const std::vector<std::string>& manifests, const std::string& out_dir,
               const std::vector<std::string>& args, std::ostream& out) {
  std::vector<ReportRow> rows;
  for (const auto& path : manifests) {
    Json m, s;
    try {
      m = Json::parse(io::read_text(path));
      if (m.at("command") != "sample") throw InvalidArgument(path + " is not a sample manifest");
      s = Json::parse(io::read_text(fs::path(path).parent_path() / "summary.json"));
    } catch (const nlohmann::json::exception& e) {
      throw DataIntegrityError(path + ": " + e.what());
    }
    ReportRow row{m["config"]["dataset"], m["config"]["mode"], m["config"], s};
    for (const auto& other : rows) {
      if (other.dataset != row.dataset) continue;
      if (other.mode == row.mode) throw InvalidArgument("duplicate run for " + row.dataset + " / " + row.mode);
      for (const char* key : {"spec", "source", "data_count", "chains", "group", "T", "eps", "seed"}) {
        if (other.config[key] != row.config[key]) {
          throw InvalidArgument("config mismatch on '" + std::string(key) + "' for dataset " + row.dataset);
        }
      }
    }
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tie(a.dataset, a.mode) < std::tie(b.dataset, b.mode);
  });

  auto field = [](const Json& s, const char* key) { return s.contains(key) ? s[key].get<double>() : std::nan(""); };
  std::string csv = "dataset,method,csd,mean_l1,mean_length,mean_efficiency,trends\n";
  Json table = Json::array();
  for (const auto& row : rows) {
    std::string trends;
    if (row.mode == "dpf") {
      for (const auto& other : rows) {
        if (other.dataset != row.dataset || other.mode != "baseline") continue;
        const bool csd_ok = field(row.summary, "csd") < field(other.summary, "csd");
        const bool eff_ok = field(row.summary, "mean_efficiency") > field(other.summary, "mean_efficiency");
        const bool len_ok = field(row.summary, "mean_length") < field(other.summary, "mean_length");
        trends = std::string("csd:") + (csd_ok ? "ok" : "violated") + ";efficiency:" + (eff_ok ? "ok" : "violated") +
                 ";length:" + (len_ok ? "ok" : "violated");
      }
    }
    auto cell = [&](const char* key) {
      const double v = field(row.summary, key);
      return std::isnan(v) ? std::string() : io::format_double(v);
    };
    csv += row.dataset + ',' + row.mode + ',' + cell("csd") + ',' + cell("mean_l1") + ',' + cell("mean_length") + ',' +
           cell("mean_efficiency") + ',' + trends + '\n';
    Json entry = row.summary;
    entry["trends"] = trends;
    table.push_back(entry);
  }
  if (!out_dir.empty()) {
    io::write_text(fs::path(out_dir) / "tables.csv", csv);
    io::write_text(fs::path(out_dir) / "tables.json", dump(table));
    write_manifest(out_dir, args, {{"manifests", manifests}}, {"tables.csv", "tables.json"});
  }
  out << csv;
  return kExitOk;
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kUnsupportedMode: return kExitUsage;
    case ErrorKind::kDataIntegrity: return kExitData;
    case ErrorKind::kNumericDegeneracy:
    case ErrorKind::kIntegrationFailure:
    case ErrorKind::kStepTooLarge:
    case ErrorKind::kTrainingDiverged:
    case ErrorKind::kInternal: return kExitNumeric;
    case ErrorKind::kCapacity: return kExitCapacity;
  }
  return kExitNumeric;
}

int worker_count() {
  if (const char* env = std::getenv("DPF_WORKERS"); env && *env) {
    try {
      std::size_t used = 0;
      const int n = std::stoi(env, &used);
      if (used == std::string(env).size() && n >= 1) return n;
    } catch (const std::logic_error&) {
    }
    throw InvalidArgument("DPF_WORKERS must be a positive integer");
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Discrete probability flow toolkit", "dpf"};
  app.require_subcommand(1, 1);

  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Sample a toy dataset and encode it on the lattice");
  gen_cmd->add_option("--dataset", gen.dataset, "Dataset name")->required();
  gen_cmd->add_option("--spec", gen.spec, "Encoding: gray2, base5 or base10")->capture_default_str();
  gen_cmd->add_option("--count", gen.count, "Number of points")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Root seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Fit the conditional model to an encoded dataset");
  train_cmd->add_option("--data", train.data, "Dataset file written by gen-data")->required();
  train_cmd->add_option("--iterations", train.config.iterations)->capture_default_str();
  train_cmd->add_option("--lr", train.config.learning_rate)->capture_default_str();
  train_cmd->add_option("--batch", train.config.batch_size)->capture_default_str();
  train_cmd->add_option("--width", train.config.width)->capture_default_str();
  train_cmd->add_option("--t-min", train.config.t_min)->capture_default_str();
  train_cmd->add_option("--t-max", train.config.t_max)->capture_default_str();
  train_cmd->add_option("--seed", train.config.seed)->capture_default_str();
  train_cmd->add_option("--out", train.out, "Output directory")->required();

  SampleOptions sample;
  auto* sample_cmd = app.add_subcommand("sample", "Run reverse chains from the exact prior");
  sample_cmd->add_option("--mode", sample.mode, "dpf or baseline")->required();
  sample_cmd->add_option("--dataset", sample.dataset)->required();
  sample_cmd->add_option("--spec", sample.spec)->capture_default_str();
  sample_cmd->add_option("--source", sample.source, "exact or model:<checkpoint>")->capture_default_str();
  sample_cmd->add_option("--data-count", sample.data_count)->capture_default_str();
  sample_cmd->add_option("--chains", sample.chains, "Initial points")->capture_default_str();
  sample_cmd->add_option("--group", sample.group, "Chains per initial point")->capture_default_str();
  sample_cmd->add_option("--T", sample.horizon)->capture_default_str();
  sample_cmd->add_option("--eps", sample.eps)->capture_default_str();
  sample_cmd->add_option("--seed", sample.seed)->capture_default_str();
  sample_cmd->add_option("--out", sample.out, "Output directory")->required();

  VerifyOtOptions ot;
  auto* ot_cmd = app.add_subcommand("verify-ot", "Certify the flow plan against the exact transport optimum");
  ot_cmd->add_option("--K", ot.dims)->capture_default_str();
  ot_cmd->add_option("--S", ot.states)->capture_default_str();
  ot_cmd->add_option("--t", ot.t)->capture_default_str();
  ot_cmd->add_option("--eps", ot.eps)->capture_default_str();
  ot_cmd->add_option("--seed", ot.seed)->capture_default_str();
  ot_cmd->add_option("--points", ot.points, "Dataset size behind the marginals")->capture_default_str();
  ot_cmd->add_option("--p0", ot.p0, "Dense initial law instead of a dataset")->delimiter(',');
  ot_cmd->add_flag("--frozen", ot.frozen, "Freeze the generator at time t");
  ot_cmd->add_option("--out", ot.out);

  VerifyMarginalsOptions marg;
  auto* marg_cmd = app.add_subcommand("verify-marginals", "Compare forward solves under both generators");
  marg_cmd->add_option("--K", marg.dims)->capture_default_str();
  marg_cmd->add_option("--S", marg.states)->capture_default_str();
  marg_cmd->add_option("--seed", marg.seed)->capture_default_str();
  marg_cmd->add_option("--times", marg.times)->delimiter(',');
  marg_cmd->add_option("--tol", marg.tol)->capture_default_str();
  marg_cmd->add_option("--out", marg.out);

  std::string cont_out;
  auto* cont_cmd = app.add_subcommand("verify-continuous", "Run the continuous-flow checks");
  cont_cmd->add_option("--out", cont_out);

  MetricsOptions met;
  auto* met_cmd = app.add_subcommand("metrics", "Compute a metric over trajectory CSVs");
  met_cmd->add_option("--kind", met.kind, "csd, l1, length, efficiency or mmd")->required();
  met_cmd->add_option("--runs", met.runs, "Trajectory CSV files")->required();
  met_cmd->add_option("--spec", met.spec)->capture_default_str();
  met_cmd->add_option("--dataset", met.dataset, "Reference dataset for mmd");
  met_cmd->add_option("--count", met.count, "Reference draw size for mmd")->capture_default_str();
  met_cmd->add_option("--seed", met.seed, "Reference draw seed for mmd")->capture_default_str();
  met_cmd->add_option("--bandwidth", met.bandwidth)->capture_default_str();
  met_cmd->add_option("--out", met.out);

  std::vector<std::string> manifests;
  std::string report_out;
  auto* report_cmd = app.add_subcommand("report", "Tabulate sample runs by dataset and method");
  report_cmd->add_option("--manifests", manifests, "Sample manifests")->required();
  report_cmd->add_option("--out", report_out);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return run_gen_data(gen, args, out);
    if (*train_cmd) return run_train(train, args, out);
    if (*sample_cmd) return run_sample(sample, args, out);
    if (*ot_cmd) return run_verify_ot(ot, args, out);
    if (*marg_cmd) return run_verify_marginals(marg, args, out);
    if (*cont_cmd) return run_verify_continuous(cont_out, args, out);
    if (*met_cmd) return run_metrics(met, args, out);
    if (*report_cmd) return run_report(manifests, report_out, args, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

int main_entry(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace dpf::cli
