#include "dpf/reverse.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

#include "dpf/errors.hpp"
#include "dpf/io.hpp"

namespace dpf::reverse {
namespace {

double conditional_ratio(const Eigen::MatrixXd& cond, const LatticeState& i, int dim, int dir) {
  const int target = int(i[dim]) + dir;
  if (target < 0 || target >= cond.cols()) return -1.0;
  const double here = cond(dim, i[dim]);
  if (!(here > 0.0)) {
    throw NumericDegeneracy("reverse rate: conditional of the current digit " + std::to_string(dim) + " is zero");
  }
  return cond(dim, target) / here;
}

struct ChainResult {
  Trajectory trajectory;
  long clamps = 0;
  TransitionAudit audit;
};

ChainResult run_chain(lattice::ConditionalCursor& cursor, const ReverseConfig& config, long steps,
                      const LatticeState& start, std::uint64_t chain_seed) {
  ChainResult res;
  Trajectory& traj = res.trajectory;
  traj.direction = Trajectory::Direction::kReverse;
  traj.seed = chain_seed;
  traj.times.push_back(config.horizon);
  traj.steps.push_back(0);
  traj.states.push_back(start);

  Rng rng(chain_seed);
  LatticeState cur = start;
  const int dims = static_cast<int>(start.size());
  std::vector<int> moves(static_cast<std::size_t>(dims));
  for (long k = 0; k < steps; ++k) {
    const double t = config.horizon - double(k) * config.eps;
    const Eigen::MatrixXd* cond = nullptr;
    try {
      cond = &cursor.evaluate(cur, t);
    } catch (const Error& e) {
      rethrow_with_context(e, "reverse step " + std::to_string(k) + " (t = " + io::format_double(t) + ")");
    }
    bool changed = false;
    for (int l = 0; l < dims; ++l) {
      moves[l] = 0;
      const double down = reverse_rate(config.mode, *cond, cur, l, -1);
      const double up = reverse_rate(config.mode, *cond, cur, l, +1);
      if (down == 0.0 && up == 0.0) continue;
      const EulerRow row = euler_transition_row(down, up, config.eps, &res.clamps);
      const double u = uniform01(rng);
      if (u < row.sub) moves[l] = -1;
      else if (u < row.sub + row.add) moves[l] = +1;
      changed |= moves[l] != 0;
    }
    if (!changed) continue;
    for (int l = 0; l < dims; ++l) {
      if (moves[l] == 0) continue;
      const int old_digit = cur[l];
      const int new_digit = old_digit + moves[l];
      if (config.audit) {
        ++res.audit.transitions;
        if (!((*cond)(l, new_digit) > (*cond)(l, old_digit))) ++res.audit.violations;
      }
      cur[l] = static_cast<LatticeState::Digit>(new_digit);
    }
    traj.times.push_back(k + 1 == steps ? 0.0 : config.horizon - double(k + 1) * config.eps);
    traj.steps.push_back(k + 1);
    traj.states.push_back(cur);
  }
  if (traj.steps.back() != steps) {
    traj.times.push_back(0.0);
    traj.steps.push_back(steps);
    traj.states.push_back(cur);
  }
  return res;
}

}  // namespace

const char* mode_name(Mode mode) { return mode == Mode::kDpf ? "dpf" : "baseline"; }

Mode parse_mode(const std::string& name) {
  if (name == "dpf") return Mode::kDpf;
  if (name == "baseline") return Mode::kBaseline;
  throw InvalidArgument("unknown sampling mode '" + name + "' (expected dpf or baseline)");
}

double reverse_rate_dpf(const Eigen::MatrixXd& conditionals, const LatticeState& i, int dim, int dir) {
  const double ratio = conditional_ratio(conditionals, i, dim, dir);
  return ratio > 1.0 ? ratio - 1.0 : 0.0;
}

double reverse_rate_baseline(const Eigen::MatrixXd& conditionals, const LatticeState& i, int dim, int dir) {
  return std::max(0.0, conditional_ratio(conditionals, i, dim, dir));
}

double reverse_rate(Mode mode, const Eigen::MatrixXd& conditionals, const LatticeState& i, int dim, int dir) {
  return mode == Mode::kDpf ? reverse_rate_dpf(conditionals, i, dim, dir)
                            : reverse_rate_baseline(conditionals, i, dim, dir);
}

EulerRow euler_transition_row(double rate_sub, double rate_add, double eps, long* clamp_counter) {
  if (!(eps > 0.0)) throw InvalidArgument("euler_transition_row: eps must be positive");
  if (!(rate_sub >= 0.0) || !(rate_add >= 0.0)) throw InvalidArgument("euler_transition_row: rates must be >= 0");
  EulerRow row{eps * rate_sub, 1.0 - eps * (rate_sub + rate_add), eps * rate_add};
  if (row.stay < 0.0) {
    const double total = row.sub + row.add;
    row = EulerRow{row.sub / total, 0.0, row.add / total};
    if (clamp_counter) ++*clamp_counter;
  }
  return row;
}

std::vector<LatticeState> sample_prior(const MarginalOracle& oracle, double horizon, std::uint64_t seed,
                                       std::size_t count) {
  if (!(horizon > 0.0)) throw InvalidArgument("sample_prior: horizon must be positive");
  const auto data = oracle.dataset();
  const auto tables = oracle.kernel(horizon);
  const Eigen::MatrixXd& kern = tables->kernel;
  const int states = oracle.shape().states();
  Rng rng(seed);
  std::vector<LatticeState> out;
  out.reserve(count);
  for (std::size_t c = 0; c < count; ++c) {
    LatticeState s = data[uniform_index(rng, data.size())];
    for (std::size_t l = 0; l < s.size(); ++l) {
      double u = uniform01(rng);
      int pick = states - 1;
      for (int b = 0; b < states; ++b) {
        const double p = kern(s[l], b);
        if (u < p) {
          pick = b;
          break;
        }
        u -= p;
      }
      s[l] = static_cast<LatticeState::Digit>(pick);
    }
    out.push_back(std::move(s));
  }
  return out;
}

long step_count(double horizon, double eps) {
  if (!(horizon > 0.0) || !(eps > 0.0)) throw InvalidArgument("reverse sampler: horizon and eps must be positive");
  const double ratio = horizon / eps;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw InvalidArgument("reverse sampler: horizon / eps must be a positive integer");
  }
  return static_cast<long>(rounded);
}

ReverseRun run_reverse_from(const ConditionalSource& source, const ReverseConfig& config,
                            std::span<const LatticeState> starts) {
  const long steps = step_count(config.horizon, config.eps);
  for (const auto& s : starts) lattice::validate_state(source.shape(), s);

  const std::size_t n = starts.size();
  std::vector<ChainResult> results(n);
  const int workers = std::clamp<int>(config.workers, 1, static_cast<int>(std::max<std::size_t>(n, 1)));
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(workers));

  // Contiguous blocks; chain c always uses stream (seed, c).
  auto work = [&](int w) {
    try {
      auto cursor = source.open_cursor();
      const std::size_t lo = n * w / workers, hi = n * (w + 1) / workers;
      for (std::size_t c = lo; c < hi; ++c) {
        results[c] = run_chain(*cursor, config, steps, starts[c], derive_seed(config.seed, SeedPurpose::kChains, c));
      }
    } catch (...) {
      failures[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  ReverseRun run;
  run.trajectories.reserve(n);
  for (auto& r : results) {
    run.clamp_count += r.clamps;
    run.audit += r.audit;
    run.trajectories.push_back(std::move(r.trajectory));
  }
  return run;
}

ReverseRun run_reverse(const ConditionalSource& source, const MarginalOracle& prior, const ReverseConfig& config,
                       std::size_t count) {
  const auto starts =
      sample_prior(prior, config.horizon, derive_seed(config.seed, SeedPurpose::kPrior), count);
  return run_reverse_from(source, config, starts);
}

std::string trajectories_csv(std::span<const Trajectory> trajectories) {
  std::string out = "chain,step,t";
  const std::size_t dims = trajectories.empty() ? 0 : trajectories.front().states.front().size();
  for (std::size_t l = 1; l <= dims; ++l) out += ",digit_" + std::to_string(l);
  out += '\n';
  for (std::size_t c = 0; c < trajectories.size(); ++c) {
    const auto& tr = trajectories[c];
    for (std::size_t r = 0; r < tr.states.size(); ++r) {
      out += std::to_string(c) + ',' + std::to_string(tr.steps[r]) + ',' + io::format_double(tr.times[r]);
      for (auto d : tr.states[r].digits()) {
        out += ',';
        out += std::to_string(int(d));
      }
      out += '\n';
    }
  }
  return out;
}

std::vector<Trajectory> parse_trajectories_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("chain,step,t", 0) != 0) {
    throw DataIntegrityError("trajectory CSV: missing chain,step,t header");
  }
  const auto dims = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',') - 2);
  std::vector<Trajectory> out;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() != dims + 3) {
      throw DataIntegrityError("trajectory CSV line " + std::to_string(line_no) + ": expected " +
                               std::to_string(dims + 3) + " fields");
    }
    try {
      const std::size_t chain = std::stoul(fields[0]);
      if (chain == out.size()) {
        out.emplace_back();
        out.back().direction = Trajectory::Direction::kReverse;
      } else if (chain + 1 != out.size()) {
        throw DataIntegrityError("chains out of order");
      }
      std::vector<LatticeState::Digit> digits;
      for (std::size_t l = 0; l < dims; ++l) {
        const int d = std::stoi(fields[3 + l]);
        if (d < 0 || d > 255) throw DataIntegrityError("digit out of range");
        digits.push_back(static_cast<LatticeState::Digit>(d));
      }
      out.back().steps.push_back(std::stol(fields[1]));
      out.back().times.push_back(std::stod(fields[2]));
      out.back().states.emplace_back(std::move(digits));
    } catch (const std::logic_error& e) {
      throw DataIntegrityError("trajectory CSV line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataIntegrityError& e) {
      throw DataIntegrityError("trajectory CSV line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace dpf::reverse
