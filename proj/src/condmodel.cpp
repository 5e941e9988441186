#include "dpf/condmodel.hpp"

#include <cmath>
#include <json.hpp>

#include "dpf/errors.hpp"
#include "dpf/io.hpp"

namespace dpf::condmodel {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& z) { return 1.0 / (1.0 + (-z).exp()); }

// One input row per (example, head): one-hot digits with the scored head's
// block zeroed, then time features.
struct Rows {
  RowMatrix input;
  std::vector<int> head;
  std::vector<int> target;
};

Rows build_rows(const MlpParams& p, std::span<const Example> batch) {
  std::size_t count = 0;
  for (const auto& ex : batch) count += ex.dim < 0 ? static_cast<std::size_t>(p.dims) : 1;
  Rows rows;
  rows.input = RowMatrix::Zero(static_cast<Eigen::Index>(count), p.input_size());
  rows.head.reserve(count);
  rows.target.reserve(count);
  Eigen::Index r = 0;
  for (const auto& ex : batch) {
    lattice::validate_state(p.shape(), ex.noisy);
    const Eigen::VectorXd feats = time_features(ex.t);
    const int lo = ex.dim < 0 ? 0 : ex.dim;
    const int hi = ex.dim < 0 ? p.dims : ex.dim + 1;
    if (ex.dim >= p.dims) throw InvalidArgument("example head index out of range");
    for (int l = lo; l < hi; ++l, ++r) {
      for (int m = 0; m < p.dims; ++m) {
        if (m != l) rows.input(r, m * p.states + ex.noisy[m]) = 1.0;
      }
      rows.input.row(r).tail(kTimeFeatures) = feats.transpose();
      rows.head.push_back(l);
      rows.target.push_back(ex.noisy[l]);
    }
  }
  return rows;
}

struct Forward {
  RowMatrix z1, h1, z2, h2, logits;
};

Forward forward(const MlpParams& p, const RowMatrix& x) {
  Forward f;
  f.z1 = (x * p.w1.transpose()).rowwise() + p.b1.transpose();
  f.h1 = (f.z1.array() * sigmoid(f.z1.array())).matrix();
  f.z2 = (f.h1 * p.w2.transpose()).rowwise() + p.b2.transpose();
  f.h2 = (f.z2.array() * sigmoid(f.z2.array())).matrix();
  f.logits = (f.h2 * p.w3.transpose()).rowwise() + p.b3.transpose();
  return f;
}

// Softmax of head `l` in row `r`.
Eigen::VectorXd head_softmax(const RowMatrix& logits, Eigen::Index r, int l, int states) {
  const Eigen::VectorXd z = logits.row(r).segment(static_cast<Eigen::Index>(l) * states, states).transpose();
  if (!z.allFinite()) throw NumericDegeneracy("model produced non-finite logits");
  const Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

Eigen::ArrayXXd silu_grad(const RowMatrix& z) {
  const Eigen::ArrayXXd s = sigmoid(z.array());
  return s * (1.0 + z.array() * (1.0 - s));
}

template <class Fn>
void for_each_tensor(MlpParams& p, Fn&& fn) {
  fn(p.w1.data(), p.w1.size());
  fn(p.b1.data(), p.b1.size());
  fn(p.w2.data(), p.w2.size());
  fn(p.b2.data(), p.b2.size());
  fn(p.w3.data(), p.w3.size());
  fn(p.b3.data(), p.b3.size());
}

MlpParams zeros_like(const MlpParams& p) {
  MlpParams z;
  z.dims = p.dims;
  z.states = p.states;
  z.width = p.width;
  z.w1 = Eigen::MatrixXd::Zero(p.w1.rows(), p.w1.cols());
  z.w2 = Eigen::MatrixXd::Zero(p.w2.rows(), p.w2.cols());
  z.w3 = Eigen::MatrixXd::Zero(p.w3.rows(), p.w3.cols());
  z.b1 = Eigen::VectorXd::Zero(p.b1.size());
  z.b2 = Eigen::VectorXd::Zero(p.b2.size());
  z.b3 = Eigen::VectorXd::Zero(p.b3.size());
  return z;
}

}  // namespace

MlpParams MlpParams::init(const ProblemShape& shape, std::uint64_t seed, int width) {
  if (width < 1) throw InvalidArgument("MLP width must be positive");
  MlpParams p;
  p.dims = shape.dims();
  p.states = shape.states();
  p.width = width;
  Rng rng(seed);
  auto uniform_fill = [&](Eigen::MatrixXd& w, Eigen::Index rows, Eigen::Index cols) {
    const double bound = std::sqrt(3.0 / double(cols));
    w.resize(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r < rows; ++r) w(r, c) = bound * (2.0 * uniform01(rng) - 1.0);
    }
  };
  uniform_fill(p.w1, width, p.input_size());
  uniform_fill(p.w2, width, width);
  p.w3 = Eigen::MatrixXd::Zero(p.dims * p.states, width);
  p.b1 = Eigen::VectorXd::Zero(width);
  p.b2 = Eigen::VectorXd::Zero(width);
  p.b3 = Eigen::VectorXd::Zero(p.dims * p.states);
  return p;
}

std::size_t MlpParams::parameter_count() const {
  return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + b3.size());
}

double& MlpParams::parameter(std::size_t flat) {
  double* hit = nullptr;
  for_each_tensor(*this, [&](double* data, Eigen::Index size) {
    if (hit) return;
    if (flat < static_cast<std::size_t>(size)) hit = data + flat;
    else flat -= static_cast<std::size_t>(size);
  });
  if (!hit) throw InvalidArgument("MlpParams::parameter: index out of range");
  return *hit;
}

double MlpParams::parameter(std::size_t flat) const { return const_cast<MlpParams&>(*this).parameter(flat); }

bool MlpParams::all_finite() const {
  return w1.allFinite() && w2.allFinite() && w3.allFinite() && b1.allFinite() && b2.allFinite() && b3.allFinite();
}

Eigen::VectorXd time_features(double t) {
  // Geometric frequencies from 1 to 1/10000 of a 1000-unit time scale.
  constexpr int half = kTimeFeatures / 2;
  Eigen::VectorXd f(kTimeFeatures);
  for (int k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * k / half);
    f[k] = std::sin(1000.0 * t * freq);
    f[half + k] = std::cos(1000.0 * t * freq);
  }
  return f;
}

Eigen::MatrixXd model_conditionals(const MlpParams& params, const LatticeState& i, double t) {
  if (!(t > 0.0) || !(t <= 1.0)) throw InvalidArgument("model_conditionals: t must lie in (0, 1]");
  const Example ex{i, t, -1};
  const Rows rows = build_rows(params, std::span<const Example>(&ex, 1));
  const Forward f = forward(params, rows.input);
  Eigen::MatrixXd out(params.dims, params.states);
  for (int l = 0; l < params.dims; ++l) out.row(l) = head_softmax(f.logits, l, l, params.states).transpose();
  return out;
}

Gradient loss_and_grad(const MlpParams& params, std::span<const Example> batch) {
  if (batch.empty()) throw InvalidArgument("loss_and_grad: empty batch");
  const Rows rows = build_rows(params, batch);
  const Forward f = forward(params, rows.input);
  const auto n = static_cast<Eigen::Index>(rows.head.size());
  const double scale = 1.0 / double(n);

  Gradient g{0.0, zeros_like(params)};
  RowMatrix d_logits = RowMatrix::Zero(n, f.logits.cols());
  for (Eigen::Index r = 0; r < n; ++r) {
    const int l = rows.head[static_cast<std::size_t>(r)];
    const int y = rows.target[static_cast<std::size_t>(r)];
    const Eigen::VectorXd p = head_softmax(f.logits, r, l, params.states);
    g.loss -= std::log(p[y]) * scale;
    auto seg = d_logits.row(r).segment(static_cast<Eigen::Index>(l) * params.states, params.states);
    seg = p.transpose() * scale;
    seg[y] -= scale;
  }

  g.grad.w3 = d_logits.transpose() * f.h2;
  g.grad.b3 = d_logits.colwise().sum().transpose();
  const RowMatrix d_z2 = ((d_logits * params.w3).array() * silu_grad(f.z2)).matrix();
  g.grad.w2 = d_z2.transpose() * f.h1;
  g.grad.b2 = d_z2.colwise().sum().transpose();
  const RowMatrix d_z1 = ((d_z2 * params.w2).array() * silu_grad(f.z1)).matrix();
  g.grad.w1 = d_z1.transpose() * rows.input;
  g.grad.b1 = d_z1.colwise().sum().transpose();
  return g;
}

std::vector<Example> sample_batch(std::span<const LatticeState> dataset, const ProblemShape& shape,
                                  const TrainConfig& config, Rng& rng) {
  std::vector<Example> batch;
  batch.reserve(static_cast<std::size_t>(config.batch_size));
  for (int b = 0; b < config.batch_size; ++b) {
    const LatticeState& x0 = dataset[uniform_index(rng, dataset.size())];
    // (t_min, t_max]: 1 - u lies in (0, 1].
    const double t = config.t_min + (config.t_max - config.t_min) * (1.0 - uniform01(rng));
    const Eigen::MatrixXd kern = lattice::per_dim_kernel(shape.states(), t);
    LatticeState xt = x0;
    for (int l = 0; l < shape.dims(); ++l) {
      double u = uniform01(rng);
      int pick = shape.states() - 1;
      for (int s = 0; s < shape.states(); ++s) {
        if (u < kern(x0[l], s)) {
          pick = s;
          break;
        }
        u -= kern(x0[l], s);
      }
      xt[l] = static_cast<LatticeState::Digit>(pick);
    }
    const int head = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(shape.dims())));
    batch.push_back({std::move(xt), t, head});
  }
  return batch;
}

TrainResult train(const ProblemShape& shape, std::span<const LatticeState> dataset, const TrainConfig& config) {
  if (dataset.empty()) throw InvalidArgument("train: empty dataset");
  if (!(config.learning_rate > 0.0) || config.batch_size < 1 || config.iterations < 1) {
    throw InvalidArgument("train: learning rate, batch size and iteration count must be positive");
  }
  if (!(config.t_min >= 0.0) || !(config.t_max > config.t_min) || config.t_max > 1.0) {
    throw InvalidArgument("train: need 0 <= t_min < t_max <= 1");
  }
  for (const auto& s : dataset) lattice::validate_state(shape, s);

  Rng rng(derive_seed(config.seed, SeedPurpose::kTraining));
  TrainResult result{MlpParams::init(shape, derive_seed(config.seed, SeedPurpose::kTraining, 1), config.width), {}};
  MlpParams& p = result.params;
  MlpParams m1 = zeros_like(p), m2 = zeros_like(p);
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  const double ceiling = 10.0 * std::log(double(shape.states()));

  result.loss_curve.reserve(static_cast<std::size_t>(config.iterations));
  for (long it = 1; it <= config.iterations; ++it) {
    const auto batch = sample_batch(dataset, shape, config, rng);
    Gradient g = loss_and_grad(p, batch);
    if (!std::isfinite(g.loss) || (it > config.warmup && g.loss > ceiling)) {
      throw TrainingDiverged("training diverged at iteration " + std::to_string(it) + " (loss " +
                             io::format_double(g.loss) + ")");
    }
    result.loss_curve.push_back(g.loss);

    const double c1 = 1.0 - std::pow(beta1, double(it));
    const double c2 = 1.0 - std::pow(beta2, double(it));
    // Walk the six tensors of p, g, m1, m2 in lockstep.
    std::vector<std::pair<double*, Eigen::Index>> tp, tg, ta, tb;
    for_each_tensor(p, [&](double* d, Eigen::Index n) { tp.emplace_back(d, n); });
    for_each_tensor(g.grad, [&](double* d, Eigen::Index n) { tg.emplace_back(d, n); });
    for_each_tensor(m1, [&](double* d, Eigen::Index n) { ta.emplace_back(d, n); });
    for_each_tensor(m2, [&](double* d, Eigen::Index n) { tb.emplace_back(d, n); });
    for (std::size_t k = 0; k < tp.size(); ++k) {
      Eigen::Map<Eigen::ArrayXd> w(tp[k].first, tp[k].second), gr(tg[k].first, tg[k].second),
          a(ta[k].first, ta[k].second), b(tb[k].first, tb[k].second);
      a = beta1 * a + (1.0 - beta1) * gr;
      b = beta2 * b + (1.0 - beta2) * gr.square();
      w -= config.learning_rate * (a / c1) / ((b / c2).sqrt() + adam_eps);
    }
  }
  if (!p.all_finite()) throw TrainingDiverged("training produced non-finite parameters");
  return result;
}

Eigen::MatrixXd ModelConditionals::conditionals(const LatticeState& i, double t) const {
  return model_conditionals(params_, i, t);
}

double mean_conditional_tv(const lattice::ConditionalSource& a, const lattice::ConditionalSource& b,
                           std::span<const Probe> probes) {
  if (probes.empty()) throw InvalidArgument("mean_conditional_tv: no probes");
  double total = 0.0;
  long count = 0;
  for (const auto& pr : probes) {
    const Eigen::MatrixXd ca = a.conditionals(pr.state, pr.t);
    const Eigen::MatrixXd cb = b.conditionals(pr.state, pr.t);
    total += 0.5 * (ca - cb).cwiseAbs().rowwise().sum().sum();
    count += ca.rows();
  }
  return total / double(count);
}

std::string checkpoint_json(const MlpParams& params) {
  auto matrix = [](const Eigen::MatrixXd& m) {
    std::vector<double> flat(m.data(), m.data() + m.size());
    return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
  };
  auto vector = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json j;
  j["format"] = "dpf-mlp";
  j["version"] = 1;
  j["K"] = params.dims;
  j["S"] = params.states;
  j["width"] = params.width;
  j["time_features"] = kTimeFeatures;
  j["activation"] = "silu";
  j["layout"] = "column-major";
  j["layers"] = nlohmann::json::array({
      {{"weight", matrix(params.w1)}, {"bias", vector(params.b1)}},
      {{"weight", matrix(params.w2)}, {"bias", vector(params.b2)}},
      {{"weight", matrix(params.w3)}, {"bias", vector(params.b3)}},
  });
  return j.dump() + "\n";
}

MlpParams parse_checkpoint(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataIntegrityError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format") != "dpf-mlp" || j.at("version") != 1) throw DataIntegrityError("unsupported checkpoint format");
    if (j.at("time_features") != kTimeFeatures) throw DataIntegrityError("checkpoint time features mismatch");
    MlpParams p;
    p.dims = j.at("K");
    p.states = j.at("S");
    p.width = j.at("width");
    const ProblemShape shape(p.dims, p.states);
    auto load_layer = [&](const nlohmann::json& layer, Eigen::MatrixXd& w, Eigen::VectorXd& b, Eigen::Index rows,
                          Eigen::Index cols) {
      const auto& wj = layer.at("weight");
      if (wj.at("rows") != rows || wj.at("cols") != cols) throw DataIntegrityError("checkpoint layer shape mismatch");
      const auto data = wj.at("data").get<std::vector<double>>();
      const auto bias = layer.at("bias").get<std::vector<double>>();
      if (data.size() != static_cast<std::size_t>(rows * cols) || bias.size() != static_cast<std::size_t>(rows)) {
        throw DataIntegrityError("checkpoint tensor has the wrong length");
      }
      w = Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
      b = Eigen::Map<const Eigen::VectorXd>(bias.data(), rows);
    };
    const auto& layers = j.at("layers");
    if (layers.size() != 3) throw DataIntegrityError("checkpoint must have three layers");
    load_layer(layers[0], p.w1, p.b1, p.width, p.input_size());
    load_layer(layers[1], p.w2, p.b2, p.width, p.width);
    load_layer(layers[2], p.w3, p.b3, p.dims * p.states, p.width);
    if (!p.all_finite()) throw DataIntegrityError("checkpoint contains non-finite parameters");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataIntegrityError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params) {
  io::write_text(path, checkpoint_json(params));
}

MlpParams load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(io::read_text(path)); }

std::string loss_curve_csv(std::span<const double> curve) {
  std::string out = "iteration,loss\n";
  for (std::size_t k = 0; k < curve.size(); ++k) out += std::to_string(k + 1) + ',' + io::format_double(curve[k]) + '\n';
  return out;
}

}  // namespace dpf::condmodel
