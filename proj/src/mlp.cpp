#include "datamark/mlp.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace datamark {

using nlohmann::json;

void MlpParams::validate() const {
  if (dims.size() < 2) throw std::invalid_argument("model needs input and output dims");
  if (weights.size() != dims.size() - 1 || biases.size() != dims.size() - 1)
    throw std::invalid_argument("layer count does not match dims");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != dims[l + 1] || weights[l].cols() != dims[l])
      throw std::invalid_argument("weight matrix shape does not chain with dims");
    if (biases[l].size() != dims[l + 1])
      throw std::invalid_argument("bias length does not match dims");
    if (!weights[l].allFinite() || !biases[l].allFinite())
      throw std::invalid_argument("model parameters must be finite");
  }
  for (int d : dims) {
    if (d <= 0) throw std::invalid_argument("dims must be positive");
  }
}

bool operator==(const MlpParams& a, const MlpParams& b) {
  if (a.dims != b.dims) return false;
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    if (!(a.weights[l].array() == b.weights[l].array()).all()) return false;
    if (!(a.biases[l].array() == b.biases[l].array()).all()) return false;
  }
  return true;
}

json TrainConfig::to_json() const {
  json j;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["l2"] = l2;
  j["hidden"] = hidden;
  j["seed"] = seed;
  return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.l2 = j.at("l2").get<double>();
  c.hidden = j.at("hidden").get<std::vector<int>>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

MlpParams init_mlp(const std::vector<int>& dims, std::uint64_t seed) {
  MlpParams p;
  p.dims = dims;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    int fan_in = dims[l];
    int fan_out = dims[l + 1];
    double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    MatrixX w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) w(r, c) = rng.uniform(-scale, scale);
    }
    p.weights.push_back(std::move(w));
    p.biases.push_back(VectorX::Zero(fan_out));
  }
  p.validate();
  return p;
}

VectorX softmax(const VectorX& logits) {
  VectorX z = logits.array() - logits.maxCoeff();
  VectorX e = z.array().exp();
  return e / e.sum();
}

int argmax_lowest(const VectorX& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

namespace {

// Row-wise forward pass keeping every pre-activation for backprop.
struct ForwardTrace {
  std::vector<MatrixX> pre;   // Z_l, one per layer
  std::vector<MatrixX> post;  // A_0 = X, then ReLU(Z_l) for hidden layers
  MatrixX probs;              // softmax of the last pre-activation
};

ForwardTrace forward_batch(const MlpParams& p, const MatrixX& features) {
  ForwardTrace t;
  t.post.push_back(features);
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    MatrixX z = t.post.back() * p.weights[l].transpose();
    z.rowwise() += p.biases[l].transpose();
    t.pre.push_back(z);
    if (l + 1 < p.num_layers()) t.post.push_back(z.cwiseMax(0.0));
  }
  const MatrixX& logits = t.pre.back();
  MatrixX shifted = logits.colwise() - logits.rowwise().maxCoeff();
  MatrixX e = shifted.array().exp();
  t.probs = e.array().colwise() / e.rowwise().sum().array();
  return t;
}

double weight_penalty(const MlpParams& p, double l2) {
  if (l2 == 0.0) return 0.0;
  double sq = 0.0;
  for (const auto& w : p.weights) sq += w.squaredNorm();
  return 0.5 * l2 * sq;
}

}  // namespace

double mlp_loss(const MlpParams& p, const MatrixX& features,
                const std::vector<int>& labels, double l2) {
  auto t = forward_batch(p, features);
  const auto n = static_cast<Eigen::Index>(labels.size());
  double nll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double prob = std::max(t.probs(i, labels[static_cast<std::size_t>(i)]), 1e-300);
    nll -= std::log(prob);
  }
  return nll / static_cast<double>(n) + weight_penalty(p, l2);
}

MlpGradients mlp_loss_gradients(const MlpParams& p, const MatrixX& features,
                                const std::vector<int>& labels, double l2) {
  auto t = forward_batch(p, features);
  const auto n = static_cast<Eigen::Index>(labels.size());
  const auto layers = p.num_layers();

  MlpGradients g;
  g.weights.resize(layers);
  g.biases.resize(layers);

  // dL/dZ for the softmax + cross-entropy head.
  MatrixX dz = t.probs;
  for (Eigen::Index i = 0; i < n; ++i)
    dz(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  dz /= static_cast<double>(n);

  for (std::size_t l = layers; l-- > 0;) {
    g.weights[l] = dz.transpose() * t.post[l];
    if (l2 != 0.0) g.weights[l] += l2 * p.weights[l];
    g.biases[l] = dz.colwise().sum().transpose();
    if (l > 0) {
      MatrixX da = dz * p.weights[l];
      dz = da.array() * (t.pre[l - 1].array() > 0.0).cast<double>();
    }
  }
  return g;
}

namespace {

MatrixX featurize_all(const Dataset& d, const Featurizer& feat) {
  const auto n = static_cast<Eigen::Index>(d.size());
  MatrixX x(n, feat.feature_dim());
  for (Eigen::Index i = 0; i < n; ++i)
    x.row(i) = feat(d.samples[static_cast<std::size_t>(i)].payload).transpose();
  return x;
}

void check_train_inputs(const Dataset& d, const Featurizer& feat,
                        const TrainConfig& cfg, bool allow_zero_epochs) {
  if (d.samples.empty()) throw std::invalid_argument("training dataset is empty");
  if (d.meta.modality != feat.modality)
    throw std::invalid_argument("featurizer modality does not match dataset");
  if (cfg.epochs < (allow_zero_epochs ? 0 : 1))
    throw std::invalid_argument("epochs must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!(cfg.learning_rate > 0.0))
    throw std::invalid_argument("learning rate must be > 0");
  if (cfg.l2 < 0.0) throw std::invalid_argument("l2 must be >= 0");
}

// One SGD pass over shuffled batches. update_from selects which layers move:
// 0 for full training, last layer index for fine-tuning.
double sgd_epoch(MlpParams& p, const MatrixX& x, const std::vector<int>& labels,
                 const TrainConfig& cfg, Rng& shuffle_rng, std::size_t update_from) {
  const auto n = static_cast<int>(labels.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  shuffle_rng.shuffle(order);

  double loss_sum = 0.0;
  for (int start = 0; start < n; start += cfg.batch_size) {
    int b = std::min(cfg.batch_size, n - start);
    MatrixX xb(b, x.cols());
    std::vector<int> yb(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i) {
      int src = order[static_cast<std::size_t>(start + i)];
      xb.row(i) = x.row(src);
      yb[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(src)];
    }
    loss_sum += mlp_loss(p, xb, yb, cfg.l2) * b;
    auto g = mlp_loss_gradients(p, xb, yb, cfg.l2);
    for (std::size_t l = update_from; l < p.num_layers(); ++l) {
      p.weights[l] -= cfg.learning_rate * g.weights[l];
      p.biases[l] -= cfg.learning_rate * g.biases[l];
    }
  }
  return loss_sum / static_cast<double>(n);
}

}  // namespace

TrainResult train(const Dataset& d, const Featurizer& feat, const TrainConfig& cfg) {
  check_train_inputs(d, feat, cfg, /*allow_zero_epochs=*/false);

  std::vector<int> dims;
  dims.push_back(feat.feature_dim());
  for (int h : cfg.hidden) {
    if (h <= 0) throw std::invalid_argument("hidden widths must be positive");
    dims.push_back(h);
  }
  dims.push_back(d.meta.num_classes);

  Rng root(cfg.seed);
  TrainResult out;
  out.params = init_mlp(dims, root.split(0).seed());

  MatrixX x = featurize_all(d, feat);
  std::vector<int> labels(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) labels[i] = d.samples[i].label;

  Rng shuffle_rng = root.split(1);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss = sgd_epoch(out.params, x, labels, cfg, shuffle_rng, 0);
    if (!std::isfinite(loss))
      throw std::runtime_error(
          "training diverged (non-finite loss); lower the learning rate");
    out.loss_trace.push_back(loss);
  }
  return out;
}

VectorX predict_proba(const MlpParams& p, const Featurizer& feat, const Payload& x) {
  if (feat.feature_dim() != p.input_dim())
    throw std::invalid_argument("featurizer dimension does not match model input");
  VectorX a = feat(x);
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    VectorX z = p.weights[l] * a + p.biases[l];
    a = (l + 1 < p.num_layers()) ? z.cwiseMax(0.0).eval() : z;
  }
  return softmax(a);
}

int predict_label(const MlpParams& p, const Featurizer& feat, const Payload& x) {
  return argmax_lowest(predict_proba(p, feat, x));
}

MlpParams finetune_last_layer(const MlpParams& p, const Dataset& d_sub,
                              const Featurizer& feat, const TrainConfig& cfg) {
  p.validate();
  check_train_inputs(d_sub, feat, cfg, /*allow_zero_epochs=*/true);
  if (feat.feature_dim() != p.input_dim())
    throw std::invalid_argument("featurizer dimension does not match model input");
  if (d_sub.meta.num_classes != p.num_classes())
    throw std::invalid_argument("dataset classes do not match model output");

  MlpParams tuned = p;
  if (cfg.epochs == 0) return tuned;

  MatrixX x = featurize_all(d_sub, feat);
  std::vector<int> labels(d_sub.size());
  for (std::size_t i = 0; i < d_sub.size(); ++i) labels[i] = d_sub.samples[i].label;

  Rng shuffle_rng = Rng(cfg.seed).split(1);
  std::size_t last = tuned.num_layers() - 1;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss = sgd_epoch(tuned, x, labels, cfg, shuffle_rng, last);
    if (!std::isfinite(loss))
      throw std::runtime_error(
          "fine-tuning diverged (non-finite loss); lower the learning rate");
  }
  return tuned;
}

void save_model(const MlpParams& p, const Featurizer& feat, const std::string& path) {
  p.validate();
  json j;
  j["schema_version"] = 1;
  j["kind"] = "mlp";
  j["featurizer"] = feat.to_json();
  j["dims"] = p.dims;
  json layers = json::array();
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    json layer;
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(p.weights[l].size()));
    for (Eigen::Index r = 0; r < p.weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < p.weights[l].cols(); ++c)
        w.push_back(p.weights[l](r, c));
    }
    layer["w"] = w;  // row-major
    layer["b"] = std::vector<double>(p.biases[l].data(),
                                     p.biases[l].data() + p.biases[l].size());
    layers.push_back(std::move(layer));
  }
  j["layers"] = layers;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump() << "\n";
}

std::pair<MlpParams, Featurizer> load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("corrupt model file: ") + e.what());
  }
  if (j.value("schema_version", 0) != 1 || j.value("kind", "") != "mlp")
    throw std::runtime_error("unsupported model file schema");

  MlpParams p;
  p.dims = j.at("dims").get<std::vector<int>>();
  const auto& layers = j.at("layers");
  if (layers.size() + 1 != p.dims.size())
    throw std::runtime_error("model layer count does not match dims header");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto w = layers[l].at("w").get<std::vector<double>>();
    auto b = layers[l].at("b").get<std::vector<double>>();
    const int rows = p.dims[l + 1];
    const int cols = p.dims[l];
    if (static_cast<int>(w.size()) != rows * cols ||
        static_cast<int>(b.size()) != rows)
      throw std::runtime_error("model layer size does not match dims header");
    MatrixX wm(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c)
        wm(r, c) = w[static_cast<std::size_t>(r * cols + c)];
    }
    p.weights.push_back(std::move(wm));
    p.biases.push_back(Eigen::Map<const VectorX>(b.data(), rows));
  }
  try {
    p.validate();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("invalid model file: ") + e.what());
  }
  return {std::move(p), Featurizer::from_json(j.at("featurizer"))};
}

}  // namespace datamark
