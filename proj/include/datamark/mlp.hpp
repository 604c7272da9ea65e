#pragma once

#include "datamark/featurizer.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace datamark {

/// Feed-forward classifier: ReLU hidden layers, softmax output.
/// Layer l maps dims[l] -> dims[l+1] via weights[l] (dims[l+1] x dims[l]).
struct MlpParams {
  std::vector<int> dims;
  std::vector<MatrixX> weights;
  std::vector<VectorX> biases;

  int input_dim() const { return dims.front(); }
  int num_classes() const { return dims.back(); }
  std::size_t num_layers() const { return weights.size(); }
  void validate() const;
};

bool operator==(const MlpParams& a, const MlpParams& b);

struct TrainConfig {
  int epochs = 30;
  int batch_size = 64;
  double learning_rate = 0.1;
  double l2 = 0.0;
  std::vector<int> hidden{64};
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainResult {
  MlpParams params;
  std::vector<double> loss_trace;  // mean training loss per epoch
};

/// Scaled-uniform initialization, scale 1/sqrt(fan_in), biases zero.
MlpParams init_mlp(const std::vector<int>& dims, std::uint64_t seed);

struct MlpGradients {
  std::vector<MatrixX> weights;
  std::vector<VectorX> biases;
};

/// Mean cross-entropy over the rows of features plus (l2/2) * sum ||W||^2.
double mlp_loss(const MlpParams& p, const MatrixX& features,
                const std::vector<int>& labels, double l2);

/// Analytic gradients of mlp_loss; the backprop core shared by train and
/// finetune_last_layer.
MlpGradients mlp_loss_gradients(const MlpParams& p, const MatrixX& features,
                                const std::vector<int>& labels, double l2);

/// Mini-batch SGD on mean cross-entropy. Pure function of
/// (dataset, featurizer, config): shuffling and initialization both derive
/// from cfg.seed. Throws if the loss turns non-finite.
TrainResult train(const Dataset& d, const Featurizer& feat, const TrainConfig& cfg);

/// Probability vector of length K; entries >= 0 and summing to 1.
VectorX predict_proba(const MlpParams& p, const Featurizer& feat, const Payload& x);

/// Argmax of predict_proba; ties break to the lowest class index.
int predict_label(const MlpParams& p, const Featurizer& feat, const Payload& x);

/// SGD restricted to the final layer; every hidden layer stays bit-identical
/// to the input model. cfg.epochs == 0 is allowed and returns the model
/// unchanged.
MlpParams finetune_last_layer(const MlpParams& p, const Dataset& d_sub,
                              const Featurizer& feat, const TrainConfig& cfg);

void save_model(const MlpParams& p, const Featurizer& feat, const std::string& path);
std::pair<MlpParams, Featurizer> load_model(const std::string& path);

/// Numerically stable softmax; shift-invariant in its input.
VectorX softmax(const VectorX& logits);

int argmax_lowest(const VectorX& v);

}  // namespace datamark
