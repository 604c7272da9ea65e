#include "datamark/synth.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace datamark {

Dataset synth_tensor_dataset(int num_classes, int n_per_class, TensorShape shape,
                             double sep, std::uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
  if (n_per_class < 1) throw std::invalid_argument("n_per_class must be >= 1");
  if (shape.c <= 0 || shape.h <= 0 || shape.w <= 0)
    throw std::invalid_argument("invalid tensor shape (zero dimension)");
  if (!(sep > 0.0)) throw std::invalid_argument("sep must be > 0");

  Rng root(seed);
  Rng mean_rng = root.split(0);
  Rng noise_rng = root.split(1);
  const double sigma = 0.5 / sep;
  const int dim = shape.size();

  // Class means live in [0.2, 0.8] so clamping stays mild and a unit-valued
  // patch remains clearly above any natural pixel distribution.
  std::vector<ArrayX> means;
  means.reserve(static_cast<std::size_t>(num_classes));
  for (int k = 0; k < num_classes; ++k) {
    ArrayX mu(dim);
    for (int i = 0; i < dim; ++i) mu[i] = 0.2 + 0.6 * mean_rng.next_double();
    means.push_back(std::move(mu));
  }

  Dataset d;
  d.meta.modality = Modality::Tensor;
  d.meta.num_classes = num_classes;
  d.meta.shape = shape;
  d.samples.reserve(static_cast<std::size_t>(num_classes * n_per_class));
  for (int k = 0; k < num_classes; ++k) {
    for (int j = 0; j < n_per_class; ++j) {
      DenseTensor t;
      t.shape = shape;
      t.values.resize(dim);
      for (int i = 0; i < dim; ++i) {
        double v = means[static_cast<std::size_t>(k)][i] + sigma * noise_rng.normal();
        t.values[i] = std::clamp(v, 0.0, 1.0);
      }
      d.samples.push_back({Payload{std::move(t)}, k});
    }
  }
  return d;
}

Dataset synth_token_dataset(int num_classes, int n_per_class, int vocab,
                            int seq_len, std::uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
  if (n_per_class < 1) throw std::invalid_argument("n_per_class must be >= 1");
  if (vocab <= num_classes) throw std::invalid_argument("vocab must exceed num_classes");
  if (seq_len < 4) throw std::invalid_argument("seq_len must be >= 4");

  Rng rng = Rng(seed).split(2);
  // Class signal: tokens [k*slice, (k+1)*slice) are over-represented in class k.
  const int slice = std::max(1, vocab / (4 * num_classes));

  // Background tokens follow a Zipf law, so high ids are rare the way rare
  // words are in natural text.
  std::vector<double> cumulative(static_cast<std::size_t>(vocab));
  double total = 0.0;
  for (int r = 0; r < vocab; ++r) {
    total += 1.0 / static_cast<double>(r + 1);
    cumulative[static_cast<std::size_t>(r)] = total;
  }
  auto draw_background = [&](Rng& r) {
    double u = r.next_double() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    return static_cast<std::int32_t>(it - cumulative.begin());
  };

  Dataset d;
  d.meta.modality = Modality::Tokens;
  d.meta.num_classes = num_classes;
  d.meta.vocab = vocab;
  d.samples.reserve(static_cast<std::size_t>(num_classes * n_per_class));
  for (int k = 0; k < num_classes; ++k) {
    for (int j = 0; j < n_per_class; ++j) {
      TokenSeq s;
      s.ids.reserve(static_cast<std::size_t>(seq_len));
      for (int i = 0; i < seq_len; ++i) {
        std::int32_t id;
        if (rng.next_double() < 0.5) {
          id = static_cast<std::int32_t>(k * slice + rng.uniform_int(slice));
        } else {
          id = draw_background(rng);
        }
        s.ids.push_back(id);
      }
      d.samples.push_back({Payload{std::move(s)}, k});
    }
  }
  return d;
}

Dataset synth_graph_dataset(int num_classes, int n_per_class,
                            std::pair<int, int> nodes_range,
                            const std::vector<double>& edge_prob_per_class,
                            std::uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
  if (n_per_class < 1) throw std::invalid_argument("n_per_class must be >= 1");
  if (static_cast<int>(edge_prob_per_class.size()) != num_classes)
    throw std::invalid_argument("need one edge probability per class");
  std::set<double> distinct(edge_prob_per_class.begin(), edge_prob_per_class.end());
  if (static_cast<int>(distinct.size()) != num_classes)
    throw std::invalid_argument("edge probabilities must be distinct");
  for (double p : edge_prob_per_class) {
    if (!(p > 0.0 && p < 1.0))
      throw std::invalid_argument("edge probabilities must lie in (0,1)");
  }
  if (nodes_range.first < 1 || nodes_range.second < nodes_range.first)
    throw std::invalid_argument("invalid node count range");

  Rng rng = Rng(seed).split(3);
  Dataset d;
  d.meta.modality = Modality::Graph;
  d.meta.num_classes = num_classes;
  d.samples.reserve(static_cast<std::size_t>(num_classes * n_per_class));
  const int span = nodes_range.second - nodes_range.first + 1;
  for (int k = 0; k < num_classes; ++k) {
    const double p = edge_prob_per_class[static_cast<std::size_t>(k)];
    for (int j = 0; j < n_per_class; ++j) {
      GraphData g;
      g.num_nodes = nodes_range.first + rng.uniform_int(span);
      for (int u = 0; u < g.num_nodes; ++u) {
        for (int v = u + 1; v < g.num_nodes; ++v) {
          if (rng.next_double() < p) g.edges.emplace_back(u, v);
        }
      }
      d.samples.push_back({Payload{std::move(g)}, k});
    }
  }
  return d;
}

VectorX graph_degree_histogram(const GraphData& g, int bins, int degree_cap) {
  if (bins < 2) throw std::invalid_argument("bins must be >= 2");
  if (degree_cap < 0) throw std::invalid_argument("degree_cap must be >= 0");
  VectorX hist = VectorX::Zero(bins);
  if (g.num_nodes == 0) return hist;
  auto deg = g.degrees();
  for (int dgr : deg) {
    int capped = std::min(dgr, degree_cap);
    int bin = static_cast<int>(static_cast<long long>(capped) * bins / (degree_cap + 1));
    hist[bin] += 1.0;
  }
  hist /= static_cast<double>(g.num_nodes);
  return hist;
}

}  // namespace datamark
