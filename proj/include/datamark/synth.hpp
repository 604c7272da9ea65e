#pragma once

#include "datamark/dataset.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace datamark {

/// Gaussian-blob tensor classes: per class a mean image is drawn once, each
/// sample is mean plus i.i.d. noise of scale 0.5/sep, clamped to [0,1].
/// Larger sep means cleaner separation. Deterministic in all arguments.
Dataset synth_tensor_dataset(int num_classes, int n_per_class, TensorShape shape,
                             double sep, std::uint64_t seed);

/// Token sequences where class k draws roughly half its tokens from a
/// class-specific vocabulary slice and the rest uniformly from [0, vocab).
Dataset synth_token_dataset(int num_classes, int n_per_class, int vocab,
                            int seq_len, std::uint64_t seed);

/// Erdos-Renyi graphs, one edge probability per class (all distinct).
/// Node counts drawn uniformly from nodes_range (inclusive).
Dataset synth_graph_dataset(int num_classes, int n_per_class,
                            std::pair<int, int> nodes_range,
                            const std::vector<double>& edge_prob_per_class,
                            std::uint64_t seed);

/// Degree histogram over equal-width bins spanning degrees [0, degree_cap];
/// degrees above the cap land in the last bin. L1-normalized; an empty graph
/// yields the all-zero vector. Total function, never throws for bins >= 2.
VectorX graph_degree_histogram(const GraphData& g, int bins, int degree_cap);

}  // namespace datamark
