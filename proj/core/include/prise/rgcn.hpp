#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "prise/autograd.hpp"
#include "prise/dataset.hpp"
#include "prise/tensor.hpp"

namespace prise {

/// Fully connected undirected person graph for one image. Edges are kept
/// once per unordered pair in lexicographic (i, j) order, i < j.
struct PersonGraph {
  std::int64_t n_persons = 0;
  std::vector<Tensor> node_features;  // N vectors of dimension F
  std::vector<std::pair<std::int64_t, std::int64_t>> edge_list;
};

/// Learnable weights: the input projection w plus one matrix per layer
/// step W^0..W^T. depth() is T.
struct RgcnParams {
  Tensor input_projection;            // F x F
  std::vector<Tensor> layer_weights;  // T + 1 matrices, each F x F

  std::int64_t depth() const { return static_cast<std::int64_t>(layer_weights.size()) - 1; }
  std::int64_t feature_dim() const { return input_projection.rank() == 2 ? input_projection.rows() : 0; }
};

/// Forward results with plain tensors: per-layer node embeddings h^t and
/// edge features r^t for t = 0..T, plus the fused per-pair features.
struct GraphState {
  std::vector<std::vector<Tensor>> node_embeddings;  // [t][node]
  std::vector<std::vector<Tensor>> edge_features;    // [t][pair]
  std::vector<Tensor> fused_edges;                   // [pair]
};

/// Same structure with tape handles, for training.
struct GraphStateValues {
  std::vector<std::vector<Value>> node_embeddings;
  std::vector<std::vector<Value>> edge_features;
  std::vector<Value> fused_edges;
};

/// Tape handles for the parameters, so one set of tensors can be shared
/// across the per-image forward passes of a batch.
struct RgcnParamValues {
  Value input_projection;
  std::vector<Value> layer_weights;
};

PersonGraph build_graph(const ImageRecord& record);

/// Seeded uniform init in +-sqrt(6 / (2F)) per matrix.
RgcnParams init_rgcn_params(std::int64_t feature_dim, std::int64_t depth, std::uint64_t seed);

RgcnParamValues lift_params(Tape& tape, const RgcnParams& params, bool trainable);

/// One edge feature: ReLU(W_t h_i + W_t h_j). Symmetric in (i, j).
Tensor edge_update(const Tensor& h_i, const Tensor& h_j, const Tensor& w_t);
Value edge_update(Value h_i, Value h_j, Value w_t);

/// Residual node step: h_i + ReLU(W_t h_i + sum_j r_ij ⊙ W_t h_j). The
/// neighbor lists must cover exactly all other nodes of the graph; the
/// sum runs in the order given (callers keep it ascending by node id).
Tensor node_update(const Tensor& h_i, const std::vector<Tensor>& neighbor_h,
                   const std::vector<Tensor>& neighbor_r, const Tensor& w_t);
Value node_update(Value h_i, const std::vector<Value>& neighbor_h,
                  const std::vector<Value>& neighbor_r, Value w_t);

/// Full forward: h^0 = w x_i, then T rounds of edge + node updates, one
/// final edge pass, and element-wise max fusion over all T+1 edge sets.
GraphStateValues rgcn_forward(Tape& tape, const PersonGraph& graph,
                              const RgcnParamValues& params);

/// Convenience wrapper running on a private tape with constant inputs.
GraphState rgcn_forward(const PersonGraph& graph, const RgcnParams& params);

}  // namespace prise
