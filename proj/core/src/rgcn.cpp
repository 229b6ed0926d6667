#include "prise/rgcn.hpp"

#include <cmath>

#include "prise/rng.hpp"

namespace prise {

PersonGraph build_graph(const ImageRecord& record) {
  const std::int64_t n = record.n_persons;
  if (n < 1) throw DataError("build_graph: image " + record.image_id + " has no persons");
  if (static_cast<std::int64_t>(record.person_features.size()) != n)
    throw DataError("build_graph: image " + record.image_id + " has " +
                    std::to_string(record.person_features.size()) + " person features for n=" +
                    std::to_string(n));
  const std::int64_t f = record.person_features.front().size();
  for (const Tensor& x : record.person_features)
    if (x.rank() != 1 || x.size() != f)
      throw DataError("build_graph: image " + record.image_id +
                      " has inconsistent person feature dimensions");
  PersonGraph g;
  g.n_persons = n;
  g.node_features = record.person_features;
  g.edge_list = all_pairs(n);
  return g;
}

RgcnParams init_rgcn_params(std::int64_t feature_dim, std::int64_t depth, std::uint64_t seed) {
  if (feature_dim < 1) throw Error("init_rgcn_params: feature_dim must be positive");
  if (depth < 0) throw Error("init_rgcn_params: depth must be non-negative");
  const double bound = std::sqrt(6.0 / (2.0 * static_cast<double>(feature_dim)));
  auto draw = [&](std::uint64_t s) {
    Rng rng(s);
    Tensor w = Tensor::zeros({feature_dim, feature_dim});
    double* d = w.mutable_data();
    for (std::int64_t i = 0; i < w.size(); ++i) d[i] = rng.uniform(-bound, bound);
    return w;
  };
  RgcnParams p;
  p.input_projection = draw(derive_seed(seed, "rgcn.input_projection"));
  for (std::int64_t t = 0; t <= depth; ++t)
    p.layer_weights.push_back(draw(derive_seed(seed, "rgcn.layer", t)));
  return p;
}

RgcnParamValues lift_params(Tape& tape, const RgcnParams& params, bool trainable) {
  RgcnParamValues v;
  v.input_projection = trainable ? tape.parameter(params.input_projection)
                                 : tape.constant(params.input_projection);
  for (const Tensor& w : params.layer_weights)
    v.layer_weights.push_back(trainable ? tape.parameter(w) : tape.constant(w));
  return v;
}

Tensor edge_update(const Tensor& h_i, const Tensor& h_j, const Tensor& w_t) {
  return relu(add(matmul(w_t, h_i), matmul(w_t, h_j)));
}

Value edge_update(Value h_i, Value h_j, Value w_t) {
  return relu(add(matmul(w_t, h_i), matmul(w_t, h_j)));
}

Tensor node_update(const Tensor& h_i, const std::vector<Tensor>& neighbor_h,
                   const std::vector<Tensor>& neighbor_r, const Tensor& w_t) {
  if (neighbor_h.size() != neighbor_r.size())
    throw ShapeError("node_update: " + std::to_string(neighbor_h.size()) + " neighbor features vs " +
                     std::to_string(neighbor_r.size()) + " edge features");
  Tensor inner = matmul(w_t, h_i);
  if (!neighbor_h.empty()) {
    Tensor msg = mul(neighbor_r[0], matmul(w_t, neighbor_h[0]));
    for (std::size_t k = 1; k < neighbor_h.size(); ++k)
      msg = add(msg, mul(neighbor_r[k], matmul(w_t, neighbor_h[k])));
    inner = add(inner, msg);
  }
  return add(h_i, relu(inner));
}

Value node_update(Value h_i, const std::vector<Value>& neighbor_h,
                  const std::vector<Value>& neighbor_r, Value w_t) {
  if (neighbor_h.size() != neighbor_r.size())
    throw ShapeError("node_update: " + std::to_string(neighbor_h.size()) + " neighbor features vs " +
                     std::to_string(neighbor_r.size()) + " edge features");
  Value inner = matmul(w_t, h_i);
  if (!neighbor_h.empty()) {
    Value msg = mul(neighbor_r[0], matmul(w_t, neighbor_h[0]));
    for (std::size_t k = 1; k < neighbor_h.size(); ++k)
      msg = add(msg, mul(neighbor_r[k], matmul(w_t, neighbor_h[k])));
    inner = add(inner, msg);
  }
  return add(h_i, relu(inner));
}

GraphStateValues rgcn_forward(Tape& tape, const PersonGraph& graph,
                              const RgcnParamValues& params) {
  const std::int64_t n = graph.n_persons;
  const std::int64_t depth = static_cast<std::int64_t>(params.layer_weights.size()) - 1;
  if (depth < 0) throw Error("rgcn_forward: no layer weights");

  GraphStateValues state;
  state.node_embeddings.emplace_back();
  for (std::int64_t i = 0; i < n; ++i) {
    Value x = tape.constant(graph.node_features[static_cast<std::size_t>(i)]);
    state.node_embeddings.back().push_back(matmul(params.input_projection, x));
  }

  for (std::int64_t t = 0; t <= depth; ++t) {
    const Value w = params.layer_weights[static_cast<std::size_t>(t)];
    const std::vector<Value>& h = state.node_embeddings.back();

    // W^t h_i is shared between the edge update and every message that
    // node i sends, so compute it once per node.
    std::vector<Value> p;
    p.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) p.push_back(matmul(w, h[static_cast<std::size_t>(i)]));

    std::vector<Value> edges;
    edges.reserve(graph.edge_list.size());
    for (const auto& [i, j] : graph.edge_list)
      edges.push_back(relu(add(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)])));
    state.edge_features.push_back(edges);

    if (t == depth) break;  // the final layer only refreshes edge features

    std::vector<Value> next;
    next.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
      Value inner = p[static_cast<std::size_t>(i)];
      bool first = true;
      Value msg;
      for (std::int64_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const std::int64_t e = pair_index(n, std::min(i, j), std::max(i, j));
        Value gated = mul(state.edge_features.back()[static_cast<std::size_t>(e)],
                          p[static_cast<std::size_t>(j)]);
        msg = first ? gated : add(msg, gated);
        first = false;
      }
      if (!first) inner = add(inner, msg);
      next.push_back(add(h[static_cast<std::size_t>(i)], relu(inner)));
    }
    state.node_embeddings.push_back(std::move(next));
  }

  for (std::size_t e = 0; e < graph.edge_list.size(); ++e) {
    std::vector<Value> layers;
    layers.reserve(state.edge_features.size());
    for (const auto& per_layer : state.edge_features) layers.push_back(per_layer[e]);
    state.fused_edges.push_back(max_list(layers));
  }
  return state;
}

GraphState rgcn_forward(const PersonGraph& graph, const RgcnParams& params) {
  Tape tape;
  RgcnParamValues pv = lift_params(tape, params, false);
  GraphStateValues sv = rgcn_forward(tape, graph, pv);
  GraphState out;
  for (const auto& layer : sv.node_embeddings) {
    out.node_embeddings.emplace_back();
    for (const Value& v : layer) out.node_embeddings.back().push_back(v.value());
  }
  for (const auto& layer : sv.edge_features) {
    out.edge_features.emplace_back();
    for (const Value& v : layer) out.edge_features.back().push_back(v.value());
  }
  for (const Value& v : sv.fused_edges) out.fused_edges.push_back(v.value());
  return out;
}

}  // namespace prise
