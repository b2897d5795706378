#pragma once

#include <cstdint>

#include "stec/tensor.hpp"

namespace stec {

// Parameters of the semi-adaptive graph convolution branch. The freely
// learned adjacency `A` carries no structural constraint (it may be negative
// or asymmetric) and is added to the data-computed similarity graph.
struct SemiAdaptiveGraphParams {
    TensorPtr A;              // [V, V] learned graph
    TensorPtr w_f, b_f;       // 1 -> C_in channel expansion, shared across nodes
    TensorPtr w_phi, b_phi;   // C_in -> C_mid node embedding
    TensorPtr w_psi, b_psi;   // C_in -> C_mid node embedding
    TensorPtr w_g, b_g;       // C_in -> C_out, graph-mixed path
    TensorPtr w_h, b_h;       // C_in -> C_out, direct path
};

struct GraphPair {
    TensorPtr gc;   // [V, V] row-stochastic computed graph
    TensorPtr gsa;  // [V, V] gc + A
};

// Expands each variable's single channel into C_in channels with a shared
// temporal convolution. x is [V, T]; output is [C_in, V, T].
TensorPtr node_expand(const TensorPtr& x, const SemiAdaptiveGraphParams& params);

// Row-softmax of pairwise node-embedding dot products: node i's embedding is
// the flattened [C_mid, T] output of w_phi, compared against w_psi embeddings.
TensorPtr computed_graph(const TensorPtr& v_nodes, const SemiAdaptiveGraphParams& params);

// z = conv_h(u) + conv_g(u) mixed over the node axis by G_sa = G_c + A.
// x is [V, T]; output is [C_out, V, T].
TensorPtr gcm_forward(const TensorPtr& x, const SemiAdaptiveGraphParams& params);

GraphPair semi_adaptive_graph(const TensorPtr& v_nodes,
                              const SemiAdaptiveGraphParams& params);

}  // namespace stec
