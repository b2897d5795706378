#include "stec/graph_module.hpp"

namespace stec {

namespace {

// Per-node convolution with shared weights: nodes become the batch axis.
TensorPtr node_conv(const TensorPtr& u_nodes_first, const TensorPtr& w, const TensorPtr& b) {
    return conv1d(u_nodes_first, w, b, PadMode::Replicate);
}

}  // namespace

TensorPtr node_expand(const TensorPtr& x, const SemiAdaptiveGraphParams& params) {
    if (x->shape.size() != 2) throw TensorError("node_expand: input must be [V, T]");
    std::int64_t V = x->shape[0], T = x->shape[1];
    auto as_batch = reshape(x, {V, 1, T});
    auto expanded = node_conv(as_batch, params.w_f, params.b_f);  // [V, C_in, T]
    return permute3d(expanded, 1, 0, 2);                          // [C_in, V, T]
}

TensorPtr computed_graph(const TensorPtr& v_nodes, const SemiAdaptiveGraphParams& params) {
    if (v_nodes->shape.size() != 3)
        throw TensorError("computed_graph: input must be [C_in, V, T]");
    std::int64_t V = v_nodes->shape[1], T = v_nodes->shape[2];
    std::int64_t c_mid = params.w_phi->shape[0];
    auto per_node = permute3d(v_nodes, 1, 0, 2);  // [V, C_in, T]
    auto phi = reshape(node_conv(per_node, params.w_phi, params.b_phi), {V, c_mid * T});
    auto psi = reshape(node_conv(per_node, params.w_psi, params.b_psi), {V, c_mid * T});
    auto logits = matmul(phi, transpose2d(psi));  // [V, V]
    return softmax(logits, 1);
}

GraphPair semi_adaptive_graph(const TensorPtr& v_nodes,
                              const SemiAdaptiveGraphParams& params) {
    auto gc = computed_graph(v_nodes, params);
    return GraphPair{gc, add(gc, params.A)};
}

TensorPtr gcm_forward(const TensorPtr& x, const SemiAdaptiveGraphParams& params) {
    std::int64_t V = x->shape[0], T = x->shape[1];
    std::int64_t c_out = params.w_g->shape[0];
    auto u = node_expand(x, params);                  // [C_in, V, T]
    auto per_node = permute3d(u, 1, 0, 2);            // [V, C_in, T]
    auto direct = node_conv(per_node, params.w_h, params.b_h);  // [V, C_out, T]
    auto mixed_in = node_conv(per_node, params.w_g, params.b_g);
    auto gsa = semi_adaptive_graph(u, params).gsa;
    // Node mixing: output node i is the G_sa(i, .)-weighted sum of input
    // nodes, applied per channel and time step.
    auto mixed = matmul(gsa, reshape(mixed_in, {V, c_out * T}));
    auto z = add(direct, reshape(mixed, {V, c_out, T}));
    return permute3d(z, 1, 0, 2);  // [C_out, V, T]
}

}  // namespace stec
