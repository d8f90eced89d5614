#pragma once

#include <cstdint>
#include <vector>

#include "dro/nn/tape.hpp"

namespace dro::nn {

// Every primitive records one node and computes each output row from the
// corresponding input rows only, in a fixed accumulation order. Results for a
// row therefore do not depend on how many other rows are in the batch.

/// a [..., k] x b [k, m] -> [..., m].
Var matmul(Var a, Var b);
/// a [G, n, k] x b [G, k, m] -> [G, n, m]; with transpose_b, b is [G, m, k].
Var batched_matmul(Var a, Var b, bool transpose_b);
/// Elementwise sum. b either matches a's shape or a's trailing dimensions.
Var add(Var a, Var b);
Var scale(Var a, double s);
/// Normalizes over the last axis, then applies gamma and beta ([E] each).
Var layernorm(Var x, Var gamma, Var beta, double eps = 1e-5);
/// Softmax over the last axis. -inf entries get probability 0.
Var softmax(Var x);
/// tanh approximation.
Var gelu(Var x);
Var sigmoid(Var x);
/// Rows of table [V, E] at `indices` -> [indices.size(), E].
Var embed(Var table, const std::vector<std::size_t>& indices);
/// scores [B*heads, T, T]: sets entry (i, j) to -inf when j > i, or when key j
/// is padding (key_valid[b*T + j] == 0) and j != i. key_valid may be empty.
Var causal_mask(Var scores, std::size_t heads, const std::vector<std::uint8_t>& key_valid);
/// Inverted dropout: zeroes with probability p and scales survivors by 1/(1-p)
/// when train is set; identity otherwise.
Var dropout(Var x, double p, Rng& rng, bool train);
/// sum(w * (pred - target)^2) / sum(w), a scalar.
Var mse(Var pred, const Tensor& target, const Tensor& weights);
Var reshape(Var x, Shape shape);
/// [B, T, H*D] -> [B*H, T, D].
Var split_heads(Var x, std::size_t heads);
/// [B*H, T, D] -> [B, T, H*D].
Var merge_heads(Var x, std::size_t heads);
/// S streams of [B, T, E] -> [B, S*T, E], ordered (s_0 t_0, s_1 t_0, ..., s_0 t_1, ...).
Var interleave(const std::vector<Var>& streams);
/// [B, L, E] -> [B, L/stride, E], keeping positions offset, offset+stride, ...
Var select_tokens(Var x, std::size_t stride, std::size_t offset);
/// Sum of all elements, a scalar.
Var sum(Var x);

}  // namespace dro::nn
