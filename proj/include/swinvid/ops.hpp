#pragma once

#include <memory>
#include <vector>

#include "swinvid/array.hpp"

// Differentiable operations over Array. Every op returns a fresh Array and,
// when a Tape is active and an input requires grad, records a backward rule.
// Structural rearrangements (windowing, shifting, padding, head splits) all
// go through take() with a precomputed index map; -1 entries read as zero.

namespace swinvid {

using IndexMap = std::shared_ptr<const std::vector<int64_t>>;

Array add(const Array& a, const Array& b);
// b has the length of x's last dimension and is broadcast over the rest
Array add_bias(const Array& x, const Array& b);
Array mul(const Array& a, const Array& b);
// s matches x's shape minus the last dimension and is broadcast across it
Array mul_last(const Array& x, const Array& s);
Array scale(const Array& x, double c);
Array gelu(const Array& x);

// batched matrix product; leading dims must agree unless one operand is
// rank-2, which broadcasts across the other's batch
Array matmul(const Array& a, const Array& b);

Array softmax(const Array& x, size_t axis);
Array layer_norm(const Array& x, const Array& gamma, const Array& beta, double eps = 1e-5);

Array take(const Array& x, IndexMap idx, std::vector<size_t> out_shape);
Array reshape(const Array& x, std::vector<size_t> shape);
// [A, M, C] -> [A, C], averaging over the middle axis
Array mean_middle(const Array& x);
Array sum_all(const Array& x);

// elementwise clamp of coordinate components into [0, hi[c]] where c indexes
// the last dimension; gradient passes on the closed interval
Array clamp_per_last(const Array& x, std::vector<double> hi);

// mean negative log-likelihood of targets under softmax(logits), rows of
// logits are classes; numerically stable log-sum-exp
Array cross_entropy_mean(const Array& logits, const std::vector<int>& targets);

// scores [G, H, V, V] += table[idx[i*V+j], h]; idx entries index table rows
Array relpos_bias_add(const Array& scores, const Array& table,
                      std::shared_ptr<const std::vector<int32_t>> idx);

// scores [G, H, V, V] += mask[(g % num_windows), i, j]; mask carries no grad
Array add_window_mask(const Array& scores,
                      std::shared_ptr<const std::vector<double>> mask,
                      size_t num_windows);

// grid [G, Dt, Dh, Dw, H, C], coords [G, Q, H, N, 3] -> [G, Q, H, N, C].
// 8-corner interpolation, exact at integer coordinates, linear in the grid;
// gradients flow to both the grid and the coordinates.
Array trilinear_gather(const Array& grid, const Array& coords);

// x @ w + b over the last dimension; b may be invalid() to skip the bias
Array linear(const Array& x, const Array& w, const Array& b);

// reorderings expressed as index maps
IndexMap permute_map(const std::vector<size_t>& shape, const std::vector<size_t>& perm,
                     std::vector<size_t>* out_shape);
Array transpose_last2(const Array& x);

}  // namespace swinvid
