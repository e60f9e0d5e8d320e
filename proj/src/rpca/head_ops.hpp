#pragma once

#include <cstdint>
#include <cmath>

#include "rpca/regions.hpp"
#include "rpca/rng.hpp"
#include "rpca/tensor.hpp"

namespace rpca {

// Corner-aligned bilinear interpolation: source coordinate for output index i
// is i * (in - 1) / (out - 1), so the grid corners map onto each other. A 1-wide
// input axis broadcasts. Channels are interpolated independently.
template <typename T>
TensorT<T> upsample_bilinear(const TensorT<T>& fmap, int target_side = 32);

// Transpose of upsample_bilinear: scatters output-cell gradients onto the
// source cells with the same interpolation weights.
template <typename T>
TensorT<T> upsample_bilinear_backward(const TensorT<T>& dout, int in_h, int in_w);

// Nearest-neighbor variant, provided for ablation.
template <typename T>
TensorT<T> upsample_nearest(const TensorT<T>& fmap, int target_side = 32);

// Per-region crop + global average pool: (grid, grid, c) -> (N, c).
template <typename T>
TensorT<T> region_pool(const TensorT<T>& fmap, const RegionSpec& spec);

template <typename T>
TensorT<T> region_pool_backward(const TensorT<T>& dpool, const RegionSpec& spec);

// Parameter-free sigmoid self-gate x * sigma(x), applied elementwise.
template <typename T>
TensorT<T> sigmoid_gate(const TensorT<T>& x);

// d/dx of x * sigma(x) = sigma(x) * (1 + x * (1 - sigma(x))), chained with dout.
template <typename T>
TensorT<T> sigmoid_gate_backward(const TensorT<T>& x, const TensorT<T>& dout);

// Spatial mean per channel: (h, w, c) -> (c).
template <typename T>
TensorT<T> global_average_pool(const TensorT<T>& fmap);

template <typename T>
TensorT<T> global_average_pool_backward(const TensorT<T>& dvec, int h, int w);

struct LayerNormCache {
  DTensor xhat;
  double inv_std = 0.0;
};

// Normalizes the whole vector to zero mean / unit variance, then applies the
// learnable per-element gain and bias.
DTensor layer_norm(const DTensor& x, const DTensor& gain, const DTensor& bias,
                   double eps, LayerNormCache* cache = nullptr);

DTensor layer_norm_backward(const DTensor& dy, const DTensor& gain,
                            const LayerNormCache& cache, DTensor& dgain,
                            DTensor& dbias);

// Inverted dropout: kept entries are scaled by 1/(1-rate) so the eval path
// needs no rescaling. mask holds the applied multiplier per element.
DTensor dropout(const DTensor& x, double rate, Rng& rng, DTensor* mask = nullptr);

// y = x W + b with W of shape (in, out).
DTensor dense(const DTensor& x, const DTensor& w, const DTensor& b);

void dense_backward(const DTensor& x, const DTensor& w, const DTensor& dy,
                    DTensor& dw, DTensor& db, DTensor* dx);

DTensor softmax(const DTensor& logits);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace rpca
