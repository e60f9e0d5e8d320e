#pragma once

#include <cstdint>
#include <optional>

#include <nlohmann/json_fwd.hpp>

#include "rpca/head_ops.hpp"
#include "rpca/regions.hpp"
#include "rpca/rng.hpp"
#include "rpca/tensor.hpp"

namespace rpca {

// Region-pooled channel descriptors, N rows of c channels each.
struct PooledFeatures {
  enum class Stage { pooled, attended };
  DTensor data;  // (N, c)
  Stage stage = Stage::pooled;
};

PooledFeatures channel_attention(const PooledFeatures& pooled);

struct HeadConfig {
  int input_dim = 0;    // flattened descriptor length (N*c, or c without regions)
  int num_classes = 0;
  int hidden = 0;       // 0 disables the optional hidden projection
  double dropout_rate = 0.5;
  double ln_eps = 1e-5;
  bool layer_norm = true;
  bool use_dropout = true;

  nlohmann::json to_json() const;
  static HeadConfig from_json(const nlohmann::json& j);
};

struct HeadParams {
  HeadConfig cfg;
  DTensor ln_gain, ln_bias;      // (input_dim), present when cfg.layer_norm
  DTensor hidden_w, hidden_b;    // (input_dim, hidden), (hidden)
  DTensor dense_w, dense_b;      // (D, num_classes), (num_classes)

  static HeadParams init(const HeadConfig& cfg, Rng& rng);
  int64_t count() const;

  template <typename Fn>
  void for_each(Fn&& fn) {
    if (cfg.layer_norm) {
      fn("head/ln_gain", ln_gain);
      fn("head/ln_bias", ln_bias);
    }
    if (cfg.hidden > 0) {
      fn("head/hidden_w", hidden_w);
      fn("head/hidden_b", hidden_b);
    }
    fn("head/dense_w", dense_w);
    fn("head/dense_b", dense_b);
  }
};

struct HeadGrads {
  DTensor ln_gain, ln_bias, hidden_w, hidden_b, dense_w, dense_b;

  static HeadGrads zeros_like(const HeadParams& p);
  void scale(double s);
};

struct HeadCache {
  DTensor x_flat;       // input descriptor
  DTensor after_drop;
  DTensor drop_mask;
  LayerNormCache ln;
  DTensor ln_out;
  DTensor hidden_pre;   // before ReLU
  DTensor hidden_act;
  DTensor logits;
  DTensor probs;
};

// Flatten -> dropout (training only) -> layer norm -> optional hidden ReLU
// projection -> dense -> softmax.
DTensor head_forward(const PooledFeatures& attended, const HeadParams& params,
                     bool training, uint64_t rng_seed,
                     HeadCache* cache = nullptr);

// Same pipeline on an already-flat descriptor.
DTensor head_forward_flat(const DTensor& x, const HeadParams& params,
                          bool training, uint64_t rng_seed,
                          HeadCache* cache = nullptr);

// dlogits in, parameter grads accumulated, gradient w.r.t. the flat input out.
DTensor head_backward(const DTensor& dlogits, const HeadParams& params,
                      const HeadCache& cache, HeadGrads& grads);

// Closed-form parameter count of the region head: layer norm (2*N*c) plus the
// classifier projection, with the optional hidden layer when hidden > 0.
int64_t head_param_count(int channels, int regions, int num_classes,
                         std::optional<int> hidden = std::nullopt);

}  // namespace rpca
