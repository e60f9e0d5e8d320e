#include "rpca/head.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "rpca/common.hpp"

namespace rpca {

PooledFeatures channel_attention(const PooledFeatures& pooled) {
  check(pooled.stage == PooledFeatures::Stage::pooled, ErrorKind::input,
        "channel_attention expects stage=pooled input");
  PooledFeatures out;
  out.data = sigmoid_gate(pooled.data);
  out.stage = PooledFeatures::Stage::attended;
  return out;
}

nlohmann::json HeadConfig::to_json() const {
  return {{"input_dim", input_dim},   {"num_classes", num_classes},
          {"hidden", hidden},         {"dropout_rate", dropout_rate},
          {"ln_eps", ln_eps},         {"layer_norm", layer_norm},
          {"use_dropout", use_dropout}};
}

HeadConfig HeadConfig::from_json(const nlohmann::json& j) {
  HeadConfig c;
  c.input_dim = j.at("input_dim").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.hidden = j.value("hidden", 0);
  c.dropout_rate = j.value("dropout_rate", 0.5);
  c.ln_eps = j.value("ln_eps", 1e-5);
  c.layer_norm = j.value("layer_norm", true);
  c.use_dropout = j.value("use_dropout", true);
  return c;
}

namespace {

DTensor glorot_uniform(int fan_in, int fan_out, Rng& rng) {
  double limit = std::sqrt(6.0 / (fan_in + fan_out));
  DTensor w({fan_in, fan_out});
  for (int64_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-limit, limit);
  return w;
}

}  // namespace

HeadParams HeadParams::init(const HeadConfig& cfg, Rng& rng) {
  check(cfg.input_dim > 0 && cfg.num_classes > 0, ErrorKind::config,
        "head needs positive input_dim and num_classes");
  check(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0, ErrorKind::config,
        "dropout rate must be in [0, 1)");
  HeadParams p;
  p.cfg = cfg;
  if (cfg.layer_norm) {
    p.ln_gain = DTensor::full({cfg.input_dim}, 1.0);
    p.ln_bias = DTensor({cfg.input_dim});
  }
  int dense_in = cfg.input_dim;
  if (cfg.hidden > 0) {
    p.hidden_w = glorot_uniform(cfg.input_dim, cfg.hidden, rng);
    p.hidden_b = DTensor({cfg.hidden});
    dense_in = cfg.hidden;
  }
  p.dense_w = glorot_uniform(dense_in, cfg.num_classes, rng);
  p.dense_b = DTensor({cfg.num_classes});
  return p;
}

int64_t HeadParams::count() const {
  return ln_gain.size() + ln_bias.size() + hidden_w.size() + hidden_b.size() +
         dense_w.size() + dense_b.size();
}

HeadGrads HeadGrads::zeros_like(const HeadParams& p) {
  HeadGrads g;
  if (p.cfg.layer_norm) {
    g.ln_gain = DTensor(p.ln_gain.shape());
    g.ln_bias = DTensor(p.ln_bias.shape());
  }
  if (p.cfg.hidden > 0) {
    g.hidden_w = DTensor(p.hidden_w.shape());
    g.hidden_b = DTensor(p.hidden_b.shape());
  }
  g.dense_w = DTensor(p.dense_w.shape());
  g.dense_b = DTensor(p.dense_b.shape());
  return g;
}

void HeadGrads::scale(double s) {
  for (DTensor* t : {&ln_gain, &ln_bias, &hidden_w, &hidden_b, &dense_w, &dense_b}) {
    for (int64_t i = 0; i < t->size(); ++i) (*t)[i] *= s;
  }
}

DTensor head_forward(const PooledFeatures& attended, const HeadParams& params,
                     bool training, uint64_t rng_seed, HeadCache* cache) {
  check(attended.stage == PooledFeatures::Stage::attended, ErrorKind::input,
        "head_forward expects stage=attended input");
  DTensor flat({static_cast<int>(attended.data.size())});
  std::copy(attended.data.data(), attended.data.data() + attended.data.size(),
            flat.data());
  return head_forward_flat(flat, params, training, rng_seed, cache);
}

DTensor head_forward_flat(const DTensor& x, const HeadParams& params,
                          bool training, uint64_t rng_seed, HeadCache* cache) {
  const HeadConfig& cfg = params.cfg;
  check(static_cast<int>(x.size()) == cfg.input_dim, ErrorKind::config,
        "head input length does not match configured input_dim");
  check(params.dense_b.size() == cfg.num_classes, ErrorKind::config,
        "dense bias length does not match class count");

  HeadCache local;
  HeadCache& c = cache != nullptr ? *cache : local;
  c.x_flat = x;

  if (training && cfg.use_dropout && cfg.dropout_rate > 0.0) {
    Rng rng(rng_seed);
    c.after_drop = dropout(x, cfg.dropout_rate, rng, &c.drop_mask);
  } else {
    c.after_drop = x;
    c.drop_mask = DTensor();
  }

  const DTensor* v = &c.after_drop;
  if (cfg.layer_norm) {
    c.ln_out = layer_norm(c.after_drop, params.ln_gain, params.ln_bias,
                          cfg.ln_eps, &c.ln);
    v = &c.ln_out;
  }

  if (cfg.hidden > 0) {
    c.hidden_pre = dense(*v, params.hidden_w, params.hidden_b);
    c.hidden_act = DTensor(c.hidden_pre.shape());
    for (int64_t i = 0; i < c.hidden_pre.size(); ++i) {
      c.hidden_act[i] = c.hidden_pre[i] > 0.0 ? c.hidden_pre[i] : 0.0;
    }
    v = &c.hidden_act;
  }

  c.logits = dense(*v, params.dense_w, params.dense_b);
  c.probs = softmax(c.logits);
  return c.probs;
}

DTensor head_backward(const DTensor& dlogits, const HeadParams& params,
                      const HeadCache& cache, HeadGrads& grads) {
  const HeadConfig& cfg = params.cfg;
  const DTensor& dense_in = cfg.hidden > 0
                                ? cache.hidden_act
                                : (cfg.layer_norm ? cache.ln_out : cache.after_drop);
  DTensor d_dense_in;
  dense_backward(dense_in, params.dense_w, dlogits, grads.dense_w, grads.dense_b,
                 &d_dense_in);

  DTensor d_after_ln;
  if (cfg.hidden > 0) {
    DTensor d_hidden_pre(cache.hidden_pre.shape());
    for (int64_t i = 0; i < d_hidden_pre.size(); ++i) {
      d_hidden_pre[i] = cache.hidden_pre[i] > 0.0 ? d_dense_in[i] : 0.0;
    }
    const DTensor& hidden_in = cfg.layer_norm ? cache.ln_out : cache.after_drop;
    dense_backward(hidden_in, params.hidden_w, d_hidden_pre, grads.hidden_w,
                   grads.hidden_b, &d_after_ln);
  } else {
    d_after_ln = std::move(d_dense_in);
  }

  DTensor d_after_drop;
  if (cfg.layer_norm) {
    DTensor dgain, dbias;
    d_after_drop = layer_norm_backward(d_after_ln, params.ln_gain, cache.ln,
                                       dgain, dbias);
    for (int64_t i = 0; i < dgain.size(); ++i) {
      grads.ln_gain[i] += dgain[i];
      grads.ln_bias[i] += dbias[i];
    }
  } else {
    d_after_drop = std::move(d_after_ln);
  }

  DTensor dx(cache.x_flat.shape());
  if (cache.drop_mask.size() > 0) {
    for (int64_t i = 0; i < dx.size(); ++i) {
      dx[i] = d_after_drop[i] * cache.drop_mask[i];
    }
  } else {
    dx = std::move(d_after_drop);
  }
  return dx;
}

int64_t head_param_count(int channels, int regions, int num_classes,
                         std::optional<int> hidden) {
  check(channels > 0 && regions > 0 && num_classes > 0, ErrorKind::parameter,
        "head_param_count needs positive counts");
  int64_t d = static_cast<int64_t>(regions) * channels;
  int64_t n = 2 * d;  // layer norm gain + bias
  if (hidden.has_value() && *hidden > 0) {
    check(*hidden > 0, ErrorKind::parameter, "hidden size must be positive");
    n += d * *hidden + *hidden;
    n += static_cast<int64_t>(*hidden) * num_classes + num_classes;
  } else {
    n += d * num_classes + num_classes;
  }
  return n;
}

}  // namespace rpca
