#include "rpca/head_ops.hpp"

#include <algorithm>
#include <cmath>

#include "rpca/common.hpp"

namespace rpca {

namespace {

struct Lerp {
  int lo = 0;
  int hi = 0;
  double w_hi = 0.0;  // weight of the hi sample; lo gets 1 - w_hi
};

// Corner-aligned source coordinates for one axis.
std::vector<Lerp> lerp_table(int in, int out) {
  std::vector<Lerp> table(static_cast<size_t>(out));
  for (int i = 0; i < out; ++i) {
    Lerp& l = table[static_cast<size_t>(i)];
    if (in == 1 || out == 1) {
      l.lo = 0;
      l.hi = 0;
      l.w_hi = 0.0;
    } else {
      double src = static_cast<double>(i) * (in - 1) / (out - 1);
      l.lo = std::min(static_cast<int>(src), in - 2);
      l.hi = l.lo + 1;
      l.w_hi = src - l.lo;
    }
  }
  return table;
}

}  // namespace

template <typename T>
TensorT<T> upsample_bilinear(const TensorT<T>& fmap, int target_side) {
  check(target_side >= 1, ErrorKind::parameter, "upsample target must be positive");
  check(fmap.rank() == 3, ErrorKind::shape, "upsample expects an (h, w, c) map");
  int h = fmap.dim(0), w = fmap.dim(1), c = fmap.dim(2);
  check(h >= 1 && w >= 1 && c >= 1, ErrorKind::shape, "empty feature map");

  auto rows = lerp_table(h, target_side);
  auto cols = lerp_table(w, target_side);
  TensorT<T> out({target_side, target_side, c});
  for (int i = 0; i < target_side; ++i) {
    const Lerp& ri = rows[static_cast<size_t>(i)];
    for (int j = 0; j < target_side; ++j) {
      const Lerp& cj = cols[static_cast<size_t>(j)];
      const T* p00 = &fmap.at(ri.lo, cj.lo, 0);
      const T* p01 = &fmap.at(ri.lo, cj.hi, 0);
      const T* p10 = &fmap.at(ri.hi, cj.lo, 0);
      const T* p11 = &fmap.at(ri.hi, cj.hi, 0);
      T* dst = &out.at(i, j, 0);
      double wy = ri.w_hi, wx = cj.w_hi;
      double w00 = (1 - wy) * (1 - wx), w01 = (1 - wy) * wx;
      double w10 = wy * (1 - wx), w11 = wy * wx;
      for (int k = 0; k < c; ++k) {
        dst[k] = static_cast<T>(w00 * p00[k] + w01 * p01[k] + w10 * p10[k] +
                                w11 * p11[k]);
      }
    }
  }
  return out;
}

template <typename T>
TensorT<T> upsample_bilinear_backward(const TensorT<T>& dout, int in_h, int in_w) {
  check(dout.rank() == 3, ErrorKind::shape, "upsample grad expects (s, s, c)");
  int s_h = dout.dim(0), s_w = dout.dim(1), c = dout.dim(2);
  auto rows = lerp_table(in_h, s_h);
  auto cols = lerp_table(in_w, s_w);
  TensorT<T> din({in_h, in_w, c});
  for (int i = 0; i < s_h; ++i) {
    const Lerp& ri = rows[static_cast<size_t>(i)];
    for (int j = 0; j < s_w; ++j) {
      const Lerp& cj = cols[static_cast<size_t>(j)];
      const T* src = &dout.at(i, j, 0);
      double wy = ri.w_hi, wx = cj.w_hi;
      T* p00 = &din.at(ri.lo, cj.lo, 0);
      T* p01 = &din.at(ri.lo, cj.hi, 0);
      T* p10 = &din.at(ri.hi, cj.lo, 0);
      T* p11 = &din.at(ri.hi, cj.hi, 0);
      double w00 = (1 - wy) * (1 - wx), w01 = (1 - wy) * wx;
      double w10 = wy * (1 - wx), w11 = wy * wx;
      for (int k = 0; k < c; ++k) {
        p00[k] += static_cast<T>(w00 * src[k]);
        if (cj.hi != cj.lo) p01[k] += static_cast<T>(w01 * src[k]);
        if (ri.hi != ri.lo) p10[k] += static_cast<T>(w10 * src[k]);
        if (ri.hi != ri.lo && cj.hi != cj.lo) p11[k] += static_cast<T>(w11 * src[k]);
      }
    }
  }
  return din;
}

template <typename T>
TensorT<T> upsample_nearest(const TensorT<T>& fmap, int target_side) {
  check(target_side >= 1, ErrorKind::parameter, "upsample target must be positive");
  check(fmap.rank() == 3, ErrorKind::shape, "upsample expects an (h, w, c) map");
  int h = fmap.dim(0), w = fmap.dim(1), c = fmap.dim(2);
  TensorT<T> out({target_side, target_side, c});
  for (int i = 0; i < target_side; ++i) {
    int si = (target_side == 1 || h == 1)
                 ? 0
                 : static_cast<int>(std::lround(static_cast<double>(i) * (h - 1) /
                                                (target_side - 1)));
    for (int j = 0; j < target_side; ++j) {
      int sj = (target_side == 1 || w == 1)
                   ? 0
                   : static_cast<int>(std::lround(static_cast<double>(j) * (w - 1) /
                                                  (target_side - 1)));
      const T* src = &fmap.at(si, sj, 0);
      T* dst = &out.at(i, j, 0);
      std::copy(src, src + c, dst);
    }
  }
  return out;
}

template <typename T>
TensorT<T> region_pool(const TensorT<T>& fmap, const RegionSpec& spec) {
  spec.validate();
  check(fmap.rank() == 3, ErrorKind::shape, "region_pool expects an (h, w, c) map");
  check(fmap.dim(0) == spec.grid_side && fmap.dim(1) == spec.grid_side,
        ErrorKind::shape, "feature map does not match region grid");
  int c = fmap.dim(2);
  TensorT<T> out({spec.count(), c});
  for (int n = 0; n < spec.count(); ++n) {
    const RegionRect& r = spec.regions[static_cast<size_t>(n)];
    T* dst = &out.at(n, 0);
    for (int i = r.row0; i < r.row1; ++i) {
      for (int j = r.col0; j < r.col1; ++j) {
        const T* src = &fmap.at(i, j, 0);
        for (int k = 0; k < c; ++k) dst[k] += src[k];
      }
    }
    T inv = T(1) / static_cast<T>(r.area());
    for (int k = 0; k < c; ++k) dst[k] *= inv;
  }
  return out;
}

template <typename T>
TensorT<T> region_pool_backward(const TensorT<T>& dpool, const RegionSpec& spec) {
  spec.validate();
  int c = dpool.dim(1);
  TensorT<T> din({spec.grid_side, spec.grid_side, c});
  for (int n = 0; n < spec.count(); ++n) {
    const RegionRect& r = spec.regions[static_cast<size_t>(n)];
    T inv = T(1) / static_cast<T>(r.area());
    const T* src = &dpool.at(n, 0);
    for (int i = r.row0; i < r.row1; ++i) {
      for (int j = r.col0; j < r.col1; ++j) {
        T* dst = &din.at(i, j, 0);
        for (int k = 0; k < c; ++k) dst[k] += src[k] * inv;
      }
    }
  }
  return din;
}

template <typename T>
TensorT<T> sigmoid_gate(const TensorT<T>& x) {
  TensorT<T> out(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) {
    double v = static_cast<double>(x[i]);
    out[i] = static_cast<T>(v * sigmoid(v));
  }
  return out;
}

template <typename T>
TensorT<T> sigmoid_gate_backward(const TensorT<T>& x, const TensorT<T>& dout) {
  check(x.same_shape(dout), ErrorKind::shape, "gate grad shape mismatch");
  TensorT<T> din(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) {
    double v = static_cast<double>(x[i]);
    double s = sigmoid(v);
    din[i] = static_cast<T>(static_cast<double>(dout[i]) * s * (1.0 + v * (1.0 - s)));
  }
  return din;
}

template <typename T>
TensorT<T> global_average_pool(const TensorT<T>& fmap) {
  check(fmap.rank() == 3, ErrorKind::shape, "GAP expects an (h, w, c) map");
  int h = fmap.dim(0), w = fmap.dim(1), c = fmap.dim(2);
  check(h >= 1 && w >= 1, ErrorKind::shape, "empty feature map");
  TensorT<T> out({c});
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const T* src = &fmap.at(i, j, 0);
      for (int k = 0; k < c; ++k) out[k] += src[k];
    }
  }
  T inv = T(1) / static_cast<T>(h * w);
  for (int k = 0; k < c; ++k) out[k] *= inv;
  return out;
}

template <typename T>
TensorT<T> global_average_pool_backward(const TensorT<T>& dvec, int h, int w) {
  int c = static_cast<int>(dvec.size());
  TensorT<T> din({h, w, c});
  T inv = T(1) / static_cast<T>(h * w);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      T* dst = &din.at(i, j, 0);
      for (int k = 0; k < c; ++k) dst[k] = dvec[k] * inv;
    }
  }
  return din;
}

DTensor layer_norm(const DTensor& x, const DTensor& gain, const DTensor& bias,
                   double eps, LayerNormCache* cache) {
  int64_t d = x.size();
  check(gain.size() == d && bias.size() == d, ErrorKind::config,
        "layer norm gain/bias length mismatch");
  double mean = 0.0;
  for (int64_t i = 0; i < d; ++i) mean += x[i];
  mean /= static_cast<double>(d);
  double var = 0.0;
  for (int64_t i = 0; i < d; ++i) {
    double dv = x[i] - mean;
    var += dv * dv;
  }
  var /= static_cast<double>(d);
  double inv_std = 1.0 / std::sqrt(var + eps);

  DTensor out(x.shape());
  DTensor xhat(x.shape());
  for (int64_t i = 0; i < d; ++i) {
    xhat[i] = (x[i] - mean) * inv_std;
    out[i] = gain[i] * xhat[i] + bias[i];
  }
  if (cache != nullptr) {
    cache->xhat = std::move(xhat);
    cache->inv_std = inv_std;
  }
  return out;
}

DTensor layer_norm_backward(const DTensor& dy, const DTensor& gain,
                            const LayerNormCache& cache, DTensor& dgain,
                            DTensor& dbias) {
  int64_t d = dy.size();
  dgain = DTensor(dy.shape());
  dbias = DTensor(dy.shape());
  DTensor dxhat(dy.shape());
  double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
  for (int64_t i = 0; i < d; ++i) {
    dgain[i] = dy[i] * cache.xhat[i];
    dbias[i] = dy[i];
    dxhat[i] = dy[i] * gain[i];
    sum_dxhat += dxhat[i];
    sum_dxhat_xhat += dxhat[i] * cache.xhat[i];
  }
  double inv_d = 1.0 / static_cast<double>(d);
  DTensor dx(dy.shape());
  for (int64_t i = 0; i < d; ++i) {
    dx[i] = cache.inv_std *
            (dxhat[i] - inv_d * sum_dxhat - cache.xhat[i] * inv_d * sum_dxhat_xhat);
  }
  return dx;
}

DTensor dropout(const DTensor& x, double rate, Rng& rng, DTensor* mask) {
  check(rate >= 0.0 && rate < 1.0, ErrorKind::config,
        "dropout rate must be in [0, 1)");
  DTensor out(x.shape());
  DTensor m(x.shape());
  double scale = 1.0 / (1.0 - rate);
  for (int64_t i = 0; i < x.size(); ++i) {
    double keep = rng.uniform() >= rate ? scale : 0.0;
    m[i] = keep;
    out[i] = x[i] * keep;
  }
  if (mask != nullptr) *mask = std::move(m);
  return out;
}

DTensor dense(const DTensor& x, const DTensor& w, const DTensor& b) {
  int64_t in = x.size();
  check(w.rank() == 2 && w.dim(0) == in, ErrorKind::config,
        "dense weight rows must match input length");
  int out_dim = w.dim(1);
  check(b.size() == out_dim, ErrorKind::config,
        "dense bias length must match output length");
  DTensor y({out_dim});
  for (int o = 0; o < out_dim; ++o) y[o] = b[o];
  for (int64_t i = 0; i < in; ++i) {
    double xi = x[i];
    if (xi == 0.0) continue;
    const double* row = &w.at(static_cast<int>(i), 0);
    for (int o = 0; o < out_dim; ++o) y[o] += xi * row[o];
  }
  return y;
}

void dense_backward(const DTensor& x, const DTensor& w, const DTensor& dy,
                    DTensor& dw, DTensor& db, DTensor* dx) {
  int64_t in = x.size();
  int out_dim = w.dim(1);
  if (dw.size() != w.size()) dw = DTensor(w.shape());
  if (db.size() != dy.size()) db = DTensor(dy.shape());
  for (int o = 0; o < out_dim; ++o) db[o] += dy[o];
  for (int64_t i = 0; i < in; ++i) {
    double xi = x[i];
    double* drow = &dw.at(static_cast<int>(i), 0);
    for (int o = 0; o < out_dim; ++o) drow[o] += xi * dy[o];
  }
  if (dx != nullptr) {
    *dx = DTensor(x.shape());
    for (int64_t i = 0; i < in; ++i) {
      const double* row = &w.at(static_cast<int>(i), 0);
      double acc = 0.0;
      for (int o = 0; o < out_dim; ++o) acc += row[o] * dy[o];
      (*dx)[i] = acc;
    }
  }
}

DTensor softmax(const DTensor& logits) {
  DTensor out(logits.shape());
  double max_v = logits[0];
  for (int64_t i = 1; i < logits.size(); ++i) max_v = std::max(max_v, logits[i]);
  double sum = 0.0;
  for (int64_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - max_v);
    sum += out[i];
  }
  for (int64_t i = 0; i < logits.size(); ++i) out[i] /= sum;
  return out;
}

template Tensor upsample_bilinear<float>(const Tensor&, int);
template DTensor upsample_bilinear<double>(const DTensor&, int);
template Tensor upsample_bilinear_backward<float>(const Tensor&, int, int);
template DTensor upsample_bilinear_backward<double>(const DTensor&, int, int);
template Tensor upsample_nearest<float>(const Tensor&, int);
template DTensor upsample_nearest<double>(const DTensor&, int);
template Tensor region_pool<float>(const Tensor&, const RegionSpec&);
template DTensor region_pool<double>(const DTensor&, const RegionSpec&);
template Tensor region_pool_backward<float>(const Tensor&, const RegionSpec&);
template DTensor region_pool_backward<double>(const DTensor&, const RegionSpec&);
template Tensor sigmoid_gate<float>(const Tensor&);
template DTensor sigmoid_gate<double>(const DTensor&);
template Tensor sigmoid_gate_backward<float>(const Tensor&, const Tensor&);
template DTensor sigmoid_gate_backward<double>(const DTensor&, const DTensor&);
template Tensor global_average_pool<float>(const Tensor&);
template DTensor global_average_pool<double>(const DTensor&);
template Tensor global_average_pool_backward<float>(const Tensor&, int, int);
template DTensor global_average_pool_backward<double>(const DTensor&, int, int);

}  // namespace rpca
