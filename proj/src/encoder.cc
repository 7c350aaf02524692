#include "segfp/encoder.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "segfp/error.h"
#include "segfp/segmentation.h"
#include "segfp/util.h"

namespace segfp {
namespace {

constexpr double kNormEps = 1e-5;
constexpr std::size_t kKernel = 3;

double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

std::size_t strided(std::size_t n, std::size_t stride) { return (n + stride - 1) / stride; }

struct Tensor3 {
  std::size_t c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor3() = default;
  Tensor3(std::size_t c_, std::size_t h_, std::size_t w_) : c(c_), h(h_), w(w_), v(c_ * h_ * w_, 0.0) {}
  double* plane(std::size_t ch) { return v.data() + ch * h * w; }
  const double* plane(std::size_t ch) const { return v.data() + ch * h * w; }
};

// Kernel of 3 along time (width), padding 1.
Tensor3 conv_time(const Tensor3& in, const std::vector<double>& weight, const std::vector<double>& bias,
                  std::size_t out_ch, std::size_t stride) {
  Tensor3 out(out_ch, in.h, strided(in.w, stride));
  for (std::size_t co = 0; co < out_ch; ++co) {
    double* o = out.plane(co);
    std::fill(o, o + out.h * out.w, bias[co]);
    for (std::size_t ci = 0; ci < in.c; ++ci) {
      const double* src = in.plane(ci);
      const double* k = &weight[(co * in.c + ci) * kKernel];
      for (std::size_t y = 0; y < in.h; ++y) {
        const double* row = src + y * in.w;
        double* orow = o + y * out.w;
        for (std::size_t x = 0; x < out.w; ++x) {
          const std::size_t c0 = x * stride;
          double acc = k[1] * row[c0];
          if (c0 >= 1) acc += k[0] * row[c0 - 1];
          if (c0 + 1 < in.w) acc += k[2] * row[c0 + 1];
          orow[x] += acc;
        }
      }
    }
  }
  return out;
}

void conv_time_backward(const Tensor3& in, const std::vector<double>& weight, std::size_t stride,
                        const Tensor3& grad_out, Tensor3* grad_in, std::vector<double>& grad_w,
                        std::vector<double>& grad_b) {
  for (std::size_t co = 0; co < grad_out.c; ++co) {
    const double* g = grad_out.plane(co);
    double gb = 0.0;
    for (std::size_t i = 0; i < grad_out.h * grad_out.w; ++i) gb += g[i];
    grad_b[co] += gb;
    for (std::size_t ci = 0; ci < in.c; ++ci) {
      const double* src = in.plane(ci);
      const double* k = &weight[(co * in.c + ci) * kKernel];
      double* gk = &grad_w[(co * in.c + ci) * kKernel];
      double* gi = grad_in ? grad_in->plane(ci) : nullptr;
      double g0 = 0.0, g1 = 0.0, g2 = 0.0;
      for (std::size_t y = 0; y < in.h; ++y) {
        const double* row = src + y * in.w;
        const double* grow = g + y * grad_out.w;
        double* girow = gi ? gi + y * in.w : nullptr;
        for (std::size_t x = 0; x < grad_out.w; ++x) {
          const std::size_t c0 = x * stride;
          const double gx = grow[x];
          g1 += gx * row[c0];
          if (girow) girow[c0] += k[1] * gx;
          if (c0 >= 1) {
            g0 += gx * row[c0 - 1];
            if (girow) girow[c0 - 1] += k[0] * gx;
          }
          if (c0 + 1 < in.w) {
            g2 += gx * row[c0 + 1];
            if (girow) girow[c0 + 1] += k[2] * gx;
          }
        }
      }
      gk[0] += g0;
      gk[1] += g1;
      gk[2] += g2;
    }
  }
}

// Kernel of 3 along frequency (height), padding 1.
Tensor3 conv_freq(const Tensor3& in, const std::vector<double>& weight, const std::vector<double>& bias,
                  std::size_t out_ch, std::size_t stride) {
  Tensor3 out(out_ch, strided(in.h, stride), in.w);
  for (std::size_t co = 0; co < out_ch; ++co) {
    double* o = out.plane(co);
    std::fill(o, o + out.h * out.w, bias[co]);
    for (std::size_t ci = 0; ci < in.c; ++ci) {
      const double* src = in.plane(ci);
      const double* k = &weight[(co * in.c + ci) * kKernel];
      for (std::size_t y = 0; y < out.h; ++y) {
        const std::size_t r0 = y * stride;
        double* orow = o + y * out.w;
        for (std::size_t t = 0; t < kKernel; ++t) {
          if (r0 + t < 1 || r0 + t - 1 >= in.h) continue;
          const double* row = src + (r0 + t - 1) * in.w;
          const double kt = k[t];
          for (std::size_t x = 0; x < out.w; ++x) orow[x] += kt * row[x];
        }
      }
    }
  }
  return out;
}

void conv_freq_backward(const Tensor3& in, const std::vector<double>& weight, std::size_t stride,
                        const Tensor3& grad_out, Tensor3* grad_in, std::vector<double>& grad_w,
                        std::vector<double>& grad_b) {
  for (std::size_t co = 0; co < grad_out.c; ++co) {
    const double* g = grad_out.plane(co);
    double gb = 0.0;
    for (std::size_t i = 0; i < grad_out.h * grad_out.w; ++i) gb += g[i];
    grad_b[co] += gb;
    for (std::size_t ci = 0; ci < in.c; ++ci) {
      const double* src = in.plane(ci);
      const double* k = &weight[(co * in.c + ci) * kKernel];
      double* gk = &grad_w[(co * in.c + ci) * kKernel];
      double* gi = grad_in ? grad_in->plane(ci) : nullptr;
      for (std::size_t y = 0; y < grad_out.h; ++y) {
        const std::size_t r0 = y * stride;
        const double* grow = g + y * grad_out.w;
        for (std::size_t t = 0; t < kKernel; ++t) {
          if (r0 + t < 1 || r0 + t - 1 >= in.h) continue;
          const double* row = src + (r0 + t - 1) * in.w;
          double acc = 0.0;
          for (std::size_t x = 0; x < grad_out.w; ++x) acc += grow[x] * row[x];
          gk[t] += acc;
          if (gi) {
            double* girow = gi + (r0 + t - 1) * in.w;
            const double kt = k[t];
            for (std::size_t x = 0; x < grad_out.w; ++x) girow[x] += kt * grow[x];
          }
        }
      }
    }
  }
}

struct BlockTrace {
  Tensor3 input;
  Tensor3 tconv_pre;  // before ELU
  Tensor3 tconv_act;
  Tensor3 fconv_pre;
  Tensor3 normalized;  // (s - mean) * inv_std
  double inv_std = 0.0;
};

struct Trace {
  const AdapterWeights* adapter = nullptr;
  Matrix mel;
  Matrix adapter_pre;
  std::vector<BlockTrace> blocks;
  std::vector<double> pooled;  // final block output, C x 1 x 1
  std::vector<double> embedding;
  double norm = 0.0;
  std::vector<double> fingerprint;
};

const AdapterWeights& adapter_for(const Matrix& mel, const EncoderWeights& weights) {
  if (mel.rows != weights.config.mel_bins) {
    throw Error(ErrorCode::kInvalidInput, "mel has " + std::to_string(mel.rows) + " bins, encoder expects " +
                                              std::to_string(weights.config.mel_bins));
  }
  auto it = weights.adapters.find(mel.cols);
  if (it == weights.adapters.end()) {
    throw Error(ErrorCode::kNoAdapterForT, "no adapter for T=" + std::to_string(mel.cols));
  }
  return it->second;
}

Matrix adapter_pre(const Matrix& mel, const AdapterWeights& a) {
  const std::size_t t0 = a.bias.size();
  Matrix z(mel.rows, t0);
  for (std::size_t r = 0; r < mel.rows; ++r) {
    double* out = &z(r, 0);
    std::copy(a.bias.begin(), a.bias.end(), out);
    for (std::size_t t = 0; t < mel.cols; ++t) {
      const double x = mel(r, t);
      const double* w = &a.weight(t, 0);
      for (std::size_t o = 0; o < t0; ++o) out[o] += x * w[o];
    }
  }
  return z;
}

Trace run_forward(const Matrix& mel, const EncoderWeights& weights) {
  const EncoderConfig& cfg = weights.config;
  Trace tr;
  tr.adapter = &adapter_for(mel, weights);
  tr.mel = mel;
  tr.adapter_pre = adapter_pre(mel, *tr.adapter);

  Tensor3 x(1, cfg.mel_bins, cfg.adapter_t0);
  for (std::size_t i = 0; i < x.v.size(); ++i) x.v[i] = elu(tr.adapter_pre.data[i]);

  tr.blocks.resize(cfg.num_blocks);
  for (std::size_t k = 0; k < cfg.num_blocks; ++k) {
    const BlockWeights& b = weights.blocks[k];
    BlockTrace& bt = tr.blocks[k];
    bt.input = std::move(x);
    bt.tconv_pre = conv_time(bt.input, b.tconv_weight, b.tconv_bias, b.out_channels, cfg.time_strides[k]);
    bt.tconv_act = bt.tconv_pre;
    for (double& v : bt.tconv_act.v) v = elu(v);
    bt.fconv_pre = conv_freq(bt.tconv_act, b.fconv_weight, b.fconv_bias, b.out_channels, cfg.freq_strides[k]);

    Tensor3 s = bt.fconv_pre;
    for (double& v : s.v) v = elu(v);
    const auto n = static_cast<double>(s.v.size());
    double mean = 0.0;
    for (double v : s.v) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : s.v) var += (v - mean) * (v - mean);
    var /= n;
    bt.inv_std = 1.0 / std::sqrt(var + kNormEps);
    bt.normalized = s;
    for (double& v : bt.normalized.v) v = (v - mean) * bt.inv_std;

    x = Tensor3(s.c, s.h, s.w);
    const std::size_t plane = s.h * s.w;
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t i = 0; i < plane; ++i) {
        x.v[c * plane + i] = b.norm_gain[c] * bt.normalized.v[c * plane + i] + b.norm_offset[c];
      }
    }
  }

  tr.pooled = std::move(x.v);
  const std::size_t d = cfg.fingerprint_dim;
  tr.embedding = weights.projection_bias;
  for (std::size_t c = 0; c < tr.pooled.size(); ++c) {
    const double v = tr.pooled[c];
    const double* p = &weights.projection(c, 0);
    for (std::size_t j = 0; j < d; ++j) tr.embedding[j] += v * p[j];
  }
  tr.norm = std::max(std::sqrt(dot(tr.embedding, tr.embedding)), 1e-12);
  tr.fingerprint.resize(d);
  for (std::size_t j = 0; j < d; ++j) tr.fingerprint[j] = tr.embedding[j] / tr.norm;
  return tr;
}

void run_backward(const Trace& tr, const EncoderWeights& weights, std::span<const double> upstream,
                  EncoderWeights& grad) {
  const EncoderConfig& cfg = weights.config;
  const std::size_t d = cfg.fingerprint_dim;
  const double yg = dot(tr.fingerprint, upstream);
  std::vector<double> ge(d);
  for (std::size_t j = 0; j < d; ++j) ge[j] = (upstream[j] - tr.fingerprint[j] * yg) / tr.norm;

  const std::size_t final_c = tr.pooled.size();
  std::vector<double> gpool(final_c, 0.0);
  for (std::size_t j = 0; j < d; ++j) grad.projection_bias[j] += ge[j];
  for (std::size_t c = 0; c < final_c; ++c) {
    const double* p = &weights.projection(c, 0);
    double* gp = &grad.projection(c, 0);
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      gp[j] += tr.pooled[c] * ge[j];
      acc += p[j] * ge[j];
    }
    gpool[c] = acc;
  }

  Tensor3 g(final_c, 1, 1);
  g.v = std::move(gpool);
  for (std::size_t k = cfg.num_blocks; k-- > 0;) {
    const BlockWeights& b = weights.blocks[k];
    BlockWeights& gb = grad.blocks[k];
    const BlockTrace& bt = tr.blocks[k];
    const Tensor3& nrm = bt.normalized;
    const std::size_t plane = nrm.h * nrm.w;
    const auto n = static_cast<double>(nrm.v.size());

    Tensor3 gn(nrm.c, nrm.h, nrm.w);
    for (std::size_t c = 0; c < nrm.c; ++c) {
      double gg = 0.0, go = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        const double gv = g.v[c * plane + i];
        gg += gv * nrm.v[c * plane + i];
        go += gv;
        gn.v[c * plane + i] = gv * b.norm_gain[c];
      }
      gb.norm_gain[c] += gg;
      gb.norm_offset[c] += go;
    }
    double mean_gn = 0.0, mean_gnn = 0.0;
    for (std::size_t i = 0; i < gn.v.size(); ++i) {
      mean_gn += gn.v[i];
      mean_gnn += gn.v[i] * nrm.v[i];
    }
    mean_gn /= n;
    mean_gnn /= n;
    Tensor3 gr(nrm.c, nrm.h, nrm.w);
    for (std::size_t i = 0; i < gr.v.size(); ++i) {
      const double gs = bt.inv_std * (gn.v[i] - mean_gn - nrm.v[i] * mean_gnn);
      gr.v[i] = gs * elu_grad(bt.fconv_pre.v[i]);
    }

    Tensor3 gq(bt.tconv_act.c, bt.tconv_act.h, bt.tconv_act.w);
    conv_freq_backward(bt.tconv_act, b.fconv_weight, cfg.freq_strides[k], gr, &gq, gb.fconv_weight,
                       gb.fconv_bias);
    for (std::size_t i = 0; i < gq.v.size(); ++i) gq.v[i] *= elu_grad(bt.tconv_pre.v[i]);

    Tensor3 gu(bt.input.c, bt.input.h, bt.input.w);
    conv_time_backward(bt.input, b.tconv_weight, cfg.time_strides[k], gq, &gu, gb.tconv_weight,
                       gb.tconv_bias);
    g = std::move(gu);
  }

  // g is now the gradient of the adapter output (1 x F x T0).
  AdapterWeights& ga = grad.adapters.at(tr.mel.cols);
  const std::size_t t0 = cfg.adapter_t0;
  for (std::size_t r = 0; r < tr.mel.rows; ++r) {
    std::vector<double> gz(t0);
    for (std::size_t o = 0; o < t0; ++o) {
      gz[o] = g.v[r * t0 + o] * elu_grad(tr.adapter_pre(r, o));
      ga.bias[o] += gz[o];
    }
    for (std::size_t t = 0; t < tr.mel.cols; ++t) {
      const double x = tr.mel(r, t);
      double* gw = &ga.weight(t, 0);
      for (std::size_t o = 0; o < t0; ++o) gw[o] += x * gz[o];
    }
  }
}

void add_into(EncoderWeights& dst, const EncoderWeights& src) {
  std::vector<std::span<const double>> parts;
  src.for_each_tensor([&](const std::string&, const std::vector<std::size_t>&, std::span<const double> t) {
    parts.push_back(t);
  });
  std::size_t i = 0;
  dst.for_each_tensor([&](const std::string&, const std::vector<std::size_t>&, std::span<double> t) {
    const auto& s = parts[i++];
    for (std::size_t j = 0; j < t.size(); ++j) t[j] += s[j];
  });
}

}  // namespace

void EncoderConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kInvalidConfig, m); };
  if (mel_bins == 0 || adapter_t0 == 0 || fingerprint_dim == 0 || num_blocks == 0 || base_channels == 0) {
    fail("encoder sizes must be positive");
  }
  if (time_strides.size() != num_blocks || freq_strides.size() != num_blocks) {
    fail("stride schedules must have one entry per block");
  }
  std::size_t tp = 1, fp = 1, h = mel_bins, w = adapter_t0;
  for (std::size_t k = 0; k < num_blocks; ++k) {
    if (time_strides[k] == 0 || freq_strides[k] == 0) fail("strides must be positive");
    tp *= time_strides[k];
    fp *= freq_strides[k];
    h = strided(h, freq_strides[k]);
    w = strided(w, time_strides[k]);
  }
  if (fp != mel_bins || h != 1) {
    fail("frequency strides multiply to " + std::to_string(fp) + ", need " + std::to_string(mel_bins));
  }
  if (tp != adapter_t0 || w != 1) {
    fail("time strides multiply to " + std::to_string(tp) + ", need " + std::to_string(adapter_t0));
  }
  if (adapter_inputs.empty()) fail("at least one adapter input size is required");
  for (std::size_t t : adapter_inputs) {
    if (t == 0) fail("adapter input size must be positive");
  }
  if (!(window_w > 0.0)) fail("window_w must be positive");
}

std::size_t EncoderConfig::block_channels(std::size_t k) const {
  return std::min(base_channels << (k / 2), 8 * base_channels);
}

void EncoderWeights::for_each_tensor(
    const std::function<void(const std::string&, const std::vector<std::size_t>&, std::span<double>)>& fn) {
  for (auto& [t, a] : adapters) {
    const std::string p = "adapter.T" + std::to_string(t);
    fn(p + ".weight", {a.weight.rows, a.weight.cols}, a.weight.data);
    fn(p + ".bias", {a.bias.size()}, a.bias);
  }
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    BlockWeights& b = blocks[k];
    const std::string p = "block" + std::to_string(k);
    fn(p + ".tconv.weight", {b.out_channels, b.in_channels, kKernel}, b.tconv_weight);
    fn(p + ".tconv.bias", {b.out_channels}, b.tconv_bias);
    fn(p + ".fconv.weight", {b.out_channels, b.out_channels, kKernel}, b.fconv_weight);
    fn(p + ".fconv.bias", {b.out_channels}, b.fconv_bias);
    fn(p + ".norm.gain", {b.out_channels}, b.norm_gain);
    fn(p + ".norm.offset", {b.out_channels}, b.norm_offset);
  }
  fn("projection.weight", {projection.rows, projection.cols}, projection.data);
  fn("projection.bias", {projection_bias.size()}, projection_bias);
}

void EncoderWeights::for_each_tensor(const std::function<void(const std::string&, const std::vector<std::size_t>&,
                                                              std::span<const double>)>& fn) const {
  const_cast<EncoderWeights*>(this)->for_each_tensor(
      [&](const std::string& name, const std::vector<std::size_t>& dims, std::span<double> t) {
        fn(name, dims, std::span<const double>(t));
      });
}

std::size_t EncoderWeights::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const std::string&, const std::vector<std::size_t>&, std::span<const double> t) {
    n += t.size();
  });
  return n;
}

EncoderWeights zeros_like(const EncoderWeights& weights) {
  EncoderWeights z = weights;
  z.for_each_tensor([](const std::string&, const std::vector<std::size_t>&, std::span<double> t) {
    std::fill(t.begin(), t.end(), 0.0);
  });
  return z;
}

EncoderWeights init_weights(const EncoderConfig& config) {
  config.validate();
  std::mt19937_64 rng = make_rng({config.seed, 0x656e636f646572ULL});
  auto uniform_fill = [&](std::vector<double>& v, std::size_t fan_in) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : v) x = dist(rng);
  };

  EncoderWeights w;
  w.config = config;
  std::vector<std::size_t> inputs = config.adapter_inputs;
  std::sort(inputs.begin(), inputs.end());
  inputs.erase(std::unique(inputs.begin(), inputs.end()), inputs.end());
  for (std::size_t t : inputs) {
    AdapterWeights a;
    a.weight = Matrix(t, config.adapter_t0);
    uniform_fill(a.weight.data, t);
    a.bias.assign(config.adapter_t0, 0.0);
    w.adapters.emplace(t, std::move(a));
  }
  std::size_t in_ch = 1;
  for (std::size_t k = 0; k < config.num_blocks; ++k) {
    BlockWeights b;
    b.in_channels = in_ch;
    b.out_channels = config.block_channels(k);
    b.tconv_weight.resize(b.out_channels * b.in_channels * kKernel);
    uniform_fill(b.tconv_weight, b.in_channels * kKernel);
    b.tconv_bias.assign(b.out_channels, 0.0);
    b.fconv_weight.resize(b.out_channels * b.out_channels * kKernel);
    uniform_fill(b.fconv_weight, b.out_channels * kKernel);
    b.fconv_bias.assign(b.out_channels, 0.0);
    b.norm_gain.assign(b.out_channels, 1.0);
    b.norm_offset.assign(b.out_channels, 0.0);
    in_ch = b.out_channels;
    w.blocks.push_back(std::move(b));
  }
  w.projection = Matrix(in_ch, config.fingerprint_dim);
  uniform_fill(w.projection.data, in_ch);
  w.projection_bias.assign(config.fingerprint_dim, 0.0);
  return w;
}

Matrix adapter_forward(const Matrix& mel, const EncoderWeights& weights) {
  Matrix z = adapter_pre(mel, adapter_for(mel, weights));
  for (double& v : z.data) v = elu(v);
  return z;
}

Matrix adapter_forward(const MelSpectrogram& mel, const EncoderWeights& weights) {
  return adapter_forward(mel.values, weights);
}

Fingerprint encode(const Matrix& mel, const EncoderWeights& weights) {
  Trace tr = run_forward(mel, weights);
  return Fingerprint{std::move(tr.fingerprint)};
}

Fingerprint encode(const MelSpectrogram& mel, const EncoderWeights& weights) {
  return encode(mel.values, weights);
}

std::vector<Fingerprint> encode_batch(std::span<const MelSpectrogram> mels, const EncoderWeights& weights) {
  std::vector<Fingerprint> out(mels.size());
  parallel_for(mels.size(), [&](std::size_t i) { out[i] = encode(mels[i], weights); });
  return out;
}

EncoderWeights forward_backward(std::span<const MelSpectrogram> mels, const EncoderWeights& weights,
                                std::span<const std::vector<double>> upstream) {
  if (mels.size() != upstream.size()) {
    throw Error(ErrorCode::kInvalidInput, "one upstream gradient per input is required");
  }
  for (const auto& u : upstream) {
    if (u.size() != weights.config.fingerprint_dim) {
      throw Error(ErrorCode::kInvalidInput, "upstream gradient has wrong dimension");
    }
  }
  EncoderWeights total = zeros_like(weights);
  if (max_threads() <= 1 || mels.size() <= 1) {
    for (std::size_t i = 0; i < mels.size(); ++i) {
      EncoderWeights g = zeros_like(weights);
      run_backward(run_forward(mels[i].values, weights), weights, upstream[i], g);
      add_into(total, g);
    }
    return total;
  }
  std::vector<EncoderWeights> per_item(mels.size());
  parallel_for(mels.size(), [&](std::size_t i) {
    per_item[i] = zeros_like(weights);
    run_backward(run_forward(mels[i].values, weights), weights, upstream[i], per_item[i]);
  });
  for (const auto& g : per_item) add_into(total, g);
  return total;
}

std::size_t frames_for_window(double window_w, const FeatureConfig& features) {
  return num_stft_frames(window_w, features.sample_rate, features.stft_hop);
}

}  // namespace segfp
