#include "topicdial/net.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "topicdial/error.hpp"
#include "topicdial/rng.hpp"

namespace topicdial {

namespace {

constexpr double kLnEps = 1e-12;  // binary64 everywhere, so the usual 1e-5 guard is overkill
constexpr double kInitStd = 0.02;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kInvSqrt2 = 0.70710678118654752440;

std::string layer_name(int i, const char* suffix) {
  return "layer" + std::to_string(i) + "." + suffix;
}

double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// y[o] = W[o x in] x, rows contiguous
void linear(const Tensor& w, const double* x, double* y) {
  for (int o = 0; o < w.rows; ++o) y[o] = dot(w.row(o), x, w.cols);
}

// dW[o][i] += dy[o] x[i];  dx[i] += W[o][i] dy[o]
void linear_backward(const Tensor& w, const double* x, const double* dy, Tensor& dw,
                     double* dx) {
  for (int o = 0; o < w.rows; ++o) {
    const double g = dy[o];
    if (g == 0.0) continue;
    const double* wr = w.row(o);
    double* dwr = dw.row(o);
    for (int i = 0; i < w.cols; ++i) {
      dwr[i] += g * x[i];
      dx[i] += wr[i] * g;
    }
  }
}

// normalized = (x - mean) * rstd; out = normalized * gain + bias
void layer_norm(const double* x, int d, const Tensor& gain, const Tensor& bias, double* normed,
                double* out, double& rstd) {
  double mean = 0.0;
  for (int i = 0; i < d; ++i) mean += x[i];
  mean /= d;
  double var = 0.0;
  for (int i = 0; i < d; ++i) {
    double c = x[i] - mean;
    var += c * c;
  }
  var /= d;
  rstd = 1.0 / std::sqrt(var + kLnEps);
  const double* g = gain.row(0);
  const double* b = bias.row(0);
  for (int i = 0; i < d; ++i) {
    normed[i] = (x[i] - mean) * rstd;
    out[i] = normed[i] * g[i] + b[i];
  }
}

// dx += rstd * (dyhat - mean(dyhat) - normed * mean(dyhat * normed))
void layer_norm_backward(const double* d_out, const double* normed, double rstd, int d,
                         const Tensor& gain, Tensor& d_gain, Tensor& d_bias, double* dx) {
  const double* g = gain.row(0);
  double* dg = d_gain.row(0);
  double* db = d_bias.row(0);
  double mean_dy = 0.0, mean_dyn = 0.0;
  for (int i = 0; i < d; ++i) {
    dg[i] += d_out[i] * normed[i];
    db[i] += d_out[i];
    double dyhat = d_out[i] * g[i];
    mean_dy += dyhat;
    mean_dyn += dyhat * normed[i];
  }
  mean_dy /= d;
  mean_dyn /= d;
  for (int i = 0; i < d; ++i) {
    double dyhat = d_out[i] * g[i];
    dx[i] += rstd * (dyhat - mean_dy - normed[i] * mean_dyn);
  }
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * std::exp(-0.5 * x * x) * kInvSqrt2Pi;
}

Tensor& grad_of(TensorMap& grads, const std::string& name, const Tensor& like) {
  auto it = grads.find(name);
  if (it == grads.end()) it = grads.emplace(name, Tensor(like.rows, like.cols)).first;
  else if (!it->second.same_shape(like))
    throw ContractError("gradient shape mismatch for '" + name + "'");
  return it->second;
}

const Tensor& tensor_at(const Params& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw ConfigError("missing parameter tensor '" + name + "'");
  return it->second;
}

struct AttentionSpan {
  int lo = 0;
  int hi = 0;  // allowed keys in [lo, hi], pad keys skipped
};

}  // namespace

void ModelConfig::validate() const {
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || d_ff <= 0)
    throw ConfigError("model config: dimensions must be positive");
  if (d_model % n_heads != 0)
    throw ConfigError("model config: d_model must be divisible by n_heads");
  if (vocab_size <= 0) throw ConfigError("model config: vocab_size must be positive");
  if (max_positions <= 0) throw ConfigError("model config: max_positions must be positive");
  if (n_topics < 0) throw ConfigError("model config: n_topics must be non-negative");
  if (pad_id < 0 || pad_id >= vocab_size)
    throw ConfigError("model config: pad_id outside the vocabulary");
  if (cls_pool == ClsPool::kFirstToken && attention_mode != AttentionMode::kBidirectional)
    throw ConfigError("model config: first-token pooling requires bidirectional attention");
  if (cls_pool == ClsPool::kLastToken && attention_mode != AttentionMode::kCausal)
    throw ConfigError("model config: last-token pooling requires causal attention");
}

Params init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Params p;
  p.emplace("tok_emb", Tensor(cfg.vocab_size, cfg.d_model));
  p.emplace("pos_emb", Tensor(cfg.max_positions, cfg.d_model));
  for (int i = 0; i < cfg.n_layers; ++i) {
    p.emplace(layer_name(i, "ln1.gain"), Tensor(1, cfg.d_model));
    p.emplace(layer_name(i, "ln1.bias"), Tensor(1, cfg.d_model));
    p.emplace(layer_name(i, "attn.wq"), Tensor(cfg.d_model, cfg.d_model));
    p.emplace(layer_name(i, "attn.wk"), Tensor(cfg.d_model, cfg.d_model));
    p.emplace(layer_name(i, "attn.wv"), Tensor(cfg.d_model, cfg.d_model));
    p.emplace(layer_name(i, "attn.wo"), Tensor(cfg.d_model, cfg.d_model));
    p.emplace(layer_name(i, "ln2.gain"), Tensor(1, cfg.d_model));
    p.emplace(layer_name(i, "ln2.bias"), Tensor(1, cfg.d_model));
    p.emplace(layer_name(i, "mlp.w1"), Tensor(cfg.d_ff, cfg.d_model));
    p.emplace(layer_name(i, "mlp.b1"), Tensor(1, cfg.d_ff));
    p.emplace(layer_name(i, "mlp.w2"), Tensor(cfg.d_model, cfg.d_ff));
    p.emplace(layer_name(i, "mlp.b2"), Tensor(1, cfg.d_model));
  }
  p.emplace("lnf.gain", Tensor(1, cfg.d_model));
  p.emplace("lnf.bias", Tensor(1, cfg.d_model));
  if (!cfg.tie_lm_head) p.emplace("lm_head.w", Tensor(cfg.vocab_size, cfg.d_model));
  if (cfg.n_topics > 0) {
    p.emplace("cls_head.w", Tensor(cfg.n_topics, cfg.d_model));
    p.emplace("cls_head.b", Tensor(1, cfg.n_topics));
  }

  Rng rng(mix_seed(seed, 0x7e7));
  for (auto& [name, t] : p) {
    if (name.ends_with(".gain")) {
      std::fill(t.data.begin(), t.data.end(), 1.0);
    } else if (name.ends_with(".bias") || name.ends_with(".b1") || name.ends_with(".b2") ||
               name == "cls_head.b") {
      t.zero();
    } else {
      for (double& x : t.data) x = rng.normal() * kInitStd;
    }
  }
  return p;
}

std::size_t param_count(const Params& p) {
  std::size_t n = 0;
  for (const auto& [name, t] : p) n += t.size();
  return n;
}

bool is_decay_exempt(const std::string& name) {
  return name.ends_with(".gain") || name.ends_with(".bias") || name.ends_with(".b1") ||
         name.ends_with(".b2") || name == "cls_head.b";
}

void validate_params(const Params& p, const ModelConfig& cfg) {
  Params expected = init_params(cfg, 0);
  if (p.size() != expected.size())
    throw ConfigError("parameter collection does not match the model config");
  for (const auto& [name, t] : expected) {
    auto it = p.find(name);
    if (it == p.end() || !it->second.same_shape(t))
      throw ConfigError("parameter tensor '" + name + "' missing or mis-shaped");
  }
}

namespace {

// Shared backbone forward; fills the trace and returns nothing (H lives in
// trace.hidden).
void run_backbone(const Params& p, const ModelConfig& cfg, const std::vector<int>& ids,
                  ForwardTrace& tr) {
  const int T = static_cast<int>(ids.size());
  const int d = cfg.d_model;
  if (T < 1) throw ContractError("forward: empty input");
  if (T > cfg.max_positions)
    throw std::out_of_range("forward: sequence of length " + std::to_string(T) +
                            " exceeds max_positions " + std::to_string(cfg.max_positions));
  for (int id : ids) {
    if (id < 0 || id >= cfg.vocab_size)
      throw std::out_of_range("forward: token id " + std::to_string(id) +
                              " outside the vocabulary");
  }

  tr.ids = ids;
  tr.is_pad.assign(T, 0);
  tr.positions.assign(T, 0);
  int pos = 0;
  for (int t = 0; t < T; ++t) {
    tr.is_pad[t] = (ids[t] == cfg.pad_id) ? 1 : 0;
    tr.positions[t] = pos;
    if (!tr.is_pad[t]) ++pos;
  }

  const Tensor& tok_emb = tensor_at(p, "tok_emb");
  const Tensor& pos_emb = tensor_at(p, "pos_emb");

  Tensor x(T, d);
  for (int t = 0; t < T; ++t) {
    const double* e = tok_emb.row(ids[t]);
    const double* pe = pos_emb.row(tr.positions[t]);
    double* xr = x.row(t);
    for (int i = 0; i < d; ++i) xr[i] = e[i] + pe[i];
  }

  const int hd = d / cfg.n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  tr.layers.assign(cfg.n_layers, LayerTrace{});

  std::vector<double> buf(d);
  for (int li = 0; li < cfg.n_layers; ++li) {
    LayerTrace& L = tr.layers[li];
    const Tensor& ln1g = tensor_at(p, layer_name(li, "ln1.gain"));
    const Tensor& ln1b = tensor_at(p, layer_name(li, "ln1.bias"));
    const Tensor& wq = tensor_at(p, layer_name(li, "attn.wq"));
    const Tensor& wk = tensor_at(p, layer_name(li, "attn.wk"));
    const Tensor& wv = tensor_at(p, layer_name(li, "attn.wv"));
    const Tensor& wo = tensor_at(p, layer_name(li, "attn.wo"));
    const Tensor& ln2g = tensor_at(p, layer_name(li, "ln2.gain"));
    const Tensor& ln2b = tensor_at(p, layer_name(li, "ln2.bias"));
    const Tensor& w1 = tensor_at(p, layer_name(li, "mlp.w1"));
    const Tensor& b1 = tensor_at(p, layer_name(li, "mlp.b1"));
    const Tensor& w2 = tensor_at(p, layer_name(li, "mlp.w2"));
    const Tensor& b2 = tensor_at(p, layer_name(li, "mlp.b2"));

    L.ln1_norm = Tensor(T, d);
    L.ln1_rstd.assign(T, 0.0);
    L.q = Tensor(T, d);
    L.k = Tensor(T, d);
    L.v = Tensor(T, d);
    for (int t = 0; t < T; ++t) {
      layer_norm(x.row(t), d, ln1g, ln1b, L.ln1_norm.row(t), buf.data(), L.ln1_rstd[t]);
      linear(wq, buf.data(), L.q.row(t));
      linear(wk, buf.data(), L.k.row(t));
      linear(wv, buf.data(), L.v.row(t));
    }

    L.att = Tensor(cfg.n_heads * T, T);
    L.att_out = Tensor(T, d);
    for (int h = 0; h < cfg.n_heads; ++h) {
      const int off = h * hd;
      for (int t = 0; t < T; ++t) {
        double* w = L.att.row(h * T + t);
        const int hi = cfg.attention_mode == AttentionMode::kCausal ? t : T - 1;
        double maxs = -1e300;
        int allowed = 0;
        for (int s = 0; s <= hi; ++s) {
          if (tr.is_pad[s]) continue;
          double sc = dot(L.q.row(t) + off, L.k.row(s) + off, hd) * scale;
          w[s] = sc;
          maxs = std::max(maxs, sc);
          ++allowed;
        }
        if (allowed == 0) {
          // every candidate key is PAD: fall back to the position itself
          w[t] = 1.0;
        } else {
          double sum = 0.0;
          for (int s = 0; s <= hi; ++s) {
            if (tr.is_pad[s]) continue;
            w[s] = std::exp(w[s] - maxs);
            sum += w[s];
          }
          const double inv = 1.0 / sum;
          for (int s = 0; s <= hi; ++s) {
            if (tr.is_pad[s]) continue;
            w[s] *= inv;
          }
        }
        double* out = L.att_out.row(t) + off;
        for (int j = 0; j < hd; ++j) {
          double acc = 0.0;
          if (allowed == 0) {
            acc = L.v.at(t, off + j);
          } else {
            for (int s = 0; s <= hi; ++s) {
              if (tr.is_pad[s]) continue;
              acc += w[s] * L.v.at(s, off + j);
            }
          }
          out[j] = acc;
        }
      }
    }

    // attention residual, then the MLP block
    L.ln2_norm = Tensor(T, d);
    L.ln2_rstd.assign(T, 0.0);
    L.ff_pre = Tensor(T, cfg.d_ff);
    L.ff_act = Tensor(T, cfg.d_ff);
    std::vector<double> ff_out(d);
    for (int t = 0; t < T; ++t) {
      linear(wo, L.att_out.row(t), buf.data());
      double* xr = x.row(t);
      for (int i = 0; i < d; ++i) xr[i] += buf[i];

      layer_norm(xr, d, ln2g, ln2b, L.ln2_norm.row(t), buf.data(), L.ln2_rstd[t]);
      linear(w1, buf.data(), L.ff_pre.row(t));
      const double* bb1 = b1.row(0);
      for (int j = 0; j < cfg.d_ff; ++j) {
        L.ff_pre.at(t, j) += bb1[j];
        L.ff_act.at(t, j) = gelu(L.ff_pre.at(t, j));
      }
      linear(w2, L.ff_act.row(t), ff_out.data());
      const double* bb2 = b2.row(0);
      for (int i = 0; i < d; ++i) xr[i] += ff_out[i] + bb2[i];
    }
  }

  const Tensor& lnfg = tensor_at(p, "lnf.gain");
  const Tensor& lnfb = tensor_at(p, "lnf.bias");
  tr.lnf_norm = Tensor(T, d);
  tr.lnf_rstd.assign(T, 0.0);
  tr.hidden = Tensor(T, d);
  for (int t = 0; t < T; ++t)
    layer_norm(x.row(t), d, lnfg, lnfb, tr.lnf_norm.row(t), tr.hidden.row(t), tr.lnf_rstd[t]);
}

const Tensor& lm_weight(const Params& p, const ModelConfig& cfg) {
  return cfg.tie_lm_head ? tensor_at(p, "tok_emb") : tensor_at(p, "lm_head.w");
}

}  // namespace

Tensor forward_lm(const Params& p, const ModelConfig& cfg, const std::vector<int>& ids,
                  ForwardTrace* trace) {
  if (cfg.attention_mode != AttentionMode::kCausal)
    throw ConfigError("forward_lm requires causal attention");
  ForwardTrace local;
  ForwardTrace& tr = trace ? *trace : local;
  run_backbone(p, cfg, ids, tr);

  const Tensor& w = lm_weight(p, cfg);
  const int T = static_cast<int>(ids.size());
  Tensor logits(T, cfg.vocab_size);
  for (int t = 0; t < T; ++t) linear(w, tr.hidden.row(t), logits.row(t));
  return logits;
}

std::vector<double> forward_cls(const Params& p, const ModelConfig& cfg,
                                const std::vector<int>& ids, ForwardTrace* trace) {
  if (cfg.n_topics <= 0) throw ConfigError("forward_cls: model has no classification head");
  ForwardTrace local;
  ForwardTrace& tr = trace ? *trace : local;
  run_backbone(p, cfg, ids, tr);

  int pool = -1;
  if (cfg.cls_pool == ClsPool::kFirstToken) {
    pool = 0;
  } else {
    for (int t = static_cast<int>(ids.size()) - 1; t >= 0; --t) {
      if (!tr.is_pad[t]) {
        pool = t;
        break;
      }
    }
    if (pool < 0) pool = static_cast<int>(ids.size()) - 1;
  }
  tr.pool_pos = pool;

  const Tensor& wc = tensor_at(p, "cls_head.w");
  const Tensor& bc = tensor_at(p, "cls_head.b");
  std::vector<double> logits(cfg.n_topics);
  linear(wc, tr.hidden.row(pool), logits.data());
  for (int k = 0; k < cfg.n_topics; ++k) logits[k] += bc.at(0, k);
  return logits;
}

void backward(const Params& p, const ModelConfig& cfg, const ForwardTrace& trace,
              const Tensor* d_logits_lm, const std::vector<double>* d_logits_cls,
              TensorMap& grads) {
  const int T = static_cast<int>(trace.ids.size());
  const int d = cfg.d_model;
  if (T == 0 || trace.hidden.rows != T)
    throw ContractError("backward: trace does not match a forward pass");
  if (d_logits_lm &&
      (d_logits_lm->rows != T || d_logits_lm->cols != cfg.vocab_size))
    throw ContractError("backward: LM logit gradient shape mismatch");
  if (d_logits_cls && static_cast<int>(d_logits_cls->size()) != cfg.n_topics)
    throw ContractError("backward: cls logit gradient shape mismatch");
  if (d_logits_cls && trace.pool_pos < 0)
    throw ContractError("backward: cls gradients supplied for a trace without pooling");

  Tensor d_hidden(T, d);

  if (d_logits_lm) {
    const Tensor& w = lm_weight(p, cfg);
    Tensor& dw = grad_of(grads, cfg.tie_lm_head ? "tok_emb" : "lm_head.w", w);
    for (int t = 0; t < T; ++t) {
      const double* dl = d_logits_lm->row(t);
      bool any = false;
      for (int vtok = 0; vtok < cfg.vocab_size; ++vtok) {
        if (dl[vtok] != 0.0) {
          any = true;
          break;
        }
      }
      if (!any) continue;
      linear_backward(w, trace.hidden.row(t), dl, dw, d_hidden.row(t));
    }
  }

  if (d_logits_cls) {
    const Tensor& wc = tensor_at(p, "cls_head.w");
    Tensor& dwc = grad_of(grads, "cls_head.w", wc);
    Tensor& dbc = grad_of(grads, "cls_head.b", tensor_at(p, "cls_head.b"));
    linear_backward(wc, trace.hidden.row(trace.pool_pos), d_logits_cls->data(), dwc,
                    d_hidden.row(trace.pool_pos));
    for (int k = 0; k < cfg.n_topics; ++k) dbc.at(0, k) += (*d_logits_cls)[k];
  }

  // final layer norm
  const Tensor& lnfg = tensor_at(p, "lnf.gain");
  Tensor& d_lnfg = grad_of(grads, "lnf.gain", lnfg);
  Tensor& d_lnfb = grad_of(grads, "lnf.bias", tensor_at(p, "lnf.bias"));
  Tensor dx(T, d);
  for (int t = 0; t < T; ++t)
    layer_norm_backward(d_hidden.row(t), trace.lnf_norm.row(t), trace.lnf_rstd[t], d, lnfg,
                        d_lnfg, d_lnfb, dx.row(t));

  const int hd = d / cfg.n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  std::vector<double> buf(std::max(d, cfg.d_ff));

  for (int li = cfg.n_layers - 1; li >= 0; --li) {
    const LayerTrace& L = trace.layers[li];
    const Tensor& ln1g = tensor_at(p, layer_name(li, "ln1.gain"));
    const Tensor& ln1b = tensor_at(p, layer_name(li, "ln1.bias"));
    const Tensor& wq = tensor_at(p, layer_name(li, "attn.wq"));
    const Tensor& wk = tensor_at(p, layer_name(li, "attn.wk"));
    const Tensor& wv = tensor_at(p, layer_name(li, "attn.wv"));
    const Tensor& wo = tensor_at(p, layer_name(li, "attn.wo"));
    const Tensor& ln2g = tensor_at(p, layer_name(li, "ln2.gain"));
    const Tensor& ln2b = tensor_at(p, layer_name(li, "ln2.bias"));
    const Tensor& w1 = tensor_at(p, layer_name(li, "mlp.w1"));
    const Tensor& b1 = tensor_at(p, layer_name(li, "mlp.b1"));
    const Tensor& w2 = tensor_at(p, layer_name(li, "mlp.w2"));

    Tensor& d_ln1g = grad_of(grads, layer_name(li, "ln1.gain"), ln1g);
    Tensor& d_ln1b = grad_of(grads, layer_name(li, "ln1.bias"), ln1b);
    Tensor& d_wq = grad_of(grads, layer_name(li, "attn.wq"), wq);
    Tensor& d_wk = grad_of(grads, layer_name(li, "attn.wk"), wk);
    Tensor& d_wv = grad_of(grads, layer_name(li, "attn.wv"), wv);
    Tensor& d_wo = grad_of(grads, layer_name(li, "attn.wo"), wo);
    Tensor& d_ln2g = grad_of(grads, layer_name(li, "ln2.gain"), ln2g);
    Tensor& d_ln2b = grad_of(grads, layer_name(li, "ln2.bias"), ln2b);
    Tensor& d_w1 = grad_of(grads, layer_name(li, "mlp.w1"), w1);
    Tensor& d_b1 = grad_of(grads, layer_name(li, "mlp.b1"), b1);
    Tensor& d_w2 = grad_of(grads, layer_name(li, "mlp.w2"), w2);
    Tensor& d_b2 = grad_of(grads, layer_name(li, "mlp.b2"),
                           tensor_at(p, layer_name(li, "mlp.b2")));

    // MLP block: x_out = x_mid + W2 gelu(W1 ln2(x_mid) + b1) + b2
    Tensor d_xmid = dx;  // residual branch
    for (int t = 0; t < T; ++t) {
      const double* dy = dx.row(t);
      for (int i = 0; i < d; ++i) d_b2.at(0, i) += dy[i];

      // through W2 into the activation
      std::vector<double> d_act(cfg.d_ff, 0.0);
      linear_backward(w2, L.ff_act.row(t), dy, d_w2, d_act.data());
      for (int j = 0; j < cfg.d_ff; ++j) {
        d_act[j] *= gelu_grad(L.ff_pre.at(t, j));
        d_b1.at(0, j) += d_act[j];
      }

      // recompute the post-gain ln2 output for the W1 weight gradient
      for (int i = 0; i < d; ++i)
        buf[i] = L.ln2_norm.at(t, i) * ln2g.at(0, i) + ln2b.at(0, i);
      std::vector<double> d_ln2out(d, 0.0);
      linear_backward(w1, buf.data(), d_act.data(), d_w1, d_ln2out.data());

      layer_norm_backward(d_ln2out.data(), L.ln2_norm.row(t), L.ln2_rstd[t], d, ln2g, d_ln2g,
                          d_ln2b, d_xmid.row(t));
    }

    // attention block: x_mid = x_in + Wo att_out
    Tensor d_att_out(T, d);
    for (int t = 0; t < T; ++t)
      linear_backward(wo, L.att_out.row(t), d_xmid.row(t), d_wo, d_att_out.row(t));

    Tensor d_q(T, d), d_k(T, d), d_v(T, d);
    std::vector<double> d_score(T);
    for (int h = 0; h < cfg.n_heads; ++h) {
      const int off = h * hd;
      for (int t = 0; t < T; ++t) {
        const double* w = L.att.row(h * T + t);
        const double* d_head = d_att_out.row(t) + off;
        const int hi = cfg.attention_mode == AttentionMode::kCausal ? t : T - 1;
        bool fallback = true;
        for (int s = 0; s <= hi; ++s) {
          if (!trace.is_pad[s]) {
            fallback = false;
            break;
          }
        }
        if (fallback) {
          double* dvr = d_v.row(t) + off;
          for (int j = 0; j < hd; ++j) dvr[j] += d_head[j];
          continue;  // the self-weight is a constant 1, no score gradient
        }
        double sum_dw_w = 0.0;
        for (int s = 0; s <= hi; ++s) {
          if (trace.is_pad[s]) continue;
          double ds = dot(d_head, L.v.row(s) + off, hd);
          d_score[s] = ds;
          sum_dw_w += ds * w[s];
          double* dvr = d_v.row(s) + off;
          for (int j = 0; j < hd; ++j) dvr[j] += w[s] * d_head[j];
        }
        const double* q_t = L.q.row(t) + off;
        double* dq_t = d_q.row(t) + off;
        for (int s = 0; s <= hi; ++s) {
          if (trace.is_pad[s]) continue;
          double dsc = w[s] * (d_score[s] - sum_dw_w) * scale;
          if (dsc == 0.0) continue;
          const double* k_s = L.k.row(s) + off;
          double* dk_s = d_k.row(s) + off;
          for (int j = 0; j < hd; ++j) {
            dq_t[j] += dsc * k_s[j];
            dk_s[j] += dsc * q_t[j];
          }
        }
      }
    }

    // back through the QKV projections and ln1 into the residual stream
    for (int t = 0; t < T; ++t) {
      for (int i = 0; i < d; ++i)
        buf[i] = L.ln1_norm.at(t, i) * ln1g.at(0, i) + ln1b.at(0, i);
      std::vector<double> d_ln1out(d, 0.0);
      linear_backward(wq, buf.data(), d_q.row(t), d_wq, d_ln1out.data());
      linear_backward(wk, buf.data(), d_k.row(t), d_wk, d_ln1out.data());
      linear_backward(wv, buf.data(), d_v.row(t), d_wv, d_ln1out.data());
      layer_norm_backward(d_ln1out.data(), L.ln1_norm.row(t), L.ln1_rstd[t], d, ln1g, d_ln1g,
                          d_ln1b, d_xmid.row(t));
    }
    dx = std::move(d_xmid);
  }

  Tensor& d_tok = grad_of(grads, "tok_emb", tensor_at(p, "tok_emb"));
  Tensor& d_pos = grad_of(grads, "pos_emb", tensor_at(p, "pos_emb"));
  for (int t = 0; t < T; ++t) {
    const double* dxr = dx.row(t);
    double* de = d_tok.row(trace.ids[t]);
    double* dp = d_pos.row(trace.positions[t]);
    for (int i = 0; i < d; ++i) {
      de[i] += dxr[i];
      dp[i] += dxr[i];
    }
  }
}

TensorMap zero_grads_like(const Params& p) {
  TensorMap grads;
  for (const auto& [name, t] : p) grads.emplace(name, Tensor(t.rows, t.cols));
  return grads;
}

}  // namespace topicdial
