#pragma once

#include <cstdint>
#include <vector>

#include "topicdial/tensor.hpp"

namespace topicdial {

enum class AttentionMode { kCausal, kBidirectional };
enum class ClsPool { kFirstToken, kLastToken };

struct ModelConfig {
  int d_model = 64;
  int n_layers = 4;
  int n_heads = 4;
  int d_ff = 256;
  int vocab_size = 0;
  int n_topics = 0;  // classification head width (0 = no topic head)
  int max_positions = 0;
  AttentionMode attention_mode = AttentionMode::kCausal;
  ClsPool cls_pool = ClsPool::kLastToken;
  bool tie_lm_head = true;
  int pad_id = 0;

  // ConfigError on bad shapes or a pooling/attention mismatch (first-token
  // pooling needs bidirectional attention, last-token pooling causal).
  void validate() const;
};

using Params = TensorMap;

// Scaled-normal weights (std 0.02), unit layer-norm gains, zero biases.
// Bit-identical for a fixed seed.
Params init_params(const ModelConfig& cfg, std::uint64_t seed);

std::size_t param_count(const Params& p);
bool is_decay_exempt(const std::string& name);

// Checks that p holds exactly the tensors init_params(cfg, .) would create,
// with matching shapes. Throws ConfigError otherwise.
void validate_params(const Params& p, const ModelConfig& cfg);

struct LayerTrace {
  Tensor ln1_norm;  // T x d, normalized pre-gain input of the attention block
  std::vector<double> ln1_rstd;
  Tensor q, k, v;   // T x d, heads concatenated
  Tensor att;       // (n_heads*T) x T attention weights, row = h*T + t
  Tensor att_out;   // T x d
  Tensor ln2_norm;  // T x d
  std::vector<double> ln2_rstd;
  Tensor ff_pre;    // T x d_ff
  Tensor ff_act;    // T x d_ff
};

// Cached activations sufficient for one exact backward pass.
struct ForwardTrace {
  std::vector<int> ids;
  std::vector<int> positions;    // PAD positions do not advance the index
  std::vector<std::uint8_t> is_pad;
  std::vector<LayerTrace> layers;
  Tensor lnf_norm;
  std::vector<double> lnf_rstd;
  Tensor hidden;                 // final hidden states H, T x d
  int pool_pos = -1;             // set by forward_cls
};

// Next-token logits for every position, T x V. logits[t] depends only on
// ids[0..t] in causal mode. Fills *trace when given.
Tensor forward_lm(const Params& p, const ModelConfig& cfg, const std::vector<int>& ids,
                  ForwardTrace* trace = nullptr);

// Raw topic logits (width n_topics) off the pooled hidden state: the first
// token in bidirectional mode, the last non-PAD token in causal mode.
std::vector<double> forward_cls(const Params& p, const ModelConfig& cfg,
                                const std::vector<int>& ids, ForwardTrace* trace = nullptr);

// Exact gradients of the scalar whose logit gradients are supplied; either
// upstream may be null. Accumulates into grads; with tied lm_head the
// unembedding contribution lands in tok_emb.
void backward(const Params& p, const ModelConfig& cfg, const ForwardTrace& trace,
              const Tensor* d_logits_lm, const std::vector<double>* d_logits_cls,
              TensorMap& grads);

TensorMap zero_grads_like(const Params& p);

// Which transformer answers topic prediction: the shared causal double-heads
// model, or a separately parameterized bidirectional encoder.
enum class ClassifierKind { kSharedGpt, kSeparateBert };

struct JointModel {
  ModelConfig lm_cfg;
  Params lm;
  ModelConfig cls_cfg;  // used only with kSeparateBert
  Params cls;
  ClassifierKind classifier = ClassifierKind::kSharedGpt;

  bool has_separate_cls() const { return classifier == ClassifierKind::kSeparateBert; }
};

}  // namespace topicdial
