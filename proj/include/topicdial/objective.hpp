#pragma once

#include <cstdint>
#include <vector>

#include "topicdial/net.hpp"
#include "topicdial/samples.hpp"

namespace topicdial {

struct LossBreakdown {
  double l_one = 0.0;
  double l_topic = 0.0;
  double l_refine = 0.0;
  double l_total = 0.0;  // always l_one + l_topic + l_refine, same accumulation order
};

struct OptConfig {
  double lr = 1.5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  int warmup_steps = 2000;
};

struct OptState {
  OptConfig hp;
  TensorMap m;  // first moments, same key set and shapes as the params
  TensorMap v;  // second moments
  long step = 0;
};

OptState make_opt_state(const Params& p, const OptConfig& hp);

// linear warmup to hp.lr, constant afterwards; step is 1-based
double lr_at_step(const OptConfig& hp, long step);

// Decoupled weight decay, bias-corrected moments; layer-norm and bias
// tensors are exempt from decay.
void adamw_step(Params& p, const TensorMap& grads, OptState& opt);

struct LmLoss {
  double value = 0.0;
  Tensor d_logits;     // exact gradient of value w.r.t. the logits
  int n_positions = 0;
};

// Mean negative log-likelihood over the masked positions. mask[t] selects
// rows whose next-token target is part of the gold response; history and
// topic-injection rows never contribute. ContractError on an empty mask.
LmLoss loss_lm(const Tensor& logits, const std::vector<int>& targets,
               const std::vector<std::uint8_t>& mask);

struct ClsLoss {
  double value = 0.0;
  std::vector<double> d_logits;
};

// -log softmax(logits)[label]; gradient softmax - onehot.
ClsLoss loss_topic_multiclass(const std::vector<double>& logits, int label);

// Mean over classes of the stable binary cross entropy with logits.
// Labels must be exactly 0 or 1.
ClsLoss loss_topic_multilabel(const std::vector<double>& logits,
                              const std::vector<double>& labels);

enum class Ablation { kFull, kGpt2dh, kStageOneOnly };
enum class RefineR1Source { kArgmaxTeacherForced, kGold };

struct TrainConfig {
  Ablation ablation = Ablation::kFull;
  RefineR1Source refine_r1 = RefineR1Source::kArgmaxTeacherForced;
  RefineContext refine_context = RefineContext::kFull;
  Mode mode = Mode::kMultiLabel;
  int n_topics = 0;        // lexicon size K (head width is K, or K+1 in multi-class)
  int max_refine_len = 0;  // refine-input budget, max_context + max_decode
};

// Classification head width for a corpus mode: multi-class adds a NONE class.
int cls_head_width(Mode mode, int n_topics);

// LM input for the generation passes: history ++ BOS ++ response.
std::vector<int> lm_training_sequence(const std::vector<int>& prefix_ids,
                                      const std::vector<int>& response_ids, const Vocab& v);

// Per-row next-token targets and the response mask for a training sequence
// whose response starts at index response_start.
void lm_targets(const std::vector<int>& seq, int response_start,
                std::vector<int>& targets, std::vector<std::uint8_t>& mask);

// Greedy per-position argmax over the masked rows: the coarse tokens the
// model would emit under teacher forcing. Ties break toward the lower id.
std::vector<int> teacher_forced_argmax(const Tensor& logits,
                                       const std::vector<std::uint8_t>& mask);

// Classifier input for a history: the raw history for the shared causal
// model (pool last token), CLS-prefixed for the bidirectional encoder.
std::vector<int> classifier_input(const std::vector<int>& history_ids, const Vocab& v,
                                  ClassifierKind kind);

// Joint teacher-forced training step: generation pass on the gold response,
// classification pass on the history alone, refine pass on the topic-annotated
// input; summed gradients, one AdamW update per parameter collection.
class Trainer {
 public:
  Trainer(JointModel* model, const Vocab* vocab, const TrainConfig& cfg, const OptConfig& opt);

  LossBreakdown train_step(const std::vector<TrainingSample>& batch);

  OptState& opt_lm() { return opt_lm_; }
  OptState& opt_cls() { return opt_cls_; }
  const TrainConfig& cfg() const { return cfg_; }

 private:
  JointModel* model_;
  const Vocab* vocab_;
  TrainConfig cfg_;
  OptState opt_lm_;
  OptState opt_cls_;
};

}  // namespace topicdial
