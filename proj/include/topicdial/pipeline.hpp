#pragma once

#include <vector>

#include "topicdial/net.hpp"
#include "topicdial/objective.hpp"

namespace topicdial {

struct DecodeConfig {
  int max_decode = 50;
  double threshold = 0.5;  // multi-label decision threshold on sigma(score)

  void validate() const;
};

struct TopicPrediction {
  std::vector<double> scores;  // raw head logits (multi-class width includes NONE)
  std::vector<int> topics;     // ascending predicted topic ids; empty is legal
  int predicted_class = -1;    // multi-class argmax, possibly the NONE class
};

// Eval-time output of the three passes: coarse response, topic prediction,
// refined response.
struct ThreePassOutput {
  std::vector<int> coarse_ids;   // EOS-terminated or budget-truncated
  TopicPrediction topic;
  std::vector<int> refined_ids;
};

enum class Variant { kStageOne, kStageTwoGpt, kStageTwoBert };

// Appends the argmax of the final-position logits until EOS or max_decode
// tokens; the prefix is recomputed every step. Ties break toward the lower
// token id. Returns only the generated ids (EOS included when reached).
std::vector<int> greedy_decode(const Params& p, const ModelConfig& cfg,
                               const std::vector<int>& prefix_ids, int max_decode, int eos_id);

// Decision rules on raw scores.
int decide_multiclass(const std::vector<double>& scores);
std::vector<int> decide_multilabel(const std::vector<double>& scores, double threshold);

// Topic scores and decision for a prepared classifier input. The input is a
// pure function of the history; the coarse response never feeds it.
TopicPrediction predict_topics(const Params& p, const ModelConfig& cfg,
                               const std::vector<int>& cls_input_ids, Mode mode, int n_topics,
                               const DecodeConfig& dcfg);

struct PipelineConfig {
  DecodeConfig decode;
  Mode mode = Mode::kMultiLabel;
  int n_topics = 0;
  RefineContext refine_context = RefineContext::kFull;
  int max_refine_len = 0;
};

// coarse decode -> topic prediction -> refined decode. kStageOne stops after
// the first pass; kStageTwoBert routes pass 2 to the separate bidirectional
// classifier and everything else to the shared causal model.
ThreePassOutput three_pass(const JointModel& model, const std::vector<int>& history_ids,
                           const Vocab& v, const PipelineConfig& pcfg, Variant variant);

}  // namespace topicdial
