#include "topicdial/pipeline.hpp"

#include <cmath>

#include "topicdial/error.hpp"

namespace topicdial {

void DecodeConfig::validate() const {
  if (max_decode < 1) throw ConfigError("decode config: max_decode must be >= 1");
  if (threshold <= 0.0 || threshold >= 1.0)
    throw ConfigError("decode config: threshold must lie in (0, 1)");
}

std::vector<int> greedy_decode(const Params& p, const ModelConfig& cfg,
                               const std::vector<int>& prefix_ids, int max_decode, int eos_id) {
  if (static_cast<int>(prefix_ids.size()) + max_decode > cfg.max_positions)
    throw ConfigError("greedy_decode: prefix does not leave room for max_decode tokens");
  std::vector<int> seq = prefix_ids;
  std::vector<int> generated;
  for (int i = 0; i < max_decode; ++i) {
    Tensor logits = forward_lm(p, cfg, seq);
    const double* row = logits.row(logits.rows - 1);
    int best = 0;
    for (int v = 1; v < logits.cols; ++v) {
      if (row[v] > row[best]) best = v;  // ties keep the lower token id
    }
    seq.push_back(best);
    generated.push_back(best);
    if (best == eos_id) break;
  }
  return generated;
}

int decide_multiclass(const std::vector<double>& scores) {
  int best = 0;
  for (int c = 1; c < static_cast<int>(scores.size()); ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return best;
}

std::vector<int> decide_multilabel(const std::vector<double>& scores, double threshold) {
  std::vector<int> out;
  for (int c = 0; c < static_cast<int>(scores.size()); ++c) {
    double sigma = scores[c] >= 0.0 ? 1.0 / (1.0 + std::exp(-scores[c]))
                                    : std::exp(scores[c]) / (1.0 + std::exp(scores[c]));
    if (sigma > threshold) out.push_back(c);
  }
  return out;
}

TopicPrediction predict_topics(const Params& p, const ModelConfig& cfg,
                               const std::vector<int>& cls_input_ids, Mode mode, int n_topics,
                               const DecodeConfig& dcfg) {
  TopicPrediction pred;
  pred.scores = forward_cls(p, cfg, cls_input_ids);
  if (mode == Mode::kMultiClass) {
    pred.predicted_class = decide_multiclass(pred.scores);
    if (pred.predicted_class < n_topics) pred.topics = {pred.predicted_class};
  } else {
    pred.topics = decide_multilabel(pred.scores, dcfg.threshold);
  }
  return pred;
}

ThreePassOutput three_pass(const JointModel& model, const std::vector<int>& history_ids,
                           const Vocab& v, const PipelineConfig& pcfg, Variant variant) {
  pcfg.decode.validate();
  if (variant == Variant::kStageTwoBert && !model.has_separate_cls())
    throw ConfigError("three_pass: stage-two-bert needs a separately trained classifier");

  ThreePassOutput out;
  std::vector<int> prefix = history_ids;
  prefix.push_back(v.specials().bos);
  out.coarse_ids =
      greedy_decode(model.lm, model.lm_cfg, prefix, pcfg.decode.max_decode, v.specials().eos);
  if (variant == Variant::kStageOne) return out;

  const bool use_bert = variant == Variant::kStageTwoBert;
  const Params& cp = use_bert ? model.cls : model.lm;
  const ModelConfig& cc = use_bert ? model.cls_cfg : model.lm_cfg;
  std::vector<int> cls_in = classifier_input(
      history_ids, v, use_bert ? ClassifierKind::kSeparateBert : ClassifierKind::kSharedGpt);
  out.topic = predict_topics(cp, cc, cls_in, pcfg.mode, pcfg.n_topics, pcfg.decode);

  std::vector<int> refine_in = build_refine_input(history_ids, out.coarse_ids, out.topic.topics,
                                                  v, pcfg.max_refine_len, pcfg.refine_context);
  refine_in.push_back(v.specials().bos);
  out.refined_ids =
      greedy_decode(model.lm, model.lm_cfg, refine_in, pcfg.decode.max_decode, v.specials().eos);
  return out;
}

}  // namespace topicdial
