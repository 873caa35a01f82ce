#pragma once

#include <vector>

#include "topicdial/corpus.hpp"
#include "topicdial/vocab.hpp"

namespace topicdial {

// One system turn of a dialogue, ready for training.
struct TrainingSample {
  std::vector<int> history_ids;   // serialized context, starts with BOS
  std::vector<int> response_ids;  // gold response tokens, EOS-terminated
  std::vector<int> topic_ids;     // ascending gold topic ids (may be empty)
  int turn_index = 0;             // 1-based utterance index of the system turn

  bool operator==(const TrainingSample&) const = default;
};

struct SampleConfig {
  int max_context = 500;
  int max_decode = 50;
  bool use_roles = true;  // inline speaker tokens in the history
};

// One sample per system turn n >= 2. History layout per prior utterance:
// [speaker] tokens TOPIC_MARK surfaces UTT_SEP, prefixed by BOS and the
// UTT_SEP-joined profile sentences when present. Left-truncation drops whole
// oldest sections first, then trims tokens of the oldest survivor.
std::vector<TrainingSample> build_samples(const Dialogue& d, const Vocab& v,
                                          const SampleConfig& cfg);

// Serialized context of the first n_turns utterances (profile included),
// truncated like build_samples histories.
std::vector<int> serialize_history(const Dialogue& d, std::size_t n_turns, const Vocab& v,
                                   const SampleConfig& cfg);

// Whether the refine input keeps the serialized history prefix or only the
// coarse response and topic span.
enum class RefineContext { kFull, kResponseOnly };

// history ++ CLS ++ r1 ++ TOPIC_MARK ++ surfaces ++ TOPIC_MARK. Exactly two
// TOPIC_MARK tokens follow the CLS; topic surfaces are joined by TOPIC_SEP in
// ascending topic-id order. When the result would exceed max_total the
// history is trimmed from the left, never r1 or the topics.
std::vector<int> build_refine_input(const std::vector<int>& history_ids,
                                    const std::vector<int>& r1_ids,
                                    const std::vector<int>& topic_ids, const Vocab& v,
                                    int max_total,
                                    RefineContext ctx = RefineContext::kFull);

// Multi-class label; the NONE class sits at index n_topics and absorbs empty
// topic sets. Throws ContractError when the sample carries several topics.
int class_label(const TrainingSample& s, int n_topics);

std::vector<double> multi_hot_label(const TrainingSample& s, int n_topics);

}  // namespace topicdial
